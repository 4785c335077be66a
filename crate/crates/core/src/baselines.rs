//! Single-domain baselines: user-based collaborative filtering with
//! Pearson-correlated neighborhoods, and the degenerate trainer
//! configuration that reduces the joint model to plain regularized matrix
//! factorization.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Hyperparams, LinkFunction};
use crate::tensor::SparseMatrix;
use crate::trainer::TrainConfig;

/// Neighborhood predictor over a raw-scale user x item rating matrix.
/// Similarities are Pearson correlations over co-rated items, computed
/// lazily per query user and cached.
pub struct NeighborhoodModel {
    ratings: SparseMatrix,
    /// item -> (user, rating) raters list.
    raters: Vec<Vec<(usize, f64)>>,
    user_means: Vec<f64>,
    global_mean: f64,
    min_rating: f64,
    max_rating: f64,
    pub neighborhood_size: usize,
    similarity_cache: HashMap<usize, Vec<f64>>,
}

/// Minimum number of co-rated items for a defined correlation.
const MIN_OVERLAP: usize = 2;

impl NeighborhoodModel {
    pub fn new(ratings: SparseMatrix, neighborhood_size: usize) -> Result<Self> {
        if ratings.is_empty() {
            return Err(Error::EmptyEvalSet);
        }
        let mut raters = vec![Vec::new(); ratings.n_cols()];
        let mut sum = 0.0;
        for e in ratings.iter() {
            raters[e.col].push((e.row, e.value));
            sum += e.value;
        }
        let global_mean = sum / ratings.nnz() as f64;
        let user_means = (0..ratings.n_rows())
            .map(|u| {
                let row = ratings.row(u);
                if row.is_empty() {
                    global_mean
                } else {
                    row.iter().map(|e| e.value).sum::<f64>() / row.len() as f64
                }
            })
            .collect();
        let min_rating = ratings.iter().map(|e| e.value).fold(f64::MAX, f64::min);
        let max_rating = ratings.iter().map(|e| e.value).fold(f64::MIN, f64::max);
        Ok(Self {
            ratings,
            raters,
            user_means,
            global_mean,
            min_rating,
            max_rating,
            neighborhood_size,
            similarity_cache: HashMap::new(),
        })
    }

    /// Pearson correlation over the co-rated items of two users; 0 when
    /// fewer than two items overlap or a variance vanishes.
    fn pearson(&self, a: usize, b: usize) -> f64 {
        let ra = self.ratings.row(a);
        let rb = self.ratings.row(b);
        let mut pairs = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < ra.len() && j < rb.len() {
            match ra[i].col.cmp(&rb[j].col) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    pairs.push((ra[i].value, rb[j].value));
                    i += 1;
                    j += 1;
                }
            }
        }
        if pairs.len() < MIN_OVERLAP {
            return 0.0;
        }
        let n = pairs.len() as f64;
        let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut var_a = 0.0;
        let mut var_b = 0.0;
        for (x, y) in pairs {
            cov += (x - mean_a) * (y - mean_b);
            var_a += (x - mean_a).powi(2);
            var_b += (y - mean_b).powi(2);
        }
        if var_a == 0.0 || var_b == 0.0 {
            return 0.0;
        }
        cov / (var_a.sqrt() * var_b.sqrt())
    }

    fn similarities_for(&mut self, user: usize) -> &[f64] {
        if !self.similarity_cache.contains_key(&user) {
            let sims: Vec<f64> = (0..self.ratings.n_rows())
                .map(|other| if other == user { 0.0 } else { self.pearson(user, other) })
                .collect();
            self.similarity_cache.insert(user, sims);
        }
        &self.similarity_cache[&user]
    }

    /// Resnick-style prediction: user mean plus the similarity-weighted
    /// mean-centered deviations of the top-n similar raters of the item.
    /// Falls back to the user mean when no neighbor rated the item, and to
    /// the global mean when nobody rated it at all.
    pub fn predict(&mut self, user: usize, item: usize) -> Result<f64> {
        if user >= self.ratings.n_rows() || item >= self.ratings.n_cols() {
            return Err(Error::IndexOutOfRange(format!(
                "user {} / item {}",
                user, item
            )));
        }
        if self.ratings.row(user).is_empty() {
            return Err(Error::InvalidInput(format!(
                "user {} has no ratings",
                user
            )));
        }
        if self.raters[item].is_empty() {
            return Ok(self.global_mean);
        }
        let n = self.neighborhood_size;
        let user_mean = self.user_means[user];
        let sims = self.similarities_for(user).to_vec();

        let mut candidates: Vec<(f64, usize, f64)> = self.raters[item]
            .iter()
            .filter(|&&(other, _)| other != user && sims[other] != 0.0)
            .map(|&(other, rating)| (sims[other], other, rating))
            .collect();
        candidates.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap());
        candidates.truncate(n);

        let mut num = 0.0;
        let mut den = 0.0;
        for (sim, other, rating) in candidates {
            num += sim * (rating - self.user_means[other]);
            den += sim.abs();
        }
        let raw = if den > 0.0 { user_mean + num / den } else { user_mean };
        Ok(raw.clamp(self.min_rating, self.max_rating))
    }
}

/// Degenerate trainer configuration realizing plain probabilistic-style
/// matrix factorization: a single domain with both tag terms switched off.
pub fn pmf_config(d: usize, lambda: f64) -> TrainConfig {
    TrainConfig {
        hyperparams: Hyperparams {
            alpha: 0.0,
            beta: 0.0,
            lambda,
        },
        d,
        link: LinkFunction::Logistic,
        ..TrainConfig::default()
    }
}
