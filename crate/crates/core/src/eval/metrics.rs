//! MAE and MAP plus the listening-count relevance rule.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Holdout ground truth per test user, in the original preference scale.
#[derive(Debug, Clone, Default)]
pub struct HoldoutSet {
    /// user -> list of (item, true value).
    pub users: BTreeMap<usize, Vec<(usize, f64)>>,
}

impl HoldoutSet {
    pub fn n_pairs(&self) -> usize {
        self.users.values().map(|v| v.len()).sum()
    }
}

/// Mean absolute error over all holdout pairs, in the original rating
/// scale. The predictor is called once per pair.
pub fn mae(mut predict: impl FnMut(usize, usize) -> f64, holdout: &HoldoutSet) -> Result<f64> {
    let n = holdout.n_pairs();
    if n == 0 {
        return Err(Error::EmptyEvalSet);
    }
    let mut sum = 0.0;
    for (&user, pairs) in &holdout.users {
        for &(item, truth) in pairs {
            sum += (predict(user, item) - truth).abs();
        }
    }
    Ok(sum / n as f64)
}

/// Binary relevance per item from listening counts: relevant iff the count
/// reaches `coefficient` times the user's maximum holdout count.
pub fn relevance_labels(counts: &[f64], coefficient: f64) -> Result<Vec<bool>> {
    if counts.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    if !(coefficient > 0.0 && coefficient <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "relevance coefficient {} outside (0, 1]",
            coefficient
        )));
    }
    let max = counts.iter().cloned().fold(f64::MIN, f64::max);
    if max <= 0.0 {
        return Err(Error::NoRelevance);
    }
    let threshold = coefficient * max;
    Ok(counts.iter().map(|&c| c >= threshold).collect())
}

/// Sorts items by score descending, ties broken by ascending item index.
pub fn rank_items(scored: &[(usize, f64)]) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = scored.to_vec();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    ranked.into_iter().map(|(item, _)| item).collect()
}

/// Average precision of one ranked list given relevance in rank order.
/// `None` when the user has no relevant item.
pub fn average_precision(ranked_relevance: &[bool]) -> Option<f64> {
    let total_relevant = ranked_relevance.iter().filter(|&&r| r).count();
    if total_relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (j, &rel) in ranked_relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (j + 1) as f64;
        }
    }
    Some(sum / total_relevant as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOutcome {
    pub value: f64,
    /// Users that entered the mean.
    pub evaluated: usize,
    /// Users skipped for having no relevant holdout item.
    pub skipped: usize,
}

/// Mean average precision over users; each element is one user's relevance
/// list in rank order. Users without relevant items are skipped and
/// tallied.
pub fn mean_average_precision(per_user: &[Vec<bool>]) -> Result<MapOutcome> {
    if per_user.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut sum = 0.0;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for ranked in per_user {
        match average_precision(ranked) {
            Some(ap) => {
                sum += ap;
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    if evaluated == 0 {
        return Err(Error::EmptyEvalSet);
    }
    Ok(MapOutcome {
        value: sum / evaluated as f64,
        evaluated,
        skipped,
    })
}
