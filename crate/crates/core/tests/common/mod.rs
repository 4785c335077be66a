//! Shared helpers for the integration and acceptance suites: random
//! instance generation and independent oracles (straight-from-the-formula
//! objective, finite differences, brute-force metrics). The oracles
//! deliberately avoid the library's objective/gradient code paths.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gtagcdcf::model::{DomainMatrices, FactorModel, Hyperparams, LinkFunction};
use gtagcdcf::tensor::{DenseFactorMatrix, SparseMatrix};

pub struct Instance {
    pub domains: Vec<(SparseMatrix, SparseMatrix, SparseMatrix)>,
    pub model: FactorModel,
    pub h: Hyperparams,
}

impl Instance {
    pub fn views(&self) -> Vec<DomainMatrices<'_>> {
        self.domains
            .iter()
            .map(|(r, f_u, f_v)| DomainMatrices { r, f_u, f_v })
            .collect()
    }
}

fn random_sparse(rng: &mut ChaCha8Rng, n_rows: usize, n_cols: usize, density: f64) -> SparseMatrix {
    let mut triplets = Vec::new();
    for i in 0..n_rows {
        for j in 0..n_cols {
            if rng.gen::<f64>() < density {
                triplets.push((i, j, rng.gen_range(0.05..=1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(n_rows, n_cols, triplets).unwrap()
}

fn random_dense(rng: &mut ChaCha8Rng, d: usize, n_cols: usize, scale: f64) -> DenseFactorMatrix {
    DenseFactorMatrix::from_fn(d, n_cols, |_, _| rng.gen_range(-scale..scale))
}

/// Random desk-scale instance: K in 1..=3, M,N <= 8, L <= 5, d <= 4, both
/// link kinds, weights in [0, 1].
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=3usize);
    let d = rng.gen_range(1..=4usize);
    let l = rng.gen_range(1..=5usize);
    let link = if rng.gen::<bool>() {
        LinkFunction::Logistic
    } else {
        LinkFunction::Identity
    };
    let mut domains = Vec::new();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for _ in 0..k {
        let m = rng.gen_range(2..=8usize);
        let n = rng.gen_range(2..=8usize);
        domains.push((
            random_sparse(&mut rng, m, n, 0.5),
            random_sparse(&mut rng, m, l, 0.5),
            random_sparse(&mut rng, n, l, 0.5),
        ));
        u.push(random_dense(&mut rng, d, m, 0.6));
        v.push(random_dense(&mut rng, d, n, 0.6));
    }
    let t = random_dense(&mut rng, d, l, 0.6);
    Instance {
        domains,
        model: FactorModel {
            d,
            u,
            v,
            t,
            link,
            predict_through_link: false,
        },
        h: Hyperparams {
            alpha: rng.gen::<f64>(),
            beta: rng.gen::<f64>(),
            lambda: rng.gen::<f64>(),
        },
    }
}

fn g(link: LinkFunction, x: f64) -> f64 {
    match link {
        LinkFunction::Logistic => 1.0 / (1.0 + (-x).exp()),
        LinkFunction::Identity => x,
    }
}

fn col_dot(a: &DenseFactorMatrix, i: usize, b: &DenseFactorMatrix, j: usize) -> f64 {
    a.col(i).iter().zip(b.col(j)).map(|(x, y)| x * y).sum()
}

/// Straight-from-the-formula objective: dense triple loops over every cell,
/// consulting the sparse matrices only for the indicator and value.
pub fn oracle_objective(model: &FactorModel, domains: &[DomainMatrices], h: &Hyperparams) -> f64 {
    let link = model.link;
    let l = model.t.n_cols();
    let mut total = 0.0;
    for (k, dom) in domains.iter().enumerate() {
        for i in 0..dom.n_users() {
            for j in 0..dom.n_items() {
                if let Some(value) = dom.r.get(i, j) {
                    let x = col_dot(&model.u[k], i, &model.v[k], j);
                    total += 0.5 * (value - g(link, x)).powi(2);
                }
            }
        }
        for i in 0..dom.n_users() {
            for t in 0..l {
                if let Some(value) = dom.f_u.get(i, t) {
                    let x = col_dot(&model.u[k], i, &model.t, t);
                    total += 0.5 * h.alpha * (value - g(link, x)).powi(2);
                }
            }
        }
        for j in 0..dom.n_items() {
            for t in 0..l {
                if let Some(value) = dom.f_v.get(j, t) {
                    let x = col_dot(&model.v[k], j, &model.t, t);
                    total += 0.5 * h.beta * (value - g(link, x)).powi(2);
                }
            }
        }
    }
    let mut reg = 0.0;
    for k in 0..model.n_domains() {
        reg += model.u[k].values().iter().map(|v| v * v).sum::<f64>();
        reg += model.v[k].values().iter().map(|v| v * v).sum::<f64>();
    }
    reg += model.t.values().iter().map(|v| v * v).sum::<f64>();
    total + 0.5 * h.lambda * reg
}

/// Copy of a factor matrix with one coordinate shifted by delta.
pub fn perturbed(m: &DenseFactorMatrix, row: usize, col: usize, delta: f64) -> DenseFactorMatrix {
    DenseFactorMatrix::from_fn(m.d(), m.n_cols(), |r, j| {
        if r == row && j == col {
            m.col(j)[r] + delta
        } else {
            m.col(j)[r]
        }
    })
}

pub enum Which {
    U(usize),
    V(usize),
    T,
}

/// Central finite difference of the library objective along one factor
/// coordinate.
pub fn finite_difference(
    model: &FactorModel,
    domains: &[DomainMatrices],
    h: &Hyperparams,
    which: &Which,
    row: usize,
    col: usize,
    step: f64,
) -> f64 {
    let eval = |delta: f64| {
        let mut m = model.clone();
        match which {
            Which::U(k) => m.u[*k] = perturbed(&model.u[*k], row, col, delta),
            Which::V(k) => m.v[*k] = perturbed(&model.v[*k], row, col, delta),
            Which::T => m.t = perturbed(&model.t, row, col, delta),
        }
        gtagcdcf::model::objective(&m, domains, h).unwrap()
    };
    (eval(step) - eval(-step)) / (2.0 * step)
}

/// Brute-force MAE: explicit per-pair loop.
pub fn oracle_mae(pairs: &[(f64, f64)]) -> f64 {
    let mut sum = 0.0;
    for &(pred, truth) in pairs {
        sum += (pred - truth).abs();
    }
    sum / pairs.len() as f64
}

/// Brute-force average precision: walks the list position by position.
pub fn oracle_average_precision(ranked_relevance: &[bool]) -> Option<f64> {
    let relevant: usize = ranked_relevance.iter().filter(|&&r| r).count();
    if relevant == 0 {
        return None;
    }
    let mut sum = 0.0;
    for position in 1..=ranked_relevance.len() {
        if ranked_relevance[position - 1] {
            let hits_so_far = ranked_relevance[..position].iter().filter(|&&r| r).count();
            sum += hits_so_far as f64 / position as f64;
        }
    }
    Some(sum / relevant as f64)
}

/// Brute-force two-sided signed-rank p-value by enumerating all 2^n sign
/// assignments over the observed ranks.
pub fn oracle_wilcoxon_p(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    // average ranks of |d|
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| diffs[x].abs().partial_cmp(&diffs[y].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let total: f64 = ranks.iter().sum();
    let observed: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let lo = observed.min(total - observed);
    let hi = total - lo;
    let mut extreme = 0usize;
    for mask in 0..(1usize << n) {
        let s: f64 = (0..n)
            .filter(|&idx| mask & (1 << idx) != 0)
            .map(|idx| ranks[idx])
            .sum();
        if s <= lo + 1e-9 || s >= hi - 1e-9 {
            extreme += 1;
        }
    }
    (extreme as f64 / (1usize << n) as f64).min(1.0)
}

/// Synthetic two-domain data with shared tag-aligned latent structure:
/// a dense auxiliary domain and a sparse target domain whose users keep
/// only `target_prefs_per_user` observed preferences. With `noise_tags`
/// the tag matrices are random instead of structure-derived.
pub struct TransferInstance {
    pub aux: (SparseMatrix, SparseMatrix, SparseMatrix),
    pub target: (SparseMatrix, SparseMatrix, SparseMatrix),
    /// Held-out target preferences (user, item, true normalized value).
    pub target_holdout: Vec<(usize, usize, f64)>,
}

pub fn transfer_instance(seed: u64, noise_tags: bool, target_prefs_per_user: usize) -> TransferInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 4;
    let l = 12;
    let scale = 1.0 / d as f64;
    // Nonnegative latent structure keeps every product in (0, 1].
    let latent =
        |n: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(0.1..1.0) * scale * 4.0).collect())
                .collect()
        };
    let t_star = latent(l, &mut rng);

    let build_domain = |m: usize,
                            n: usize,
                            r_density: f64,
                            prefs_per_user: Option<usize>,
                            rng: &mut ChaCha8Rng|
     -> ((SparseMatrix, SparseMatrix, SparseMatrix), Vec<(usize, usize, f64)>) {
        let u_star = latent(m, rng);
        let v_star = latent(n, rng);
        let product = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(0.01, 1.0)
        };
        let mut r_triplets = Vec::new();
        let mut holdout = Vec::new();
        for i in 0..m {
            match prefs_per_user {
                Some(count) => {
                    let mut items: Vec<usize> = (0..n).collect();
                    for idx in (1..items.len()).rev() {
                        items.swap(idx, rng.gen_range(0..=idx));
                    }
                    for (pos, &j) in items.iter().enumerate() {
                        let value = product(&u_star[i], &v_star[j]);
                        if pos < count {
                            r_triplets.push((i, j, value));
                        } else {
                            holdout.push((i, j, value));
                        }
                    }
                }
                None => {
                    for j in 0..n {
                        if rng.gen::<f64>() < r_density {
                            r_triplets.push((i, j, product(&u_star[i], &v_star[j])));
                        }
                    }
                }
            }
        }
        let mut fu_triplets = Vec::new();
        for i in 0..m {
            for t in 0..l {
                if rng.gen::<f64>() < 0.6 {
                    let value = if noise_tags {
                        rng.gen_range(0.05..=1.0)
                    } else {
                        product(&u_star[i], &t_star[t])
                    };
                    fu_triplets.push((i, t, value));
                }
            }
        }
        let mut fv_triplets = Vec::new();
        for j in 0..n {
            for t in 0..l {
                if rng.gen::<f64>() < 0.6 {
                    let value = if noise_tags {
                        rng.gen_range(0.05..=1.0)
                    } else {
                        product(&v_star[j], &t_star[t])
                    };
                    fv_triplets.push((j, t, value));
                }
            }
        }
        (
            (
                SparseMatrix::from_triplets(m, n, r_triplets).unwrap(),
                SparseMatrix::from_triplets(m, l, fu_triplets).unwrap(),
                SparseMatrix::from_triplets(n, l, fv_triplets).unwrap(),
            ),
            holdout,
        )
    };

    let (aux, _) = build_domain(30, 30, 0.6, None, &mut rng);
    let (target, target_holdout) =
        build_domain(25, 25, 0.0, Some(target_prefs_per_user), &mut rng);
    TransferInstance {
        aux,
        target,
        target_holdout,
    }
}
