//! Two-sided Wilcoxon signed-rank test: exact permutation distribution for
//! small samples, normal approximation with tie correction otherwise.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest n for which the exact null distribution is enumerated.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    pub p_value: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n: usize,
    pub exact: bool,
}

/// Average ranks of |values|, ties sharing the mean of their rank range.
fn signed_ranks(diffs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs[a].abs().partial_cmp(&diffs[b].abs()).unwrap());
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the average
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided p-value: the fraction of the 2^n equiprobable sign
/// assignments whose positive-rank sum is at least as extreme as the
/// observed one. Ranks are doubled so tied (half-integer) average ranks
/// stay integral for the subset-sum count.
fn exact_p_value(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let total: u64 = doubled.iter().sum();
    let mut ways = vec![0u128; total as usize + 1];
    ways[0] = 1;
    for &r in &doubled {
        for s in (r as usize..ways.len()).rev() {
            ways[s] += ways[s - r as usize];
        }
    }
    let observed = (2.0 * w_plus).round() as u64;
    // Two-sided: distance from the mean, counting both tails. The null is
    // symmetric around total/2 (flipping all signs maps s to total - s).
    let lo = observed.min(total - observed);
    let hi = total - lo;
    let mut tail: u128 = 0;
    for (s, &w) in ways.iter().enumerate() {
        if (s as u64) <= lo || (s as u64) >= hi {
            tail += w;
        }
    }
    let denom = 2u128.pow(ranks.len() as u32);
    (tail as f64 / denom as f64).min(1.0)
}

/// Two-sided signed-rank test on paired samples. Zero differences are
/// dropped; at least 5 nonzero differences are required.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(Error::TooFewDifferences(n));
    }

    let ranks = signed_ranks(&diffs);
    let mut w_plus = 0.0;
    let mut w_minus = 0.0;
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }

    let (p_value, exact) = if n <= EXACT_LIMIT {
        (exact_p_value(&ranks, w_plus), true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        // Tie correction: subtract sum(t^3 - t) / 48 over tie groups.
        let mut tie_term = 0.0;
        let mut sorted: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = (w_plus - mean) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.cdf(-z.abs()), false)
    };

    Ok(WilcoxonResult {
        p_value,
        w_plus,
        w_minus,
        n,
        exact,
    })
}
