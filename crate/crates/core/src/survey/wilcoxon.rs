//! Wilcoxon signed-rank test for paired ratings.
//!
//! Zero differences are dropped, tied absolute differences share their
//! midrank, and the two-sided p-value doubles the smaller tail. Up to
//! [`EXACT_MAX_N`] pairs the null distribution is computed exactly over every
//! sign assignment; beyond that a tie-corrected normal approximation with
//! continuity correction is used.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `n_used` handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_used: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub method: WilcoxonMethod,
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum WilcoxonError {
    #[error("no nonzero pairs")]
    NoNonzeroPairs,
    #[error("n_used = {0} is too large for the exact method")]
    TooLargeForExact(usize),
}

/// Signed differences ranked by magnitude. Ranks are stored doubled so that
/// midranks stay integral.
#[derive(Debug, Clone)]
struct RankedDifferences {
    doubled_ranks: Vec<u64>,
    positive: Vec<bool>,
    tie_sizes: Vec<u64>,
}

impl RankedDifferences {
    fn new(pairs: &[(f64, f64)]) -> Result<Self, WilcoxonError> {
        let mut diffs: Vec<f64> = pairs.iter().map(|&(a, b)| b - a).filter(|d| *d != 0.0).collect();
        if diffs.is_empty() {
            return Err(WilcoxonError::NoNonzeroPairs);
        }
        diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        let n = diffs.len();
        let mut doubled_ranks = vec![0u64; n];
        let mut tie_sizes = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start;
            while end + 1 < n && diffs[end + 1].abs() == diffs[start].abs() {
                end += 1;
            }
            // positions start+1 ..= end+1 share (start+1 + end+1) / 2
            let doubled = (start + end + 2) as u64;
            doubled_ranks[start..=end].fill(doubled);
            tie_sizes.push((end - start + 1) as u64);
            start = end + 1;
        }
        let positive = diffs.iter().map(|d| *d > 0.0).collect();
        Ok(Self { doubled_ranks, positive, tie_sizes })
    }

    fn n(&self) -> usize {
        self.doubled_ranks.len()
    }

    fn doubled_w_plus(&self) -> u64 {
        self.doubled_ranks.iter().zip(&self.positive).filter(|(_, &p)| p).map(|(r, _)| r).sum()
    }

    fn doubled_total(&self) -> u64 {
        let n = self.n() as u64;
        n * (n + 1)
    }
}

/// Number of sign assignments producing each doubled W+ value.
fn null_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranked: &RankedDifferences) -> f64 {
    let counts = null_counts(&ranked.doubled_ranks);
    let observed = ranked.doubled_w_plus() as usize;
    let below: u64 = counts[..=observed].iter().sum();
    let above: u64 = counts[observed..].iter().sum();
    let assignments = (1u64 << ranked.n()) as f64;
    let tail = below.min(above) as f64 / assignments;
    (2.0 * tail).min(1.0)
}

fn normal_p(ranked: &RankedDifferences) -> f64 {
    let n = ranked.n() as f64;
    let w_plus = ranked.doubled_w_plus() as f64 / 2.0;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ranked.tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if variance <= 0.0 {
        return 1.0;
    }
    // continuity correction toward the mean, never past it
    let shifted = ((w_plus - mean).abs() - 0.5).max(0.0);
    let z = shifted / variance.sqrt();
    // 2·(1 − Φ(|z|)) == erfc(|z|/√2)
    statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Runs the test with an explicit method. Differences are `b − a`.
pub fn wilcoxon_signed_rank_using(pairs: &[(f64, f64)], method: WilcoxonMethod) -> Result<WilcoxonResult, WilcoxonError> {
    let ranked = RankedDifferences::new(pairs)?;
    let n_used = ranked.n();
    if method == WilcoxonMethod::Exact && n_used > 62 {
        return Err(WilcoxonError::TooLargeForExact(n_used));
    }
    let w_plus = ranked.doubled_w_plus() as f64 / 2.0;
    let w_minus = (ranked.doubled_total() - ranked.doubled_w_plus()) as f64 / 2.0;
    let p_two_sided = match method {
        WilcoxonMethod::Exact => exact_p(&ranked),
        WilcoxonMethod::NormalApprox => normal_p(&ranked),
    };
    Ok(WilcoxonResult { n_used, w_plus, w_minus, method, p_two_sided })
}

/// Exact when `n_used ≤ 25`, normal approximation otherwise.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<WilcoxonResult, WilcoxonError> {
    let n_used = pairs.iter().filter(|(a, b)| b - a != 0.0).count();
    let method = if n_used <= EXACT_MAX_N { WilcoxonMethod::Exact } else { WilcoxonMethod::NormalApprox };
    wilcoxon_signed_rank_using(pairs, method)
}
