use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of nonzero differences handled by the exact null distribution.
pub const EXACT_LIMIT: usize = 12;

/// Direction of the one-sided test on `d = a − b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    Greater,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    pub n_effective: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Ranks of `values` (ascending, 1-based) with ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// How the null distribution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    /// Exact up to [`EXACT_LIMIT`] nonzero differences, normal beyond.
    Auto,
    /// Exact enumeration; limited to 62 nonzero differences.
    Exact,
    /// Normal approximation with tie correction and continuity correction.
    Normal,
}

/// Paired one-sided signed-rank test. Zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_by(a, b, alternative, PValueMethod::Auto)
}

pub fn wilcoxon_signed_rank_by(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    method: PValueMethod,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.len() < 5 {
        return Err(Error::InvalidInput(format!("need at least 5 pairs, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("losses must be finite".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len();

    let exact = match method {
        PValueMethod::Auto => n <= EXACT_LIMIT,
        PValueMethod::Exact if n > 62 => {
            return Err(Error::InvalidParameter(format!("exact null distribution limited to 62 pairs, got {n}")));
        }
        PValueMethod::Exact => true,
        PValueMethod::Normal => false,
    };
    if exact {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        // counts[s]: sign patterns whose positive doubled ranks sum to s
        let mut counts = vec![0u64; total + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let obs = (2.0 * w_plus).round() as usize;
        let tail: u64 = match alternative {
            Alternative::Less => counts[..=obs].iter().sum(),
            Alternative::Greater => counts[obs..].iter().sum(),
        };
        let p = tail as f64 / (1u64 << n) as f64;
        return Ok(WilcoxonResult { w_plus, n_effective: n, p_value: p, exact: true });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let sd = var.sqrt();
    let phi = Normal::standard();
    let p = match alternative {
        Alternative::Less => phi.cdf((w_plus - mean + 0.5) / sd),
        Alternative::Greater => phi.sf((w_plus - mean - 0.5) / sd),
    };
    Ok(WilcoxonResult { w_plus, n_effective: n, p_value: p.clamp(0.0, 1.0), exact: false })
}
