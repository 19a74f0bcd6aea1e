use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Largest number of nonzero differences handled by exact enumeration.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// Differences tend to be positive.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Nonzero differences used.
    pub n: usize,
    pub p: f64,
    pub method: WilcoxonMethod,
}

/// Mid-ranks of |d| for the nonzero differences, doubled so they are
/// integers, paired with the sign of each difference.
fn doubled_ranks(diffs: &[f64]) -> Vec<(u32, bool)> {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out = Vec::with_capacity(nz.len());
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled mid-rank = i + j + 2
        let r = (i + j + 2) as u32;
        for d in &nz[i..=j] {
            out.push((r, *d > 0.0));
        }
        i = j + 1;
    }
    out
}

fn tails(counts: &[f64], w2: usize) -> (f64, f64) {
    let total: f64 = counts.iter().sum();
    let upper: f64 = counts[w2..].iter().sum();
    let lower: f64 = counts[..=w2].iter().sum();
    (upper / total, lower / total)
}

fn combine(alt: Alternative, upper: f64, lower: f64) -> f64 {
    match alt {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

/// Exact null distribution of the signed-rank sum by dynamic programming
/// over the sign assignments.
pub fn wilcoxon_exact(diffs: &[f64], alt: Alternative) -> Result<WilcoxonResult> {
    let ranks = doubled_ranks(diffs);
    if ranks.len() < 5 {
        return Err(Error::InsufficientData { needed: 5, got: ranks.len() });
    }
    if ranks.len() > EXACT_MAX_N {
        return Err(Error::Precondition(alloc::format!(
            "exact enumeration limited to {EXACT_MAX_N} differences, got {}",
            ranks.len()
        )));
    }
    let max: usize = ranks.iter().map(|r| r.0 as usize).sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &(r, _) in &ranks {
        let r = r as usize;
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w2: usize = ranks.iter().filter(|r| r.1).map(|r| r.0 as usize).sum();
    let (upper, lower) = tails(&counts, w2);
    Ok(WilcoxonResult { w_plus: w2 as f64 / 2.0, n: ranks.len(), p: combine(alt, upper, lower), method: WilcoxonMethod::Exact })
}

/// Normal approximation with continuity and tie corrections.
pub fn wilcoxon_normal(diffs: &[f64], alt: Alternative) -> Result<WilcoxonResult> {
    let ranks = doubled_ranks(diffs);
    let m = ranks.len();
    if m < 5 {
        return Err(Error::InsufficientData { needed: 5, got: m });
    }
    let w: f64 = ranks.iter().filter(|r| r.1).map(|r| r.0 as f64 / 2.0).sum();
    let mf = m as f64;
    let mean = mf * (mf + 1.0) / 4.0;
    let mut tie = 0.0;
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && ranks[j + 1].0 == ranks[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie += t * t * t - t;
        i = j + 1;
    }
    let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie / 48.0;
    let sd = math::sqrt(var);
    let upper = 1.0 - math::norm_cdf((w - mean - 0.5) / sd);
    let lower = math::norm_cdf((w - mean + 0.5) / sd);
    Ok(WilcoxonResult { w_plus: w, n: m, p: combine(alt, upper.min(1.0), lower.min(1.0)), method: WilcoxonMethod::Normal })
}

/// Signed-rank test on paired differences `a - b`. Zero differences are
/// dropped; exact for up to 20 nonzero differences.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], alt: Alternative) -> Result<WilcoxonResult> {
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let m = diffs.iter().filter(|d| **d != 0.0).count();
    if m <= EXACT_MAX_N {
        wilcoxon_exact(&diffs, alt)
    } else {
        wilcoxon_normal(&diffs, alt)
    }
}
