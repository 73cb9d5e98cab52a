//! Minimum benchmark size: the smallest number of evaluation images for
//! which the best method on the full benchmark stays the strict winner
//! with probability at least `1 - risk`.
//!
//! The pmf uses the standard multinomial coefficient `N'! / prod(n'_i!)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::stats::RankMatrix;
use crate::{Error, Result};

/// How many images each method won.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinCounts {
    counts: Vec<usize>,
}

impl WinCounts {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Invalid("win counts need at least one method".into()));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::Invalid("win counts are all zero".into()));
        }
        Ok(Self { counts })
    }

    /// Counts the rows where a single method holds rank 1. Rows whose top
    /// rank is shared are skipped.
    pub fn from_ranks(ranks: &RankMatrix) -> Result<Self> {
        let mut counts = vec![0; ranks.cols()];
        for i in 0..ranks.rows() {
            if let Some(m) = ranks.row(i).iter().position(|&r| r == 1.0) {
                counts[m] += 1;
            }
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Index of the unique most frequent winner.
pub fn identify_best(counts: &WinCounts) -> Result<usize> {
    let c = counts.counts();
    let max = *c.iter().max().ok_or(Error::TiedBest)?;
    let mut it = c.iter().enumerate().filter(|(_, &v)| v == max);
    let (best, _) = it.next().ok_or(Error::TiedBest)?;
    if it.next().is_some() {
        return Err(Error::TiedBest);
    }
    Ok(best)
}

/// `round(1 / p_samp)`, required to be integral.
pub fn sampling_step(p_samp: f64) -> Result<usize> {
    if !(p_samp > 0.0 && p_samp <= 1.0) {
        return Err(Error::BadP(p_samp));
    }
    let inv = 1.0 / p_samp;
    let step = libm::round(inv);
    if (inv - step).abs() > 1e-9 {
        return Err(Error::NonIntegralStep(inv));
    }
    Ok(step as usize)
}

/// Calls `f` on every tuple of `m` nonnegative counts summing to `total`,
/// in lexicographic order.
fn for_each_composition(m: usize, total: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, m: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if buf.len() + 1 == m {
            buf.push(left);
            f(buf);
            buf.pop();
            return;
        }
        for v in 0..=left {
            buf.push(v);
            rec(buf, m, left - v, f);
            buf.pop();
        }
    }
    if m == 0 {
        return;
    }
    rec(&mut Vec::with_capacity(m), m, total, f);
}

/// Calls `f` on every sampled outcome: `m` counts summing to `n_prime`,
/// each a multiple of the sampling step.
pub fn for_each_sampled_outcome(
    m: usize,
    n_prime: usize,
    p_samp: f64,
    mut f: impl FnMut(&[usize]),
) -> Result<()> {
    let step = sampling_step(p_samp)?;
    if !n_prime.is_multiple_of(step) {
        return Ok(());
    }
    let mut scaled = vec![0; m];
    for_each_composition(m, n_prime / step, &mut |t| {
        scaled.iter_mut().zip(t).for_each(|(s, &v)| *s = v * step);
        f(&scaled);
    });
    Ok(())
}

pub fn enumerate_sampled_outcomes(m: usize, n_prime: usize, p_samp: f64) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for_each_sampled_outcome(m, n_prime, p_samp, |t| out.push(t.to_vec()))?;
    Ok(out)
}

/// `ln(k!)` for `k = 0..=n`.
fn log_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + libm::log(k as f64);
    }
    t
}

fn pmf_with_table(counts: &[usize], n_prime: usize, log_f: &[f64], lfact: &[f64]) -> f64 {
    if counts.iter().sum::<usize>() != n_prime {
        return 0.0;
    }
    let mut l = lfact[n_prime];
    for (&c, &lf) in counts.iter().zip(log_f) {
        if c == 0 {
            continue;
        }
        if lf == f64::NEG_INFINITY {
            return 0.0;
        }
        l += c as f64 * lf - lfact[c];
    }
    libm::exp(l)
}

/// Multinomial probability of `counts`; 0 when they do not sum to `n_prime`.
pub fn multinomial_pmf(counts: &[usize], n_prime: usize, f: &[f64]) -> f64 {
    let log_f: Vec<f64> = f.iter().map(|&p| libm::log(p)).collect();
    pmf_with_table(counts, n_prime, &log_f, &log_factorials(n_prime))
}

/// Probability that the full-benchmark winner wins strictly on a random
/// subset of `n_prime` images, normalized over the sampled outcomes.
pub fn success_probability(counts: &WinCounts, n_prime: usize, p_samp: f64) -> Result<f64> {
    let best = identify_best(counts)?;
    let log_f: Vec<f64> = counts.frequencies().iter().map(|&p| libm::log(p)).collect();
    let lfact = log_factorials(n_prime);
    let (mut win, mut all) = (0.0, 0.0);
    for_each_sampled_outcome(counts.counts().len(), n_prime, p_samp, |t| {
        let p = pmf_with_table(t, n_prime, &log_f, &lfact);
        all += p;
        if t.iter().enumerate().all(|(i, &v)| i == best || v < t[best]) {
            win += p;
        }
    })?;
    if all == 0.0 {
        return Err(Error::Invalid(format!(
            "no sampled outcome of size {n_prime} has positive probability"
        )));
    }
    Ok(win / all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Binary,
    Scan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSizeResult {
    pub n_star: usize,
    pub n: usize,
    pub r: f64,
    pub risk: f64,
    pub p_samp: f64,
    pub requested: SearchMode,
    /// `Scan` when a binary search fell back after seeing `P` decrease
    pub mode_used: SearchMode,
    /// `(N', P_N')` pairs in evaluation order
    pub evaluated: Vec<(usize, f64)>,
}

/// Smallest admissible `N'` with `P_N' >= 1 - risk`. Admissible sizes are
/// the multiples of the sampling step in `[1, N]`.
///
/// The binary search compares every probed size, `N` included, with its
/// predecessor and falls back to a full scan as soon as `P` is seen to
/// decrease.
pub fn min_benchmark_size(
    counts: &WinCounts,
    risk: f64,
    p_samp: f64,
    mode: SearchMode,
) -> Result<BenchSizeResult> {
    identify_best(counts)?;
    if !(risk > 0.0 && risk < 1.0) {
        return Err(Error::Invalid(format!("risk {risk} outside (0, 1)")));
    }
    let step = sampling_step(p_samp)?;
    let n = counts.total();
    let sizes: Vec<usize> = (1..=n / step).map(|k| k * step).collect();
    let target = 1.0 - risk;
    let mut evaluated = Vec::new();
    let mut cache: Vec<Option<f64>> = vec![None; sizes.len()];
    let mut p_at = |i: usize, evaluated: &mut Vec<(usize, f64)>| -> Result<f64> {
        if let Some(p) = cache[i] {
            return Ok(p);
        }
        let p = success_probability(counts, sizes[i], p_samp)?;
        cache[i] = Some(p);
        evaluated.push((sizes[i], p));
        Ok(p)
    };
    let finish = |n_star: usize, mode_used: SearchMode, evaluated: Vec<(usize, f64)>| BenchSizeResult {
        n_star,
        n,
        r: n_star as f64 / n as f64,
        risk,
        p_samp,
        requested: mode,
        mode_used,
        evaluated,
    };
    if sizes.is_empty() {
        return Err(Error::NoSolution { p_full: 0.0 });
    }

    if mode == SearchMode::Binary {
        let last = sizes.len() - 1;
        let p_full = p_at(last, &mut evaluated)?;
        let mut monotone = last == 0 || p_at(last - 1, &mut evaluated)? <= p_full;
        if monotone && p_full < target {
            return Err(Error::NoSolution { p_full });
        }
        let (mut lo, mut hi) = (0, last);
        while monotone && lo < hi {
            let mid = (lo + hi) / 2;
            let p = p_at(mid, &mut evaluated)?;
            if mid > 0 && p_at(mid - 1, &mut evaluated)? > p {
                monotone = false;
                break;
            }
            if p >= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if monotone {
            return Ok(finish(sizes[hi], SearchMode::Binary, evaluated));
        }
    }

    for i in 0..sizes.len() {
        if p_at(i, &mut evaluated)? >= target {
            return Ok(finish(sizes[i], SearchMode::Scan, evaluated));
        }
    }
    let p_full = cache[sizes.len() - 1].unwrap_or(0.0);
    Err(Error::NoSolution { p_full })
}
