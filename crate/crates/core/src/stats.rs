//! Rankings, Krippendorff's ordinal alpha and its bootstrap distribution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::metrics::{Direction, MetricKind, ScoreMatrix};
use crate::{Error, Result, Rng};

/// Per-image rankings of the methods; rank 1 is the best.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMatrix {
    kind: Option<MetricKind>,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RankMatrix {
    /// Wraps precomputed ranks, checking that every row is a fractional
    /// ranking of `1..=cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "rank matrix {rows}x{cols} with {} values",
                data.len()
            )));
        }
        let want = (cols * (cols + 1)) as f64 / 2.0;
        for row in data.chunks_exact(cols) {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&r| !(r >= 1.0 && r <= cols as f64)) || (s - want).abs() > 1e-9 {
                return Err(Error::Invalid(format!("{row:?} is not a ranking")));
            }
        }
        Ok(Self {
            kind: None,
            rows,
            cols,
            data,
        })
    }

    pub fn kind(&self) -> Option<MetricKind> {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// The matrix made of the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> RankMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        RankMatrix {
            kind: self.kind,
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Fractional ranks of `values`, rank 1 for the best under `direction`.
pub fn fractional_ranks(values: &[f64], direction: Direction) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| match direction {
        Direction::LowerBetter => values[a].total_cmp(&values[b]),
        Direction::HigherBetter => values[b].total_cmp(&values[a]),
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end share the mean of ranks start+1..=end
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

pub fn rank_rows(scores: &ScoreMatrix) -> RankMatrix {
    let dir = scores.kind().direction();
    let data = (0..scores.rows())
        .flat_map(|i| fractional_ranks(scores.row(i), dir))
        .collect();
    RankMatrix {
        kind: Some(scores.kind()),
        rows: scores.rows(),
        cols: scores.cols(),
        data,
    }
}

/// Krippendorff's alpha with the ordinal metric. Units are the methods
/// (columns) and coders the images (rows); categories are the distinct
/// rank values present in the matrix.
pub fn krippendorff_alpha_ordinal(ranks: &RankMatrix) -> Result<f64> {
    let (n_rows, m) = (ranks.rows, ranks.cols);
    if n_rows < 2 || m < 1 {
        return Err(Error::DegenerateData);
    }
    let mut cats: Vec<f64> = ranks.data.clone();
    cats.sort_by(f64::total_cmp);
    cats.dedup();
    let c = cats.len();
    if c < 2 {
        return Err(Error::DegenerateData);
    }
    let cat_of = |v: f64| cats.binary_search_by(|x| x.total_cmp(&v)).unwrap();

    // coincidence matrix: every ordered pair of values within a unit
    // contributes 1 / (values in unit - 1)
    let mut o = vec![0.0; c * c];
    let mut h = vec![0usize; c];
    let w = 1.0 / (n_rows - 1) as f64;
    for u in 0..m {
        h.iter_mut().for_each(|v| *v = 0);
        for i in 0..n_rows {
            h[cat_of(ranks.data[i * m + u])] += 1;
        }
        for a in 0..c {
            if h[a] == 0 {
                continue;
            }
            for b in 0..c {
                let pairs = if a == b { h[a] * (h[a] - 1) } else { h[a] * h[b] };
                o[a * c + b] += pairs as f64 * w;
            }
        }
    }
    let n_c: Vec<f64> = (0..c).map(|a| o[a * c..(a + 1) * c].iter().sum()).collect();
    let n: f64 = n_c.iter().sum();

    // cumulative marginals for the ordinal distance
    let mut cum = vec![0.0; c + 1];
    for a in 0..c {
        cum[a + 1] = cum[a] + n_c[a];
    }
    let delta2 = |a: usize, b: usize| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let d = cum[hi + 1] - cum[lo] - (n_c[lo] + n_c[hi]) / 2.0;
        d * d
    };
    let (mut d_o, mut d_e) = (0.0, 0.0);
    for a in 0..c {
        for b in 0..c {
            if a == b {
                continue;
            }
            let d = delta2(a, b);
            d_o += o[a * c + b] * d;
            d_e += n_c[a] * n_c[b] * d;
        }
    }
    if d_e == 0.0 {
        return Err(Error::DegenerateData);
    }
    Ok(1.0 - (n - 1.0) * d_o / d_e)
}

/// Bootstrap values of alpha over row resamples.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSample {
    /// alpha of every non-degenerate resample, in iteration order
    pub values: Vec<f64>,
    /// resamples dropped because alpha was undefined
    pub degenerate: usize,
}

/// Alpha of bootstrap iteration `index`; `None` for a degenerate resample.
/// Each iteration draws from its own child generator, so iterations can
/// run in any order.
pub fn bootstrap_iteration(ranks: &RankMatrix, seed: u64, index: u64) -> Option<f64> {
    let mut rng = Rng::derive(seed, index);
    let rows: Vec<usize> = (0..ranks.rows).map(|_| rng.below_usize(ranks.rows)).collect();
    krippendorff_alpha_ordinal(&ranks.select_rows(&rows)).ok()
}

pub fn bootstrap_alpha(ranks: &RankMatrix, iterations: usize, seed: u64) -> BootstrapSample {
    collect_bootstrap((0..iterations as u64).map(|b| bootstrap_iteration(ranks, seed, b)))
}

/// Gathers iteration results (in iteration order) into a sample.
pub fn collect_bootstrap(results: impl IntoIterator<Item = Option<f64>>) -> BootstrapSample {
    let mut values = Vec::new();
    let mut degenerate = 0;
    for r in results {
        match r {
            Some(v) => values.push(v),
            None => degenerate += 1,
        }
    }
    BootstrapSample { values, degenerate }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&q) {
        return Err(Error::Invalid(format!("percentile {q} of {} values", values.len())));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q / 100.0;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Point alpha with its bootstrap distribution and 95% percentile interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaReport {
    pub alpha: f64,
    pub bootstrap: Vec<f64>,
    pub degenerate: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl AlphaReport {
    pub fn from_parts(alpha: f64, sample: BootstrapSample) -> Result<Self> {
        if sample.values.is_empty() {
            return Err(Error::DegenerateData);
        }
        Ok(Self {
            alpha,
            mean: mean(&sample.values),
            ci_low: percentile(&sample.values, 2.5)?,
            ci_high: percentile(&sample.values, 97.5)?,
            bootstrap: sample.values,
            degenerate: sample.degenerate,
        })
    }
}

pub fn alpha_report(ranks: &RankMatrix, iterations: usize, seed: u64) -> Result<AlphaReport> {
    let alpha = krippendorff_alpha_ordinal(ranks)?;
    AlphaReport::from_parts(alpha, bootstrap_alpha(ranks, iterations, seed))
}
