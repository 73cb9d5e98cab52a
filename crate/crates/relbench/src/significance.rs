//! Two-sample tests used to compare bootstrap distributions of alpha.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use relbench_core::stats::{mean, AlphaReport};

use crate::{Error, Result};

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn need(x: &[f64], n: usize) -> Result<()> {
    if x.len() < n {
        return Err(Error::SampleTooSmall(format!(
            "{} values, at least {n} needed",
            x.len()
        )));
    }
    Ok(())
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

/// Shapiro-Wilk W and p-value (Royston's AS R94 approximation), for
/// `3 <= n <= 5000`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64)> {
    const SMALL: f64 = 1e-19;
    const G: [f64; 2] = [-2.273, 0.459];
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    need(sample, 3)?;
    let n = sample.len();
    if n > 5000 {
        return Err(Error::Core(relbench_core::Error::Invalid(format!(
            "Shapiro-Wilk supports at most 5000 values, got {n}"
        ))));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range < SMALL {
        return Err(Error::ConstantSample);
    }

    // coefficients for the lower half, a[i] > 0
    let an = n as f64;
    let half = n / 2;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let norm = std_normal();
        let an25 = an + 0.25;
        let m: Vec<f64> = (1..=half)
            .map(|i| norm.inverse_cdf((i as f64 - 0.375) / an25))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (i1, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in i1..half {
            a[i] = -m[i] / fac;
        }
    }

    // W is the squared correlation of the sorted data with the
    // antisymmetric coefficient vector
    let coef = |i: usize| -> f64 {
        let j = n - 1 - i;
        if i < j {
            -a[i]
        } else if i > j {
            a[j]
        } else {
            0.0
        }
    };
    let sa = (0..n).map(coef).sum::<f64>() / an;
    let sx = x.iter().map(|v| v / range).sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        let asa = coef(i) - sa;
        let xsx = xi / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    if n == 3 {
        const PI6: f64 = 6.0 / std::f64::consts::PI;
        const STQR: f64 = std::f64::consts::FRAC_PI_3;
        let p = (PI6 * (w.sqrt().asin() - STQR)).max(0.0);
        return Ok((w, p));
    }
    let mut y = w1.ln();
    let lxx = an.ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return Ok((w, 1e-99));
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        (poly(&C5, lxx), poly(&C6, lxx).exp())
    };
    let p = 1.0 - std_normal().cdf((y - m) / s);
    Ok((w, p))
}

/// Mean-centered Levene statistic for two samples and its F(1, n-2)
/// upper-tail p-value.
pub fn levene(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    need(a, 2)?;
    need(b, 2)?;
    let dev = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m).abs()).collect::<Vec<_>>()
    };
    let (za, zb) = (dev(a), dev(b));
    let (ma, mb) = (mean(&za), mean(&zb));
    let n = (a.len() + b.len()) as f64;
    let grand = (za.iter().sum::<f64>() + zb.iter().sum::<f64>()) / n;
    let between = a.len() as f64 * (ma - grand).powi(2) + b.len() as f64 * (mb - grand).powi(2);
    let within: f64 = za.iter().map(|z| (z - ma).powi(2)).sum::<f64>()
        + zb.iter().map(|z| (z - mb).powi(2)).sum::<f64>();
    let df2 = n - 2.0;
    if within == 0.0 {
        return Ok(if between == 0.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) });
    }
    let stat = df2 * between / within;
    let f = FisherSnedecor::new(1.0, df2).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((stat, f.sf(stat)))
}

/// Two-sided two-sample t-test: pooled variance when `equal_variance`,
/// Welch's otherwise.
pub fn t_test(a: &[f64], b: &[f64], equal_variance: bool) -> Result<(f64, f64)> {
    need(a, 2)?;
    need(b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a), variance(b));
    let diff = mean(a) - mean(b);
    let (se, df) = if equal_variance {
        let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
        ((sp2 * (1.0 / na + 1.0 / nb)).sqrt(), na + nb - 2.0)
    } else {
        let (qa, qb) = (va / na, vb / nb);
        let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
        ((qa + qb).sqrt(), df)
    };
    if se == 0.0 {
        return Ok(if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        });
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((t, (2.0 * dist.sf(t.abs())).min(1.0)))
}

/// Largest combined size for which the exact distribution is enumerated.
pub const MANN_WHITNEY_EXACT_MAX: usize = 16;

/// Midranks of the pooled sample.
fn pooled_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut s = 0;
    while s < idx.len() {
        let mut e = s + 1;
        while e < idx.len() && values[idx[e]] == values[idx[s]] {
            e += 1;
        }
        let r = (s + 1 + e) as f64 / 2.0;
        for &i in &idx[s..e] {
            ranks[i] = r;
        }
        ties.push(e - s);
        s = e;
    }
    (ranks, ties)
}

/// Mann-Whitney U of the first sample and the two-sided p-value. Exact
/// permutation distribution of the midrank sums when the combined size is
/// at most [`MANN_WHITNEY_EXACT_MAX`], otherwise the normal approximation
/// with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    need(a, 1)?;
    need(b, 1)?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = pooled_ranks(&pooled);
    let base = (na * (na + 1)) as f64 / 2.0;
    let u1 = ranks[..na].iter().sum::<f64>() - base;
    let mu = (na * nb) as f64 / 2.0;
    let n = na + nb;

    if n <= MANN_WHITNEY_EXACT_MAX {
        let obs = (u1 - mu).abs();
        let (mut hit, mut total) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            let r: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            total += 1;
            if ((r - base) - mu).abs() >= obs - 1e-9 {
                hit += 1;
            }
        }
        return Ok((u1, hit as f64 / total as f64));
    }

    let nf = n as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
    let s = ((na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term)).sqrt();
    if s == 0.0 {
        return Ok((u1, 1.0));
    }
    let u = u1.max((na * nb) as f64 - u1);
    let z = (u - mu - 0.5) / s;
    let p = 2.0 * (1.0 - std_normal().cdf(z));
    Ok((u1, p.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    MannWhitney,
    Student,
    Welch,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::MannWhitney => "mann-whitney",
            TestKind::Student => "student-t",
            TestKind::Welch => "welch-t",
        }
    }
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Outcome of comparing a candidate setting with a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub baseline_mean: f64,
    pub candidate_mean: f64,
    /// `candidate_mean - baseline_mean`
    pub delta: f64,
}

impl Comparison {
    /// `"28.9 (7.1 → 36.0)"`: the variation then baseline → candidate, ×100.
    pub fn render(&self) -> String {
        format!(
            "{:.1} ({:.1} → {:.1})",
            100.0 * self.delta,
            100.0 * self.baseline_mean,
            100.0 * self.candidate_mean
        )
    }
}

fn looks_normal(x: &[f64]) -> bool {
    matches!(shapiro_wilk(x), Ok((_, p)) if p >= SIGNIFICANCE_LEVEL)
}

/// Shapiro-Wilk on both samples; Mann-Whitney if either looks
/// non-normal (or cannot be tested), otherwise Levene followed by the
/// pooled or Welch t-test.
pub fn compare_samples(baseline: &[f64], candidate: &[f64]) -> Result<Comparison> {
    let (test, (statistic, p_value)) = if !(looks_normal(baseline) && looks_normal(candidate)) {
        (TestKind::MannWhitney, mann_whitney_u(candidate, baseline)?)
    } else {
        let (_, p_lev) = levene(candidate, baseline)?;
        if p_lev >= SIGNIFICANCE_LEVEL {
            (TestKind::Student, t_test(candidate, baseline, true)?)
        } else {
            (TestKind::Welch, t_test(candidate, baseline, false)?)
        }
    };
    let (bm, cm) = (mean(baseline), mean(candidate));
    Ok(Comparison {
        test,
        statistic,
        p_value,
        significant: p_value < SIGNIFICANCE_LEVEL,
        baseline_mean: bm,
        candidate_mean: cm,
        delta: cm - bm,
    })
}

pub fn compare_settings(baseline: &AlphaReport, candidate: &AlphaReport) -> Result<Comparison> {
    compare_samples(&baseline.bootstrap, &candidate.bootstrap)
}
