//! Adaptive calibration error and accuracy on regular and FP images.

use alloc::format;
use alloc::vec::Vec;

use crate::oracle::ScoringOracle;
use crate::perturb::{sample_fp_batch, FpConfig};
use crate::{Error, Image, Result, Rng, SaliencyMap};

pub const DEFAULT_BINS: usize = 15;

/// AdaECE: samples sorted by confidence are split into `bins` groups whose
/// sizes differ by at most one (larger groups first), then
/// `sum |B|/n * |acc(B) - conf(B)|`.
pub fn ada_ece(confidences: &[f64], correct: &[bool], bins: usize) -> Result<f64> {
    let n = confidences.len();
    if correct.len() != n {
        return Err(Error::DimMismatch(format!(
            "{n} confidences but {} correctness flags",
            correct.len()
        )));
    }
    if bins == 0 || n < bins {
        return Err(Error::TooFewSamples { n, bins });
    }
    if confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::Invalid("confidences must lie in [0, 1]".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        confidences[a]
            .total_cmp(&confidences[b])
            .then(correct[a].cmp(&correct[b]))
    });
    let (base, extra) = (n / bins, n % bins);
    let mut start = 0;
    let mut ece = 0.0;
    for b in 0..bins {
        let size = base + usize::from(b < extra);
        let group = &idx[start..start + size];
        let conf: f64 = group.iter().map(|&i| confidences[i]).sum();
        let hits = group.iter().filter(|&&i| correct[i]).count() as f64;
        // |B|/n * |acc - conf| with the bin size cancelled
        ece += (hits - conf).abs();
        start += size;
    }
    Ok(ece / n as f64)
}

pub fn accuracy(correct: &[bool]) -> f64 {
    correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64
}

/// Max-probability confidence and correctness of each prediction.
pub fn predictions(probs: &[Vec<f64>], labels: &[usize]) -> (Vec<f64>, Vec<bool>) {
    probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let (arg, conf) = p
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
            (conf, arg == y)
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibReport {
    pub ece_regular: f64,
    pub ece_fp: f64,
    pub acc_regular: f64,
    pub acc_fp: f64,
    pub bins: usize,
}

/// Scores the images and one FP-perturbed copy of each, drawn with `rng`
/// from the given saliency maps.
pub fn eval_regular_vs_fp(
    oracle: &dyn ScoringOracle,
    images: &[Image],
    labels: &[usize],
    maps: &[SaliencyMap],
    fp: &FpConfig,
    bins: usize,
    rng: &mut Rng,
) -> Result<CalibReport> {
    if images.len() != labels.len() {
        return Err(Error::DimMismatch(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let fp_images: Vec<Image> = sample_fp_batch(images, maps, fp, rng)?
        .into_iter()
        .map(|(img, _)| img)
        .collect();
    let (conf_r, ok_r) = predictions(&oracle.score_batch(images)?, labels);
    let (conf_f, ok_f) = predictions(&oracle.score_batch(&fp_images)?, labels);
    Ok(CalibReport {
        ece_regular: ada_ece(&conf_r, &ok_r, bins)?,
        ece_fp: ada_ece(&conf_f, &ok_f, bins)?,
        acc_regular: accuracy(&ok_r),
        acc_fp: accuracy(&ok_f),
        bins,
    })
}
