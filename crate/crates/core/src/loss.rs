//! Cross-entropy and adaptive focal loss, plus their gradients with respect
//! to the logits.

use alloc::vec::Vec;


use crate::nn::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    CrossEntropy,
    /// Focal loss with the confidence-dependent gamma of [`adaptive_gamma`].
    FocalAdaptive,
}

/// `-ln p`
pub fn cross_entropy(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::BadP(p));
    }
    Ok(-p.ln())
}

/// `-(1 - p)^gamma * ln p`
pub fn focal_loss(p: f64, gamma: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::BadP(p));
    }
    if gamma == 0.0 {
        return Ok(-p.ln());
    }
    Ok(-(1.0 - p).powf(gamma) * p.ln())
}

/// Two-threshold schedule: gamma 5 below confidence 0.2, gamma 3 otherwise.
pub fn adaptive_gamma(p: f64) -> f64 {
    if p < 0.2 {
        5.0
    } else {
        3.0
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// `ln softmax(logits)[label]`
pub fn log_prob<T: Real>(logits: &[T], label: usize) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits
        .iter()
        .map(|&z| (z - max).exp())
        .fold(T::zero(), |a, b| a + b)
        .ln()
        + max;
    logits[label] - lse
}

/// Loss value and its gradient with respect to the logits.
pub fn loss_and_logit_grad<T: Real>(logits: &[T], label: usize, kind: LossKind) -> (T, Vec<T>) {
    let probs = softmax(logits);
    let logp = log_prob(logits, label);
    let p = probs[label];
    match kind {
        LossKind::CrossEntropy => {
            let grad = probs
                .iter()
                .enumerate()
                .map(|(j, &pj)| if j == label { pj - T::one() } else { pj })
                .collect();
            (-logp, grad)
        }
        LossKind::FocalAdaptive => {
            // gamma is piecewise constant in p, so it carries no gradient
            let gamma = T::of(adaptive_gamma(p.to_f64().unwrap_or(0.0)));
            let q = T::one() - p;
            let loss = -q.powf(gamma) * logp;
            // dL/dz_j = [gamma q^(gamma-1) p ln p - q^gamma] (delta_jy - p_j)
            let coef = gamma * q.powf(gamma - T::one()) * p * logp - q.powf(gamma);
            let grad = probs
                .iter()
                .enumerate()
                .map(|(j, &pj)| {
                    let delta = if j == label { T::one() } else { T::zero() };
                    coef * (delta - pj)
                })
                .collect();
            (loss, grad)
        }
    }
}
