//! The classifier abstraction used by saliency methods and metrics.

use alloc::format;
use alloc::vec::Vec;

use crate::loss::{self, LossKind};
use crate::nn::{Real, ToyNet};
use crate::{Error, Image, Result};

/// Anything that maps an image to a class-probability vector.
pub trait ScoringOracle {
    fn num_classes(&self) -> usize;

    /// One probability vector per image, in input order.
    fn score_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>>;

    fn score(&self, img: &Image) -> Result<Vec<f64>> {
        let mut out = self.score_batch(core::slice::from_ref(img))?;
        out.pop().ok_or_else(|| Error::Oracle("empty response".into()))
    }

    /// Probability of one class.
    fn class_score(&self, img: &Image, class: usize) -> Result<f64> {
        let probs = self.score(img)?;
        probs.get(class).copied().ok_or_else(|| {
            Error::Oracle(format!("class {class} outside a {}-class response", probs.len()))
        })
    }

    /// Gradient access, when the oracle is differentiable.
    fn gradients(&self) -> Option<&dyn GradientOracle> {
        None
    }
}

/// Input gradients for attribution methods and attacks.
pub trait GradientOracle {
    /// The explained score of `class` and its gradient with respect to the
    /// image pixels, in `[H, W, C]` layout.
    fn class_score_gradient(&self, img: &Image, class: usize) -> Result<(f64, Vec<f64>)>;

    /// Training loss of `(img, label)` and its input gradient.
    fn loss_gradient(&self, img: &Image, label: usize, kind: LossKind) -> Result<(f64, Vec<f64>)>;
}

impl<O: ScoringOracle + ?Sized> ScoringOracle for &O {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn score_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        (**self).score_batch(images)
    }
    fn score(&self, img: &Image) -> Result<Vec<f64>> {
        (**self).score(img)
    }
    fn gradients(&self) -> Option<&dyn GradientOracle> {
        (**self).gradients()
    }
}

impl<T: Real> ScoringOracle for ToyNet<T> {
    fn num_classes(&self) -> usize {
        self.classes()
    }

    fn score_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        images
            .iter()
            .map(|img| Ok(self.forward(img)?.probs_f64()))
            .collect()
    }

    fn gradients(&self) -> Option<&dyn GradientOracle> {
        Some(self)
    }
}

/// For the network, the explained score is the softmax probability.
impl<T: Real> GradientOracle for ToyNet<T> {
    fn class_score_gradient(&self, img: &Image, class: usize) -> Result<(f64, Vec<f64>)> {
        let (p, g) = self.prob_grad(img, class)?;
        Ok((p.as_f64(), g.input.iter().map(|v| v.as_f64()).collect()))
    }

    fn loss_gradient(&self, img: &Image, label: usize, kind: LossKind) -> Result<(f64, Vec<f64>)> {
        let (l, g) = self.loss_grad(img, label, kind)?;
        Ok((l.as_f64(), g.input.iter().map(|v| v.as_f64()).collect()))
    }
}

/// Softmax regression on raw pixels: `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `[classes, inputs]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if bias.is_empty() || !weights.len().is_multiple_of(bias.len()) {
            return Err(Error::DimMismatch(format!(
                "{} weights for {} classes",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.len() / self.bias.len()
    }

    pub fn logits(&self, img: &Image) -> Result<Vec<f64>> {
        let n = self.inputs();
        if img.data().len() != n {
            return Err(Error::DimMismatch(format!(
                "linear model takes {n} inputs, image has {}",
                img.data().len()
            )));
        }
        Ok(self
            .weights
            .chunks_exact(n)
            .zip(&self.bias)
            .map(|(row, &b)| {
                row.iter()
                    .zip(img.data())
                    .fold(b, |s, (&w, &x)| s + w * f64::from(x))
            })
            .collect())
    }
}

impl ScoringOracle for LinearModel {
    fn num_classes(&self) -> usize {
        self.bias.len()
    }

    fn score_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        images
            .iter()
            .map(|img| Ok(loss::softmax(&self.logits(img)?)))
            .collect()
    }

    fn gradients(&self) -> Option<&dyn GradientOracle> {
        Some(self)
    }
}

impl GradientOracle for LinearModel {
    fn class_score_gradient(&self, img: &Image, class: usize) -> Result<(f64, Vec<f64>)> {
        let p = loss::softmax(&self.logits(img)?);
        let n = self.inputs();
        let mut g = alloc::vec![0.0; n];
        for (j, row) in self.weights.chunks_exact(n).enumerate() {
            let d = p[class] * (if j == class { 1.0 } else { 0.0 } - p[j]);
            g.iter_mut().zip(row).for_each(|(gv, &w)| *gv += d * w);
        }
        Ok((p[class], g))
    }

    fn loss_gradient(&self, img: &Image, label: usize, kind: LossKind) -> Result<(f64, Vec<f64>)> {
        let z = self.logits(img)?;
        let (l, dz) = loss::loss_and_logit_grad(&z, label, kind);
        let n = self.inputs();
        let mut g = alloc::vec![0.0; n];
        for (row, &d) in self.weights.chunks_exact(n).zip(&dz) {
            g.iter_mut().zip(row).for_each(|(gv, &w)| *gv += d * w);
        }
        Ok((l, g))
    }
}

/// Wraps a closure as a gradient-free oracle.
pub struct FnOracle<F> {
    classes: usize,
    f: F,
}

impl<F: Fn(&Image) -> Vec<f64>> FnOracle<F> {
    pub fn new(classes: usize, f: F) -> Self {
        Self { classes, f }
    }
}

impl<F> core::fmt::Debug for FnOracle<F> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnOracle").field("classes", &self.classes).finish()
    }
}

impl<F: Fn(&Image) -> Vec<f64>> ScoringOracle for FnOracle<F> {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn score_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        Ok(images.iter().map(|img| (self.f)(img)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    #[test]
    fn toy_net_scores_are_stochastic() {
        let net: ToyNet = ToyNet::init(3, 6, &mut Rng::new(11));
        let mut rng = Rng::new(12);
        let img = Image::new(16, 16, 3, (0..768).map(|_| rng.next_f64() as f32).collect()).unwrap();
        let p = net.score(&img).unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(net.score(&img).unwrap(), p);
        assert!(net.gradients().is_some());
    }

    #[test]
    fn fn_oracle_has_no_gradients() {
        let o = FnOracle::new(2, |_: &Image| alloc::vec![0.5, 0.5]);
        assert!(o.gradients().is_none());
        let img = Image::filled(4, 4, 1, 0.2).unwrap();
        assert_eq!(o.class_score(&img, 1).unwrap(), 0.5);
        assert!(o.class_score(&img, 2).is_err());
    }

    #[test]
    fn linear_model_gradient_matches_differences() {
        let mut rng = Rng::new(5);
        let m = LinearModel::new((0..3 * 12).map(|_| rng.normal()).collect(), alloc::vec![0.1, 0.0, -0.2]).unwrap();
        let img = Image::new(2, 2, 3, (0..12).map(|i| 0.05 + i as f32 * 0.07).collect()).unwrap();
        let (_, g) = m.class_score_gradient(&img, 2).unwrap();
        let x: Vec<f64> = img.data().iter().map(|&v| f64::from(v)).collect();
        let p = |x: &[f64]| {
            let z: Vec<f64> = m
                .weights
                .chunks_exact(12)
                .zip(&m.bias)
                .map(|(r, b)| b + r.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
                .collect();
            loss::softmax(&z)[2]
        };
        for i in 0..12 {
            let mut xp = x.clone();
            xp[i] += 1e-6;
            let mut xm = x.clone();
            xm[i] -= 1e-6;
            assert!(((p(&xp) - p(&xm)) / 2e-6 - g[i]).abs() < 1e-8);
        }
    }
}
