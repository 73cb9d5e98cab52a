//! Projected gradient descent (L-infinity) attack.

use alloc::vec::Vec;

use crate::loss::LossKind;
use crate::oracle::ScoringOracle;
use crate::{Error, Image, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgdParams {
    pub steps: usize,
    pub step_size: f64,
    pub eps: f64,
}

impl Default for PgdParams {
    fn default() -> Self {
        Self {
            steps: 4,
            step_size: 2.0 / 255.0,
            eps: 1.0 / 255.0,
        }
    }
}

/// Maximizes `loss` around `img` with signed-gradient ascent steps, each
/// followed by projection onto the eps-ball and the `[0, 1]` box. Starts
/// from the clean image (no random start).
pub fn pgd_attack(
    oracle: &dyn ScoringOracle,
    img: &Image,
    label: usize,
    loss: LossKind,
    params: PgdParams,
) -> Result<Image> {
    let grads = oracle.gradients().ok_or(Error::NoGradient)?;
    let clean: Vec<f64> = img.data().iter().map(|&v| f64::from(v)).collect();
    let mut x = img.clone();
    for _ in 0..params.steps {
        let (_, g) = grads.loss_gradient(&x, label, loss)?;
        let data = x
            .data()
            .iter()
            .zip(&g)
            .zip(&clean)
            .map(|((&xv, &gv), &c)| {
                let stepped = f64::from(xv) + params.step_size * signum(gv);
                let projected = stepped.clamp(c - params.eps, c + params.eps).clamp(0.0, 1.0);
                projected as f32
            })
            .collect();
        x = Image::new(img.height(), img.width(), img.channels(), data)?;
    }
    let dist = f64::from(x.linf_distance(img));
    assert!(
        dist <= params.eps + 1e-7,
        "PGD left the eps-ball: {dist} > {}",
        params.eps
    );
    assert!(x.data().iter().all(|v| (0.0..=1.0).contains(v)));
    Ok(x)
}

fn signum(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
