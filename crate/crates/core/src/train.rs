//! The eight training settings and the SGD training step.
//!
//! A setting is a combination of three switches on top of plain
//! cross-entropy training: FP (add a faithfulness-perturbed batch), AP
//! (add an adversarially perturbed batch) and FL (use the adaptive focal
//! loss for every batch). With both FP and AP, a fourth batch is built by
//! attacking the FP batch. The loss of a step is the sum of the per-batch
//! mean losses.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::attack::{pgd_attack, PgdParams};
use crate::loss::{self, LossKind};
use crate::nn::{Gradients, ToyNet};
use crate::perturb::{sample_fp_batch, BlurParams, FpConfig, PatchGrid, Upsample};
use crate::saliency::saliency_proxy;
use crate::{Error, Image, Result, Rng, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TrainingSetting {
    pub fp: bool,
    pub ap: bool,
    pub fl: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchKind {
    Regular,
    Fp,
    Ap,
    FpAp,
}

impl BatchKind {
    pub fn name(self) -> &'static str {
        match self {
            BatchKind::Regular => "regular",
            BatchKind::Fp => "fp",
            BatchKind::Ap => "ap",
            BatchKind::FpAp => "fp+ap",
        }
    }
}

impl TrainingSetting {
    pub const BASELINE: Self = Self {
        fp: false,
        ap: false,
        fl: false,
    };

    /// All eight settings, CE rows first.
    pub fn all() -> [Self; 8] {
        let mut out = [Self::BASELINE; 8];
        for (i, s) in out.iter_mut().enumerate() {
            s.fl = i >= 4;
            let r = i % 4;
            s.fp = r == 1 || r == 3;
            s.ap = r == 2 || r == 3;
        }
        out
    }

    pub fn loss_kind(&self) -> LossKind {
        if self.fl {
            LossKind::FocalAdaptive
        } else {
            LossKind::CrossEntropy
        }
    }

    /// Batches fed at every step.
    pub fn batches(&self) -> Vec<BatchKind> {
        let mut b = alloc::vec![BatchKind::Regular];
        if self.fp {
            b.push(BatchKind::Fp);
        }
        if self.ap {
            b.push(BatchKind::Ap);
        }
        if self.fp && self.ap {
            b.push(BatchKind::FpAp);
        }
        b
    }

    pub fn name(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if self.fl {
            parts.push("FL");
        }
        if self.fp {
            parts.push("FP");
        }
        if self.ap {
            parts.push("AP");
        }
        if parts.is_empty() {
            "Baseline".into()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for TrainingSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for TrainingSetting {
    type Err = Error;

    /// Accepts `baseline` or `+`-joined flags in any order, e.g. `fp+fl`.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Self::BASELINE;
        let lower = s.trim().to_ascii_lowercase();
        if lower == "baseline" || lower == "ce" {
            return Ok(out);
        }
        for tok in lower.split('+').map(str::trim) {
            let flag = match tok {
                "fp" => &mut out.fp,
                "ap" => &mut out.ap,
                "fl" => &mut out.fl,
                _ => return Err(Error::Invalid(format!("unknown training setting `{s}`"))),
            };
            if *flag {
                return Err(Error::Invalid(format!("duplicate flag in `{s}`")));
            }
            *flag = true;
        }
        Ok(out)
    }
}

/// Optimizer and perturbation hyper-parameters. The learning rate is
/// sized for the toy network trained from scratch with batch-mean losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub pgd: PgdParams,
    pub upsample: Upsample,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-8,
            pgd: PgdParams::default(),
            upsample: Upsample::Bilinear,
        }
    }
}

/// SGD with momentum and L2 weight decay (`v = mu v + g + wd w; w -= lr v`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    velocity: ToyNet<f32>,
}

impl Sgd {
    pub fn new(net: &ToyNet<f32>) -> Self {
        Self {
            velocity: ToyNet::zeros(net.in_channels(), net.classes()),
        }
    }

    pub fn step(&mut self, net: &mut ToyNet<f32>, grad: &ToyNet<f32>, cfg: &TrainConfig) {
        let params = net.params_mut();
        let vel = self.velocity.params_mut();
        for ((w, v), g) in params.into_iter().zip(vel).zip(grad.params()) {
            for ((wv, vv), &gv) in w.iter_mut().zip(v.iter_mut()).zip(g) {
                let d = gv + cfg.weight_decay * *wv;
                *vv = cfg.momentum * *vv + d;
                *wv -= cfg.lr * *vv;
            }
        }
    }
}

/// Loss of each batch fed during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub losses: Vec<(BatchKind, f64)>,
}

impl StepReport {
    pub fn total(&self) -> f64 {
        self.losses.iter().map(|(_, l)| l).sum()
    }
}

/// Mean loss over a batch, its mean parameter gradient and, on request,
/// the saliency proxy of every image.
fn batch_gradient(
    net: &ToyNet<f32>,
    images: &[Image],
    labels: &[usize],
    kind: LossKind,
    want_proxy: bool,
) -> Result<(f64, ToyNet<f32>, Vec<SaliencyMap>)> {
    let mut acc = ToyNet::zeros(net.in_channels(), net.classes());
    let mut total = 0.0f64;
    let mut proxies = Vec::new();
    let scale = 1.0 / images.len() as f32;
    for (img, &label) in images.iter().zip(labels) {
        let fwd = net.forward(img)?;
        if label >= net.classes() {
            return Err(Error::Invalid(format!("label {label} outside [0, {})", net.classes())));
        }
        if want_proxy {
            proxies.push(saliency_proxy(&fwd));
        }
        let (l, dlogits) = loss::loss_and_logit_grad(fwd.logits(), label, kind);
        let Gradients { params, .. } = net.backward(&fwd, &dlogits);
        acc.add_scaled(&params, scale);
        total += f64::from(l);
    }
    Ok((total / images.len() as f64, acc, proxies))
}

fn fp_config(net_input: &Image, cfg: &TrainConfig) -> FpConfig {
    FpConfig {
        grid: PatchGrid::new(net_input.height() / 4, net_input.width() / 4),
        blur: BlurParams::for_height(net_input.height()),
        upsample: cfg.upsample,
    }
}

fn attack_batch(
    net: &ToyNet<f32>,
    images: &[Image],
    labels: &[usize],
    kind: LossKind,
    pgd: PgdParams,
) -> Result<Vec<Image>> {
    images
        .iter()
        .zip(labels)
        .map(|(img, &y)| pgd_attack(net, img, y, kind, pgd))
        .collect()
}

/// One optimizer step under `setting`. FP images reuse the labels of their
/// source images; PGD maximizes the setting's own loss.
pub fn train_step(
    net: &mut ToyNet<f32>,
    opt: &mut Sgd,
    cfg: &TrainConfig,
    images: &[Image],
    labels: &[usize],
    setting: TrainingSetting,
    rng: &mut Rng,
) -> Result<StepReport> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "batch needs matching non-empty images and labels ({} vs {})",
            images.len(),
            labels.len()
        )));
    }
    let kind = setting.loss_kind();
    let mut losses = Vec::new();
    let (l, mut grad, proxies) = batch_gradient(net, images, labels, kind, setting.fp)?;
    losses.push((BatchKind::Regular, l));

    let mut fp_images = Vec::new();
    if setting.fp {
        let cfg_fp = fp_config(&images[0], cfg);
        fp_images = sample_fp_batch(images, &proxies, &cfg_fp, rng)?
            .into_iter()
            .map(|(img, _)| img)
            .collect();
        let (l, g, _) = batch_gradient(net, &fp_images, labels, kind, false)?;
        grad.add_scaled(&g, 1.0);
        losses.push((BatchKind::Fp, l));
    }
    if setting.ap {
        let adv = attack_batch(net, images, labels, kind, cfg.pgd)?;
        let (l, g, _) = batch_gradient(net, &adv, labels, kind, false)?;
        grad.add_scaled(&g, 1.0);
        losses.push((BatchKind::Ap, l));
    }
    if setting.fp && setting.ap {
        let adv = attack_batch(net, &fp_images, labels, kind, cfg.pgd)?;
        let (l, g, _) = batch_gradient(net, &adv, labels, kind, false)?;
        grad.add_scaled(&g, 1.0);
        losses.push((BatchKind::FpAp, l));
    }
    opt.step(net, &grad, cfg);
    Ok(StepReport { losses })
}

/// What a training run optimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Setting(TrainingSetting),
    /// the interpolated CE loss at `beta`
    Interp(f64),
}

/// One pass over `data` in a shuffled order, in batches of `batch_size`
/// (the last batch may be smaller). Returns the mean step loss.
pub fn train_epoch(
    net: &mut ToyNet<f32>,
    opt: &mut Sgd,
    cfg: &TrainConfig,
    data: &[(Image, usize)],
    batch_size: usize,
    objective: Objective,
    rng: &mut Rng,
) -> Result<f64> {
    if batch_size == 0 || data.is_empty() {
        return Err(Error::Invalid("training needs data and a positive batch size".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let mut total = 0.0;
    let mut steps = 0;
    for chunk in order.chunks(batch_size) {
        let images: Vec<Image> = chunk.iter().map(|&i| data[i].0.clone()).collect();
        let labels: Vec<usize> = chunk.iter().map(|&i| data[i].1).collect();
        total += match objective {
            Objective::Setting(s) => train_step(net, opt, cfg, &images, &labels, s, rng)?.total(),
            Objective::Interp(beta) => train_step_interp(net, opt, cfg, &images, &labels, beta, rng)?,
        };
        steps += 1;
    }
    Ok(total / steps as f64)
}

/// `(2 - beta) * CE(regular) + beta * CE(perturbed)`, using batch means.
pub fn interp_loss(
    net: &ToyNet<f32>,
    images: &[Image],
    fp_images: &[Image],
    labels: &[usize],
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let mean = |imgs: &[Image]| -> Result<f64> {
        let mut s = 0.0;
        for (img, &y) in imgs.iter().zip(labels) {
            s += f64::from(net.loss(img, y, LossKind::CrossEntropy)?);
        }
        Ok(s / imgs.len() as f64)
    };
    Ok((2.0 - beta) * mean(images)? + beta * mean(fp_images)?)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BadBeta(beta));
    }
    Ok(())
}

/// One optimizer step on the interpolated loss. Returns the loss value.
pub fn train_step_interp(
    net: &mut ToyNet<f32>,
    opt: &mut Sgd,
    cfg: &TrainConfig,
    images: &[Image],
    labels: &[usize],
    beta: f64,
    rng: &mut Rng,
) -> Result<f64> {
    check_beta(beta)?;
    if images.is_empty() || images.len() != labels.len() {
        return Err(Error::Invalid("empty or mismatched batch".into()));
    }
    let kind = LossKind::CrossEntropy;
    let (l_reg, g_reg, proxies) = batch_gradient(net, images, labels, kind, true)?;
    let fp: Vec<Image> = sample_fp_batch(images, &proxies, &fp_config(&images[0], cfg), rng)?
        .into_iter()
        .map(|(img, _)| img)
        .collect();
    let (l_fp, g_fp, _) = batch_gradient(net, &fp, labels, kind, false)?;
    let mut grad = ToyNet::zeros(net.in_channels(), net.classes());
    grad.add_scaled(&g_reg, (2.0 - beta) as f32);
    grad.add_scaled(&g_fp, beta as f32);
    opt.step(net, &grad, cfg);
    Ok((2.0 - beta) * l_reg + beta * l_fp)
}
