//! Post-hoc attribution methods.
//!
//! Every method returns a map on the patch grid of the metrics (8x8 for
//! 32x32 inputs). Pixel-level attributions are summed over channels and
//! average-pooled to that grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::nn::{Forward, Real, ToyNet, WIDTH};
use crate::oracle::ScoringOracle;
use crate::perturb::{upsample, PatchGrid, Upsample};
use crate::{Error, Image, Result, Rng, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    Cam,
    GradCam,
    IntegratedGradients,
    SmoothGrad,
    Occlusion,
    Rise,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Cam,
        MethodKind::GradCam,
        MethodKind::IntegratedGradients,
        MethodKind::SmoothGrad,
        MethodKind::Occlusion,
        MethodKind::Rise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Cam => "CAM",
            MethodKind::GradCam => "GradCAM",
            MethodKind::IntegratedGradients => "IG",
            MethodKind::SmoothGrad => "SmoothGrad",
            MethodKind::Occlusion => "Occlusion",
            MethodKind::Rise => "RISE",
        }
    }

    /// Needs the network's final feature maps.
    pub fn needs_features(self) -> bool {
        matches!(self, MethodKind::Cam | MethodKind::GradCam)
    }

    /// Needs input gradients.
    pub fn needs_gradients(self) -> bool {
        matches!(self, MethodKind::IntegratedGradients | MethodKind::SmoothGrad)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let l = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match l.as_str() {
            "cam" => MethodKind::Cam,
            "gradcam" | "gc" => MethodKind::GradCam,
            "ig" | "integratedgradients" => MethodKind::IntegratedGradients,
            "smoothgrad" | "sg" => MethodKind::SmoothGrad,
            "occlusion" => MethodKind::Occlusion,
            "rise" => MethodKind::Rise,
            _ => return Err(Error::Invalid(format!("unknown saliency method `{s}`"))),
        })
    }
}

/// Channel mean of the final post-ReLU feature maps.
pub fn saliency_proxy<T: Real>(fwd: &Forward<T>) -> SaliencyMap {
    let (h, w) = fwd.feature_grid();
    let cells = h * w;
    let a = fwd.feature_maps();
    let data = (0..cells)
        .map(|u| (0..WIDTH).map(|k| a[k * cells + u].as_f64()).sum::<f64>() / WIDTH as f64)
        .collect();
    SaliencyMap::new(h, w, data).expect("finite feature maps")
}

/// Class activation map: final feature maps weighted by the linear-layer
/// weights of `class`.
pub fn cam<T: Real>(net: &ToyNet<T>, img: &Image, class: usize) -> Result<SaliencyMap> {
    let fwd = net.forward(img)?;
    check_class(class, net.classes())?;
    let (h, w) = fwd.feature_grid();
    let cells = h * w;
    let a = fwd.feature_maps();
    let weights: Vec<f64> = (0..WIDTH).map(|k| net.fc_w[class * WIDTH + k].as_f64()).collect();
    let data = (0..cells)
        .map(|u| (0..WIDTH).map(|k| weights[k] * a[k * cells + u].as_f64()).sum())
        .collect();
    SaliencyMap::new(h, w, data)
}

/// `ReLU(sum_k alpha_k A_k)` with `alpha_k` the spatial mean of
/// `d y / d A_k`. `features` and `grads` are `[channels, rows, cols]`.
pub fn grad_cam_from_parts(
    features: &[f64],
    grads: &[f64],
    channels: usize,
    rows: usize,
    cols: usize,
) -> Result<SaliencyMap> {
    let cells = rows * cols;
    if features.len() != channels * cells || grads.len() != channels * cells {
        return Err(Error::DimMismatch(format!(
            "grad-cam parts for [{channels}, {rows}, {cols}]"
        )));
    }
    let alphas: Vec<f64> = grads
        .chunks_exact(cells)
        .map(|g| g.iter().sum::<f64>() / cells as f64)
        .collect();
    let data = (0..cells)
        .map(|u| {
            let s: f64 = (0..channels).map(|k| alphas[k] * features[k * cells + u]).sum();
            s.max(0.0)
        })
        .collect();
    SaliencyMap::new(rows, cols, data)
}

/// Grad-CAM on the network, differentiating the class logit.
pub fn grad_cam<T: Real>(net: &ToyNet<T>, img: &Image, class: usize) -> Result<SaliencyMap> {
    let fwd = net.forward(img)?;
    check_class(class, net.classes())?;
    let (h, w) = fwd.feature_grid();
    let feats: Vec<f64> = fwd.feature_maps().iter().map(|v| v.as_f64()).collect();
    let grads = net.logit_grad_wrt_features(class, h * w);
    grad_cam_from_parts(&feats, &grads, WIDTH, h, w)
}

fn check_class(class: usize, classes: usize) -> Result<()> {
    if class >= classes {
        return Err(Error::Invalid(format!("class {class} outside [0, {classes})")));
    }
    Ok(())
}

/// Sums `[H, W, C]` values over channels and averages them over each patch.
pub fn pool_to_grid(values: &[f64], img: &Image, grid: PatchGrid) -> Result<SaliencyMap> {
    let (ph, pw) = grid.patch_size(img)?;
    let (w, c) = (img.width(), img.channels());
    let mut out = vec![0.0; grid.cells()];
    for i in 0..img.height() {
        for j in 0..w {
            let s: f64 = values[(i * w + j) * c..(i * w + j + 1) * c].iter().sum();
            out[(i / ph) * grid.cols + j / pw] += s;
        }
    }
    let area = (ph * pw) as f64;
    out.iter_mut().for_each(|v| *v /= area);
    SaliencyMap::new(grid.rows, grid.cols, out)
}

/// Pixel-level integrated gradients with the midpoint Riemann rule:
/// `(x - b) * mean_s grad(b + (s + 1/2)/steps * (x - b))`.
pub fn integrated_gradients_pixels(
    oracle: &dyn ScoringOracle,
    img: &Image,
    baseline: &Image,
    class: usize,
    steps: usize,
) -> Result<Vec<f64>> {
    let grads = oracle.gradients().ok_or(Error::NoGradient)?;
    if !img.same_shape(baseline) {
        return Err(Error::DimMismatch("baseline and image shapes differ".into()));
    }
    if steps == 0 {
        return Err(Error::Invalid("integrated gradients needs steps >= 1".into()));
    }
    let x: Vec<f64> = img.data().iter().map(|&v| f64::from(v)).collect();
    let b: Vec<f64> = baseline.data().iter().map(|&v| f64::from(v)).collect();
    let mut acc = vec![0.0; x.len()];
    for s in 0..steps {
        let t = (s as f64 + 0.5) / steps as f64;
        let point: Vec<f32> = x
            .iter()
            .zip(&b)
            .map(|(&xv, &bv)| (bv + t * (xv - bv)) as f32)
            .collect();
        let point = Image::from_clipped(img.height(), img.width(), img.channels(), point)?;
        let (_, g) = grads.class_score_gradient(&point, class)?;
        acc.iter_mut().zip(&g).for_each(|(a, &gv)| *a += gv);
    }
    Ok(acc
        .iter()
        .zip(x.iter().zip(&b))
        .map(|(&a, (&xv, &bv))| (xv - bv) * a / steps as f64)
        .collect())
}

pub fn integrated_gradients(
    oracle: &dyn ScoringOracle,
    img: &Image,
    baseline: &Image,
    class: usize,
    steps: usize,
    grid: PatchGrid,
) -> Result<SaliencyMap> {
    let px = integrated_gradients_pixels(oracle, img, baseline, class, steps)?;
    pool_to_grid(&px, img, grid)
}

/// Mean absolute input gradient over noisy copies of the image. Noisy
/// pixels are clipped back to `[0, 1]`.
pub fn smoothgrad(
    oracle: &dyn ScoringOracle,
    img: &Image,
    class: usize,
    samples: usize,
    sigma: f64,
    grid: PatchGrid,
    rng: &mut Rng,
) -> Result<SaliencyMap> {
    let grads = oracle.gradients().ok_or(Error::NoGradient)?;
    if !(sigma >= 0.0) || samples == 0 {
        return Err(Error::Invalid(format!(
            "smoothgrad needs sigma >= 0 and samples >= 1 (sigma {sigma}, samples {samples})"
        )));
    }
    let mut acc = vec![0.0; img.data().len()];
    for _ in 0..samples {
        let noisy = if sigma == 0.0 {
            img.clone()
        } else {
            let data = img
                .data()
                .iter()
                .map(|&v| (f64::from(v) + sigma * rng.normal()) as f32)
                .collect();
            Image::from_clipped(img.height(), img.width(), img.channels(), data)?
        };
        let (_, g) = grads.class_score_gradient(&noisy, class)?;
        acc.iter_mut().zip(&g).for_each(|(a, &gv)| *a += gv.abs());
    }
    acc.iter_mut().for_each(|a| *a /= samples as f64);
    pool_to_grid(&acc, img, grid)
}

fn class_prob(probs: &[f64], class: usize) -> Result<f64> {
    probs
        .get(class)
        .copied()
        .ok_or_else(|| Error::Oracle(format!("class {class} missing from oracle response")))
}

/// `map[u] = y(img) - y(img with patch u zeroed)`, scored in one batch of
/// `H'W' + 1` images.
pub fn occlusion(
    oracle: &dyn ScoringOracle,
    img: &Image,
    class: usize,
    grid: PatchGrid,
) -> Result<SaliencyMap> {
    let mut batch = Vec::with_capacity(grid.cells() + 1);
    batch.push(img.clone());
    for u in 0..grid.cells() {
        batch.push(crate::perturb::replace_patches(img, None, grid, &[u])?);
    }
    let scores = oracle.score_batch(&batch)?;
    if scores.len() != batch.len() {
        return Err(Error::Oracle("oracle returned the wrong number of rows".into()));
    }
    let base = class_prob(&scores[0], class)?;
    let data = scores[1..]
        .iter()
        .map(|p| Ok(base - class_prob(p, class)?))
        .collect::<Result<Vec<f64>>>()?;
    SaliencyMap::new(grid.rows, grid.cols, data)
}

/// RISE parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiseParams {
    pub masks: usize,
    pub keep_prob: f64,
    /// masks scored per oracle batch
    pub batch: usize,
}

impl Default for RiseParams {
    fn default() -> Self {
        Self {
            masks: 1000,
            keep_prob: 0.5,
            batch: 50,
        }
    }
}

/// Randomized input sampling. Each mask is a Bernoulli(`keep_prob`) grid,
/// bilinearly upsampled and multiplied into the image. The estimate for
/// cell `u` is the mean score over masks whose grid keeps `u`, i.e.
/// `E[y M_u] / keep_prob` with the empirical keep rate in place of
/// `keep_prob`. Cells never kept get 0.
pub fn rise(
    oracle: &dyn ScoringOracle,
    img: &Image,
    class: usize,
    grid: PatchGrid,
    params: RiseParams,
    rng: &mut Rng,
) -> Result<SaliencyMap> {
    grid.patch_size(img)?;
    if !(params.keep_prob > 0.0 && params.keep_prob <= 1.0) || params.masks == 0 {
        return Err(Error::Invalid("RISE needs masks >= 1 and keep_prob in (0, 1]".into()));
    }
    let cells = grid.cells();
    let mut weighted = vec![0.0; cells];
    let mut kept = vec![0usize; cells];
    let chunk = params.batch.max(1);
    let mut done = 0;
    while done < params.masks {
        let n = chunk.min(params.masks - done);
        let mut grids = Vec::with_capacity(n);
        let mut batch = Vec::with_capacity(n);
        for _ in 0..n {
            let m: Vec<f64> = (0..cells)
                .map(|_| if rng.bernoulli(params.keep_prob) { 1.0 } else { 0.0 })
                .collect();
            batch.push(apply_grid_mask(img, &m, grid)?);
            grids.push(m);
        }
        let scores = oracle.score_batch(&batch)?;
        if scores.len() != n {
            return Err(Error::Oracle("oracle returned the wrong number of rows".into()));
        }
        for (m, p) in grids.iter().zip(&scores) {
            let y = class_prob(p, class)?;
            for u in 0..cells {
                if m[u] > 0.0 {
                    weighted[u] += y;
                    kept[u] += 1;
                }
            }
        }
        done += n;
    }
    let data = weighted
        .iter()
        .zip(&kept)
        .map(|(&s, &k)| if k == 0 { 0.0 } else { s / k as f64 })
        .collect();
    SaliencyMap::new(grid.rows, grid.cols, data)
}

/// Multiplies the image by a bilinearly upsampled low-resolution mask.
pub fn apply_grid_mask(img: &Image, mask: &[f64], grid: PatchGrid) -> Result<Image> {
    let low = SaliencyMap::new(grid.rows, grid.cols, mask.to_vec())?;
    let up = upsample(&low, img.height(), img.width(), Upsample::Bilinear)?;
    let c = img.channels();
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &p)| (up.data()[i / c] * f64::from(p)) as f32)
        .collect();
    Image::from_clipped(img.height(), img.width(), c, data)
}

/// Shared settings for [`explain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    pub grid: PatchGrid,
    pub ig_steps: usize,
    pub smooth_samples: usize,
    pub smooth_sigma: f64,
    pub rise: RiseParams,
}

impl ExplainConfig {
    /// Defaults for images of the given size: 8x8 grid at 32x32.
    pub fn for_image(height: usize, width: usize) -> Self {
        Self {
            grid: PatchGrid::new(height / 4, width / 4),
            ig_steps: 32,
            smooth_samples: 30,
            smooth_sigma: 0.15,
            rise: RiseParams::default(),
        }
    }
}

/// Runs one method. `net` is required for the feature-map methods; the
/// gradient methods need `oracle.gradients()`. The IG baseline is black.
pub fn explain(
    method: MethodKind,
    net: Option<&ToyNet<f32>>,
    oracle: &dyn ScoringOracle,
    img: &Image,
    class: usize,
    cfg: &ExplainConfig,
    rng: &mut Rng,
) -> Result<SaliencyMap> {
    match method {
        MethodKind::Cam => cam(net.ok_or(Error::NoGradient)?, img, class),
        MethodKind::GradCam => grad_cam(net.ok_or(Error::NoGradient)?, img, class),
        MethodKind::IntegratedGradients => {
            let black = Image::filled(img.height(), img.width(), img.channels(), 0.0)?;
            integrated_gradients(oracle, img, &black, class, cfg.ig_steps, cfg.grid)
        }
        MethodKind::SmoothGrad => smoothgrad(
            oracle,
            img,
            class,
            cfg.smooth_samples,
            cfg.smooth_sigma,
            cfg.grid,
            rng,
        ),
        MethodKind::Occlusion => occlusion(oracle, img, class, cfg.grid),
        MethodKind::Rise => rise(oracle, img, class, cfg.grid, cfg.rise, rng),
    }
}
