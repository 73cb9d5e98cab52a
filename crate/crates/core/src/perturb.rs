//! Faithfulness perturbations: saliency-weighted masks, patch deletion and
//! insertion over a blurred base, and the random FP batch sampler used
//! during training.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


use crate::{Error, Image, Result, Rng, SaliencyMap};

/// The four faithfulness perturbation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FpKind {
    AdInspired,
    AddInspired,
    DeletionInspired,
    InsertionInspired,
}

impl FpKind {
    pub const ALL: [FpKind; 4] = [
        FpKind::AdInspired,
        FpKind::AddInspired,
        FpKind::DeletionInspired,
        FpKind::InsertionInspired,
    ];
}

/// Single-step masks built from the whole (upsampled) map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaliencyMaskKind {
    /// keep salient regions: `norm(upsamp(S)) * I`
    AdInspired,
    /// keep non-salient regions: `(1 - norm(upsamp(S))) * I`
    AddInspired,
}

/// Top-k patch masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchMaskKind {
    /// top-k patches set to black
    DeletionInspired,
    /// blurred image with the top-k patches restored
    InsertionInspired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Upsample {
    #[default]
    Bilinear,
    Nearest,
}

/// Partition of an image into `rows x cols` equal patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn of_map(s: &SaliencyMap) -> Self {
        Self::new(s.rows(), s.cols())
    }

    /// Patch `(height, width)` for an image, checking divisibility.
    pub fn patch_size(&self, img: &Image) -> Result<(usize, usize)> {
        if self.rows == 0
            || self.cols == 0
            || !img.height().is_multiple_of(self.rows)
            || !img.width().is_multiple_of(self.cols)
        {
            return Err(Error::BadDims(format!(
                "{}x{} image is not divisible into a {}x{} grid",
                img.height(),
                img.width(),
                self.rows,
                self.cols
            )));
        }
        Ok((img.height() / self.rows, img.width() / self.cols))
    }

    pub fn check_map(&self, s: &SaliencyMap) -> Result<()> {
        if s.rows() != self.rows || s.cols() != self.cols {
            return Err(Error::DimMismatch(format!(
                "saliency map {}x{} on a {}x{} grid",
                s.rows(),
                s.cols(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }
}

/// Gaussian blur strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurParams {
    pub sigma: f64,
    pub kernel: usize,
}

impl BlurParams {
    /// Kernel 11 and sigma 5 at 32 pixels, scaled linearly with image height.
    pub fn for_height(height: usize) -> Self {
        let scale = height as f64 / 32.0;
        let mut kernel = (11.0 * scale).round() as usize;
        if kernel.is_multiple_of(2) {
            kernel += 1;
        }
        Self {
            sigma: 5.0 * scale,
            kernel: kernel.max(3),
        }
    }
}

/// Min-max normalization to `[0, 1]`. A constant map becomes all ones.
pub fn minmax_norm(s: &SaliencyMap) -> SaliencyMap {
    let data = minmax_values(s.data());
    SaliencyMap::new(s.rows(), s.cols(), data).expect("normalized map keeps its shape")
}

fn minmax_values(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![1.0; values.len()];
    }
    values.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
}

/// Resizes a map to `height x width`. Bilinear uses the half-pixel
/// (align-corners = false) convention with edge clamping.
pub fn upsample(s: &SaliencyMap, height: usize, width: usize, mode: Upsample) -> Result<SaliencyMap> {
    if height < s.rows() || width < s.cols() {
        return Err(Error::BadDims(format!(
            "cannot upsample {}x{} to smaller {}x{}",
            s.rows(),
            s.cols(),
            height,
            width
        )));
    }
    let (rows, cols) = (s.rows(), s.cols());
    let mut out = Vec::with_capacity(height * width);
    match mode {
        Upsample::Nearest => {
            for i in 0..height {
                let si = i * rows / height;
                for j in 0..width {
                    out.push(s.at(si, j * cols / width));
                }
            }
        }
        Upsample::Bilinear => {
            let ys: Vec<(usize, usize, f64)> =
                (0..height).map(|i| bilinear_taps(i, height, rows)).collect();
            let xs: Vec<(usize, usize, f64)> =
                (0..width).map(|j| bilinear_taps(j, width, cols)).collect();
            for &(y0, y1, wy) in &ys {
                for &(x0, x1, wx) in &xs {
                    let top = s.at(y0, x0) * (1.0 - wx) + s.at(y0, x1) * wx;
                    let bottom = s.at(y1, x0) * (1.0 - wx) + s.at(y1, x1) * wx;
                    out.push(top * (1.0 - wy) + bottom * wy);
                }
            }
        }
    }
    SaliencyMap::new(height, width, out)
}

/// Source indices and interpolation weight for output coordinate `dst`.
fn bilinear_taps(dst: usize, out_len: usize, in_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let src = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
    let lo = (src.floor() as usize).min(in_len - 1);
    let hi = (lo + 1).min(in_len - 1);
    let w = if hi == lo { 0.0 } else { src - lo as f64 };
    (lo, hi, w)
}

/// Reflect-101 border index (`-1 -> 1`, `n -> n - 2`).
fn reflect(mut idx: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    loop {
        if idx < 0 {
            idx = -idx;
        } else if idx >= n {
            idx = 2 * (n - 1) - idx;
        } else {
            return idx as usize;
        }
    }
}

/// Normalized 1-D Gaussian kernel.
pub fn gaussian_kernel(sigma: f64, kernel: usize) -> Result<Vec<f64>> {
    if kernel < 3 || kernel.is_multiple_of(2) {
        return Err(Error::BadKernel(kernel));
    }
    if !(sigma > 0.0) {
        return Err(Error::Invalid(format!("blur sigma must be positive, got {sigma}")));
    }
    let r = (kernel / 2) as f64;
    let mut k: Vec<f64> = (0..kernel)
        .map(|i| {
            let x = i as f64 - r;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_blur(img: &Image, sigma: f64, kernel: usize) -> Result<Image> {
    let k = gaussian_kernel(sigma, kernel)?;
    let radius = (kernel / 2) as isize;
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let src = img.data();
    let mut tmp = vec![0.0f64; h * w * c];
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (t, &kv) in k.iter().enumerate() {
                    let jj = reflect(j as isize + t as isize - radius, w);
                    acc += kv * f64::from(src[(i * w + jj) * c + ch]);
                }
                tmp[(i * w + j) * c + ch] = acc;
            }
        }
    }
    let mut out = vec![0.0f32; h * w * c];
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (t, &kv) in k.iter().enumerate() {
                    let ii = reflect(i as isize + t as isize - radius, h);
                    acc += kv * tmp[(ii * w + j) * c + ch];
                }
                out[(i * w + j) * c + ch] = (acc as f32).clamp(0.0, 1.0);
            }
        }
    }
    Ok(img.with_data(out))
}

pub fn blur(img: &Image, params: BlurParams) -> Result<Image> {
    gaussian_blur(img, params.sigma, params.kernel)
}

/// Multiplies the image by the normalized upsampled map (or its complement),
/// broadcast over channels.
pub fn apply_saliency_mask(
    img: &Image,
    s: &SaliencyMap,
    kind: SaliencyMaskKind,
    mode: Upsample,
) -> Result<Image> {
    let up = upsample(s, img.height(), img.width(), mode)?;
    let mask = minmax_values(up.data());
    let c = img.channels();
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(idx, &p)| {
            let m = mask[idx / c];
            let m = match kind {
                SaliencyMaskKind::AdInspired => m,
                SaliencyMaskKind::AddInspired => 1.0 - m,
            };
            ((m * f64::from(p)) as f32).clamp(0.0, 1.0)
        })
        .collect();
    Ok(img.with_data(data))
}

/// Flat cell indices sorted by descending saliency, ties in row-major order.
pub fn saliency_order(s: &SaliencyMap) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    let d = s.data();
    // stable sort keeps row-major order among equal values
    idx.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    idx
}

/// Positions `(i', j')` of the `k` most salient cells.
pub fn top_k_positions(s: &SaliencyMap, k: usize) -> Vec<(usize, usize)> {
    saliency_order(s)
        .into_iter()
        .take(k)
        .map(|f| (f / s.cols(), f % s.cols()))
        .collect()
}

/// Replaces the listed patches of `img` with the same patches of `source`.
pub(crate) fn replace_patches(
    img: &Image,
    source: Option<&Image>,
    grid: PatchGrid,
    cells: &[usize],
) -> Result<Image> {
    let (ph, pw) = grid.patch_size(img)?;
    let (w, c) = (img.width(), img.channels());
    let mut data = img.data().to_vec();
    for &cell in cells {
        let (gi, gj) = (cell / grid.cols, cell % grid.cols);
        for i in gi * ph..(gi + 1) * ph {
            let start = (i * w + gj * pw) * c;
            let end = start + pw * c;
            match source {
                Some(src) => data[start..end].copy_from_slice(&src.data()[start..end]),
                None => data[start..end].fill(0.0),
            }
        }
    }
    Ok(img.with_data(data))
}

/// Top-k patch mask. Deletion zeroes the `k` most salient patches;
/// insertion blurs the image and restores those patches from the original.
pub fn apply_patch_mask(
    img: &Image,
    s: &SaliencyMap,
    grid: PatchGrid,
    k: usize,
    kind: PatchMaskKind,
    blur_params: BlurParams,
) -> Result<Image> {
    grid.check_map(s)?;
    if k > grid.cells() {
        return Err(Error::BadK {
            k,
            max: grid.cells(),
        });
    }
    let order = saliency_order(s);
    let top = &order[..k];
    match kind {
        PatchMaskKind::DeletionInspired => replace_patches(img, None, grid, top),
        PatchMaskKind::InsertionInspired => {
            let base = blur(img, blur_params)?;
            replace_patches(&base, Some(img), grid, top)
        }
    }
}

/// Which perturbation an FP sample received; `k` is set for the patch kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FpSample {
    pub kind: FpKind,
    pub k: Option<usize>,
}

/// Settings for [`sample_fp_batch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpConfig {
    pub grid: PatchGrid,
    pub blur: BlurParams,
    pub upsample: Upsample,
}

/// Perturbs one image with a uniformly drawn FP kind. For patch kinds, `k`
/// is uniform in `[0, H'W' - 1]`.
pub fn sample_fp(img: &Image, s: &SaliencyMap, cfg: &FpConfig, rng: &mut Rng) -> Result<(Image, FpSample)> {
    let kind = FpKind::ALL[rng.below_usize(4)];
    let out = match kind {
        FpKind::AdInspired => (
            apply_saliency_mask(img, s, SaliencyMaskKind::AdInspired, cfg.upsample)?,
            None,
        ),
        FpKind::AddInspired => (
            apply_saliency_mask(img, s, SaliencyMaskKind::AddInspired, cfg.upsample)?,
            None,
        ),
        FpKind::DeletionInspired | FpKind::InsertionInspired => {
            let k = rng.below_usize(cfg.grid.cells());
            let pk = if kind == FpKind::DeletionInspired {
                PatchMaskKind::DeletionInspired
            } else {
                PatchMaskKind::InsertionInspired
            };
            (apply_patch_mask(img, s, cfg.grid, k, pk, cfg.blur)?, Some(k))
        }
    };
    Ok((out.0, FpSample { kind, k: out.1 }))
}

/// Builds an FP batch: one perturbed copy of every image.
pub fn sample_fp_batch(
    images: &[Image],
    saliencies: &[SaliencyMap],
    cfg: &FpConfig,
    rng: &mut Rng,
) -> Result<Vec<(Image, FpSample)>> {
    if images.len() != saliencies.len() {
        return Err(Error::DimMismatch(format!(
            "{} images but {} saliency maps",
            images.len(),
            saliencies.len()
        )));
    }
    images
        .iter()
        .zip(saliencies)
        .map(|(img, s)| sample_fp(img, s, cfg, rng))
        .collect()
}
