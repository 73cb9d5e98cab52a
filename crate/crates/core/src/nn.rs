//! A fixed-architecture convolutional classifier with hand-derived
//! gradients.
//!
//! ```text
//! image [H, W, C]
//!   -> conv3x3 (8 filters, zero padding 1) -> ReLU -> avgpool 2x2
//!   -> conv3x3 (8 filters, zero padding 1) -> ReLU -> avgpool 2x2   (feature maps A, [8, H/4, W/4])
//!   -> global average pool (8) -> linear (classes) -> softmax
//! ```
//!
//! The network is generic over the scalar type: training runs in `f32`,
//! gradient checks in `f64`. Internally activations are channel-major
//! (`[C, H, W]`); inputs and input gradients use the image layout
//! `[H, W, C]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::{Float, NumCast};

use crate::loss::{self, LossKind};
use crate::{Error, Image, Result, Rng, SaliencyMap};

/// Number of filters in both convolution layers.
pub const WIDTH: usize = 8;

pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn of_f32(v: f32) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn of_f32(v: f32) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        <f64 as From<f32>>::from(self)
    }
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn of_f32(v: f32) -> Self {
        <f64 as From<f32>>::from(v)
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Parameters of the network; the same layout doubles as a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet<T: Real = f32> {
    in_channels: usize,
    classes: usize,
    /// `[8, C, 3, 3]`
    pub conv1_w: Vec<T>,
    pub conv1_b: Vec<T>,
    /// `[8, 8, 3, 3]`
    pub conv2_w: Vec<T>,
    pub conv2_b: Vec<T>,
    /// `[classes, 8]`
    pub fc_w: Vec<T>,
    pub fc_b: Vec<T>,
}

/// Names and shapes of the parameter tensors, in [`ToyNet::params`] order.
pub fn param_shapes(in_channels: usize, classes: usize) -> [(&'static str, Vec<usize>); 6] {
    [
        ("conv1.weight", vec![WIDTH, in_channels, 3, 3]),
        ("conv1.bias", vec![WIDTH]),
        ("conv2.weight", vec![WIDTH, WIDTH, 3, 3]),
        ("conv2.bias", vec![WIDTH]),
        ("fc.weight", vec![classes, WIDTH]),
        ("fc.bias", vec![classes]),
    ]
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward<T: Real> {
    height: usize,
    width: usize,
    /// input, `[C, H, W]`
    x: Vec<T>,
    /// conv1 pre-activation, `[8, H, W]`
    z1: Vec<T>,
    /// pooled ReLU(z1), `[8, H/2, W/2]`
    p1: Vec<T>,
    /// conv2 pre-activation, `[8, H/2, W/2]`
    z2: Vec<T>,
    /// final feature maps, `[8, H/4, W/4]`
    a: Vec<T>,
    pooled: Vec<T>,
    logits: Vec<T>,
}

impl<T: Real> Forward<T> {
    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn probs(&self) -> Vec<T> {
        loss::softmax(&self.logits)
    }

    /// Softmax computed in 64-bit.
    pub fn probs_f64(&self) -> Vec<f64> {
        let z: Vec<f64> = self.logits.iter().map(|v| v.as_f64()).collect();
        loss::softmax(&z)
    }

    /// Post-ReLU final feature maps, `[8, H/4, W/4]` channel-major.
    pub fn feature_maps(&self) -> &[T] {
        &self.a
    }

    pub fn feature_grid(&self) -> (usize, usize) {
        (self.height / 4, self.width / 4)
    }

    /// Feature map of one channel as a saliency-shaped grid.
    pub fn feature_map(&self, channel: usize) -> SaliencyMap {
        let (h, w) = self.feature_grid();
        let data = self.a[channel * h * w..(channel + 1) * h * w]
            .iter()
            .map(|v| v.as_f64())
            .collect();
        SaliencyMap::new(h, w, data).expect("feature maps are finite")
    }
}

/// Gradients of a scalar with respect to every parameter and the input.
#[derive(Debug, Clone)]
pub struct Gradients<T: Real> {
    pub params: ToyNet<T>,
    /// `[H, W, C]`
    pub input: Vec<T>,
}

impl<T: Real> ToyNet<T> {
    pub fn zeros(in_channels: usize, classes: usize) -> Self {
        Self {
            in_channels,
            classes,
            conv1_w: vec![T::zero(); WIDTH * in_channels * 9],
            conv1_b: vec![T::zero(); WIDTH],
            conv2_w: vec![T::zero(); WIDTH * WIDTH * 9],
            conv2_b: vec![T::zero(); WIDTH],
            fc_w: vec![T::zero(); classes * WIDTH],
            fc_b: vec![T::zero(); classes],
        }
    }

    /// He-normal weights, zero biases.
    pub fn init(in_channels: usize, classes: usize, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(in_channels, classes);
        let fill = |w: &mut Vec<T>, fan_in: usize, rng: &mut Rng| {
            let std = (2.0 / fan_in as f64).sqrt();
            w.iter_mut().for_each(|v| *v = T::of(rng.normal() * std));
        };
        fill(&mut net.conv1_w, in_channels * 9, rng);
        fill(&mut net.conv2_w, WIDTH * 9, rng);
        fill(&mut net.fc_w, WIDTH, rng);
        net
    }

    /// Rebuilds a network from parameter payloads in [`param_shapes`] order.
    pub fn from_params(in_channels: usize, classes: usize, params: [Vec<T>; 6]) -> Result<Self> {
        let shapes = param_shapes(in_channels, classes);
        for ((name, dims), p) in shapes.iter().zip(&params) {
            let n: usize = dims.iter().product();
            if p.len() != n {
                return Err(Error::DimMismatch(format!(
                    "{name}: expected {n} values, got {}",
                    p.len()
                )));
            }
        }
        let [conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b] = params;
        Ok(Self {
            in_channels,
            classes,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            fc_w,
            fc_b,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> [&[T]; 6] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.fc_w,
            &self.fc_b,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.fc_w,
            &mut self.fc_b,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> ToyNet<U> {
        let c = |v: &[T]| -> Vec<U> { v.iter().map(|&x| <U as NumCast>::from(x).unwrap()).collect() };
        ToyNet {
            in_channels: self.in_channels,
            classes: self.classes,
            conv1_w: c(&self.conv1_w),
            conv1_b: c(&self.conv1_b),
            conv2_w: c(&self.conv2_w),
            conv2_b: c(&self.conv2_b),
            fc_w: c(&self.fc_w),
            fc_b: c(&self.fc_b),
        }
    }

    /// `self += scale * other`, parameter-wise.
    pub fn add_scaled(&mut self, other: &ToyNet<T>, scale: T) {
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + scale * s);
        }
    }

    fn check_input(&self, img: &Image) -> Result<()> {
        if img.channels() != self.in_channels || !img.height().is_multiple_of(4) || !img.width().is_multiple_of(4) {
            return Err(Error::DimMismatch(format!(
                "network expects {} channels and sides divisible by 4, got [{}, {}, {}]",
                self.in_channels,
                img.height(),
                img.width(),
                img.channels()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, img: &Image) -> Result<Forward<T>> {
        self.check_input(img)?;
        let (h, w, c) = (img.height(), img.width(), img.channels());
        let src = img.data();
        let mut x = vec![T::zero(); c * h * w];
        for i in 0..h {
            for j in 0..w {
                for ch in 0..c {
                    x[(ch * h + i) * w + j] = T::of_f32(src[(i * w + j) * c + ch]);
                }
            }
        }
        Ok(self.forward_chw(x, h, w))
    }

    fn forward_chw(&self, x: Vec<T>, h: usize, w: usize) -> Forward<T> {
        let z1 = conv3x3(&x, self.in_channels, h, w, &self.conv1_w, &self.conv1_b, WIDTH);
        let p1 = avgpool2(&relu(&z1), WIDTH, h, w);
        let (h2, w2) = (h / 2, w / 2);
        let z2 = conv3x3(&p1, WIDTH, h2, w2, &self.conv2_w, &self.conv2_b, WIDTH);
        let a = avgpool2(&relu(&z2), WIDTH, h2, w2);
        let cells = (h / 4) * (w / 4);
        let inv = T::one() / T::of(cells as f64);
        let pooled: Vec<T> = a
            .chunks_exact(cells)
            .map(|ch| ch.iter().copied().fold(T::zero(), |s, v| s + v) * inv)
            .collect();
        let logits = (0..self.classes)
            .map(|k| {
                let row = &self.fc_w[k * WIDTH..(k + 1) * WIDTH];
                row.iter()
                    .zip(&pooled)
                    .fold(self.fc_b[k], |s, (&wv, &g)| s + wv * g)
            })
            .collect();
        Forward {
            height: h,
            width: w,
            x,
            z1,
            p1,
            z2,
            a,
            pooled,
            logits,
        }
    }

    /// Backpropagates `d(scalar)/d(logits)` through a cached forward pass.
    pub fn backward(&self, fwd: &Forward<T>, dlogits: &[T]) -> Gradients<T> {
        let (h, w) = (fwd.height, fwd.width);
        let (h2, w2) = (h / 2, w / 2);
        let (h4, w4) = (h / 4, w / 4);
        let cells = h4 * w4;
        let mut g = ToyNet::zeros(self.in_channels, self.classes);

        // linear layer
        let mut dpooled = [T::zero(); WIDTH];
        for k in 0..self.classes {
            let d = dlogits[k];
            g.fc_b[k] = d;
            for ch in 0..WIDTH {
                g.fc_w[k * WIDTH + ch] = d * fwd.pooled[ch];
                dpooled[ch] = dpooled[ch] + d * self.fc_w[k * WIDTH + ch];
            }
        }
        // global average pool
        let inv = T::one() / T::of(cells as f64);
        let mut da = vec![T::zero(); WIDTH * cells];
        for ch in 0..WIDTH {
            da[ch * cells..(ch + 1) * cells].fill(dpooled[ch] * inv);
        }
        // second block
        let mut dz2 = avgpool2_backward(&da, WIDTH, h2, w2);
        relu_backward(&mut dz2, &fwd.z2);
        let dp1 = conv3x3_backward(
            &fwd.p1,
            WIDTH,
            h2,
            w2,
            &self.conv2_w,
            WIDTH,
            &dz2,
            &mut g.conv2_w,
            &mut g.conv2_b,
        );
        // first block
        let mut dz1 = avgpool2_backward(&dp1, WIDTH, h, w);
        relu_backward(&mut dz1, &fwd.z1);
        let dx = conv3x3_backward(
            &fwd.x,
            self.in_channels,
            h,
            w,
            &self.conv1_w,
            WIDTH,
            &dz1,
            &mut g.conv1_w,
            &mut g.conv1_b,
        );
        let c = self.in_channels;
        let mut input = vec![T::zero(); h * w * c];
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    input[(i * w + j) * c + ch] = dx[(ch * h + i) * w + j];
                }
            }
        }
        Gradients { params: g, input }
    }

    /// Loss of one labelled image and its full gradient.
    pub fn loss_grad(&self, img: &Image, label: usize, kind: LossKind) -> Result<(T, Gradients<T>)> {
        let fwd = self.forward(img)?;
        self.check_label(label)?;
        let (l, dlogits) = loss::loss_and_logit_grad(&fwd.logits, label, kind);
        Ok((l, self.backward(&fwd, &dlogits)))
    }

    pub fn loss(&self, img: &Image, label: usize, kind: LossKind) -> Result<T> {
        let fwd = self.forward(img)?;
        self.check_label(label)?;
        Ok(loss::loss_and_logit_grad(&fwd.logits, label, kind).0)
    }

    /// Softmax probability of `class` and its gradient.
    pub fn prob_grad(&self, img: &Image, class: usize) -> Result<(T, Gradients<T>)> {
        let fwd = self.forward(img)?;
        self.check_label(class)?;
        let p = fwd.probs();
        let pc = p[class];
        let d: Vec<T> = p
            .iter()
            .enumerate()
            .map(|(j, &pj)| {
                let delta = if j == class { T::one() } else { T::zero() };
                pc * (delta - pj)
            })
            .collect();
        Ok((pc, self.backward(&fwd, &d)))
    }

    /// `d logit_class / d A[k, i, j]`, which is `fc_w[class, k] / (H'W')`
    /// for every cell of channel `k`.
    pub fn logit_grad_wrt_features(&self, class: usize, cells: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(WIDTH * cells);
        for k in 0..WIDTH {
            let g = self.fc_w[class * WIDTH + k].as_f64() / cells as f64;
            out.extend(core::iter::repeat_n(g, cells));
        }
        out
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.classes {
            return Err(Error::Invalid(format!(
                "class {label} outside [0, {})",
                self.classes
            )));
        }
        Ok(())
    }
}

fn relu<T: Real>(z: &[T]) -> Vec<T> {
    z.iter().map(|&v| v.max(T::zero())).collect()
}

fn relu_backward<T: Real>(d: &mut [T], z: &[T]) {
    d.iter_mut().zip(z).for_each(|(dv, &zv)| {
        if zv <= T::zero() {
            *dv = T::zero();
        }
    });
}

fn avgpool2<T: Real>(x: &[T], ch: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut out = vec![T::zero(); ch * ho * wo];
    for c in 0..ch {
        let base = c * h * w;
        for i in 0..ho {
            let r0 = base + 2 * i * w;
            let r1 = r0 + w;
            for j in 0..wo {
                let s = x[r0 + 2 * j] + x[r0 + 2 * j + 1] + x[r1 + 2 * j] + x[r1 + 2 * j + 1];
                out[(c * ho + i) * wo + j] = s * quarter;
            }
        }
    }
    out
}

fn avgpool2_backward<T: Real>(d: &[T], ch: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut out = vec![T::zero(); ch * h * w];
    for c in 0..ch {
        for i in 0..h {
            for j in 0..w {
                out[(c * h + i) * w + j] = d[(c * ho + i / 2) * wo + j / 2] * quarter;
            }
        }
    }
    out
}

/// Valid column range `[lo, hi)` of output positions reading input offset
/// `d - 1` for a kernel tap `d` in `0..3`.
#[inline]
fn tap_range(d: usize, n: usize) -> (usize, usize) {
    match d {
        0 => (1, n),
        1 => (0, n),
        _ => (0, n - 1),
    }
}

fn conv3x3<T: Real>(
    x: &[T],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[T],
    bias: &[T],
    cout: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); cout * h * w];
    for o in 0..cout {
        let plane = &mut out[o * h * w..(o + 1) * h * w];
        plane.fill(bias[o]);
        for c in 0..cin {
            let src = &x[c * h * w..(c + 1) * h * w];
            for di in 0..3 {
                let (i_lo, i_hi) = tap_range(di, h);
                for dj in 0..3 {
                    let wv = weight[((o * cin + c) * 3 + di) * 3 + dj];
                    let (j_lo, j_hi) = tap_range(dj, w);
                    for i in i_lo..i_hi {
                        let si = i + di - 1;
                        let dst = &mut plane[i * w + j_lo..i * w + j_hi];
                        let s = &src[si * w + j_lo + dj - 1..si * w + j_hi + dj - 1];
                        for (d, &v) in dst.iter_mut().zip(s) {
                            *d = *d + wv * v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients and returns the input gradient.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward<T: Real>(
    x: &[T],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[T],
    cout: usize,
    dout: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let mut dx = vec![T::zero(); cin * h * w];
    for o in 0..cout {
        let dplane = &dout[o * h * w..(o + 1) * h * w];
        dbias[o] = dbias[o] + dplane.iter().copied().fold(T::zero(), |a, b| a + b);
        for c in 0..cin {
            let src = &x[c * h * w..(c + 1) * h * w];
            let dsrc = &mut dx[c * h * w..(c + 1) * h * w];
            for di in 0..3 {
                let (i_lo, i_hi) = tap_range(di, h);
                for dj in 0..3 {
                    let widx = ((o * cin + c) * 3 + di) * 3 + dj;
                    let wv = weight[widx];
                    let (j_lo, j_hi) = tap_range(dj, w);
                    let mut acc = T::zero();
                    for i in i_lo..i_hi {
                        let si = i + di - 1;
                        let d = &dplane[i * w + j_lo..i * w + j_hi];
                        let s_off = si * w + j_lo + dj - 1;
                        let s = &src[s_off..s_off + (j_hi - j_lo)];
                        for (&dv, &sv) in d.iter().zip(s) {
                            acc = acc + dv * sv;
                        }
                        let ds = &mut dsrc[s_off..s_off + (j_hi - j_lo)];
                        for (dsv, &dv) in ds.iter_mut().zip(d) {
                            *dsv = *dsv + wv * dv;
                        }
                    }
                    dweight[widx] = dweight[widx] + acc;
                }
            }
        }
    }
    dx
}
