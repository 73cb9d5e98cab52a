//! Synthetic classification data: one soft colored blob per image on a
//! noisy gray background, the class given by the blob color.

use alloc::vec::Vec;

use crate::{Image, Result, Rng};

/// Blob color of `class` out of `classes`, evenly spaced hues.
pub fn class_color(class: usize, classes: usize) -> [f32; 3] {
    let h = class as f64 / classes.max(1) as f64 * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    // keep colors away from the box edges
    [0.1 + 0.8 * r as f32, 0.1 + 0.8 * g as f32, 0.1 + 0.8 * b as f32]
}

/// Image `index` of a dataset; fully determined by `(seed, index)`.
pub fn sample(seed: u64, index: u64, class: usize, classes: usize, height: usize, width: usize) -> Result<Image> {
    let mut rng = Rng::derive(seed, index);
    let color = class_color(class, classes);
    let scale = height.min(width) as f64;
    let radius = scale * (0.12 + 0.1 * rng.next_f64());
    let ci = radius + rng.next_f64() * (height as f64 - 2.0 * radius);
    let cj = radius + rng.next_f64() * (width as f64 - 2.0 * radius);
    let bg = 0.35 + 0.1 * rng.next_f64();
    let mut data = Vec::with_capacity(height * width * 3);
    for i in 0..height {
        for j in 0..width {
            let di = i as f64 + 0.5 - ci;
            let dj = j as f64 + 0.5 - cj;
            let d = libm::sqrt(di * di + dj * dj);
            // soft edge over one pixel
            let a = (radius + 0.5 - d).clamp(0.0, 1.0);
            for &c in &color {
                let noise = 0.08 * (rng.next_f64() - 0.5);
                let v = (1.0 - a) * (bg + noise) + a * (f64::from(c) + 0.5 * noise);
                data.push(v as f32);
            }
        }
    }
    Image::from_clipped(height, width, 3, data)
}

/// `n` labelled images with balanced classes in shuffled order.
pub fn generate(n: usize, classes: usize, height: usize, width: usize, seed: u64) -> Result<Vec<(Image, usize)>> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    Rng::derive(seed, u64::MAX).shuffle(&mut labels);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, y)| Ok((sample(seed, i as u64, y, classes, height, width)?, y)))
        .collect()
}
