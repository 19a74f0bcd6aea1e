//! Depth-of-field rendering: pixels away from the fixated depth get a Gaussian
//! blur sized from the geometric blur circle.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::optics::{blur_circle_arcmin, Diopters};

/// Single-channel floating-point image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        FloatImage { width, height, data: alloc::vec![fill; width * height] }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Half-sample symmetric reflection of `i` into `0..n`.
fn reflect(mut i: i64, n: i64) -> usize {
    let period = 2 * n;
    i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

fn kernel(sigma_px: f64) -> Vec<f64> {
    let radius = math::ceil(3.0 * sigma_px) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            math::exp(-0.5 * x * x / (sigma_px * sigma_px))
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Blurs `image` given a per-pixel depth map in diopters. The Gaussian sigma
/// at each pixel is `sigma_scale` times the blur-circle diameter for that
/// pixel's defocus relative to `fixation`; `sigma_scale = 0.5` uses the blur
/// circle radius. Borders reflect.
pub fn render_dof_blur(
    image: &FloatImage,
    depth: &[f64],
    fixation: Diopters,
    pupil_mm: f64,
    pixel_subtense_arcmin: f64,
    sigma_scale: f64,
) -> Result<FloatImage> {
    if depth.len() != image.data.len() {
        return Err(Error::Invalid("depth map and image differ in size".into()));
    }
    if !(pixel_subtense_arcmin > 0.0) || !(sigma_scale >= 0.0) {
        return Err(Error::Invalid("pixel subtense must be positive and sigma scale non-negative".into()));
    }
    let (w, h) = (image.width, image.height);
    let mut sigma = Vec::with_capacity(depth.len());
    for &d in depth {
        let b = blur_circle_arcmin(Diopters(d - fixation.0), pupil_mm)?;
        sigma.push(sigma_scale * b / pixel_subtense_arcmin);
    }
    let mut kernels: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for &s in &sigma {
        if s > 1e-9 {
            kernels.entry(s.to_bits()).or_insert_with(|| kernel(s));
        }
    }
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = alloc::vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let s = sigma[i];
                if s <= 1e-9 {
                    out[i] = src[i];
                    continue;
                }
                let k = &kernels[&s.to_bits()];
                let r = (k.len() / 2) as i64;
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    let o = j as i64 - r;
                    let idx = if horizontal {
                        y * w + reflect(x as i64 + o, w as i64)
                    } else {
                        reflect(y as i64 + o, h as i64) * w + x
                    };
                    acc += kv * src[idx];
                }
                out[i] = acc;
            }
        }
        out
    };
    let tmp = pass(&image.data, true);
    let data = pass(&tmp, false);
    Ok(FloatImage { width: w, height: h, data })
}
