//! Stereo stimulus generation: the moving diamond used for disparity detection,
//! random-dot stereograms with sinusoidal corrugations, and depth-of-field
//! blur.
//!
//! Rasterization is area-weighted so sub-pixel disparities survive
//! quantization. Pixel edges sit at integer offsets from the image center,
//! which makes horizontally mirrored scenes rasterize to exactly mirrored
//! images.

mod canvas;
pub mod diamond;
pub mod dof;
pub mod rds;

use alloc::string::String;
use alloc::vec::Vec;

pub use canvas::{Canvas, Shape};
pub use diamond::{render_diamond_frame, DiamondStimulusParams, MotionProfile};
pub use dof::{render_dof_blur, FloatImage};
pub use rds::{render_rds, CorrugationOrientation, RdsParams};

/// 8-bit grayscale raster, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, fill: u8) -> Self {
        GrayImage { width, height, pixels: alloc::vec![fill; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn mirrored(&self) -> GrayImage {
        let w = self.width as usize;
        let mut out = self.clone();
        for (src, dst) in self.pixels.chunks(w).zip(out.pixels.chunks_mut(w)) {
            for (i, v) in src.iter().rev().enumerate() {
                dst[i] = *v;
            }
        }
        out
    }

    /// Side-by-side montage for cross-fusing: right-eye image on the left.
    pub fn cross_fuse_montage(left: &GrayImage, right: &GrayImage, gap: u32, fill: u8) -> GrayImage {
        let h = left.height.max(right.height);
        let w = left.width + gap + right.width;
        let mut out = GrayImage::new(w, h, fill);
        let blit = |out: &mut GrayImage, img: &GrayImage, x0: u32| {
            for y in 0..img.height {
                let src = &img.pixels[(y * img.width) as usize..((y + 1) * img.width) as usize];
                let start = (y * w + x0) as usize;
                out.pixels[start..start + img.width as usize].copy_from_slice(src);
            }
        };
        blit(&mut out, right, 0);
        blit(&mut out, left, right.width + gap);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusKind {
    Diamond,
    RandomDot,
}

impl StimulusKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StimulusKind::Diamond => "diamond",
            StimulusKind::RandomDot => "rds",
        }
    }
}

/// One rendered element: cyclopean position relative to the image center (px,
/// y down) and its on-screen disparity.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub label: String,
    pub x_px: f64,
    pub y_px: f64,
    pub disparity_arcmin: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusMeta {
    pub kind: StimulusKind,
    pub seed: u64,
    pub time_s: f64,
    pub pixel_subtense_arcmin: f64,
    pub elements: Vec<Element>,
    /// Parameter values used, including defaults, in render order.
    pub params: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoPair {
    pub left: GrayImage,
    pub right: GrayImage,
    pub meta: StimulusMeta,
}
