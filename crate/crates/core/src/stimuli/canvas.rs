use alloc::vec::Vec;

use super::GrayImage;
use crate::math;

/// Filled convex shapes in center-relative pixel coordinates (y down).
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`, rasterized with exact
    /// area coverage.
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
    Circle { cx: f64, cy: f64, r: f64 },
    /// Convex polygon, vertices in either winding.
    Polygon(Vec<(f64, f64)>),
}

const SUBROWS: usize = 16;

impl Shape {
    fn y_bounds(&self) -> (f64, f64) {
        match self {
            Shape::Rect { y0, y1, .. } => (*y0, *y1),
            Shape::Circle { cy, r, .. } => (cy - r, cy + r),
            Shape::Polygon(v) => v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1))),
        }
    }

    /// Horizontal extent of the shape on the line `y`.
    fn span(&self, y: f64) -> Option<(f64, f64)> {
        match self {
            Shape::Rect { x0, x1, y0, y1 } => (y >= *y0 && y <= *y1).then_some((*x0, *x1)),
            Shape::Circle { cx, cy, r } => {
                let dy = y - cy;
                let q = r * r - dy * dy;
                (q > 0.0).then(|| {
                    let dx = math::sqrt(q);
                    (cx - dx, cx + dx)
                })
            }
            Shape::Polygon(v) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..v.len() {
                    let (ax, ay) = v[i];
                    let (bx, by) = v[(i + 1) % v.len()];
                    if (ay <= y && y <= by) || (by <= y && y <= ay) {
                        if ay == by {
                            lo = lo.min(ax.min(bx));
                            hi = hi.max(ax.max(bx));
                        } else {
                            let x = ax + (y - ay) * (bx - ax) / (by - ay);
                            lo = lo.min(x);
                            hi = hi.max(x);
                        }
                    }
                }
                (lo <= hi).then_some((lo, hi))
            }
        }
    }
}

/// Floating-point luminance buffer in 0..=255.
#[derive(Debug, Clone)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    data: Vec<f64>,
}

impl Canvas {
    pub fn new(width: u32, height: u32, fill: f64) -> Self {
        Canvas { width, height, data: alloc::vec![fill; width as usize * height as usize] }
    }

    fn half_w(&self) -> f64 {
        (self.width / 2) as f64
    }

    fn half_h(&self) -> f64 {
        (self.height / 2) as f64
    }

    fn blend(&mut self, col: usize, row: usize, coverage: f64, value: f64) {
        let i = row * self.width as usize + col;
        let c = coverage.clamp(0.0, 1.0);
        self.data[i] = self.data[i] * (1.0 - c) + value * c;
    }

    /// Paints `shape` at `value`, blending by the covered fraction of each
    /// pixel.
    pub fn paint(&mut self, shape: &Shape, value: f64) {
        let (hw, hh) = (self.half_w(), self.half_h());
        if let Shape::Rect { x0, x1, y0, y1 } = *shape {
            self.paint_rect(x0, x1, y0, y1, value);
            return;
        }
        let (ylo, yhi) = shape.y_bounds();
        let r0 = math::floor(ylo + hh).max(0.0) as i64;
        let r1 = (math::ceil(yhi + hh) as i64).min(self.height as i64);
        let mut cov: Vec<f64> = alloc::vec![0.0; self.width as usize];
        for row in r0..r1 {
            cov.iter_mut().for_each(|c| *c = 0.0);
            let (mut cmin, mut cmax) = (usize::MAX, 0usize);
            let top = row as f64 - hh;
            for j in 0..SUBROWS {
                let y = top + (j as f64 + 0.5) / SUBROWS as f64;
                let Some((a, b)) = shape.span(y) else { continue };
                let c0 = math::floor(a + hw).max(0.0) as i64;
                let c1 = (math::ceil(b + hw) as i64).min(self.width as i64);
                for col in c0..c1 {
                    let p0 = col as f64 - hw;
                    let p1 = p0 + 1.0;
                    let ov = b.min(p1) - a.max(p0);
                    if ov > 0.0 {
                        cov[col as usize] += ov / SUBROWS as f64;
                        cmin = cmin.min(col as usize);
                        cmax = cmax.max(col as usize);
                    }
                }
            }
            if cmin <= cmax {
                for col in cmin..=cmax {
                    if cov[col] > 0.0 {
                        self.blend(col, row as usize, cov[col], value);
                    }
                }
            }
        }
    }

    fn paint_rect(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, value: f64) {
        let (hw, hh) = (self.half_w(), self.half_h());
        let r0 = math::floor(y0 + hh).max(0.0) as i64;
        let r1 = (math::ceil(y1 + hh) as i64).min(self.height as i64);
        let c0 = math::floor(x0 + hw).max(0.0) as i64;
        let c1 = (math::ceil(x1 + hw) as i64).min(self.width as i64);
        for row in r0..r1 {
            let q0 = row as f64 - hh;
            let vy = y1.min(q0 + 1.0) - y0.max(q0);
            if vy <= 0.0 {
                continue;
            }
            for col in c0..c1 {
                let p0 = col as f64 - hw;
                let hx = x1.min(p0 + 1.0) - x0.max(p0);
                if hx > 0.0 {
                    self.blend(col as usize, row as usize, hx * vy, value);
                }
            }
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.data.iter().map(|v| math::round(v.clamp(0.0, 255.0)) as u8).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_coverage_is_exact_area() {
        let mut c = Canvas::new(8, 8, 0.0);
        c.paint(&Shape::Rect { x0: -0.5, x1: 0.5, y0: 0.0, y1: 1.0 }, 200.0);
        let g = c.to_gray();
        assert_eq!(g.get(3, 4), 100);
        assert_eq!(g.get(4, 4), 100);
        assert_eq!(g.get(5, 4), 0);
    }

    #[test]
    fn circle_area() {
        let mut c = Canvas::new(64, 64, 0.0);
        c.paint(&Shape::Circle { cx: 0.3, cy: -0.2, r: 10.0 }, 1.0);
        let area: f64 = c.data.iter().sum();
        assert!((area - core::f64::consts::PI * 100.0).abs() < 0.5);
    }

    #[test]
    fn polygon_centroid_tracks_subpixel_shift() {
        let diamond = |dx: f64| Shape::Polygon(alloc::vec![(dx, -10.0), (dx + 10.0, 0.0), (dx, 10.0), (dx - 10.0, 0.0)]);
        let centroid = |s: &Shape| {
            let mut c = Canvas::new(64, 64, 0.0);
            c.paint(s, 1.0);
            let (mut m, mut mx) = (0.0, 0.0);
            for row in 0..64usize {
                for col in 0..64usize {
                    let v = c.data[row * 64 + col];
                    m += v;
                    mx += v * (col as f64 + 0.5 - 32.0);
                }
            }
            mx / m
        };
        let a = centroid(&diamond(0.0));
        let b = centroid(&diamond(0.37));
        assert!((b - a - 0.37).abs() < 1e-3, "{}", b - a);
    }
}
