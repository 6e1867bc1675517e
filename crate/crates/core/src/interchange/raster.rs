//! Binary masks and polygon rasterization.

use crate::geometry::{signed_area, Point};

/// Pixel rectangle `[x0, x0 + w) x [y0, y0 + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PixelWindow {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelWindow {
    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && y >= self.y0 && x - self.x0 < self.w && y - self.y0 < self.h
    }

    pub fn intersect(&self, other: &PixelWindow) -> PixelWindow {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = (self.x0 + self.w).min(other.x0 + other.w);
        let y1 = (self.y0 + self.h).min(other.y0 + other.h);
        if x1 <= x0 || y1 <= y0 {
            return PixelWindow::default();
        }
        PixelWindow {
            x0,
            y0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }
}

/// Per-pixel set membership over a `width x height` image.
///
/// Storage covers only `window`; every pixel outside it is unset. This keeps
/// masks of small instances in large images cheap.
#[derive(Debug, Clone)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    window: PixelWindow,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// An all-unset mask covering the whole image.
    pub fn new(width: u32, height: u32) -> Self {
        Self::with_window(
            width,
            height,
            PixelWindow {
                x0: 0,
                y0: 0,
                w: width,
                h: height,
            },
        )
    }

    /// An all-unset mask storing only `window` (clipped to the image).
    pub fn with_window(width: u32, height: u32, window: PixelWindow) -> Self {
        let window = window.intersect(&PixelWindow {
            x0: 0,
            y0: 0,
            w: width,
            h: height,
        });
        Self {
            width,
            height,
            window,
            bits: vec![false; window.w as usize * window.h as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn window(&self) -> PixelWindow {
        self.window
    }

    fn offset(&self, x: u32, y: u32) -> Option<usize> {
        self.window.contains(x, y).then(|| {
            (y - self.window.y0) as usize * self.window.w as usize + (x - self.window.x0) as usize
        })
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.offset(x, y).is_some_and(|i| self.bits[i])
    }

    /// Signed lookup; anything outside the image is unset.
    pub fn get_i(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x > u32::MAX as i64 || y > u32::MAX as i64 {
            return false;
        }
        self.get(x as u32, y as u32)
    }

    /// Panics when `(x, y)` lies outside the stored window.
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self
            .offset(x, y)
            .unwrap_or_else(|| panic!("pixel ({x}, {y}) outside mask window {:?}", self.window));
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set pixels in raster order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let PixelWindow { x0, y0, w, .. } = self.window;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (x0 + (i as u32 % w), y0 + (i as u32 / w)))
    }

    /// Number of pixels set in both masks.
    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        let win = self.window.intersect(&other.window);
        let mut n = 0;
        for y in win.y0..win.y0 + win.h {
            for x in win.x0..win.x0 + win.w {
                if self.get(x, y) && other.get(x, y) {
                    n += 1;
                }
            }
        }
        n
    }
}

impl PartialEq for BinaryMask {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.count() == other.count()
            && self.iter_set().all(|(x, y)| other.get(x, y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rasterized {
    pub mask: BinaryMask,
    /// Set when the polygon has (numerically) zero area.
    pub warning: Option<String>,
}

/// Fills `polygon` into a `width x height` mask. A pixel is set iff its
/// center lies inside the polygon under the nonzero winding rule; centers
/// exactly on an edge are outside.
pub fn rasterize(polygon: &[Point], width: u32, height: u32) -> Rasterized {
    let area = signed_area(polygon).abs();
    if polygon.len() < 3 || area.is_nan() || area <= 1e-12 || polygon.iter().any(|p| !p.is_finite())
    {
        return Rasterized {
            mask: BinaryMask::with_window(width, height, PixelWindow::default()),
            warning: Some("zero-area polygon rasterized to an empty mask".into()),
        };
    }

    let (mut xmin, mut ymin, mut xmax, mut ymax) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in polygon {
        xmin = xmin.min(p.x);
        ymin = ymin.min(p.y);
        xmax = xmax.max(p.x);
        ymax = ymax.max(p.y);
    }
    let lo = |v: f64| v.floor().clamp(0.0, u32::MAX as f64) as u32;
    let hi = |v: f64| (v.ceil() + 1.0).clamp(0.0, u32::MAX as f64) as u32;
    let (x0, y0) = (lo(xmin), lo(ymin));
    let window = PixelWindow {
        x0,
        y0,
        w: hi(xmax).saturating_sub(x0),
        h: hi(ymax).saturating_sub(y0),
    };
    let mut mask = BinaryMask::with_window(width, height, window);
    let win = mask.window;

    let mut crossings: Vec<(f64, i32)> = Vec::new();
    for row in win.y0..win.y0 + win.h {
        let cy = row as f64 + 0.5;
        crossings.clear();
        for i in 0..polygon.len() {
            let a = polygon[i];
            let b = polygon[(i + 1) % polygon.len()];
            let dir = if a.y <= cy && b.y > cy {
                1
            } else if b.y <= cy && a.y > cy {
                -1
            } else {
                continue;
            };
            let t = (cy - a.y) / (b.y - a.y);
            crossings.push((a.x + t * (b.x - a.x), dir));
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(|p, q| p.0.total_cmp(&q.0));

        // A center is inside when the crossings strictly to its right sum to
        // a nonzero winding number.
        let mut right_winding: i32 = crossings.iter().map(|c| c.1).sum();
        let mut next = 0;
        for col in win.x0..win.x0 + win.w {
            let cx = col as f64 + 0.5;
            while next < crossings.len() && crossings[next].0 <= cx {
                right_winding -= crossings[next].1;
                next += 1;
            }
            if right_winding != 0 {
                mask.set(col, row, true);
            }
        }
    }

    Rasterized {
        mask,
        warning: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{perimeter, winding_number};
    use proptest::prelude::*;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point> {
        vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ]
    }

    /// Per-pixel point-in-polygon oracle.
    fn oracle_count(poly: &[Point], width: u32, height: u32) -> usize {
        let mut n = 0;
        for y in 0..height {
            for x in 0..width {
                let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                if winding_number(poly, c) != 0 {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn full_square() {
        let r = rasterize(&square(0.0, 0.0, 10.0, 10.0), 10, 10);
        assert_eq!(r.mask.count(), 100);
        assert!(r.warning.is_none());
    }

    #[test]
    fn polygon_outside_image() {
        let r = rasterize(&square(20.0, 20.0, 30.0, 30.0), 10, 10);
        assert_eq!(r.mask.count(), 0);
        let r = rasterize(&square(-30.0, -5.0, -10.0, 5.0), 10, 10);
        assert_eq!(r.mask.count(), 0);
    }

    #[test]
    fn right_triangle_matches_oracle() {
        let tri = [
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(0.0, 10.0),
        ];
        let r = rasterize(&tri, 10, 10);
        assert_eq!(r.mask.count(), oracle_count(&tri, 10, 10));
        // Centers with i + j <= 8 are strictly inside.
        assert_eq!(r.mask.count(), 45);
    }

    #[test]
    fn zero_area_warns() {
        let line = [
            Point::new(0.0, 0.0),
            Point::new(5.0, 5.0),
            Point::new(10.0, 10.0),
        ];
        let r = rasterize(&line, 10, 10);
        assert!(r.mask.is_empty());
        assert!(r.warning.is_some());
    }

    #[test]
    fn self_overlapping_polygon_uses_nonzero_rule() {
        // Two loops around the same square: winding 2 inside, still set.
        let mut poly = square(1.0, 1.0, 5.0, 5.0);
        poly.extend(square(1.0, 1.0, 5.0, 5.0));
        assert_eq!(rasterize(&poly, 8, 8).mask.count(), 16);
    }

    #[test]
    fn iter_set_and_intersection() {
        let a = rasterize(&square(0.0, 0.0, 4.0, 4.0), 10, 10).mask;
        let b = rasterize(&square(2.0, 2.0, 6.0, 6.0), 10, 10).mask;
        assert_eq!(a.intersection_count(&b), 4);
        assert_eq!(a.iter_set().count(), 16);
        assert!(a.iter_set().all(|(x, y)| x < 4 && y < 4));
    }

    fn polygon() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0..40.0f64, 0.0..40.0f64), 3..9)
            .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
    }

    proptest! {
        #[test]
        fn scanline_equals_point_in_polygon(poly in polygon()) {
            let r = rasterize(&poly, 40, 40);
            for y in 0..40 {
                for x in 0..40 {
                    let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                    prop_assert_eq!(r.mask.get(x, y), winding_number(&poly, c) != 0, "pixel {} {}", x, y);
                }
            }
        }

        #[test]
        fn area_converges_for_convex(
            cx in 30.0..70.0f64, cy in 30.0..70.0f64,
            w in 10.0..50.0f64, h in 10.0..50.0f64, angle in 0.0..3.2f64,
        ) {
            let b = crate::geometry::RotatedBox::from_size(Point::new(cx, cy), w, h, angle);
            let poly = b.corners().to_vec();
            let count = rasterize(&poly, 100, 100).mask.count() as f64;
            let area = signed_area(&poly).abs();
            // Only shapes entirely inside the image count.
            if poly.iter().all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= 100.0 && p.y <= 100.0) {
                prop_assert!((count - area).abs() <= perimeter(&poly));
            }
        }
    }
}
