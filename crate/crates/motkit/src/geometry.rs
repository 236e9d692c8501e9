//! Bounding-box representation and overlap/distance computations.
//!
//! Boxes are kept in normalized center format `(cx, cy, w, h)` everywhere
//! inside the toolkit; pixel corner format exists only at the file I/O
//! boundary. Degenerate zero-area boxes are legal values and yield IoU 0.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("box field {field} is not finite: {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("box {field} must be non-negative, got {value}")]
    NegativeSize { field: &'static str, value: f64 },
    #[error("image dimensions must be positive, got {width}x{height}")]
    BadDims { width: u32, height: u32 },
}

/// Normalized center-format bounding box. All fields are fractions of the
/// image width/height; corner extents may straddle the image border.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        for (field, value) in [("cx", cx), ("cy", cy), ("w", w), ("h", h)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { field, value });
            }
        }
        if w < 0.0 {
            return Err(GeometryError::NegativeSize { field: "w", value: w });
        }
        if h < 0.0 {
            return Err(GeometryError::NegativeSize { field: "h", value: h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Corner representation `(x1, y1, x2, y2)`.
    pub fn to_corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn values(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }
}

/// Pixel dimensions of the image the normalized coordinates refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::BadDims { width, height });
        }
        Ok(Self { width, height })
    }
}

/// Intersection-over-union of two center-format boxes. Returns 0 when the
/// union area is 0 (both boxes degenerate).
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.to_corners();
    let (bx1, by1, bx2, by2) = b.to_corners();
    let ix = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let iy = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Sum of absolute differences over `(cx, cy, w, h)`.
pub fn l1_box_distance(a: &BBox, b: &BBox) -> f64 {
    (a.cx - b.cx).abs() + (a.cy - b.cy).abs() + (a.w - b.w).abs() + (a.h - b.h).abs()
}

/// Pixel center box `(cx, cy, w, h)` to normalized center format.
pub fn normalize(
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    dims: ImageDims,
) -> Result<BBox, GeometryError> {
    let fw = dims.width as f64;
    let fh = dims.height as f64;
    BBox::new(cx / fw, cy / fh, w / fw, h / fh)
}

/// Normalized center box back to pixel center `(cx, cy, w, h)`.
pub fn denormalize(b: &BBox, dims: ImageDims) -> (f64, f64, f64, f64) {
    let fw = dims.width as f64;
    let fh = dims.height as f64;
    (b.cx * fw, b.cy * fh, b.w * fw, b.h * fh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bb(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    #[test]
    fn iou_identical_boxes() {
        let a = bb(0.5, 0.5, 0.2, 0.2);
        assert_abs_diff_eq!(iou(&a, &a), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_disjoint_boxes() {
        let a = bb(0.1, 0.1, 0.1, 0.1);
        let b = bb(0.9, 0.9, 0.1, 0.1);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_hand_computed_overlap() {
        // inter 0.3*0.4 = 0.12, union 0.32 - 0.12 = 0.20
        let a = bb(0.5, 0.5, 0.4, 0.4);
        let b = bb(0.6, 0.5, 0.4, 0.4);
        assert_abs_diff_eq!(iou(&a, &b), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn iou_degenerate_zero_area() {
        let a = bb(0.3, 0.3, 0.0, 0.0);
        let b = bb(0.3, 0.3, 0.0, 0.0);
        assert_eq!(iou(&a, &b), 0.0);
        let c = bb(0.3, 0.3, 0.2, 0.2);
        assert_eq!(iou(&a, &c), 0.0);
    }

    #[test]
    fn l1_trivial_values() {
        let a = bb(0.0, 0.0, 0.0, 0.0);
        let b = bb(0.1, 0.1, 0.1, 0.1);
        assert_eq!(l1_box_distance(&a, &a), 0.0);
        assert_abs_diff_eq!(l1_box_distance(&a, &b), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn corner_round_trip_examples() {
        let b = bb(0.5, 0.5, 0.2, 0.2);
        let (x1, y1, x2, y2) = b.to_corners();
        assert_abs_diff_eq!(x1, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(y1, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(x2, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(y2, 0.6, epsilon = 1e-15);

        let z = bb(0.3, 0.3, 0.0, 0.0);
        assert_eq!(z.to_corners(), (0.3, 0.3, 0.3, 0.3));
    }

    #[test]
    fn normalize_examples() {
        let dims = ImageDims::new(1920, 1080).unwrap();
        let b = normalize(960.0, 540.0, 192.0, 216.0, dims).unwrap();
        assert_abs_diff_eq!(b.cx, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.cy, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.w, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(b.h, 0.2, epsilon = 1e-12);

        let full = normalize(960.0, 540.0, 1920.0, 1080.0, dims).unwrap();
        assert_abs_diff_eq!(full.cx, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(full.cy, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(full.w, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(full.h, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(ImageDims::new(0, 1080).is_err());
        assert!(ImageDims::new(1920, 0).is_err());
    }

    /// Rasterization oracle: fraction of grid-cell centers covered by both
    /// boxes over cells covered by either.
    fn raster_iou(a: &BBox, b: &BBox, n: usize) -> f64 {
        let (ax1, ay1, ax2, ay2) = a.to_corners();
        let (bx1, by1, bx2, by2) = b.to_corners();
        let mut inter = 0u64;
        let mut union = 0u64;
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            if x < ax1.min(bx1) || x > ax2.max(bx2) {
                continue;
            }
            for j in 0..n {
                let y = (j as f64 + 0.5) / n as f64;
                let in_a = x >= ax1 && x <= ax2 && y >= ay1 && y <= ay2;
                let in_b = x >= bx1 && x <= bx2 && y >= by1 && y <= by2;
                if in_a && in_b {
                    inter += 1;
                }
                if in_a || in_b {
                    union += 1;
                }
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    #[test]
    fn iou_matches_raster_oracle() {
        // deterministic pair grid; boxes kept inside [0,1] with w,h >= 0.05
        let mut checked = 0;
        for &(acx, acy, aw, ah) in &[
            (0.3, 0.3, 0.2, 0.3),
            (0.5, 0.5, 0.4, 0.4),
            (0.62, 0.44, 0.1, 0.26),
            (0.5, 0.5, 0.05, 0.9),
        ] {
            for &(bcx, bcy, bw, bh) in &[
                (0.3, 0.3, 0.2, 0.3),
                (0.55, 0.5, 0.4, 0.35),
                (0.7, 0.7, 0.22, 0.1),
                (0.4, 0.6, 0.3, 0.08),
            ] {
                let a = bb(acx, acy, aw, ah);
                let b = bb(bcx, bcy, bw, bh);
                let exact = iou(&a, &b);
                let approx_v = raster_iou(&a, &b, 1000);
                assert!(
                    (exact - approx_v).abs() < 2e-3,
                    "raster mismatch: {exact} vs {approx_v}"
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 16);
    }

    #[test]
    fn iou_shrink_inside_monotone() {
        // a inside b; shrinking a's w can only reduce the IoU
        let b = bb(0.5, 0.5, 0.6, 0.6);
        let mut prev = f64::INFINITY;
        for k in (1..=10).rev() {
            let a = bb(0.5, 0.5, 0.04 * k as f64, 0.3);
            let v = iou(&a, &b);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(
            acx in 0.0..1.0, acy in 0.0..1.0, aw in 0.0..1.0, ah in 0.0..1.0,
            bcx in 0.0..1.0, bcy in 0.0..1.0, bw in 0.0..1.0, bh in 0.0..1.0,
        ) {
            let a = bb(acx, acy, aw, ah);
            let b = bb(bcx, bcy, bw, bh);
            let ab = iou(&a, &b);
            let ba = iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            if a.area() > 0.0 {
                prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn l1_is_a_metric(
            a in prop::array::uniform4(0.0..1.0f64),
            b in prop::array::uniform4(0.0..1.0f64),
            c in prop::array::uniform4(0.0..1.0f64),
        ) {
            let ba = bb(a[0], a[1], a[2], a[3]);
            let bbx = bb(b[0], b[1], b[2], b[3]);
            let bc = bb(c[0], c[1], c[2], c[3]);
            let dab = l1_box_distance(&ba, &bbx);
            let dba = l1_box_distance(&bbx, &ba);
            let dac = l1_box_distance(&ba, &bc);
            let dcb = l1_box_distance(&bc, &bbx);
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert_eq!(l1_box_distance(&ba, &ba), 0.0);
            // triangle inequality with float slack
            prop_assert!(dab <= dac + dcb + 1e-12);
            // independent per-coordinate oracle
            let oracle: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!((dab - oracle).abs() < 1e-12);
        }

        #[test]
        fn corner_and_pixel_round_trips(
            cx in 0.0..1.0, cy in 0.0..1.0, w in 0.0..1.0, h in 0.0..1.0,
        ) {
            let b = bb(cx, cy, w, h);
            let (x1, y1, x2, y2) = b.to_corners();
            let back = BBox::from_corners(x1, y1, x2, y2).unwrap();
            prop_assert!(l1_box_distance(&b, &back) < 1e-12);

            let dims = ImageDims::new(1920, 1080).unwrap();
            let (pcx, pcy, pw, ph) = denormalize(&b, dims);
            let again = normalize(pcx, pcy, pw, ph, dims).unwrap();
            prop_assert!((again.cx - b.cx).abs() <= f64::EPSILON * 4.0);
            prop_assert!((again.cy - b.cy).abs() <= f64::EPSILON * 4.0);
            prop_assert!((again.w - b.w).abs() <= f64::EPSILON * 4.0);
            prop_assert!((again.h - b.h).abs() <= f64::EPSILON * 4.0);
        }
    }
}
