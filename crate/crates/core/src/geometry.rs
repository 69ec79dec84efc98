//! Axis-aligned pixel boxes.
//!
//! Coordinates are continuous `f64` values with the origin at the top-left
//! corner, x growing right and y growing down. The max corner is exclusive for
//! area purposes: a box `(0, 0, 10, 10)` covers 100 px².

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box coordinates must be finite: ({0}, {1}, {2}, {3})")]
    NonFinite(f64, f64, f64, f64),
    #[error("box min corner exceeds max corner: ({0}, {1}, {2}, {3})")]
    Inverted(f64, f64, f64, f64),
    #[error("interpolation parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let b = BoundingBox { x_min, y_min, x_max, y_max };
        b.validate()?;
        Ok(b)
    }

    /// Box from a top-left corner and a size.
    pub fn from_xywh(x: f64, y: f64, width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(x, y, x + width, y + height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let BoundingBox { x_min, y_min, x_max, y_max } = *self;
        if !(x_min.is_finite() && y_min.is_finite() && x_max.is_finite() && y_max.is_finite()) {
            return Err(GeometryError::NonFinite(x_min, y_min, x_max, y_max));
        }
        if x_min > x_max || y_min > y_max {
            return Err(GeometryError::Inverted(x_min, y_min, x_max, y_max));
        }
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) * 0.5, (self.y_min + self.y_max) * 0.5)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox { x_min: self.x_min + dx, y_min: self.y_min + dy, x_max: self.x_max + dx, y_max: self.y_max + dy }
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Smallest box containing both.
    pub fn union_hull(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn expand(&self, margin: f64) -> BoundingBox {
        BoundingBox { x_min: self.x_min - margin, y_min: self.y_min - margin, x_max: self.x_max + margin, y_max: self.y_max + margin }
    }

    /// Clip to `[0, width] x [0, height]`. A box entirely outside collapses
    /// onto the nearest edge.
    pub fn clip(&self, width: f64, height: f64) -> BoundingBox {
        let cx = |v: f64| v.clamp(0.0, width);
        let cy = |v: f64| v.clamp(0.0, height);
        BoundingBox { x_min: cx(self.x_min), y_min: cy(self.y_min), x_max: cx(self.x_max), y_max: cy(self.y_max) }
    }
}

pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Intersection over union. Zero when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Coordinate-wise `(1 - t) * a + t * b`.
pub fn lerp_box(a: &BoundingBox, b: &BoundingBox, t: f64) -> Result<BoundingBox, GeometryError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GeometryError::ParameterOutOfRange(t));
    }
    Ok(lerp_unchecked(a, b, t))
}

#[inline]
pub(crate) fn lerp_unchecked(a: &BoundingBox, b: &BoundingBox, t: f64) -> BoundingBox {
    let l = |p: f64, q: f64| (1.0 - t) * p + t * q;
    BoundingBox { x_min: l(a.x_min, b.x_min), y_min: l(a.y_min, b.y_min), x_max: l(a.x_max, b.x_max), y_max: l(a.y_max, b.y_max) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(area(&bb(0., 0., 10., 10.)), 100.0);
        assert_eq!(area(&bb(5., 5., 5., 9.)), 0.0);
        assert_eq!(area(&bb(0., 0., 9., 9.)), 81.0);
    }

    #[test]
    fn iou_examples() {
        let a = bb(0., 0., 10., 10.);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(20., 20., 30., 30.)), 0.0);
        // intersection 50, union 150
        assert!((iou(&a, &bb(5., 0., 15., 10.)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_boxes() {
        let d = bb(5., 5., 5., 9.);
        assert_eq!(iou(&d, &d), 0.0);
        assert_eq!(iou(&d, &bb(0., 0., 10., 10.)), 0.0);
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(matches!(BoundingBox::new(1., 0., 0., 1.), Err(GeometryError::Inverted(..))));
        assert!(matches!(BoundingBox::new(f64::NAN, 0., 0., 1.), Err(GeometryError::NonFinite(..))));
    }

    #[test]
    fn lerp_examples() {
        let a = bb(0., 0., 30., 30.);
        let b = bb(30., 30., 60., 60.);
        assert_eq!(lerp_box(&a, &b, 0.0).unwrap(), a);
        assert_eq!(lerp_box(&a, &b, 1.0).unwrap(), b);
        let m = lerp_box(&a, &b, 1.0 / 3.0).unwrap();
        for (got, want) in [(m.x_min, 10.), (m.y_min, 10.), (m.x_max, 40.), (m.y_max, 40.)] {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(lerp_box(&a, &a, 0.37).unwrap(), a);
        assert!(lerp_box(&a, &b, 1.5).is_err());
        assert!(lerp_box(&a, &b, -0.1).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-500.0..500.0f64, -500.0..500.0f64, 0.0..200.0f64, 0.0..200.0f64).prop_map(|(x, y, w, h)| BoundingBox {
            x_min: x,
            y_min: y,
            x_max: x + w,
            y_max: y + h,
        })
    }

    proptest! {
        #[test]
        fn iou_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(iou(&a, &b), iou(&b, &a));
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assume!(a.area() > 0.0);
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn iou_translation_invariant(
            a in arb_box(), b in arb_box(), dx in -100i32..100, dy in -100i32..100,
        ) {
            let v0 = iou(&a, &b);
            let v1 = iou(&a.translate(dx as f64, dy as f64), &b.translate(dx as f64, dy as f64));
            prop_assert!((v0 - v1).abs() < 1e-9);
        }

        #[test]
        fn lerp_is_coordinatewise(a in arb_box(), b in arb_box(), t in 0.0..=1.0f64) {
            let m = lerp_box(&a, &b, t).unwrap();
            prop_assert!((m.x_min - ((1.0 - t) * a.x_min + t * b.x_min)).abs() < 1e-9);
            prop_assert!((m.y_max - ((1.0 - t) * a.y_max + t * b.y_max)).abs() < 1e-9);
            prop_assert!(m.validate().is_ok());
        }
    }
}
