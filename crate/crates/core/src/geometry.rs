//! Planar points and angle helpers shared by every module.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// A point or vector in the plane. World coordinates are meters, drawing
/// coordinates are pixels; the type does not distinguish them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    /// Unit vector pointing along `heading_deg` (0° = +x, counter-clockwise).
    pub fn from_heading(heading_deg: f64) -> Point2 {
        let r = heading_deg.to_radians();
        Point2::new(r.cos(), r.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Robot pose: position in meters and heading in degrees, `[0, 360)`,
/// measured counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_heading(heading) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Unit vector of the body axis rotated by `offset_deg` (counter-clockwise).
    pub fn direction(&self, offset_deg: f64) -> Point2 {
        Point2::from_heading(self.heading + offset_deg)
    }
}

/// Normalizes an angle in degrees to `[0, 360)`.
pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Normalizes an angle in degrees to `(-180, 180]`.
pub fn normalize_signed(deg: f64) -> f64 {
    let h = normalize_heading(deg);
    if h > 180.0 {
        h - 360.0
    } else {
        h
    }
}

/// Robot-relative bearing of `target` seen from `origin` with the given
/// heading. Positive values are clockwise (to the robot's right).
pub fn bearing_right(origin: Point2, heading_deg: f64, target: Point2) -> f64 {
    let d = target - origin;
    let azimuth = d.y.atan2(d.x).to_degrees();
    normalize_signed(heading_deg - azimuth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_wraps() {
        assert_eq!(normalize_heading(365.0), 5.0);
        assert_eq!(normalize_heading(-15.0), 345.0);
        assert_eq!(normalize_heading(360.0), 0.0);
        assert_eq!(normalize_signed(190.0), -170.0);
        assert_eq!(normalize_signed(180.0), 180.0);
    }

    #[test]
    fn bearing_sign_is_rightward() {
        let o = Point2::new(0.0, 0.0);
        // facing +x, target down-right (negative y) is to the right
        let b = bearing_right(o, 0.0, Point2::new(1.0, -1.0));
        assert!((b - 45.0).abs() < 1e-12);
        let b = bearing_right(o, 0.0, Point2::new(1.0, 1.0));
        assert!((b + 45.0).abs() < 1e-12);
        let b = bearing_right(o, 90.0, Point2::new(0.0, 2.0));
        assert!(b.abs() < 1e-12);
    }
}
