use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::world::WorldError;

/// Largest control-point residual (meters) accepted by
/// [`DrawingTransform::fit_control_points`].
pub const MAX_CONTROL_RESIDUAL_M: f64 = 0.05;

const MIN_DETERMINANT: f64 = 1e-12;

/// Affine map from drawing pixels to world meters: `world = linear · px + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawingTransform {
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

/// A pixel coordinate paired with its surveyed world position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlPoint {
    pub pixel: [f64; 2],
    pub world: [f64; 2],
}

impl DrawingTransform {
    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translation: [0.0, 0.0],
        }
    }

    pub fn new(linear: [[f64; 2]; 2], translation: [f64; 2]) -> Result<Self, WorldError> {
        let t = Self { linear, translation };
        if !(t.determinant().abs() > MIN_DETERMINANT) {
            return Err(WorldError::Validation(format!(
                "transform linear part is singular (det = {})",
                t.determinant()
            )));
        }
        if linear.iter().flatten().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(WorldError::Validation("transform has non-finite coefficients".into()));
        }
        Ok(t)
    }

    /// Uniform scale in meters per pixel plus a translation.
    pub fn scale_translate(scale: f64, translation: [f64; 2]) -> Result<Self, WorldError> {
        Self::new([[scale, 0.0], [0.0, scale]], translation)
    }

    pub fn determinant(&self) -> f64 {
        let [[a, b], [c, d]] = self.linear;
        a * d - b * c
    }

    pub fn drawing_to_world(&self, px: Point2) -> Point2 {
        let [[a, b], [c, d]] = self.linear;
        Point2::new(
            a * px.x + b * px.y + self.translation[0],
            c * px.x + d * px.y + self.translation[1],
        )
    }

    pub fn world_to_drawing(&self, w: Point2) -> Point2 {
        let [[a, b], [c, d]] = self.linear;
        let det = self.determinant();
        let (x, y) = (w.x - self.translation[0], w.y - self.translation[1]);
        Point2::new((d * x - b * y) / det, (-c * x + a * y) / det)
    }

    /// Least-squares affine fit over at least three non-collinear control
    /// points. Returns the transform and the largest residual in meters.
    pub fn fit_control_points(points: &[ControlPoint]) -> Result<(Self, f64), WorldError> {
        if points.len() < 3 {
            return Err(WorldError::Validation(format!(
                "transform needs at least 3 control points, got {}",
                points.len()
            )));
        }
        let n = points.len();
        let design = DMatrix::from_fn(n, 3, |r, c| match c {
            0 => points[r].pixel[0],
            1 => points[r].pixel[1],
            _ => 1.0,
        });
        let svd = design.clone().svd(true, true);
        let rank = svd.rank(1e-9 * svd.singular_values.max().max(1.0));
        if rank < 3 {
            return Err(WorldError::Validation("control points are collinear".into()));
        }
        let mut rows = [[0.0; 3]; 2];
        for (axis, row) in rows.iter_mut().enumerate() {
            let rhs = DVector::from_fn(n, |r, _| points[r].world[axis]);
            let sol = svd
                .solve(&rhs, 1e-12)
                .map_err(|e| WorldError::Validation(format!("control point fit failed: {e}")))?;
            *row = [sol[0], sol[1], sol[2]];
        }
        let t = Self::new(
            [[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]],
            [rows[0][2], rows[1][2]],
        )?;
        let residual = points
            .iter()
            .map(|cp| {
                t.drawing_to_world(Point2::new(cp.pixel[0], cp.pixel[1]))
                    .distance(Point2::new(cp.world[0], cp.world[1]))
            })
            .fold(0.0, f64::max);
        if residual > MAX_CONTROL_RESIDUAL_M {
            return Err(WorldError::Validation(format!(
                "control point residual {residual:.4} m exceeds {MAX_CONTROL_RESIDUAL_M} m"
            )));
        }
        Ok((t, residual))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_maps_points_unchanged() {
        let t = DrawingTransform::identity();
        assert_eq!(t.drawing_to_world(Point2::new(3.0, 4.0)), Point2::new(3.0, 4.0));
    }

    #[test]
    fn scale_and_translate_by_hand() {
        // 0.05 * 100 + 10 = 15, 0.05 * 100 + 20 = 25
        let t = DrawingTransform::scale_translate(0.05, [10.0, 20.0]).unwrap();
        let w = t.drawing_to_world(Point2::new(100.0, 100.0));
        assert!((w.x - 15.0).abs() < 1e-12 && (w.y - 25.0).abs() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        assert!(DrawingTransform::new([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0]).is_err());
    }

    #[test]
    fn control_points_recover_exact_affine() {
        let truth = DrawingTransform::new([[0.05, 0.0], [0.0, -0.05]], [1.0, 30.0]).unwrap();
        let pts: Vec<ControlPoint> = [(0.0, 0.0), (400.0, 0.0), (0.0, 300.0), (250.0, 120.0)]
            .iter()
            .map(|&(x, y)| {
                let w = truth.drawing_to_world(Point2::new(x, y));
                ControlPoint { pixel: [x, y], world: [w.x, w.y] }
            })
            .collect();
        let (fit, residual) = DrawingTransform::fit_control_points(&pts).unwrap();
        assert!(residual < 1e-9);
        for (a, b) in fit.linear.iter().flatten().zip(truth.linear.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn control_points_with_large_residual_rejected() {
        let pts = [
            ControlPoint { pixel: [0.0, 0.0], world: [0.0, 0.0] },
            ControlPoint { pixel: [10.0, 0.0], world: [1.0, 0.0] },
            ControlPoint { pixel: [0.0, 10.0], world: [0.0, 1.0] },
            ControlPoint { pixel: [10.0, 10.0], world: [1.5, 1.5] },
        ];
        let err = DrawingTransform::fit_control_points(&pts).unwrap_err();
        assert!(err.to_string().contains("residual"));
    }

    #[test]
    fn collinear_control_points_rejected() {
        let pts = [
            ControlPoint { pixel: [0.0, 0.0], world: [0.0, 0.0] },
            ControlPoint { pixel: [1.0, 1.0], world: [1.0, 1.0] },
            ControlPoint { pixel: [2.0, 2.0], world: [2.0, 2.0] },
        ];
        assert!(DrawingTransform::fit_control_points(&pts).is_err());
    }
}
