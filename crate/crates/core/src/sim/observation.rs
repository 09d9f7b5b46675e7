use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{bearing_right, Point2, Pose2D};
use crate::sim::raycast::line_of_sight;
use crate::world::{OccupancyGrid, WorldObject};

/// Horizontal third of the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Left,
    Center,
    Right,
}

/// Band table: left `[-45, -15)`, center `[-15, 15]`, right `(15, 45]`,
/// with bearings positive to the right. Outside the field of view → `None`.
pub fn region_for_bearing(bearing_deg: f64, fov_deg: f64) -> Option<Region> {
    let half = fov_deg / 2.0;
    let third = fov_deg / 6.0;
    if bearing_deg < -half || bearing_deg > half {
        None
    } else if bearing_deg < -third {
        Some(Region::Left)
    } else if bearing_deg <= third {
        Some(Region::Center)
    } else {
        Some(Region::Right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObject {
    pub id: String,
    pub class: String,
    pub attributes: BTreeSet<String>,
    pub region: Region,
    pub apparent_distance: f64,
    /// Center hidden behind a wall while part of the footprint shows.
    pub occluded: bool,
}

/// Structured stand-in for a camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frame_objects: Vec<FrameObject>,
    pub forward_clearance: f64,
    pub pose: Pose2D,
}

pub(crate) fn render(
    grid: &OccupancyGrid,
    objects: &[WorldObject],
    pose: Pose2D,
    fov_deg: f64,
    view_range: f64,
    forward_clearance: f64,
) -> Observation {
    let eye = pose.position();
    let mut frame_objects: Vec<FrameObject> = objects
        .iter()
        .filter_map(|o| {
            let dist = eye.distance(o.pose);
            if dist > view_range || dist <= 1e-9 {
                return None;
            }
            let region = region_for_bearing(bearing_right(eye, pose.heading, o.pose), fov_deg)?;
            let occluded = match visibility(grid, eye, o) {
                Visibility::Full => false,
                Visibility::Partial => true,
                Visibility::Hidden => return None,
            };
            Some(FrameObject {
                id: o.id.clone(),
                class: o.class.clone(),
                attributes: o.attributes.clone(),
                region,
                apparent_distance: dist,
                occluded,
            })
        })
        .collect();
    frame_objects.sort_by(|a, b| {
        a.apparent_distance
            .total_cmp(&b.apparent_distance)
            .then_with(|| a.id.cmp(&b.id))
    });
    Observation { frame_objects, forward_clearance, pose }
}

enum Visibility {
    Full,
    Partial,
    Hidden,
}

fn visibility(grid: &OccupancyGrid, eye: Point2, obj: &WorldObject) -> Visibility {
    let to = obj.pose - eye;
    let dist = to.norm();
    let unit = to * (1.0 / dist);
    // solid objects occupy their own cells; aim at the near face instead
    let inset = if obj.solid { (obj.footprint_radius + grid.resolution()).min(dist) } else { 0.0 };
    let center = obj.pose - unit * inset;
    if line_of_sight(grid, eye, center) {
        return Visibility::Full;
    }
    let perp = Point2::new(-unit.y, unit.x);
    let edges = [center + perp * obj.footprint_radius, center - perp * obj.footprint_radius];
    if obj.footprint_radius > 0.0 && edges.iter().any(|&e| line_of_sight(grid, eye, e)) {
        Visibility::Partial
    } else {
        Visibility::Hidden
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_edges() {
        assert_eq!(region_for_bearing(0.0, 90.0), Some(Region::Center));
        assert_eq!(region_for_bearing(15.0, 90.0), Some(Region::Center));
        assert_eq!(region_for_bearing(-15.0, 90.0), Some(Region::Center));
        assert_eq!(region_for_bearing(15.0001, 90.0), Some(Region::Right));
        assert_eq!(region_for_bearing(-15.0001, 90.0), Some(Region::Left));
        assert_eq!(region_for_bearing(30.0, 90.0), Some(Region::Right));
        assert_eq!(region_for_bearing(45.0, 90.0), Some(Region::Right));
        assert_eq!(region_for_bearing(-45.0, 90.0), Some(Region::Left));
        assert_eq!(region_for_bearing(45.1, 90.0), None);
    }
}
