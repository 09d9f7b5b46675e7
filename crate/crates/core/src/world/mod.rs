//! Static world: occupancy grid, drawing transform, zone labels and
//! attributed objects, loaded from scenario files.

mod grid;
mod objects;
mod scenario;
mod transform;

pub use grid::{Cell, OccupancyGrid};
pub use objects::{
    object_matches, AttributeLiteral, Polarity, Referent, RelationGraph, RelationLiteral, Relations, TargetPredicate,
    WorldObject, RELATION_KINDS,
};
pub use scenario::{
    load_scenario, parse_scenario, GridSection, LabelEntry, ObjectEntry, Scenario, ScenarioFile, StartEntry,
    TransformSection, ZoneLabel,
};
pub use transform::{ControlPoint, DrawingTransform, MAX_CONTROL_RESIDUAL_M};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("scenario i/o: {0}")]
    Io(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario validation error: {0}")]
    Validation(String),
    #[error("predicate error: {0}")]
    Predicate(String),
}
