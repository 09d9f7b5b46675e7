//! Multi-module agent that turns natural-language inspection commands into
//! zone navigation plus vision-guided positioning on a simulated robot.

pub mod agent;
pub mod events;
pub mod geometry;
pub mod navigation;
pub mod positioning;
pub mod reasoning;
pub mod session;
pub mod sim;
pub mod world;
