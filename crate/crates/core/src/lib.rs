//! Object-goal navigation with a semantic point-cloud map, a topological
//! memory graph and affordance-based waypoint selection.

pub mod affordance;
pub mod cloud;
pub mod geometry;
pub mod labels;
pub mod oracle;
pub mod semantic_map;
pub mod sim;
pub mod topo;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
