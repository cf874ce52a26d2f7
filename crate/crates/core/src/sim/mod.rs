//! Box-world simulator: scenes, rendering, planning, the episode loop and
//! metrics.

pub mod batch;
mod episode;
pub mod fixtures;
mod ground_truth;
mod metrics;
pub mod planner;
pub mod procedural;
mod render;
mod scene;

pub use episode::{
    run_batch, run_episode, EpisodeConfig, EpisodeResult, EpisodeSpec, NodeRecord, OracleMode,
    StepRecord,
};
pub use ground_truth::{shortest_path_length, GroundTruthGrid};
pub use metrics::{
    compute_metrics, write_episodes_csv, write_metrics_csv, Metrics, Outcome, METRICS_HEADER,
};
pub use planner::{plan_path, GridPlanner, PlanError};
pub use render::{cast_ray, render_panorama, summarize_panorama, RenderConfig};
pub use scene::{Aabb, EpisodeDef, Scene, SceneObject};

use thiserror::Error;

use crate::affordance::AffordanceError;
use crate::semantic_map::MapError;
use crate::topo::TopoError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene parse: {0}")]
    SceneParse(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("pose ({x:.3}, {y:.3}) is inside scene geometry")]
    PoseInsideGeometry { x: f64, y: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error("no collision-free path from start to any {0}")]
    Unsolvable(String),
    #[error("metrics need at least one episode")]
    EmptyBatch,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Topo(#[from] TopoError),
    #[error(transparent)]
    Affordance(#[from] AffordanceError),
}
