//! Decision and room-classification oracles.
//!
//! The decision oracle answers one question per waypoint: which topological
//! node to head for, which panorama heading looks most promising, and
//! whether the target is in sight. [`ScriptedOracle`] is a deterministic rule
//! set; [`RemoteOracle`] forwards the same request to an HTTP service.

mod remote;
mod rooms;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{parse_reply, RemoteConfig, RemoteOracle, API_KEY_ENV, ENDPOINT_ENV, TIMEOUT_ENV};
pub use rooms::RoomTable;
pub(crate) use scripted::deepest_heading;
pub use scripted::ScriptedOracle;

use crate::topo::{parse_text, NodeId, TextMap};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("invalid decision: {0}")]
    InvariantViolation(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl OracleError {
    /// Remote failures worth another attempt.
    pub fn is_retriable(&self) -> bool {
        !matches!(self, OracleError::InvalidRequest(_))
    }
}

/// What the oracle sees from one heading of the panorama.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadingSummary {
    pub heading: usize,
    pub classes: Vec<String>,
    /// Mean depth along the horizon row, meters.
    pub free_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub topo_text: String,
    pub target: String,
    pub panorama: Vec<HeadingSummary>,
    pub history: Vec<NodeId>,
}

impl OracleRequest {
    /// Headings must cover `0..n` exactly once.
    pub fn validate(&self) -> Result<(), OracleError> {
        let n = self.panorama.len();
        if n == 0 {
            return Err(OracleError::InvalidRequest("empty panorama".into()));
        }
        let mut seen = vec![false; n];
        for h in &self.panorama {
            if h.heading >= n || seen[h.heading] {
                return Err(OracleError::InvalidRequest(format!(
                    "heading {} repeated or out of range",
                    h.heading
                )));
            }
            seen[h.heading] = true;
        }
        Ok(())
    }

    pub fn num_headings(&self) -> usize {
        self.panorama.len()
    }

    pub fn parsed_map(&self) -> Result<TextMap, OracleError> {
        parse_text(&self.topo_text).map_err(|e| OracleError::InvalidRequest(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleDecision {
    pub next_node: NodeId,
    pub direction: usize,
    pub found: bool,
}

impl OracleDecision {
    /// Checks the heading range and that `next_node` names a node of the
    /// request's map (when the map has any).
    pub fn validate(&self, request: &OracleRequest) -> Result<(), OracleError> {
        let n = request.num_headings();
        if self.direction >= n {
            return Err(OracleError::InvariantViolation(format!(
                "direction {} outside 0..{n}",
                self.direction
            )));
        }
        let map = request.parsed_map()?;
        if !map.nodes.is_empty() && !map.nodes.iter().any(|node| node.id == self.next_node) {
            return Err(OracleError::InvariantViolation(format!(
                "next_node {} not in map",
                self.next_node
            )));
        }
        Ok(())
    }
}

pub trait DecisionOracle {
    fn decide(&self, request: &OracleRequest) -> Result<OracleDecision, OracleError>;
}

pub trait RoomClassifier {
    fn classify_room(&self, panorama: &[HeadingSummary]) -> String;
}
