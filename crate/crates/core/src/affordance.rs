//! Phase-conditioned affordance field over the navigable cloud and waypoint
//! selection.
//!
//! Every component is a normalised proximity score
//! `N(d) = 1 − (d − d_min) / (d_max − d_min + ε)` where `d` is a candidate's
//! distance to the nearest point of some source set.

use std::f64::consts::TAU;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{NearestIndex, PointCloud};
use crate::geometry::{wrap_angle, Vec2, Vec3};
use crate::labels::ClassId;
use crate::semantic_map::SemanticMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffordanceError {
    #[error("no candidates")]
    NoCandidates,
    #[error("source set is empty")]
    EmptySource,
    #[error("every candidate is masked")]
    AllMasked,
    #[error("heading {index} out of range for {count} headings")]
    HeadingOutOfRange { index: usize, count: usize },
    #[error("invalid affordance config: {0}")]
    Config(String),
}

/// How the obstacle term removes candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyRule {
    /// Drop candidates closer than `d_safe` to any obstacle point.
    Clearance,
    /// Keep a candidate iff its obstacle proximity score `N(d_obs)` exceeds
    /// `sigma`, taken literally.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AffordanceConfig {
    pub epsilon: f64,
    /// Threshold on the obstacle proximity score (literal rule).
    pub sigma: f64,
    /// Metric clearance (clearance rule).
    pub d_safe: f64,
    pub safety: SafetyRule,
    /// Half-angle of the cone around the suggested heading.
    pub theta_dir: f64,
    /// Spacing of trajectory samples in the history set.
    pub history_radius: f64,
    /// Include the history-avoidance term in exploration.
    pub use_history: bool,
}

impl Default for AffordanceConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            sigma: 0.25,
            d_safe: 0.25,
            safety: SafetyRule::Clearance,
            theta_dir: 30f64.to_radians(),
            history_radius: 0.5,
            use_history: true,
        }
    }
}

impl AffordanceConfig {
    pub fn validate(&self) -> Result<(), AffordanceError> {
        if !(self.epsilon > 0.0) {
            return Err(AffordanceError::Config("epsilon must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(AffordanceError::Config("sigma must lie in [0, 1)".into()));
        }
        if !(self.theta_dir > 0.0 && self.theta_dir < std::f64::consts::PI) {
            return Err(AffordanceError::Config(
                "theta_dir must lie in (0, π)".into(),
            ));
        }
        if !(self.d_safe >= 0.0 && self.history_radius > 0.0) {
            return Err(AffordanceError::Config("distances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Exploration,
    TargetAcquisition,
}

#[derive(Debug, Clone, Default)]
pub struct PhaseInputs {
    pub direction: PointCloud,
    pub node: PointCloud,
    pub history: PointCloud,
    pub semantic: PointCloud,
    pub frontiers: PointCloud,
    pub obstacles: PointCloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceField {
    pub candidates: PointCloud,
    pub scores: Vec<f64>,
    pub masked: Vec<bool>,
    pub phase: Phase,
}

/// Distance from each candidate to the nearest point of `source`.
pub fn nearest_distances(candidates: &PointCloud, source: &PointCloud) -> Vec<f64> {
    let idx = NearestIndex::new(&source.points);
    candidates
        .iter()
        .map(|p| idx.nearest_distance(p).unwrap_or(f64::INFINITY))
        .collect()
}

/// `N(d)` over precomputed distances.
pub fn normalize_distances(d: &[f64], epsilon: f64) -> Vec<f64> {
    let (lo, hi) = d
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo + epsilon;
    d.iter().map(|&v| 1.0 - (v - lo) / span).collect()
}

pub fn normalized_affordance(
    candidates: &PointCloud,
    source: &PointCloud,
    epsilon: f64,
) -> Result<Vec<f64>, AffordanceError> {
    if candidates.is_empty() {
        return Err(AffordanceError::NoCandidates);
    }
    if source.is_empty() {
        return Err(AffordanceError::EmptySource);
    }
    Ok(normalize_distances(
        &nearest_distances(candidates, source),
        epsilon,
    ))
}

/// Navigable points whose bearing from `agent` lies within `theta_dir` of
/// heading `2π·index/count`.
pub fn directional_point_set(
    agent: Vec2,
    index: usize,
    count: usize,
    nav: &PointCloud,
    theta_dir: f64,
) -> Result<PointCloud, AffordanceError> {
    if index >= count {
        return Err(AffordanceError::HeadingOutOfRange { index, count });
    }
    let heading = TAU * index as f64 / count as f64;
    Ok(nav.filter(|p| {
        let dx = p.x - agent.x;
        let dy = p.y - agent.y;
        if dx == 0.0 && dy == 0.0 {
            return true;
        }
        wrap_angle(dy.atan2(dx) - heading).abs() <= theta_dir
    }))
}

fn component(candidates: &PointCloud, source: &PointCloud, eps: f64) -> Option<Vec<f64>> {
    if source.is_empty() {
        None
    } else {
        Some(normalize_distances(
            &nearest_distances(candidates, source),
            eps,
        ))
    }
}

/// Component values per candidate, before summation. Missing sources yield
/// `None` and contribute nothing.
#[derive(Debug, Clone, Default)]
pub struct Components {
    pub direction: Option<Vec<f64>>,
    pub node: Option<Vec<f64>>,
    pub frontier: Option<Vec<f64>>,
    /// Already inverted: `1 − N(d_hist)`.
    pub history: Option<Vec<f64>>,
    pub semantic: Option<Vec<f64>>,
}

pub fn components(
    candidates: &PointCloud,
    phase: Phase,
    inputs: &PhaseInputs,
    cfg: &AffordanceConfig,
) -> Components {
    let eps = cfg.epsilon;
    let mut c = Components {
        direction: component(candidates, &inputs.direction, eps),
        ..Components::default()
    };
    match phase {
        Phase::Exploration => {
            c.node = component(candidates, &inputs.node, eps);
            c.frontier = component(candidates, &inputs.frontiers, eps);
            if cfg.use_history {
                c.history = component(candidates, &inputs.history, eps)
                    .map(|v| v.into_iter().map(|n| 1.0 - n).collect());
            }
        }
        Phase::TargetAcquisition => {
            c.semantic = component(candidates, &inputs.semantic, eps);
        }
    }
    c
}

/// Sums the phase's components. Exploration uses direction, node, frontier
/// and history terms; acquisition uses direction and semantic terms.
pub fn compose_field(
    candidates: &PointCloud,
    phase: Phase,
    inputs: &PhaseInputs,
    cfg: &AffordanceConfig,
) -> Result<AffordanceField, AffordanceError> {
    if candidates.is_empty() {
        return Err(AffordanceError::NoCandidates);
    }
    let comps = components(candidates, phase, inputs, cfg);
    let mut scores = vec![0.0; candidates.len()];
    for part in [
        &comps.direction,
        &comps.node,
        &comps.frontier,
        &comps.history,
        &comps.semantic,
    ]
    .into_iter()
    .flatten()
    {
        for (s, v) in scores.iter_mut().zip(part) {
            *s += v;
        }
    }
    Ok(AffordanceField {
        candidates: candidates.clone(),
        masked: vec![false; scores.len()],
        scores,
        phase,
    })
}

/// Zeroes candidates too close to obstacles.
pub fn safety_mask(
    mut field: AffordanceField,
    obstacles: &PointCloud,
    cfg: &AffordanceConfig,
) -> AffordanceField {
    if obstacles.is_empty() || field.candidates.is_empty() {
        return field;
    }
    let d = nearest_distances(&field.candidates, obstacles);
    let keep: Vec<bool> = match cfg.safety {
        SafetyRule::Clearance => d.iter().map(|&v| v >= cfg.d_safe).collect(),
        SafetyRule::Literal => normalize_distances(&d, cfg.epsilon)
            .into_iter()
            .map(|a| a > cfg.sigma)
            .collect(),
    };
    for (i, k) in keep.into_iter().enumerate() {
        if !k {
            field.scores[i] = 0.0;
            field.masked[i] = true;
        }
    }
    field
}

/// Candidate indices ordered best first: score descending, then planar
/// distance to `agent` ascending, then index. Masked candidates are left out.
pub fn ranked_candidates(field: &AffordanceField, agent: Vec2) -> Vec<usize> {
    let dist = |i: usize| {
        let p = field.candidates.points[i];
        (Vec2::new(p.x, p.y) - agent).norm()
    };
    let mut idx: Vec<usize> = (0..field.scores.len())
        .filter(|&i| !field.masked[i])
        .collect();
    idx.sort_by(|&a, &b| {
        field.scores[b]
            .total_cmp(&field.scores[a])
            .then(dist(a).total_cmp(&dist(b)))
            .then(a.cmp(&b))
    });
    idx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub index: usize,
    pub point: Vec3,
    pub score: f64,
}

/// Highest-scoring unmasked candidate; ties go to the one nearest `agent`,
/// then to the lowest index.
pub fn select_waypoint(field: &AffordanceField, agent: Vec2) -> Result<Waypoint, AffordanceError> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..field.scores.len() {
        if field.masked[i] {
            continue;
        }
        let p = field.candidates.points[i];
        let d = (Vec2::new(p.x, p.y) - agent).norm();
        let better = match best {
            None => true,
            Some((b, bd)) => {
                let (s, bs) = (field.scores[i], field.scores[b]);
                s > bs || (s == bs && d < bd)
            }
        };
        if better {
            best = Some((i, d));
        }
    }
    let (i, _) = best.ok_or(AffordanceError::AllMasked)?;
    Ok(Waypoint {
        index: i,
        point: field.candidates.points[i],
        score: field.scores[i],
    })
}

/// Acquisition iff the oracle claims the target and the map holds points of
/// that class.
pub fn choose_phase(found: bool, target: ClassId, map: &SemanticMap) -> Phase {
    phase_from(found, map.has_object(target))
}

pub fn phase_from(found: bool, target_in_map: bool) -> Phase {
    if found && target_in_map {
        Phase::TargetAcquisition
    } else {
        Phase::Exploration
    }
}

/// Trajectory positions subsampled so consecutive kept samples are at
/// least `spacing` apart, lifted to `z`.
pub fn history_points(trajectory: &[Vec2], spacing: f64, z: f64) -> PointCloud {
    let mut out: Vec<Vec3> = Vec::new();
    let mut last: Option<Vec2> = None;
    for &p in trajectory {
        if last.is_none_or(|l| (p - l).norm() >= spacing) {
            out.push(Vec3::new(p.x, p.y, z));
            last = Some(p);
        }
    }
    PointCloud::from_points(out)
}

impl AffordanceField {
    /// CSV with columns `x,y,z,score,masked`.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y", "z", "score", "masked"])?;
        for (i, p) in self.candidates.iter().enumerate() {
            wr.write_record([
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
                self.scores[i].to_string(),
                (self.masked[i] as u8).to_string(),
            ])?;
        }
        wr.flush()
    }
}
