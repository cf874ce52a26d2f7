//! The perceive / remember / decide / move loop.

use std::io::{self, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::ground_truth::shortest_path_length;
use super::metrics::Outcome;
use super::planner::{resample, GridPlanner};
use super::render::{render_panorama, summarize_panorama, RenderConfig};
use super::scene::Scene;
use super::SimError;
use crate::affordance::{
    compose_field, directional_point_set, history_points, phase_from, ranked_candidates,
    safety_mask, AffordanceConfig, AffordanceField, Phase, PhaseInputs,
};
use crate::cloud::{NearestIndex, PointCloud};
use crate::geometry::{Vec2, Vec3};
use crate::oracle::{
    deepest_heading, DecisionOracle, OracleDecision, OracleRequest, RoomClassifier, ScriptedOracle,
};
use crate::semantic_map::{
    build_occupancy_grid, estimate_floor, BridgeScope, MapConfig, SemanticMap,
};
use crate::topo::{NodeId, TextMask, TopoConfig, TopoContext, TopoGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    #[serde(default)]
    pub name: String,
    pub scene: Scene,
    /// `[x, y, yaw]`.
    pub start: [f64; 3],
    pub target: String,
    pub max_steps: usize,
    #[serde(default = "default_success_distance")]
    pub success_distance: f64,
    #[serde(default = "default_headings")]
    pub num_headings: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_success_distance() -> f64 {
    1.0
}

fn default_headings() -> usize {
    12
}

impl EpisodeSpec {
    pub fn new(scene: Scene, start: [f64; 3], target: &str, max_steps: usize) -> Self {
        Self {
            name: String::new(),
            scene,
            start,
            target: target.to_string(),
            max_steps,
            success_distance: default_success_distance(),
            num_headings: default_headings(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.scene.validate()?;
        if !(self.success_distance > 0.0) {
            return Err(SimError::InvalidEpisode(
                "success_distance must be positive".into(),
            ));
        }
        if self.num_headings == 0 {
            return Err(SimError::InvalidEpisode(
                "num_headings must be at least 1".into(),
            ));
        }
        if self.scene.instances(&self.target).next().is_none() {
            return Err(SimError::InvalidEpisode(format!(
                "target {:?} not in scene",
                self.target
            )));
        }
        Ok(())
    }
}

/// How the decision oracle and the detector are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Acquisition needs the oracle's claim and detected target points.
    #[default]
    Combined,
    /// Phase follows the oracle's claim alone.
    VlmOnly,
    /// No oracle: found means detected, direction is the deepest heading and
    /// the node of interest is always the current one.
    DetectorOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// `nav_classes` is filled from `nav_class_names` per scene.
    pub map: MapConfig,
    pub topo: TopoConfig,
    pub affordance: AffordanceConfig,
    pub render: RenderConfig,
    /// Object classes the agent may stand on (ramps, stairs).
    pub nav_class_names: Vec<String>,
    pub agent_radius: f64,
    /// Spacing of executed positions along a planned path.
    pub step_length: f64,
    /// Exploration waypoints closer than this are skipped.
    pub min_waypoint_distance: f64,
    pub oracle_mode: OracleMode,
    pub mask: TextMask,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            map: MapConfig {
                bridge_scope: BridgeScope::Observation,
                ..MapConfig::default()
            },
            topo: TopoConfig::default(),
            affordance: AffordanceConfig::default(),
            render: RenderConfig::default(),
            nav_class_names: Vec::new(),
            agent_radius: 0.15,
            step_length: 0.25,
            min_waypoint_distance: 0.5,
            oracle_mode: OracleMode::Combined,
            mask: TextMask::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.map.validate()?;
        self.topo.validate()?;
        self.affordance.validate()?;
        if !(self.agent_radius >= 0.0
            && self.step_length > 0.0
            && self.min_waypoint_distance >= 0.0)
        {
            return Err(SimError::InvalidConfig(
                "agent_radius, step_length and min_waypoint_distance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub position: [f64; 2],
    pub room: String,
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Pose at the start of the step, `[x, y, yaw]`.
    pub pose: [f64; 3],
    pub phase: Phase,
    pub decision: OracleDecision,
    pub waypoint: Option<[f64; 2]>,
    pub node_count: usize,
    pub frontier_count: usize,
    /// Node the agent was assigned to this step.
    pub node: NodeId,
    pub nodes: Vec<NodeRecord>,
    /// `(kept, absorbed)` pairs from this step's merge pass.
    pub merges: Vec<(NodeId, NodeId)>,
    pub frontiers: Vec<[f64; 2]>,
    /// Executed positions after the pose.
    pub path: Vec<[f64; 2]>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub success: bool,
    pub path_length: f64,
    pub shortest_length: f64,
    pub dtg: f64,
    pub steps: usize,
    pub trajectory: Vec<[f64; 3]>,
    pub log: Vec<StepRecord>,
    pub events: Vec<String>,
    /// Masked field of the last step that selected a waypoint.
    pub last_field: Option<AffordanceField>,
    /// Topological map text of the last oracle request.
    pub topo_text: String,
}

impl EpisodeResult {
    pub fn outcome(&self) -> Outcome {
        Outcome {
            success: self.success,
            path_length: self.path_length,
            shortest_length: self.shortest_length,
            dtg: self.dtg,
        }
    }

    /// JSON lines, one record per step.
    pub fn write_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.log {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Obstacle points that do not lie on a walkable object such as a ramp.
fn blocking_obstacles(map: &SemanticMap) -> PointCloud {
    let walkable: Vec<Vec3> = map
        .config()
        .nav_classes
        .iter()
        .flat_map(|&c| map.object_cloud(c).points)
        .collect();
    if walkable.is_empty() {
        return map.obstacles.clone();
    }
    let index = NearestIndex::new(&walkable);
    let r = map.config().r_pcd;
    map.obstacles
        .filter(|p| index.nearest_distance(p).is_none_or(|d| d > r))
}

fn planar_min_distance(p: Vec2, cloud: &PointCloud) -> Option<f64> {
    cloud
        .iter()
        .map(|q| (Vec2::new(q.x, q.y) - p).norm())
        .min_by(f64::total_cmp)
}

/// Runs one episode. Errors are reserved for invalid inputs; navigation
/// failures come back as unsuccessful results.
pub fn run_episode(
    spec: &EpisodeSpec,
    cfg: &EpisodeConfig,
    oracle: &dyn DecisionOracle,
    rooms: &dyn RoomClassifier,
) -> Result<EpisodeResult, SimError> {
    spec.validate()?;
    cfg.validate()?;
    let scene = &spec.scene;
    let vocab = scene.vocabulary();
    let target_id = vocab
        .id(&spec.target)
        .ok_or_else(|| SimError::InvalidEpisode(format!("unknown target {}", spec.target)))?;
    let walkable = &cfg.nav_class_names;
    let start = Vec2::new(spec.start[0], spec.start[1]);
    if scene.clearance(start, walkable) < cfg.agent_radius {
        return Err(SimError::PoseInsideGeometry {
            x: start.x,
            y: start.y,
        });
    }
    let shortest_length = shortest_path_length(
        scene,
        walkable,
        start,
        &spec.target,
        cfg.agent_radius,
        cfg.map.r_g / 2.0,
        spec.success_distance,
    )
    .ok_or_else(|| SimError::Unsolvable(spec.target.clone()))?;
    let true_distance = |p: Vec2| {
        scene
            .distance_to_class(p, &spec.target)
            .unwrap_or(f64::INFINITY)
    };

    let mut map_cfg = cfg.map.clone();
    map_cfg.nav_classes = walkable.iter().filter_map(|c| vocab.id(c)).collect();
    let mut map = SemanticMap::new(map_cfg)?;
    let mut graph = TopoGraph::new(cfg.topo.clone())?;
    let inflation = cfg.agent_radius + cfg.map.r_g;
    let n = spec.num_headings;
    let fallback = ScriptedOracle::default();

    let mut pos = start;
    let mut yaw = spec.start[2];
    let mut trajectory = vec![[pos.x, pos.y, yaw]];
    let mut visited = vec![pos];
    let mut bumps: Vec<Vec2> = Vec::new();
    let mut path_length = 0.0;
    let mut log = Vec::new();
    let mut events = Vec::new();
    let mut stopped = false;
    let mut last_field = None;
    let mut topo_text = String::new();

    for step in 0..spec.max_steps {
        let mut ev = Vec::new();
        let pose = [pos.x, pos.y, yaw];
        let frames = render_panorama(scene, &vocab, pos.x, pos.y, n, &cfg.render)?;
        if map.z_floor.is_none() {
            map.z_floor = Some(estimate_floor(&frames, &frames[0].pose, map.config())?);
        }
        for f in &frames {
            map.integrate_frame(f)?;
        }
        map.refresh(pos)?;
        let zf = map.floor()?;
        let summaries = summarize_panorama(&frames, &vocab, cfg.render.max_depth);

        let room = rooms.classify_room(&summaries);
        let ctx = TopoContext::from_map(&map);
        let mut current = graph.create_node(pos, &ctx, &room, step);
        let merges = graph.try_merge(&ctx);
        for &(kept, absorbed) in &merges {
            if absorbed == current {
                current = kept;
            }
        }
        graph.refresh_attributes(&ctx);
        graph.record_visit(current)?;

        let request = OracleRequest {
            topo_text: graph.serialize_text(Some(current), &spec.target, &vocab, cfg.mask),
            target: spec.target.clone(),
            panorama: summaries,
            history: graph.history().to_vec(),
        };
        topo_text.clone_from(&request.topo_text);
        let decision = match cfg.oracle_mode {
            OracleMode::DetectorOnly => OracleDecision {
                next_node: current,
                direction: deepest_heading(&request.panorama),
                found: map.has_object(target_id),
            },
            _ => match oracle.decide(&request) {
                Ok(d) => d,
                Err(e) => {
                    ev.push(format!("oracle error: {e}"));
                    fallback.decide(&request).unwrap_or(OracleDecision {
                        next_node: current,
                        direction: deepest_heading(&request.panorama),
                        found: false,
                    })
                }
            },
        };
        let target_points = map.object_cloud(target_id);
        let phase = match cfg.oracle_mode {
            OracleMode::VlmOnly => phase_from(decision.found, true),
            _ => phase_from(decision.found, !target_points.is_empty()),
        };

        let mut record = StepRecord {
            step,
            pose,
            phase,
            decision,
            waypoint: None,
            node_count: graph.len(),
            frontier_count: map.frontiers.len(),
            node: current,
            nodes: graph
                .nodes()
                .iter()
                .map(|nd| NodeRecord {
                    id: nd.id,
                    position: nd.position,
                    room: nd.room.clone(),
                })
                .collect(),
            merges,
            frontiers: map.frontiers.iter().map(|p| [p.x, p.y]).collect(),
            path: Vec::new(),
            events: Vec::new(),
        };

        let within_mapped = |p: Vec2| {
            planar_min_distance(p, &target_points).is_some_and(|d| d <= spec.success_distance)
        };
        if phase == Phase::TargetAcquisition && within_mapped(pos) {
            ev.push("stop".into());
            record.events = ev;
            log.push(record);
            stopped = true;
            break;
        }

        let blockers = blocking_obstacles(&map);
        let r_topo = graph.config.r_topo;
        let node_frontiers = graph
            .node(decision.next_node)
            .or_else(|| {
                graph
                    .nodes()
                    .iter()
                    .rev()
                    .max_by_key(|nd| nd.frontier_count)
            })
            .map(|nd| {
                map.frontiers
                    .filter(|p| (Vec2::new(p.x, p.y) - nd.pos()).norm() < r_topo)
            })
            .unwrap_or_default();
        let inputs = PhaseInputs {
            direction: directional_point_set(
                pos,
                decision.direction,
                n,
                &map.navigable,
                cfg.affordance.theta_dir,
            )?,
            node: node_frontiers,
            history: if cfg.affordance.use_history {
                history_points(&visited, cfg.affordance.history_radius, zf)
            } else {
                PointCloud::new()
            },
            semantic: target_points.clone(),
            frontiers: map.frontiers.clone(),
            obstacles: blockers.clone(),
        };
        let field = match compose_field(&map.navigable, phase, &inputs, &cfg.affordance) {
            Ok(f) => safety_mask(f, &blockers, &cfg.affordance),
            Err(e) => {
                ev.push(format!("no field: {e}"));
                record.events = ev;
                log.push(record);
                break;
            }
        };

        let rebuilt;
        let grid = if blockers.len() == map.obstacles.len() {
            map.grid.as_ref().expect("refresh builds the grid")
        } else {
            rebuilt = build_occupancy_grid(&map.navigable, &blockers, cfg.map.r_g)?;
            &rebuilt
        };
        let fill = (cfg.map.step / cfg.map.r_g).ceil() as usize - 1;
        let planner = match GridPlanner::with_fill(grid, pos, inflation, fill) {
            Ok(mut p) => {
                for &b in &bumps {
                    p.block_disc(b, inflation);
                }
                p
            }
            Err(e) => {
                ev.push(format!("planner: {e}"));
                record.events = ev;
                log.push(record);
                break;
            }
        };
        let reach = planner.reachable();
        let min_d = match phase {
            Phase::Exploration => cfg.min_waypoint_distance,
            Phase::TargetAcquisition => 0.0,
        };
        let mut skipped = 0usize;
        let mut goal = None;
        for i in ranked_candidates(&field, pos) {
            let p = field.candidates.points[i];
            let q = Vec2::new(p.x, p.y);
            if (q - pos).norm() < min_d {
                continue;
            }
            if planner.is_reachable(&reach, q) {
                goal = Some(q);
                break;
            }
            skipped += 1;
        }
        if skipped > 0 {
            ev.push(format!("replan: skipped {skipped} unreachable candidates"));
        }
        if goal.is_none() {
            let mut fr: Vec<Vec2> = map
                .frontiers
                .iter()
                .map(|p| Vec2::new(p.x, p.y))
                .filter(|q| (q - pos).norm() >= min_d && planner.is_reachable(&reach, *q))
                .collect();
            fr.sort_by(|a, b| (a - pos).norm().total_cmp(&(b - pos).norm()));
            goal = fr.first().copied();
            if goal.is_some() {
                ev.push("fallback: nearest reachable frontier".into());
            }
        }
        last_field = Some(field);
        let Some(goal) = goal else {
            ev.push("no reachable waypoint".into());
            record.events = ev;
            log.push(record);
            break;
        };
        record.waypoint = Some([goal.x, goal.y]);
        let path = planner
            .plan_smoothed(goal)
            .expect("goal cell was reached by flood fill");

        for p in resample(&path, cfg.step_length) {
            if scene.clearance(p, walkable) < cfg.agent_radius {
                ev.push(format!("blocked at ({:.2}, {:.2})", p.x, p.y));
                bumps.push(p);
                break;
            }
            let d = p - pos;
            path_length += d.norm();
            if d.norm() > 0.0 {
                yaw = d.y.atan2(d.x);
            }
            pos = p;
            trajectory.push([pos.x, pos.y, yaw]);
            visited.push(pos);
            record.path.push([pos.x, pos.y]);
            if phase == Phase::TargetAcquisition && within_mapped(pos) {
                ev.push("stop".into());
                stopped = true;
                break;
            }
        }
        record.events = ev;
        log.push(record);
        if stopped {
            break;
        }
    }

    for r in &log {
        events.extend(r.events.iter().map(|e| format!("step {}: {e}", r.step)));
    }
    let dtg = true_distance(pos);
    Ok(EpisodeResult {
        success: stopped && dtg <= spec.success_distance,
        path_length,
        shortest_length,
        dtg,
        steps: log.len(),
        trajectory,
        log,
        events,
        last_field,
        topo_text,
    })
}

/// Runs independent episodes on up to `threads` workers; results keep the
/// order of `specs`.
pub fn run_batch<O>(
    specs: &[EpisodeSpec],
    cfg: &EpisodeConfig,
    oracle: &O,
    threads: usize,
) -> Vec<Result<EpisodeResult, SimError>>
where
    O: DecisionOracle + RoomClassifier + Sync,
{
    let threads = threads.clamp(1, specs.len().max(1));
    let slots: Vec<Mutex<Option<Result<EpisodeResult, SimError>>>> =
        specs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for t in 0..threads {
            let slots = &slots;
            s.spawn(move || {
                for i in (t..specs.len()).step_by(threads) {
                    let r = run_episode(&specs[i], cfg, oracle, oracle);
                    *slots[i].lock().expect("slot lock") = Some(r);
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .expect("slot lock")
                .expect("every slot filled")
        })
        .collect()
}
