//! Topological memory: nodes summarising visited places, merged when close
//! and mutually visible, plus the visit history and a line-oriented text
//! rendering for the decision oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{PlanarIndex, PointCloud};
use crate::geometry::{point_segment_distance, Vec2};
use crate::labels::{ClassId, Vocabulary};
use crate::semantic_map::SemanticMap;

pub type NodeId = u32;

pub const UNKNOWN_ROOM: &str = "unknown";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopoError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("invalid topo config: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopoConfig {
    /// Neighbourhood radius for object and frontier attributes.
    pub r_topo: f64,
    pub d_merge: f64,
    /// Half-width of the corridor searched for blocking obstacles between
    /// two nodes.
    pub los_half_width: f64,
}

impl Default for TopoConfig {
    fn default() -> Self {
        Self {
            r_topo: 2.0,
            d_merge: 1.0,
            los_half_width: 0.05,
        }
    }
}

impl TopoConfig {
    pub fn validate(&self) -> Result<(), TopoError> {
        if !(self.r_topo > 0.0 && self.d_merge > 0.0 && self.los_half_width >= 0.0) {
            return Err(TopoError::Config("radii must be positive".into()));
        }
        if self.d_merge > 2.0 * self.r_topo {
            return Err(TopoError::Config(format!(
                "d_merge {} exceeds 2·r_topo {}",
                self.d_merge,
                2.0 * self.r_topo
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoNode {
    pub id: NodeId,
    pub position: [f64; 2],
    pub objects: BTreeSet<ClassId>,
    pub room: String,
    pub frontier_count: usize,
    pub created_step: usize,
}

impl TopoNode {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }
}

/// The map layers node attributes and merge checks read from.
#[derive(Debug, Clone, Default)]
pub struct TopoContext {
    pub objects: BTreeMap<ClassId, PointCloud>,
    pub frontiers: PointCloud,
    pub obstacles: PointCloud,
    pub z_floor: f64,
    pub z_ceiling_offset: f64,
}

impl TopoContext {
    pub fn from_map(map: &SemanticMap) -> Self {
        Self {
            objects: map.objects(),
            frontiers: map.frontiers.clone(),
            obstacles: map.obstacles.clone(),
            z_floor: map.z_floor.unwrap_or(0.0),
            z_ceiling_offset: map.config().z_ceiling_offset,
        }
    }

    fn band_obstacles(&self) -> PlanarIndex {
        let lo = self.z_floor;
        let hi = self.z_floor + self.z_ceiling_offset;
        PlanarIndex::new(self.obstacles.iter().filter(|p| p.z >= lo && p.z <= hi))
    }

    /// Object classes with a point strictly inside `radius` of `pos`
    /// (planar distance).
    pub fn objects_near(&self, pos: Vec2, radius: f64) -> BTreeSet<ClassId> {
        let r2 = radius * radius;
        self.objects
            .iter()
            .filter(|(_, cloud)| {
                cloud.iter().any(|p| {
                    let dx = p.x - pos.x;
                    let dy = p.y - pos.y;
                    dx * dx + dy * dy < r2
                })
            })
            .map(|(&c, _)| c)
            .collect()
    }
}

struct Frontiers(PlanarIndex);

impl Frontiers {
    fn new(ctx: &TopoContext) -> Self {
        Self(PlanarIndex::new(ctx.frontiers.iter()))
    }

    fn count(&self, pos: Vec2, radius: f64) -> usize {
        self.0.count_within(pos.x, pos.y, radius)
    }
}

/// True iff no obstacle-band point lies within `half_width` of segment
/// `a`–`b` (closed corridor).
pub fn line_of_sight_clear(a: Vec2, b: Vec2, ctx: &TopoContext, half_width: f64) -> bool {
    los_clear_indexed(a, b, &ctx.band_obstacles(), half_width)
}

fn los_clear_indexed(a: Vec2, b: Vec2, band: &PlanarIndex, w: f64) -> bool {
    let lo = [a.x.min(b.x) - w, a.y.min(b.y) - w];
    let hi = [a.x.max(b.x) + w, a.y.max(b.y) + w];
    !band
        .in_envelope(lo, hi)
        .any(|p| point_segment_distance(Vec2::new(p[0], p[1]), a, b) <= w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoGraph {
    pub config: TopoConfig,
    nodes: Vec<TopoNode>,
    history: Vec<NodeId>,
    next_id: NodeId,
}

/// Which node attributes to withhold from the text rendering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextMask {
    pub hide_frontiers: bool,
    pub hide_room: bool,
    pub hide_objects: bool,
}

impl TopoGraph {
    pub fn new(config: TopoConfig) -> Result<Self, TopoError> {
        config.validate()?;
        Ok(Self {
            config,
            nodes: Vec::new(),
            history: Vec::new(),
            next_id: 1,
        })
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn history(&self) -> &[NodeId] {
        &self.history
    }

    pub fn node(&self, id: NodeId) -> Option<&TopoNode> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Appends a node at `position` with attributes read from `ctx`.
    /// Ids are never reused, even after the highest node was absorbed.
    pub fn create_node(
        &mut self,
        position: Vec2,
        ctx: &TopoContext,
        room: &str,
        step: usize,
    ) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        let room = if room.is_empty() { UNKNOWN_ROOM } else { room };
        let frontiers = Frontiers::new(ctx);
        self.nodes.push(TopoNode {
            id,
            position: [position.x, position.y],
            objects: ctx.objects_near(position, self.config.r_topo),
            room: room.to_string(),
            frontier_count: frontiers.count(position, self.config.r_topo),
            created_step: step,
        });
        id
    }

    fn mergeable(&self, a: &TopoNode, b: &TopoNode, band: &PlanarIndex) -> bool {
        (a.pos() - b.pos()).norm() < self.config.d_merge
            && los_clear_indexed(a.pos(), b.pos(), band, self.config.los_half_width)
    }

    /// Merges close, mutually visible pairs until none remain. Pairs are
    /// scanned lowest id first; the lower id survives with its room label
    /// and moves to the midpoint. Returns `(kept, absorbed)` in merge order.
    pub fn try_merge(&mut self, ctx: &TopoContext) -> Vec<(NodeId, NodeId)> {
        let band = ctx.band_obstacles();
        let frontiers = Frontiers::new(ctx);
        let mut merges = Vec::new();
        loop {
            let mut found = None;
            'scan: for i in 0..self.nodes.len() {
                for j in (i + 1)..self.nodes.len() {
                    if self.mergeable(&self.nodes[i], &self.nodes[j], &band) {
                        found = Some((i, j));
                        break 'scan;
                    }
                }
            }
            let Some((i, j)) = found else { break };
            let absorbed = self.nodes.remove(j);
            let r = self.config.r_topo;
            let kept = &mut self.nodes[i];
            let mid = (kept.pos() + absorbed.pos()) / 2.0;
            kept.position = [mid.x, mid.y];
            kept.objects = ctx.objects_near(mid, r);
            kept.frontier_count = frontiers.count(mid, r);
            kept.created_step = kept.created_step.min(absorbed.created_step);
            let kept_id = kept.id;
            for h in &mut self.history {
                if *h == absorbed.id {
                    *h = kept_id;
                }
            }
            merges.push((kept_id, absorbed.id));
        }
        merges
    }

    /// Recomputes objects and frontier counts of every node.
    pub fn refresh_attributes(&mut self, ctx: &TopoContext) {
        let frontiers = Frontiers::new(ctx);
        let r = self.config.r_topo;
        for n in &mut self.nodes {
            n.objects = ctx.objects_near(n.pos(), r);
            n.frontier_count = frontiers.count(n.pos(), r);
        }
    }

    pub fn record_visit(&mut self, id: NodeId) -> Result<(), TopoError> {
        if self.node(id).is_none() {
            return Err(TopoError::UnknownNode(id));
        }
        self.history.push(id);
        Ok(())
    }

    /// Overrides the room label of a node (used when attributes are
    /// withheld).
    pub fn set_room(&mut self, id: NodeId, room: &str) -> Result<(), TopoError> {
        let i = self
            .nodes
            .binary_search_by_key(&id, |n| n.id)
            .map_err(|_| TopoError::UnknownNode(id))?;
        self.nodes[i].room = room.to_string();
        Ok(())
    }

    /// Nearest node to `pos` by planar distance (lowest id on ties).
    pub fn nearest(&self, pos: Vec2) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for n in &self.nodes {
            let d = (n.pos() - pos).norm();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, n.id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Deterministic text rendering:
    ///
    /// ```text
    /// NODE <id> pos=(<x>,<y>) room=<R> objects=[<a>,<b>] frontiers=<f>
    /// HISTORY <id>,<id>,...
    /// CURRENT <id>
    /// TARGET <class>
    /// ```
    pub fn serialize_text(
        &self,
        current: Option<NodeId>,
        target: &str,
        vocab: &Vocabulary,
        mask: TextMask,
    ) -> String {
        let mut s = String::new();
        for n in &self.nodes {
            let room = if mask.hide_room {
                UNKNOWN_ROOM
            } else {
                &n.room
            };
            let mut names: Vec<&str> = if mask.hide_objects {
                Vec::new()
            } else {
                n.objects.iter().filter_map(|&c| vocab.name(c)).collect()
            };
            names.sort_unstable();
            let _ = write!(
                s,
                "NODE {} pos=({:.2},{:.2}) room={} objects=[{}]",
                n.id,
                n.position[0],
                n.position[1],
                room,
                names.join(",")
            );
            if !mask.hide_frontiers {
                let _ = write!(s, " frontiers={}", n.frontier_count);
            }
            s.push('\n');
        }
        let hist: Vec<String> = self.history.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "HISTORY {}", hist.join(","));
        match current {
            Some(c) => {
                let _ = writeln!(s, "CURRENT {c}");
            }
            None => s.push_str("CURRENT none\n"),
        }
        let _ = writeln!(s, "TARGET {target}");
        s
    }

    pub fn to_json(&self, vocab: &Vocabulary) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| {
                let objects: Vec<&str> = n.objects.iter().filter_map(|&c| vocab.name(c)).collect();
                serde_json::json!({
                    "id": n.id,
                    "position": n.position,
                    "room": n.room,
                    "objects": objects,
                    "frontiers": n.frontier_count,
                    "created_step": n.created_step,
                })
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "history": self.history })
    }
}

/// One `NODE` line read back from the text map.
#[derive(Debug, Clone, PartialEq)]
pub struct TextNode {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub room: String,
    pub objects: Vec<String>,
    /// `None` when the frontier attribute was withheld.
    pub frontiers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TextMap {
    pub nodes: Vec<TextNode>,
    pub history: Vec<NodeId>,
    pub current: Option<NodeId>,
    pub target: String,
}

fn parse_err(line: usize, msg: impl Into<String>) -> TopoError {
    TopoError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_node(line: usize, rest: &str) -> Result<TextNode, TopoError> {
    let (id, rest) = rest
        .split_once(" pos=(")
        .ok_or_else(|| parse_err(line, "missing pos"))?;
    let id = id.parse().map_err(|_| parse_err(line, "bad node id"))?;
    let (pos, rest) = rest
        .split_once(") room=")
        .ok_or_else(|| parse_err(line, "missing room"))?;
    let (x, y) = pos
        .split_once(',')
        .ok_or_else(|| parse_err(line, "bad position"))?;
    let x = x.parse().map_err(|_| parse_err(line, "bad x"))?;
    let y = y.parse().map_err(|_| parse_err(line, "bad y"))?;
    let (room, rest) = rest
        .split_once(" objects=[")
        .ok_or_else(|| parse_err(line, "missing objects"))?;
    let (objects, rest) = rest
        .split_once(']')
        .ok_or_else(|| parse_err(line, "unterminated objects"))?;
    let objects = if objects.is_empty() {
        Vec::new()
    } else {
        objects.split(',').map(str::to_string).collect()
    };
    let frontiers = match rest {
        "" => None,
        r => Some(
            r.strip_prefix(" frontiers=")
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| parse_err(line, "bad frontiers"))?,
        ),
    };
    Ok(TextNode {
        id,
        x,
        y,
        room: room.to_string(),
        objects,
        frontiers,
    })
}

/// Parses the output of [`TopoGraph::serialize_text`].
pub fn parse_text(text: &str) -> Result<TextMap, TopoError> {
    let mut map = TextMap::default();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(rest) = raw.strip_prefix("NODE ") {
            map.nodes.push(parse_node(n, rest)?);
        } else if let Some(rest) = raw.strip_prefix("HISTORY") {
            let rest = rest.trim();
            if !rest.is_empty() {
                map.history = rest
                    .split(',')
                    .map(|s| s.parse().map_err(|_| parse_err(n, "bad history id")))
                    .collect::<Result<_, _>>()?;
            }
        } else if let Some(rest) = raw.strip_prefix("CURRENT ") {
            map.current = match rest {
                "none" => None,
                s => Some(s.parse().map_err(|_| parse_err(n, "bad current id"))?),
            };
        } else if let Some(rest) = raw.strip_prefix("TARGET ") {
            map.target = rest.to_string();
        } else if !raw.is_empty() {
            return Err(parse_err(n, format!("unrecognised line {raw:?}")));
        }
    }
    Ok(map)
}
