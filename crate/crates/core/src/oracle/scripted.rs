use std::cmp::Reverse;

use super::{
    DecisionOracle, HeadingSummary, OracleDecision, OracleError, OracleRequest, RoomClassifier,
    RoomTable,
};
use crate::topo::{NodeId, TextMap, TextNode};

/// Deterministic stand-in for a vision-language model.
///
/// * `found` iff the target class shows up in any heading.
/// * `direction` is the lowest heading showing the target, otherwise the
///   heading with the largest free depth (lowest index on ties).
/// * `next_node`, when no node lists the target among its objects, is the
///   current node if it still has frontiers; otherwise nodes are ranked by
///   frontier-bearing room matching the target, frontier count, how long ago
///   they were visited (never visited first), then id.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle {
    pub rooms: RoomTable,
}

impl ScriptedOracle {
    pub fn new(rooms: RoomTable) -> Self {
        Self { rooms }
    }

    pub fn scripted_decide(&self, request: &OracleRequest) -> Result<OracleDecision, OracleError> {
        request.validate()?;
        let map = request.parsed_map()?;
        let (found, direction) = direction_rule(&request.panorama, &request.target);
        let next_node = self.node_rule(&map, &request.target, &request.history);
        Ok(OracleDecision {
            next_node,
            direction,
            found,
        })
    }

    fn node_rule(&self, map: &TextMap, target: &str, history: &[NodeId]) -> NodeId {
        let current = map.current.or_else(|| history.last().copied());
        if let Some(n) = map
            .nodes
            .iter()
            .find(|n| n.objects.iter().any(|o| o == target))
        {
            return n.id;
        }
        if let Some(cur) = current.and_then(|c| map.nodes.iter().find(|n| n.id == c)) {
            if cur.frontiers.unwrap_or(0) > 0 {
                return cur.id;
            }
        }
        let target_room = self.rooms.room_for(target);
        let last_visit = |id: NodeId| history.iter().rposition(|&h| h == id);
        let key = |n: &TextNode| {
            let f = n.frontiers.unwrap_or(0);
            let room_hit = f > 0 && target_room.is_some_and(|r| r == n.room);
            (
                Reverse(room_hit),
                Reverse(f),
                last_visit(n.id).map_or(-1, |i| i as i64),
                n.id,
            )
        };
        map.nodes
            .iter()
            .min_by_key(|n| key(n))
            .map(|n| n.id)
            .or(current)
            .unwrap_or(0)
    }
}

/// `(found, heading)` from the panorama summary.
pub(crate) fn direction_rule(panorama: &[HeadingSummary], target: &str) -> (bool, usize) {
    let mut sorted: Vec<&HeadingSummary> = panorama.iter().collect();
    sorted.sort_by_key(|h| h.heading);
    if let Some(h) = sorted
        .iter()
        .find(|h| h.classes.iter().any(|c| c == target))
    {
        return (true, h.heading);
    }
    (false, deepest_heading(panorama))
}

/// Heading with the largest free depth, lowest index on ties.
pub(crate) fn deepest_heading(panorama: &[HeadingSummary]) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for h in panorama {
        let better = match best {
            None => true,
            Some((d, idx)) => h.free_depth > d || (h.free_depth == d && h.heading < idx),
        };
        if better {
            best = Some((h.free_depth, h.heading));
        }
    }
    best.map_or(0, |(_, h)| h)
}

impl DecisionOracle for ScriptedOracle {
    fn decide(&self, request: &OracleRequest) -> Result<OracleDecision, OracleError> {
        self.scripted_decide(request)
    }
}

impl RoomClassifier for ScriptedOracle {
    fn classify_room(&self, panorama: &[HeadingSummary]) -> String {
        self.rooms.classify(panorama)
    }
}
