use std::collections::BTreeMap;

use super::{HeadingSummary, RoomClassifier};
use crate::topo::UNKNOWN_ROOM;

const DEFAULT_TABLE: &str = include_str!("../../data/rooms.json");

/// Object class → room type lookup used by the scripted room classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoomTable {
    map: BTreeMap<String, String>,
}

impl Default for RoomTable {
    fn default() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("bundled room table parses")
    }
}

impl RoomTable {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self {
            map: serde_json::from_str(text)?,
        })
    }

    /// Adds or overrides entries.
    pub fn extend(&mut self, other: RoomTable) {
        self.map.extend(other.map);
    }

    pub fn room_for(&self, class: &str) -> Option<&str> {
        self.map.get(class).map(String::as_str)
    }

    /// Majority vote over every (heading, class) sighting that maps to a
    /// room. Ties go to the alphabetically first room.
    pub fn classify(&self, panorama: &[HeadingSummary]) -> String {
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for h in panorama {
            for c in &h.classes {
                if let Some(room) = self.room_for(c) {
                    *votes.entry(room).or_default() += 1;
                }
            }
        }
        let mut best: Option<(&str, usize)> = None;
        for (room, n) in votes {
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((room, n));
            }
        }
        best.map_or(UNKNOWN_ROOM, |(r, _)| r).to_string()
    }
}

impl RoomClassifier for RoomTable {
    fn classify_room(&self, panorama: &[HeadingSummary]) -> String {
        self.classify(panorama)
    }
}
