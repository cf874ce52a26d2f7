//! Semantic class identifiers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Per-pixel semantic label.
pub type ClassId = u16;

/// Pixels with no semantic label (floor, sky, misses).
pub const UNLABELED: ClassId = 0;
/// Structural walls, including the scene boundary.
pub const WALL: ClassId = 1;
/// First id handed out to object classes.
pub const FIRST_OBJECT: ClassId = 2;

pub fn is_object_class(id: ClassId) -> bool {
    id >= FIRST_OBJECT
}

/// Bidirectional name ↔ id table for object classes.
///
/// Ids are assigned in sorted name order so two vocabularies built from the
/// same set of names agree.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort();
        names.dedup();
        for n in &names {
            assert!(is_valid_class_name(n), "invalid class name {n:?}");
        }
        Self { names }
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as ClassId + FIRST_OBJECT)
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        if !is_object_class(id) {
            return None;
        }
        self.names
            .get((id - FIRST_OBJECT) as usize)
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> BTreeMap<String, ClassId> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as ClassId + FIRST_OBJECT))
            .collect()
    }
}

/// Class names travel inside bracketed, comma separated lists in the text
/// map, so those characters are reserved.
pub fn is_valid_class_name(name: &str) -> bool {
    !name.is_empty()
        && !name
            .chars()
            .any(|c| matches!(c, ',' | '[' | ']' | '\n' | '\r'))
        && name.trim() == name
}
