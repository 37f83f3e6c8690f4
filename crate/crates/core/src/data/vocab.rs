use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::digest::{sha256_hex, strings_digest};

/// Dense id ↔ index table with per-entry counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "IdTableRepr", into = "IdTableRepr")]
pub struct IdTable {
    ids: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct IdTableRepr {
    ids: Vec<String>,
    counts: Vec<u64>,
}

impl From<IdTableRepr> for IdTable {
    fn from(r: IdTableRepr) -> Self {
        let index = r.ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let mut counts = r.counts;
        counts.resize(r.ids.len(), 0);
        IdTable {
            ids: r.ids,
            counts,
            index,
        }
    }
}

impl From<IdTable> for IdTableRepr {
    fn from(t: IdTable) -> Self {
        IdTableRepr {
            ids: t.ids,
            counts: t.counts,
        }
    }
}

impl IdTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `id`, adding it if new, and bumps its count.
    pub fn observe(&mut self, id: &str) -> usize {
        let i = match self.index.get(id) {
            Some(&i) => i,
            None => {
                self.ids.push(id.to_string());
                self.counts.push(0);
                self.index.insert(id.to_string(), self.ids.len() - 1);
                self.ids.len() - 1
            }
        };
        self.counts[i] += 1;
        i
    }

    pub fn to_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn to_id(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(index).copied().unwrap_or(0)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn digest(&self) -> [u8; 32] {
        strings_digest(self.ids.iter().map(String::as_str))
    }
}

/// Users, locations and (check-in mode only) categories.
///
/// Locations and categories never seen in training map to the reserved
/// UNKNOWN index, which equals the number of known entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub users: IdTable,
    pub locations: IdTable,
    pub categories: Option<IdTable>,
}

impl Vocab {
    pub fn unknown_location(&self) -> usize {
        self.locations.len()
    }

    pub fn unknown_category(&self) -> usize {
        self.categories.as_ref().map_or(0, IdTable::len)
    }

    pub fn location_index(&self, id: &str) -> usize {
        self.locations.to_index(id).unwrap_or(self.unknown_location())
    }

    pub fn category_index(&self, id: &str) -> usize {
        self.categories
            .as_ref()
            .and_then(|c| c.to_index(id))
            .unwrap_or(self.unknown_category())
    }

    /// Hex digest identifying the location or category index space.
    pub fn level_digest(&self, level: Level) -> String {
        match level {
            Level::Location => sha256_hex(&self.locations.digest()),
            Level::Category => sha256_hex(
                &self
                    .categories
                    .as_ref()
                    .map(IdTable::digest)
                    .unwrap_or_default(),
            ),
        }
    }
}

/// Node kind of a graph or embedding table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Location,
    Category,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Location => "location",
            Level::Category => "category",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "location" => Ok(Level::Location),
            "category" => Ok(Level::Category),
            other => Err(crate::Error::Parse(format!("unknown level `{other}`"))),
        }
    }
}
