//! The prior set and its binary bundle file.
//!
//! ```text
//! magic    8 bytes "PG2PRI\0\0"
//! version  u32     1
//! digest   string  config digest
//! clamp    f64     distance clamp in km
//! count    u32     number of sections
//! section* name string, rows u64, cols u64, data f64 * rows * cols
//! ```
//!
//! Sections: `gamma` (48×48), `coords` (L×3: lat, lon, present flag) and,
//! in check-in mode, `activity` (C×48 raw counts).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::activity::{activity_weights, build_activity_graph, ActivityBipartite};
use super::geo::{distance_weights, GeoTable};
use super::time::{build_time_correlation, time_weights, TimeCorrelation};
use crate::data::{Dataset, Poi, SLOTS};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::numeric::checkpoint::Reader;

const MAGIC: &[u8; 8] = b"PG2PRI\0\0";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    /// Lower bound on distances before inversion, in km.
    pub distance_clamp_km: f64,
    /// Force the activity prior on or off; unset follows the dataset mode.
    pub activity: Option<bool>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            distance_clamp_km: 0.01,
            activity: None,
        }
    }
}

impl PriorConfig {
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// Weight vectors aligned with one POI sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceWeights {
    pub distance: Vec<f64>,
    pub time: Vec<f64>,
    pub activity: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSet {
    pub geo: GeoTable,
    pub time: TimeCorrelation,
    pub activity: Option<ActivityBipartite>,
    pub distance_clamp_km: f64,
    pub config_digest: String,
}

impl PriorSet {
    /// Builds all priors from the training sessions of `ds`.
    pub fn build(ds: &Dataset, cfg: &PriorConfig) -> Result<Self> {
        let want_activity = cfg.activity.unwrap_or(ds.has_categories());
        let activity = if want_activity {
            Some(build_activity_graph(ds)?)
        } else {
            None
        };
        Ok(Self {
            geo: GeoTable::from_dataset(ds),
            time: build_time_correlation(&ds.sessions),
            activity,
            distance_clamp_km: cfg.distance_clamp_km,
            config_digest: cfg.digest(),
        })
    }

    /// Weights of every position of `sequence` relative to `current`.
    pub fn sequence_weights(&self, current: &Poi, sequence: &[Poi]) -> Result<SequenceWeights> {
        let locations: Vec<usize> = sequence.iter().map(|p| p.location).collect();
        let slots: Vec<u8> = sequence.iter().map(|p| p.slot).collect();
        let distance = distance_weights(current.location, &locations, &self.geo, self.distance_clamp_km)?;
        let time = time_weights(current.slot, &slots, &self.time);
        let activity = self.activity.as_ref().map(|a| {
            let unknown = a.categories;
            let cats: Vec<usize> = sequence.iter().map(|p| p.category.unwrap_or(unknown)).collect();
            activity_weights(current.slot, &cats, a)
        });
        Ok(SequenceWeights {
            distance,
            time,
            activity,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.config_digest);
        out.extend_from_slice(&self.distance_clamp_km.to_le_bytes());
        let coords: Vec<f64> = self
            .geo
            .all_coords()
            .iter()
            .flat_map(|c| match c {
                Some((lat, lon)) => [*lat, *lon, 1.0],
                None => [0.0, 0.0, 0.0],
            })
            .collect();
        let mut sections: Vec<(&str, usize, usize, &[f64])> = vec![
            ("gamma", SLOTS, SLOTS, &self.time.gamma),
            ("coords", self.geo.len(), 3, &coords),
        ];
        if let Some(a) = &self.activity {
            sections.push(("activity", a.categories, SLOTS, &a.counts));
        }
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (name, rows, cols, data) in sections {
            put_str(&mut out, name);
            out.extend_from_slice(&(rows as u64).to_le_bytes());
            out.extend_from_slice(&(cols as u64).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |msg: String| Error::format(path, msg);
        let mut r = Reader::new(bytes);
        if r.take(8).map_err(fail)? != MAGIC {
            return Err(fail("not a priors bundle".into()));
        }
        let version = r.u32().map_err(fail)?;
        if version != VERSION {
            return Err(fail(format!("unsupported priors version {version}")));
        }
        let config_digest = r.string().map_err(fail)?;
        let clamp = f64::from_le_bytes(r.take(8).map_err(fail)?.try_into().unwrap());
        let count = r.u32().map_err(fail)?;
        let (mut gamma, mut coords, mut activity) = (None, None, None);
        for _ in 0..count {
            let name = r.string().map_err(fail)?;
            let rows = r.u64().map_err(fail)? as usize;
            let cols = r.u64().map_err(fail)? as usize;
            let n = rows.checked_mul(cols).ok_or_else(|| fail("size overflow".into()))?;
            let data = r.f64s(n).map_err(fail)?;
            match (name.as_str(), cols) {
                ("gamma", SLOTS) if rows == SLOTS => gamma = Some(data),
                ("coords", 3) => coords = Some(data),
                ("activity", SLOTS) => activity = Some((rows, data)),
                _ => return Err(fail(format!("unexpected section `{name}` ({rows}×{cols})"))),
            }
        }
        if !r.finished() {
            return Err(fail("trailing bytes".into()));
        }
        let gamma = gamma.ok_or_else(|| fail("missing gamma section".into()))?;
        let coords = coords.ok_or_else(|| fail("missing coords section".into()))?;
        let coords = coords
            .chunks(3)
            .map(|c| (c[2] != 0.0).then_some((c[0], c[1])))
            .collect();
        Ok(Self {
            geo: GeoTable::new(coords),
            time: TimeCorrelation::from_gamma(gamma),
            activity: activity.map(|(rows, data)| ActivityBipartite::from_counts(rows, data)),
            distance_clamp_km: clamp,
            config_digest,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}
