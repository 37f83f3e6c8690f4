use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Session, Split, Visit};

/// Model-facing view of a visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poi {
    pub location: usize,
    pub slot: u8,
    pub category: Option<usize>,
    /// Unix seconds.
    pub time: i64,
}

impl From<&Visit> for Poi {
    fn from(v: &Visit) -> Self {
        Poi {
            location: v.location,
            slot: v.slot,
            category: v.category,
            time: v.time.timestamp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySample {
    /// Position in the emitted sequence; stable for a given dataset and split.
    pub id: usize,
    pub user: usize,
    pub session_index: usize,
    pub history: Vec<Poi>,
    pub recent: Vec<Poi>,
    pub target: Poi,
}

impl QuerySample {
    /// The reference element for all prior weights: the last recent visit.
    pub fn current(&self) -> &Poi {
        self.recent.last().expect("recent is never empty")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueryConfig {
    /// Whether test queries see earlier test sessions as history.
    pub test_history_includes_test: bool,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            test_history_includes_test: true,
        }
    }
}

/// One sample per position `i >= 1` of every non-first session of `split`;
/// history is the flattened earlier sessions, recent the prefix before `i`.
pub fn build_queries(ds: &Dataset, split: Split, cfg: &QueryConfig) -> Vec<QuerySample> {
    let mut out = Vec::new();
    for user in 0..ds.num_users() {
        let sessions = ds.user_sessions(user);
        for (k, s) in sessions.iter().enumerate() {
            if s.split != split || k == 0 {
                continue;
            }
            let history: Vec<Poi> = sessions[..k]
                .iter()
                .filter(|h| h.split == Split::Train || cfg.test_history_includes_test)
                .flat_map(|h| h.visits.iter().map(Poi::from))
                .collect();
            if history.is_empty() {
                continue;
            }
            push_session(&mut out, s, &history);
        }
    }
    out
}

fn push_session(out: &mut Vec<QuerySample>, s: &Session, history: &[Poi]) {
    let pois: Vec<Poi> = s.visits.iter().map(Poi::from).collect();
    for i in 1..pois.len() {
        out.push(QuerySample {
            id: out.len(),
            user: s.user,
            session_index: s.session_index,
            history: history.to_vec(),
            recent: pois[..i].to_vec(),
            target: pois[i],
        });
    }
}
