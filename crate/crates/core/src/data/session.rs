//! Cleaning and sessionization of per-user visit streams.

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Timelike, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::CheckinRecord;

pub const SLOTS: usize = 48;

/// Weekday hours map to slots 0..24, Saturday and Sunday hours to 24..48.
pub fn slot_of(time: &DateTime<FixedOffset>) -> u8 {
    let hour = time.hour() as u8;
    match time.weekday() {
        Weekday::Sat | Weekday::Sun => 24 + hour,
        _ => hour,
    }
}

/// Where the fixed-length windows start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowAnchor {
    /// Windows aligned to local civil midnight of 1970-01-01.
    Epoch,
    /// Windows start at each user's first record after merging.
    UserFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub min_user_records: usize,
    pub merge_gap_minutes: i64,
    pub window_days: i64,
    pub min_session_len: usize,
    pub max_session_len: usize,
    pub min_sessions: usize,
    pub max_sessions: usize,
    pub anchor: WindowAnchor,
    /// Fraction of each user's sessions (chronological) used for training.
    pub train_fraction: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            min_user_records: 10,
            merge_gap_minutes: 10,
            window_days: 3,
            min_session_len: 5,
            max_session_len: 10,
            min_sessions: 5,
            max_sessions: 10,
            anchor: WindowAnchor::Epoch,
            train_fraction: 0.8,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.merge_gap_minutes < 0 {
            errs.push("merge_gap_minutes must be >= 0".into());
        }
        if self.window_days <= 0 {
            errs.push("window_days must be positive".into());
        }
        if self.min_session_len == 0 || self.min_session_len > self.max_session_len {
            errs.push("need 0 < min_session_len <= max_session_len".into());
        }
        if self.min_sessions == 0 || self.min_sessions > self.max_sessions {
            errs.push("need 0 < min_sessions <= max_sessions".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            errs.push("train_fraction must lie in (0, 1)".into());
        }
        errs
    }
}

/// A sub-trajectory of one user before indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSession {
    pub user_id: String,
    pub records: Vec<CheckinRecord>,
}

/// Drops users with fewer than `min_records` records. Input order is kept.
pub fn filter_users(records: Vec<CheckinRecord>, min_records: usize) -> Vec<CheckinRecord> {
    let mut counts = std::collections::HashMap::<&str, usize>::new();
    for r in &records {
        *counts.entry(r.user_id.as_str()).or_default() += 1;
    }
    let keep: std::collections::HashSet<String> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_records)
        .map(|(u, _)| u.to_string())
        .collect();
    records
        .into_iter()
        .filter(|r| keep.contains(&r.user_id))
        .collect()
}

/// Collapses runs of records closer than `gap_minutes` to their predecessor,
/// keeping the first record of each run. Input must be time-sorted.
pub fn merge_close(records: &[CheckinRecord], gap_minutes: i64) -> Vec<CheckinRecord> {
    let mut out: Vec<CheckinRecord> = Vec::with_capacity(records.len());
    let mut prev: Option<&CheckinRecord> = None;
    for r in records {
        let close = prev.is_some_and(|p| (r.time - p.time).num_seconds() < gap_minutes * 60);
        if !close {
            out.push(r.clone());
        }
        prev = Some(r);
    }
    out
}

fn local_seconds(t: &DateTime<FixedOffset>) -> i64 {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    (t.naive_local() - epoch).num_seconds()
}

/// Splits one user's time-sorted records into sessions.
///
/// Steps: merge records closer than the merge gap; bucket into fixed windows;
/// cut oversized windows greedily into chunks of `max_session_len`; drop
/// chunks shorter than `min_session_len`; keep the most recent
/// `max_sessions` sessions, or nothing if fewer than `min_sessions` remain.
pub fn sessionize(records: &[CheckinRecord], cfg: &SessionConfig) -> Vec<RawSession> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let user_id = first.user_id.clone();
    let merged = merge_close(records, cfg.merge_gap_minutes);
    let window = cfg.window_days * 86_400;
    let origin = match cfg.anchor {
        WindowAnchor::Epoch => 0,
        WindowAnchor::UserFirst => local_seconds(&merged[0].time),
    };

    let mut windows: Vec<Vec<CheckinRecord>> = Vec::new();
    let mut current_key = None;
    for r in merged {
        let key = (local_seconds(&r.time) - origin).div_euclid(window);
        if current_key != Some(key) {
            windows.push(Vec::new());
            current_key = Some(key);
        }
        windows.last_mut().unwrap().push(r);
    }

    let mut sessions: Vec<RawSession> = windows
        .into_iter()
        .flat_map(|w| {
            w.chunks(cfg.max_session_len)
                .filter(|c| c.len() >= cfg.min_session_len)
                .map(|c| c.to_vec())
                .collect::<Vec<_>>()
        })
        .map(|records| RawSession {
            user_id: user_id.clone(),
            records,
        })
        .collect();

    if sessions.len() < cfg.min_sessions {
        return Vec::new();
    }
    if sessions.len() > cfg.max_sessions {
        sessions.drain(..sessions.len() - cfg.max_sessions);
    }
    sessions
}

/// Sessionizes a corpus sorted by (user, time). Output is grouped by user in
/// ascending user-id order.
pub fn sessionize_all(records: &[CheckinRecord], cfg: &SessionConfig) -> Vec<RawSession> {
    let mut groups: Vec<&[CheckinRecord]> = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].user_id != records[start].user_id {
            if i > start {
                groups.push(&records[start..i]);
            }
            start = i;
        }
    }
    groups.sort_by(|a, b| a[0].user_id.cmp(&b[0].user_id));
    groups
        .par_iter()
        .map(|g| sessionize(g, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Number of leading sessions that go to training: `ceil(fraction * n)`,
/// capped so at least one session is left for testing.
pub fn train_count(n: usize, fraction: f64) -> usize {
    let k = ((n as f64 * fraction) - 1e-9).ceil().max(0.0) as usize;
    k.min(n.saturating_sub(1))
}

/// Chronological split of one user's sessions.
pub fn split_train_test<T: Clone>(sessions: &[T], fraction: f64) -> (Vec<T>, Vec<T>) {
    let k = train_count(sessions.len(), fraction);
    (sessions[..k].to_vec(), sessions[k..].to_vec())
}
