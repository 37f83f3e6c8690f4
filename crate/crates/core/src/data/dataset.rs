use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use super::record::{CheckinRecord, DatasetMode};
use super::session::{filter_users, sessionize_all, slot_of, train_count, RawSession, SessionConfig};
use super::vocab::{IdTable, Vocab};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One indexed visit inside a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub location_id: String,
    pub location: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<usize>,
    pub slot: u8,
    pub time: DateTime<FixedOffset>,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub user_id: String,
    pub user: usize,
    /// Position in the user's chronology, starting at 0.
    pub session_index: usize,
    pub split: Split,
    pub visits: Vec<Visit>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub input_records: usize,
    pub malformed_lines: usize,
    pub users_with_enough_records: usize,
    pub users_kept: usize,
    pub sessions: usize,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub locations: usize,
    pub categories: usize,
}

/// Sessionized, split and indexed corpus. Sessions are grouped by user
/// (ascending user index) and chronological within a user.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub mode: DatasetMode,
    pub vocab: Vocab,
    pub sessions: Vec<Session>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    mode: DatasetMode,
    #[serde(flatten)]
    vocab: Vocab,
}

impl Dataset {
    /// Full cleaning path: user filter, sessionization, split, vocabularies.
    pub fn preprocess(
        records: Vec<CheckinRecord>,
        mode: DatasetMode,
        cfg: &SessionConfig,
    ) -> (Dataset, PreprocessStats) {
        let input_records = records.len();
        let kept = filter_users(records, cfg.min_user_records);
        let mut users: Vec<&str> = kept.iter().map(|r| r.user_id.as_str()).collect();
        users.dedup();
        let users_with_enough_records = users.len();
        let raw = sessionize_all(&kept, cfg);
        let ds = Dataset::from_raw(raw, mode, cfg.train_fraction);
        let stats = PreprocessStats {
            input_records,
            malformed_lines: 0,
            users_with_enough_records,
            users_kept: ds.vocab.users.len(),
            sessions: ds.sessions.len(),
            train_sessions: ds.sessions.iter().filter(|s| s.split == Split::Train).count(),
            test_sessions: ds.sessions.iter().filter(|s| s.split == Split::Test).count(),
            locations: ds.vocab.locations.len(),
            categories: ds.vocab.categories.as_ref().map_or(0, IdTable::len),
        };
        (ds, stats)
    }

    /// Splits each user's sessions chronologically and indexes them. Raw
    /// sessions must be grouped by user and time-ordered within a user.
    pub fn from_raw(raw: Vec<RawSession>, mode: DatasetMode, train_fraction: f64) -> Dataset {
        let mut groups: Vec<Vec<RawSession>> = Vec::new();
        for s in raw {
            match groups.last_mut() {
                Some(g) if g[0].user_id == s.user_id => g.push(s),
                _ => groups.push(vec![s]),
            }
        }
        groups.sort_by(|a, b| a[0].user_id.cmp(&b[0].user_id));

        let mut vocab = Vocab {
            categories: mode.has_categories().then(IdTable::new),
            ..Vocab::default()
        };
        // Training visits define the location and category index spaces.
        for g in &groups {
            vocab.users.observe(&g[0].user_id);
            let k = train_count(g.len(), train_fraction);
            for s in &g[..k] {
                for r in &s.records {
                    vocab.locations.observe(&r.location_id);
                    if let (Some(c), Some(cats)) = (&r.category_id, vocab.categories.as_mut()) {
                        cats.observe(c);
                    }
                }
            }
        }

        let mut sessions = Vec::new();
        for (user, g) in groups.into_iter().enumerate() {
            let k = train_count(g.len(), train_fraction);
            for (i, s) in g.into_iter().enumerate() {
                let visits = s
                    .records
                    .into_iter()
                    .map(|r| Visit {
                        location: vocab.location_index(&r.location_id),
                        category: match (&r.category_id, mode.has_categories()) {
                            (Some(c), true) => Some(vocab.category_index(c)),
                            _ => None,
                        },
                        category_id: r.category_id.filter(|_| mode.has_categories()),
                        slot: slot_of(&r.time),
                        location_id: r.location_id,
                        time: r.time,
                        latitude: r.latitude,
                        longitude: r.longitude,
                    })
                    .collect();
                sessions.push(Session {
                    user_id: s.user_id,
                    user,
                    session_index: i,
                    split: if i < k { Split::Train } else { Split::Test },
                    visits,
                });
            }
        }
        Dataset {
            mode,
            vocab,
            sessions,
        }
    }

    pub fn has_categories(&self) -> bool {
        self.mode.has_categories()
    }

    pub fn num_users(&self) -> usize {
        self.vocab.users.len()
    }

    pub fn num_locations(&self) -> usize {
        self.vocab.locations.len()
    }

    pub fn num_categories(&self) -> usize {
        self.vocab.categories.as_ref().map_or(0, IdTable::len)
    }

    pub fn train_sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.iter().filter(|s| s.split == Split::Train)
    }

    pub fn test_sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.iter().filter(|s| s.split == Split::Test)
    }

    /// Sessions of one user in chronological order.
    pub fn user_sessions(&self, user: usize) -> &[Session] {
        let start = self.sessions.partition_point(|s| s.user < user);
        let end = self.sessions.partition_point(|s| s.user <= user);
        &self.sessions[start..end]
    }

    /// Flattens sessions back to records (used for re-sessionization checks).
    pub fn records(&self) -> Vec<CheckinRecord> {
        self.sessions
            .iter()
            .flat_map(|s| {
                s.visits.iter().map(|v| CheckinRecord {
                    user_id: s.user_id.clone(),
                    location_id: v.location_id.clone(),
                    category_id: v.category_id.clone(),
                    latitude: v.latitude,
                    longitude: v.longitude,
                    time: v.time,
                })
            })
            .collect()
    }

    /// Writes one JSON session per line to `path` and the vocabulary to
    /// [`vocab_path`]`(path)`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for s in &self.sessions {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;

        let vpath = vocab_path(path);
        let vf = VocabFile {
            mode: self.mode,
            vocab: self.vocab.clone(),
        };
        let text = serde_json::to_string_pretty(&vf)?;
        std::fs::write(&vpath, text).map_err(|e| Error::io(&vpath, e))
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let vpath = vocab_path(path);
        let text = std::fs::read_to_string(&vpath).map_err(|e| Error::io(&vpath, e))?;
        let vf: VocabFile =
            serde_json::from_str(&text).map_err(|e| Error::format(&vpath, e.to_string()))?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut sessions = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Session = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
            sessions.push(s);
        }
        let ds = Dataset {
            mode: vf.mode,
            vocab: vf.vocab,
            sessions,
        };
        ds.check_indices(path)?;
        Ok(ds)
    }

    fn check_indices(&self, path: &Path) -> Result<()> {
        let sorted = self
            .sessions
            .windows(2)
            .all(|w| (w[0].user, w[0].session_index) < (w[1].user, w[1].session_index));
        if !sorted {
            return Err(Error::format(path, "sessions not grouped by user in order"));
        }
        for s in &self.sessions {
            if s.user >= self.num_users() {
                return Err(Error::format(path, format!("user index {} out of range", s.user)));
            }
            for v in &s.visits {
                if v.location > self.num_locations() || v.slot >= 48 {
                    return Err(Error::format(path, "visit index out of range"));
                }
            }
        }
        Ok(())
    }
}

/// Sidecar vocabulary file next to a sessions file.
pub fn vocab_path(sessions: &Path) -> PathBuf {
    let mut name = sessions.file_name().unwrap_or_default().to_os_string();
    name.push(".vocab.json");
    sessions.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn records() -> Vec<CheckinRecord> {
        let t0 = FixedOffset::east_opt(0)
            .unwrap()
            .with_ymd_and_hms(2024, 1, 3, 8, 0, 0)
            .unwrap();
        let mut out = Vec::new();
        for day in 0..5 {
            for k in 0..5 {
                out.push(CheckinRecord {
                    user_id: "u".into(),
                    // Day 4 visits a place never seen before.
                    location_id: if day == 4 && k == 2 { "new".into() } else { format!("l{k}") },
                    category_id: Some(format!("c{}", k % 2)),
                    latitude: 0.0,
                    longitude: k as f64 * 0.01,
                    time: t0 + Duration::days(3 * day) + Duration::hours(k),
                });
            }
        }
        out
    }

    #[test]
    fn split_and_unknown() {
        let (ds, stats) = Dataset::preprocess(records(), DatasetMode::Checkin, &SessionConfig::default());
        assert_eq!(stats.sessions, 5);
        assert_eq!((stats.train_sessions, stats.test_sessions), (4, 1));
        assert_eq!(ds.num_locations(), 5);
        let test = ds.test_sessions().next().unwrap();
        assert_eq!(test.visits[2].location, ds.vocab.unknown_location());
        assert_eq!(ds.user_sessions(0).len(), 5);
    }

    #[test]
    fn cdr_mode_drops_categories() {
        let (ds, _) = Dataset::preprocess(records(), DatasetMode::Cdr, &SessionConfig::default());
        assert!(ds.vocab.categories.is_none());
        assert!(ds.sessions[0].visits.iter().all(|v| v.category.is_none()));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sessions.jsonl");
        let (ds, _) = Dataset::preprocess(records(), DatasetMode::Checkin, &SessionConfig::default());
        ds.save(&path).unwrap();
        assert!(vocab_path(&path).exists());
        assert_eq!(Dataset::load(&path).unwrap(), ds);
    }
}
