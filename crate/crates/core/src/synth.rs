//! Synthetic corpora with known structure, for tests and examples.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, TimeZone, Utc, Weekday};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{CheckinRecord, Dataset, DatasetMode, Level, SessionConfig};
use crate::error::{Error, Result};
use crate::graph::{EmbeddingTable, TransitionGraph};

/// First day of generated corpora; an epoch-aligned 3-day window starts here.
pub fn corpus_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 3).unwrap()
}

/// UTC−4, the offset all synthetic records use.
pub fn corpus_offset() -> FixedOffset {
    FixedOffset::west_opt(4 * 3600).unwrap()
}

fn local(day: NaiveDate, hour: u32, minute: u32) -> DateTime<FixedOffset> {
    corpus_offset()
        .from_local_datetime(&day.and_hms_opt(hour, minute, 0).unwrap())
        .unwrap()
}

fn is_weekend(day: NaiveDate) -> bool {
    matches!(day.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Location coordinates scattered over a ~10 km box.
pub fn city_coords(n: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| (40.70 + rng.random::<f64>() * 0.09, -74.02 + rng.random::<f64>() * 0.12))
        .collect()
}

fn record(user: usize, loc: usize, category: usize, coords: &[(f64, f64)], time: DateTime<FixedOffset>) -> CheckinRecord {
    CheckinRecord {
        user_id: format!("u{user:03}"),
        location_id: format!("v{loc:03}"),
        category_id: Some(format!("c{category}")),
        latitude: coords[loc].0,
        longitude: coords[loc].1,
        time,
    }
}

#[derive(Clone, Debug)]
pub struct PeriodicConfig {
    pub users: usize,
    pub locations: usize,
    pub categories: usize,
    /// One session per 3-day window.
    pub windows: usize,
    pub routine_len: usize,
    pub seed: u64,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        Self {
            users: 20,
            locations: 30,
            categories: 6,
            windows: 10,
            routine_len: 7,
            seed: 11,
        }
    }
}

/// Every user repeats a fixed weekday routine and a fixed weekend routine,
/// one routine day per 3-day window.
pub fn periodic_corpus(cfg: &PeriodicConfig) -> Vec<CheckinRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coords = city_coords(cfg.locations, &mut rng);
    let all: Vec<usize> = (0..cfg.locations).collect();
    let weekday_hours = [7, 9, 11, 13, 15, 17, 19, 21, 22, 23];
    let weekend_hours = [9, 10, 12, 14, 16, 18, 20, 21, 22, 23];
    let len = cfg.routine_len.min(weekday_hours.len());
    let mut out = Vec::new();
    for u in 0..cfg.users {
        let weekday: Vec<usize> = all.choose_multiple(&mut rng, len).copied().collect();
        let weekend: Vec<usize> = all.choose_multiple(&mut rng, len).copied().collect();
        for w in 0..cfg.windows {
            let day = corpus_start() + Duration::days((3 * w + (u + w) % 3) as i64);
            let (routine, hours) = if is_weekend(day) {
                (&weekend, &weekend_hours)
            } else {
                (&weekday, &weekday_hours)
            };
            for (k, &loc) in routine.iter().enumerate() {
                let t = local(day, hours[k], rng.random_range(0..30));
                out.push(record(u, loc, loc % cfg.categories, &coords, t));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct LongRangeConfig {
    pub users: usize,
    /// Locations per day type; weekday and weekend sets are disjoint.
    pub per_day_type: usize,
    pub windows: usize,
    pub session_len: usize,
    pub seed: u64,
}

impl Default for LongRangeConfig {
    fn default() -> Self {
        Self {
            users: 20,
            per_day_type: 15,
            windows: 10,
            session_len: 8,
            seed: 23,
        }
    }
}

/// Two interleaved walkers per session, each advancing along a fixed cycle of
/// the day type's locations: `x_t = σ(x_{t-2})`. The even walker starts at a
/// random location, the odd walker at a per-user fixed one, so the previous
/// visit says nothing about the next one.
pub fn long_range_corpus(cfg: &LongRangeConfig) -> Vec<CheckinRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.per_day_type;
    let coords = city_coords(2 * n, &mut rng);
    // succ[l] = σ(l) within each day type's block.
    let mut succ = vec![0; 2 * n];
    for block in 0..2 {
        let mut cycle: Vec<usize> = (block * n..(block + 1) * n).collect();
        cycle.shuffle(&mut rng);
        for i in 0..n {
            succ[cycle[i]] = cycle[(i + 1) % n];
        }
    }
    let mut out = Vec::new();
    for u in 0..cfg.users {
        let odd_start = [rng.random_range(0..n), n + rng.random_range(0..n)];
        for w in 0..cfg.windows {
            let day = corpus_start() + Duration::days((3 * w + (u + w) % 3) as i64);
            let block = is_weekend(day) as usize;
            let mut seq = vec![block * n + rng.random_range(0..n), odd_start[block]];
            while seq.len() < cfg.session_len {
                seq.push(succ[seq[seq.len() - 2]]);
            }
            for (k, &loc) in seq.iter().enumerate() {
                let t = local(day, 8 + k as u32, rng.random_range(0..30));
                out.push(record(u, loc, loc % 5, &coords, t));
            }
        }
    }
    out
}

/// Irregular visits: bursty gaps, uneven days, some sparse users. Exercises
/// every cleaning rule.
pub fn random_corpus(users: usize, locations: usize, records_per_user: usize, seed: u64) -> Vec<CheckinRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = city_coords(locations, &mut rng);
    let mut out = Vec::new();
    for u in 0..users {
        let n = if u % 7 == 6 { 9 } else { records_per_user };
        let mut t = local(corpus_start(), 6, 0) + Duration::minutes(rng.random_range(0..3000));
        for _ in 0..n {
            let loc = rng.random_range(0..locations);
            out.push(record(u, loc, loc % 4, &coords, t));
            let gap = match rng.random_range(0..10) {
                0..=1 => rng.random_range(1..15),
                2..=7 => rng.random_range(30..400),
                _ => rng.random_range(600..4000),
            };
            t += Duration::minutes(gap);
        }
    }
    out
}

/// A preprocessed periodic corpus over 6 locations and 3 categories, small
/// enough for finite-difference checks.
pub fn miniature_dataset() -> Dataset {
    let records = periodic_corpus(&PeriodicConfig {
        users: 3,
        locations: 6,
        categories: 3,
        windows: 6,
        routine_len: 5,
        seed: 5,
    });
    Dataset::preprocess(records, DatasetMode::Checkin, &SessionConfig::default()).0
}

/// Uniform random stand-in for a node2vec table of `ds` at `level`.
pub fn random_embedding(ds: &Dataset, level: Level, dim: usize, seed: u64) -> EmbeddingTable {
    let rows = match level {
        Level::Location => ds.num_locations(),
        Level::Category => ds.num_categories(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingTable {
        level,
        rows,
        dim,
        data: (0..rows * dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
        seed,
        config_digest: String::new(),
        vocab_digest: ds.vocab.level_digest(level),
        frozen: true,
    }
}

/// Two cliques of `k` nodes joined by a single bridge edge in each direction.
pub fn barbell_graph(k: usize) -> TransitionGraph {
    let mut edges = Vec::new();
    for block in 0..2 {
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    edges.push((block * k + a, block * k + b, 1));
                }
            }
        }
    }
    edges.push((k - 1, k, 1));
    edges.push((k, k - 1, 1));
    TransitionGraph::from_edges(2 * k, edges)
}

/// Renders records in the input format of `mode` (tab-separated check-ins
/// with UTC timestamps, or comma-separated CDR rows in local time).
pub fn render_records(records: &[CheckinRecord], mode: DatasetMode, header: bool) -> String {
    let mut s = String::new();
    match mode {
        DatasetMode::Checkin => {
            if header {
                s.push_str("user_id\tlocation_id\tcategory_id\tcategory_name\tlatitude\tlongitude\ttz_offset_minutes\tutc_timestamp\n");
            }
            for r in records {
                let cat = r.category_id.as_deref().unwrap_or("none");
                let utc = r.time.with_timezone(&Utc).format("%a %b %d %H:%M:%S +0000 %Y");
                let offset = r.time.offset().local_minus_utc() / 60;
                let _ = writeln!(
                    s,
                    "{}\t{}\t{cat}\tvenue {cat}\t{}\t{}\t{offset}\t{utc}",
                    r.user_id, r.location_id, r.latitude, r.longitude
                );
            }
        }
        DatasetMode::Cdr => {
            if header {
                s.push_str("user_id,cell_id,latitude,longitude,local_timestamp\n");
            }
            for r in records {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.user_id,
                    r.location_id,
                    r.latitude,
                    r.longitude,
                    r.time.format("%Y-%m-%d %H:%M:%S")
                );
            }
        }
    }
    s
}

pub fn write_records(path: &Path, records: &[CheckinRecord], mode: DatasetMode, header: bool) -> Result<()> {
    std::fs::write(path, render_records(records, mode, header)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_str, ParseOptions};

    #[test]
    fn rendered_checkins_parse_back() {
        let recs = periodic_corpus(&PeriodicConfig {
            users: 2,
            windows: 2,
            ..Default::default()
        });
        let text = render_records(&recs, DatasetMode::Checkin, true);
        let opts = ParseOptions {
            has_header: true,
            ..Default::default()
        };
        let parsed = parse_str(&text, DatasetMode::Checkin, &opts).unwrap();
        let mut sorted = recs.clone();
        sorted.sort_by(|a, b| a.user_id.cmp(&b.user_id).then(a.time.cmp(&b.time)));
        assert_eq!(parsed.records, sorted);
    }

    #[test]
    fn long_range_follows_cycle() {
        let recs = long_range_corpus(&LongRangeConfig {
            users: 1,
            windows: 3,
            ..Default::default()
        });
        assert_eq!(recs.len(), 24);
        let mut succ = std::collections::HashMap::new();
        for session in recs.chunks(8) {
            for w in session.windows(3) {
                let prev = succ.insert(&w[0].location_id, &w[2].location_id);
                assert!(prev.is_none_or(|p| p == &w[2].location_id));
            }
        }
    }

    #[test]
    fn miniature_sizes() {
        let ds = miniature_dataset();
        assert_eq!((ds.num_locations(), ds.num_categories()), (6, 3));
        assert_eq!(ds.num_users(), 3);
    }

    #[test]
    fn barbell_shape() {
        let g = barbell_graph(5);
        assert_eq!(g.num_edges(), 2 * 20 + 2);
        assert!(g.has_edge(4, 5) && g.has_edge(5, 4));
    }
}
