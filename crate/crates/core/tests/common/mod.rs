//! Independent oracles shared by the integration tests. Nothing here calls
//! the library code it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pg2net::data::{Dataset, Level, QueryConfig, Split};
use pg2net::model::{ModelConfig, Pg2Net, Variant, VocabSizes};
use pg2net::priors::{PriorConfig, PriorSet};
use pg2net::synth::{miniature_dataset, random_embedding};

/// Everything wrong with the emitted sessions of `ds`, checked directly on
/// the timestamps. The train fraction is `num/den` so the expected split is
/// exact integer arithmetic.
pub fn scan_sessions(ds: &Dataset, num: usize, den: usize) -> Vec<String> {
    let mut problems = Vec::new();
    let mut per_user: BTreeMap<usize, Vec<(i64, Split)>> = BTreeMap::new();
    for s in &ds.sessions {
        let n = s.visits.len();
        if !(5..=10).contains(&n) {
            problems.push(format!("{} #{}: {n} visits", s.user_id, s.session_index));
        }
        for w in s.visits.windows(2) {
            let gap = (w[1].time - w[0].time).num_seconds();
            if gap < 600 {
                problems.push(format!("{} #{}: gap of {gap} s", s.user_id, s.session_index));
            }
        }
        let span = (s.visits[n - 1].time - s.visits[0].time).num_seconds();
        if span > 3 * 86_400 {
            problems.push(format!("{} #{}: span {span} s", s.user_id, s.session_index));
        }
        per_user
            .entry(s.user)
            .or_default()
            .push((s.visits[0].time.timestamp(), s.split));
    }
    for (user, mut sessions) in per_user {
        sessions.sort_by_key(|x| x.0);
        let n = sessions.len();
        let expect_train = (n * num).div_ceil(den).min(n - 1);
        let train = sessions.iter().take_while(|s| s.1 == Split::Train).count();
        if train != expect_train || sessions[train..].iter().any(|s| s.1 != Split::Test) {
            problems.push(format!("user {user}: {train} of {n} train sessions, expected {expect_train} first"));
        }
        if !(5..=10).contains(&n) {
            problems.push(format!("user {user}: {n} sessions"));
        }
    }
    problems
}

/// Consecutive within-session pair counts over training sessions.
pub fn pair_counts(ds: &Dataset, level: Level) -> HashMap<(usize, usize), u64> {
    let mut m = HashMap::new();
    for s in &ds.sessions {
        if s.split != Split::Train {
            continue;
        }
        for i in 1..s.visits.len() {
            let (a, b) = match level {
                Level::Location => (Some(s.visits[i - 1].location), Some(s.visits[i].location)),
                Level::Category => (s.visits[i - 1].category, s.visits[i].category),
            };
            if let (Some(a), Some(b)) = (a, b) {
                *m.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    m
}

/// Jaccard similarity of training location sets between slots.
pub fn gamma_oracle(ds: &Dataset) -> Vec<Vec<f64>> {
    let mut sets = vec![BTreeSet::new(); 48];
    for s in ds.sessions.iter().filter(|s| s.split == Split::Train) {
        for v in &s.visits {
            sets[v.slot as usize].insert(v.location);
        }
    }
    (0..48)
        .map(|i| {
            (0..48)
                .map(|j| {
                    let inter = sets[i].intersection(&sets[j]).count();
                    let union = sets[i].union(&sets[j]).count();
                    if union == 0 {
                        0.0
                    } else {
                        inter as f64 / union as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// (category, slot) visit histogram over training sessions.
pub fn activity_oracle(ds: &Dataset) -> HashMap<(usize, usize), f64> {
    let mut m = HashMap::new();
    for s in ds.sessions.iter().filter(|s| s.split == Split::Train) {
        for v in &s.visits {
            if let Some(c) = v.category {
                *m.entry((c, v.slot as usize)).or_insert(0.0) += 1.0;
            }
        }
    }
    m
}

pub fn mini_config() -> ModelConfig {
    ModelConfig {
        user_dim: 2,
        location_dim: 8,
        category_dim: 4,
        time_dim: 4,
        hidden: 4,
        ..ModelConfig::default()
    }
}

pub struct Mini {
    pub ds: Dataset,
    pub priors: PriorSet,
    pub queries: Vec<pg2net::data::QuerySample>,
}

pub fn mini() -> Mini {
    let ds = miniature_dataset();
    let priors = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    let queries = pg2net::data::build_queries(&ds, Split::Train, &QueryConfig::default());
    Mini { ds, priors, queries }
}

pub fn mini_model(m: &Mini, variant: Variant, seed: u64) -> Pg2Net {
    let cfg = mini_config();
    let loc = random_embedding(&m.ds, Level::Location, cfg.location_dim, 100);
    let cat = random_embedding(&m.ds, Level::Category, cfg.category_dim, 101);
    Pg2Net::new(cfg, VocabSizes::of(&m.ds), variant, Some(&loc), Some(&cat), seed).unwrap()
}
