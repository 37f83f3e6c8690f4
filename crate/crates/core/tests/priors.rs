mod common;

use approx::assert_abs_diff_eq;
use common::{activity_oracle, gamma_oracle};
use pg2net::data::{build_queries, Dataset, DatasetMode, QueryConfig, SessionConfig, Split, SLOTS};
use pg2net::priors::{haversine, GeoTable, PriorConfig, PriorSet, EARTH_RADIUS_KM};
use pg2net::synth::{periodic_corpus, random_corpus, PeriodicConfig};
use proptest::prelude::*;

fn corpus() -> Dataset {
    Dataset::preprocess(random_corpus(30, 25, 300, 17), DatasetMode::Checkin, &SessionConfig::default()).0
}

fn law_of_cosines(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dl = (b.1 - a.1).to_radians();
    let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
    EARTH_RADIUS_KM * c.acos()
}

proptest! {
    #[test]
    fn haversine_agrees_with_spherical_cosines(
        lat1 in -80.0f64..80.0, lon1 in -179.0f64..179.0,
        lat2 in -80.0f64..80.0, lon2 in -179.0f64..179.0,
    ) {
        let d = haversine((lat1, lon1), (lat2, lon2));
        prop_assume!(d > 1.0);
        prop_assert!((d - law_of_cosines((lat1, lon1), (lat2, lon2))).abs() < 1e-6 * d.max(1.0));
        prop_assert!((d - haversine((lat2, lon2), (lat1, lon1))).abs() < 1e-9);
        prop_assert!(d <= std::f64::consts::PI * EARTH_RADIUS_KM + 1e-6);
    }
}

#[test]
fn gamma_matches_jaccard_oracle() {
    let ds = corpus();
    let p = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    let oracle = gamma_oracle(&ds);
    for (i, row) in oracle.iter().enumerate() {
        for (j, &g) in row.iter().enumerate() {
            assert_eq!(p.time.get(i, j), g, "Γ[{i}][{j}]");
        }
    }
}

#[test]
fn activity_counts_match_oracle() {
    let ds = corpus();
    let p = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    let a = p.activity.as_ref().unwrap();
    let oracle = activity_oracle(&ds);
    for c in 0..ds.num_categories() {
        for s in 0..SLOTS {
            assert_eq!(a.count(c, s), oracle.get(&(c, s)).copied().unwrap_or(0.0));
        }
    }
}

#[test]
fn slot_distributions_have_closed_forms() {
    let ds = corpus();
    let p = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    let gamma = gamma_oracle(&ds);
    for c in 0..SLOTS as u8 {
        let z: f64 = gamma[c as usize].iter().map(|g| g.exp()).sum();
        let beta = p.time.slot_distribution(c);
        for s in 0..SLOTS {
            assert_abs_diff_eq!(beta[s], gamma[c as usize][s].exp() / z, epsilon = 1e-12);
        }
    }
    let a = p.activity.as_ref().unwrap();
    let counts = activity_oracle(&ds);
    for cat in 0..ds.num_categories() {
        let row: Vec<f64> = (0..SLOTS).map(|s| counts.get(&(cat, s)).copied().unwrap_or(0.0)).collect();
        let max = row.iter().cloned().fold(0.0, f64::max);
        let z: f64 = row.iter().map(|v| (v / max).exp()).sum();
        let d = a.slot_distribution(cat).unwrap();
        for s in 0..SLOTS {
            assert_abs_diff_eq!(d[s], (row[s] / max).exp() / z, epsilon = 1e-12);
        }
    }
    assert!(a.slot_distribution(ds.num_categories()).is_none());
}

#[test]
fn sequence_weights_read_the_priors() {
    let ds = Dataset::preprocess(periodic_corpus(&PeriodicConfig::default()), DatasetMode::Checkin, &SessionConfig::default()).0;
    let p = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    let geo = GeoTable::from_dataset(&ds);
    for q in build_queries(&ds, Split::Test, &QueryConfig::default()).iter().step_by(17) {
        let cur = q.current();
        let w = p.sequence_weights(cur, &q.history).unwrap();
        let scores: Vec<f64> = q
            .history
            .iter()
            .map(|h| 1.0 / haversine(geo.coords(cur.location).unwrap(), geo.coords(h.location).unwrap()).max(0.01))
            .collect();
        let mx = scores.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
        for (wi, s) in w.distance.iter().zip(&scores) {
            assert_abs_diff_eq!(*wi, (s - mx).exp() / z, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(w.distance.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let beta = p.time.slot_distribution(cur.slot);
        for (wi, h) in w.time.iter().zip(&q.history) {
            assert_eq!(*wi, beta[h.slot as usize]);
        }
        let act = w.activity.unwrap();
        let a = p.activity.as_ref().unwrap();
        for (wi, h) in act.iter().zip(&q.history) {
            assert_eq!(*wi, a.slot_distribution(h.category.unwrap()).unwrap()[cur.slot as usize]);
        }
    }
}

#[test]
fn cdr_priors_have_no_activity_and_reject_forcing_it() {
    let records = random_corpus(20, 25, 300, 2);
    let ds = Dataset::preprocess(records, DatasetMode::Cdr, &SessionConfig::default()).0;
    let p = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    assert!(p.activity.is_none());
    let forced = PriorConfig {
        activity: Some(true),
        ..Default::default()
    };
    assert!(PriorSet::build(&ds, &forced).is_err());
}

#[test]
fn bundle_round_trip() {
    let ds = corpus();
    let p = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("priors.bin");
    p.save(&path).unwrap();
    assert_eq!(PriorSet::load(&path).unwrap(), p);
    std::fs::write(&path, b"garbage").unwrap();
    assert!(PriorSet::load(&path).is_err());
}
