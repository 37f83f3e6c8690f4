//! Builds the distance, time-slot and activity priors of a corpus and prints
//! the position weights they assign to one query's recent visits.

use pg2net::data::{build_queries, Dataset, DatasetMode, QueryConfig, SessionConfig, Split};
use pg2net::priors::{haversine, PriorConfig, PriorSet};
use pg2net::synth::{periodic_corpus, PeriodicConfig};

fn main() -> pg2net::Result<()> {
    let records = periodic_corpus(&PeriodicConfig::default());
    let (ds, _) = Dataset::preprocess(records, DatasetMode::Checkin, &SessionConfig::default());
    let priors = PriorSet::build(&ds, &PriorConfig::default())?;

    let g = &priors.time;
    println!("Γ[9][9] = {:.3}, Γ[9][10] = {:.3}, Γ[9][33] = {:.3}", g.get(9, 9), g.get(9, 10), g.get(9, 33));
    let d = g.slot_distribution(9);
    println!("slot distribution from slot 9 sums to {:.12}", d.iter().sum::<f64>());

    let q = &build_queries(&ds, Split::Test, &QueryConfig::default())[4];
    let current = q.current();
    let w = priors.sequence_weights(current, &q.recent)?;
    println!("current: location {} slot {}", current.location, current.slot);
    println!("{:>4} {:>5} {:>9} {:>9} {:>9} {:>9}", "pos", "slot", "km", "distance", "time", "activity");
    for (i, p) in q.recent.iter().enumerate() {
        let km = priors
            .geo
            .coords(current.location)
            .zip(priors.geo.coords(p.location))
            .map_or(f64::NAN, |(a, b)| haversine(a, b));
        let act = w.activity.as_ref().map_or(f64::NAN, |a| a[i]);
        println!("{i:>4} {:>5} {km:>9.3} {:>9.4} {:>9.4} {act:>9.4}", p.slot, w.distance[i], w.time[i]);
    }

    let dir = tempfile::tempdir().map_err(|e| pg2net::Error::io("tempdir", e))?;
    let path = dir.path().join("priors.bin");
    priors.save(&path)?;
    assert_eq!(PriorSet::load(&path)?, priors);
    println!("bundle round-trips through {}", path.display());
    Ok(())
}
