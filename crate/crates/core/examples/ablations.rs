//! Trains every model variant from the same initialization and compares
//! them, including the auxiliary-loss distance on held-out queries.
//!
//! ```text
//! cargo run --release --example ablations [variant ...]
//! ```

use pg2net::data::{Dataset, DatasetMode, SessionConfig};
use pg2net::model::Variant;
use pg2net::synth::{periodic_corpus, PeriodicConfig};
use pg2net::train::{run_ablation, Experiment, ExperimentConfig};

fn main() -> pg2net::Result<()> {
    let variants: Vec<Variant> = match std::env::args().skip(1).map(|a| a.parse()).collect::<pg2net::Result<Vec<_>>>()? {
        v if v.is_empty() => Variant::ALL.to_vec(),
        v => v,
    };
    let records = periodic_corpus(&PeriodicConfig::default());
    let (ds, _) = Dataset::preprocess(records, DatasetMode::Checkin, &SessionConfig::default());
    let exp = Experiment::prepare(ds, &ExperimentConfig::compact(1))?;

    println!("{:<12} {:>6} {:>8} {:>8} {:>8} {:>10}", "variant", "concat", "Rec@1", "Rec@5", "NDCG@5", "aux dist");
    for v in variants {
        let (model, report) = run_ablation(&exp, v)?;
        println!(
            "{:<12} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>10.4}",
            v.as_str(),
            model.concat_dim(),
            report.recall(1),
            report.recall(5),
            report.ndcg(5),
            exp.heldout_aux_distance(&model)?
        );
    }
    Ok(())
}
