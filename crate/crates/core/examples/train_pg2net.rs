//! Trains the full model on a synthetic corpus of weekday/weekend routines
//! and prints the loss curve and test metrics.
//!
//! ```text
//! cargo run --release --example train_pg2net [epochs]
//! ```

use pg2net::data::{Dataset, DatasetMode, SessionConfig};
use pg2net::model::Variant;
use pg2net::numeric::{load_checkpoint, restore, save_checkpoint};
use pg2net::synth::{periodic_corpus, PeriodicConfig};
use pg2net::train::{loss_curve_csv, Experiment, ExperimentConfig};

fn main() -> pg2net::Result<()> {
    let mut cfg = ExperimentConfig::compact(1);
    if let Some(e) = std::env::args().nth(1) {
        cfg.train.epochs = e.parse().expect("epochs");
    }
    let records = periodic_corpus(&PeriodicConfig::default());
    let (ds, _) = Dataset::preprocess(records, DatasetMode::Checkin, &SessionConfig::default());
    let exp = Experiment::prepare(ds, &cfg)?;
    println!(
        "{} training, {} held-out, {} test queries",
        exp.train_queries.len(),
        exp.heldout_queries.len(),
        exp.test_queries.len()
    );

    let (model, outcome) = exp.train_variant(Variant::Full)?;
    print!("{}", loss_curve_csv(&outcome.curve));
    println!("kept epoch {} after {} optimizer steps", outcome.best_epoch, outcome.steps);
    print!("{}", exp.evaluate(&model)?.table());

    let dir = tempfile::tempdir().map_err(|e| pg2net::Error::io("tempdir", e))?;
    let path = dir.path().join("full.ckpt");
    save_checkpoint(&model.params, &path)?;
    let mut reloaded = exp.init_model(Variant::Full)?;
    restore(&mut reloaded.params, load_checkpoint(&path)?)?;
    assert!(reloaded.params.same_values(&model.params));
    println!("checkpoint reloads to identical parameters");
    Ok(())
}
