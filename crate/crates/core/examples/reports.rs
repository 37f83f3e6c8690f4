//! Analysis reports on a trained model: weight proportions of the preference
//! parts and the distance distribution of actual vs predicted next places.

use pg2net::data::{Dataset, DatasetMode, SessionConfig};
use pg2net::model::{NextPlaceModel, Variant};
use pg2net::synth::{periodic_corpus, PeriodicConfig};
use pg2net::train::{distance_distribution_report, weight_proportion_report, Experiment, ExperimentConfig, DEFAULT_BIN_EDGES};

fn main() -> pg2net::Result<()> {
    let mut cfg = ExperimentConfig::compact(2);
    cfg.train.epochs = 20;
    let records = periodic_corpus(&PeriodicConfig::default());
    let (ds, _) = Dataset::preprocess(records, DatasetMode::Checkin, &SessionConfig::default());
    let exp = Experiment::prepare(ds, &cfg)?;
    let (model, _) = exp.train_variant(Variant::Full)?;

    let w = weight_proportion_report(&model, &exp.test_queries, &exp.priors)?;
    println!("weight proportions ({}, {} queries)", w.method, w.queries);
    print!("{}", w.csv());

    let hist = distance_distribution_report(&exp.test_queries, &exp.priors.geo, &DEFAULT_BIN_EDGES, |q| {
        model.log_probs(q, &exp.priors)
    })?;
    println!("distance distribution over {} queries", hist.queries);
    print!("{}", hist.csv());
    Ok(())
}
