//! First-order Markov and plain LSTM baselines against the full model on a
//! corpus where the next place depends on the visit two steps back.

use pg2net::data::{Dataset, DatasetMode, SessionConfig};
use pg2net::model::Variant;
use pg2net::synth::{long_range_corpus, LongRangeConfig};
use pg2net::train::{Experiment, ExperimentConfig};

fn main() -> pg2net::Result<()> {
    let records = long_range_corpus(&LongRangeConfig::default());
    let (ds, _) = Dataset::preprocess(records, DatasetMode::Checkin, &SessionConfig::default());
    let exp = Experiment::prepare(ds, &ExperimentConfig::compact(1))?;

    let (markov, report) = exp.markov();
    let row = markov.row(0).map(|r| r.iter().sum::<f64>());
    println!("Markov row 0 sums to {row:?}");
    print!("{}", report?.table());

    let (lstm, _) = exp.train_lstm()?;
    print!("{}", exp.evaluate(&lstm)?.table());

    let (full, _) = exp.train_variant(Variant::Full)?;
    print!("{}", exp.evaluate(&full)?.table());
    Ok(())
}
