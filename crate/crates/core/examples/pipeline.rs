//! Writes a synthetic check-in file and a run config, then drives the whole
//! pipeline through the command-line entry point. A second run finds every
//! stage cached.
//!
//! ```text
//! cargo run --release --example pipeline [out-dir]
//! ```

use std::path::PathBuf;

use pg2net::data::DatasetMode;
use pg2net::synth::{periodic_corpus, write_records, PeriodicConfig};

const CONFIG: &str = r#"
seed = 7

[input]
mode = "checkin"
has_header = true

[walk]
walks_per_node = 5
walk_length = 20
epochs = 2

[model]
user_dim = 8
location_dim = 16
category_dim = 4
time_dim = 4
hidden = 16

[train]
learning_rate = 0.01
epochs = 20
accumulation = 8
"#;

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pg2net-pipeline"));
    std::fs::create_dir_all(&out).unwrap();
    let input = out.join("checkins.tsv");
    let records = periodic_corpus(&PeriodicConfig::default());
    write_records(&input, &records, DatasetMode::Checkin, true).unwrap();
    let config = out.join("run.toml");
    std::fs::write(&config, CONFIG).unwrap();

    let run_dir = out.join("run");
    let argv = |cmd: &str| {
        vec![
            "pg2net".to_string(),
            cmd.into(),
            "--config".into(),
            config.display().to_string(),
            "--input".into(),
            input.display().to_string(),
            "--out".into(),
            run_dir.display().to_string(),
        ]
    };
    for pass in 1..=2 {
        println!("== pass {pass}");
        let code = pg2net::cli::dispatch(argv("pipeline"));
        assert_eq!(code, 0, "pipeline failed");
    }
    println!("artifacts in {}", run_dir.display());
}
