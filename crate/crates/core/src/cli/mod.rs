//! Command-line surface: every stage as a subcommand plus `pipeline`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal invariant violation.

pub mod config;
pub mod stages;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{EvalConfig, InputConfig, RunConfig};
pub use stages::{load_model, meta_path, CheckpointMeta, Loaded, Manifest, Runner, StageRecord};

use crate::data::{DatasetMode, Level};
use crate::error::{Error, Result};
use crate::model::Variant;
use crate::train::EvalReport;

#[derive(Debug, Parser)]
#[command(name = "pg2net", version, about = "Next-place prediction pipeline", arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Root seed; every stage seed derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Checkin,
    Cdr,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LevelArg {
    Location,
    Category,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaselineKind {
    Markov,
    Lstm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReportKind {
    DistanceDist,
    Weights,
    LossCurve,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, sessionize, split and index a raw trajectory file.
    Preprocess {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Build the transition graph of one level and embed it with node2vec.
    GraphEmbed {
        #[arg(long)]
        sessions: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "location")]
        level: LevelArg,
    },
    /// Build the distance, time and activity priors.
    Priors {
        #[arg(long)]
        sessions: Option<PathBuf>,
    },
    /// Train one model variant.
    Train {
        #[arg(long)]
        variant: Option<String>,
    },
    /// Score a checkpoint on the test queries.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Train and score a baseline.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
    },
    /// Train and score model variants side by side.
    Ablate {
        /// Every variant, regardless of the configured list.
        #[arg(long)]
        all: bool,
        #[arg(long = "variant")]
        variants: Vec<String>,
    },
    /// Analysis reports on a trained checkpoint.
    Report {
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Every stage in order, skipping those whose inputs are unchanged.
    Pipeline {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

fn parse_variant(tag: &str) -> Result<Variant> {
    tag.parse()
}

/// Config file (or defaults) with command-line overrides applied.
pub fn resolve_config(common: &Common, command: &Command) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    match command {
        Command::Preprocess { input, mode } | Command::Pipeline { input, mode } => {
            if let Some(i) = input {
                cfg.input.path = Some(i.clone());
            }
            if let Some(m) = mode {
                cfg.input.mode = match m {
                    ModeArg::Checkin => DatasetMode::Checkin,
                    ModeArg::Cdr => DatasetMode::Cdr,
                };
            }
        }
        Command::Train { variant: Some(v) } => cfg.train.variant = parse_variant(v)?,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn comparison_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<12}", "model");
    for k in crate::train::DEFAULT_KS {
        let _ = write!(s, "  {:>8}  {:>8}", format!("Rec@{k}"), format!("NDCG@{k}"));
    }
    s.push('\n');
    for r in reports {
        let _ = write!(s, "{:<12}", r.variant);
        for m in &r.metrics {
            let _ = write!(s, "  {:>8.4}  {:>8.4}", m.recall, m.ndcg);
        }
        s.push('\n');
    }
    s
}

fn print_report(r: &EvalReport) {
    print!("{}", r.table());
    if r.runtime_secs > 0.0 {
        println!("scored in {:.2}s", r.runtime_secs);
    }
}

fn write_text(runner: &Runner, name: &str, text: &str) -> Result<()> {
    let p = runner.path(name);
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.common, &cli.command)?;
    if let Some(n) = cfg.workers {
        // Fails only if a pool already exists, e.g. in a second in-process call.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut runner = Runner::open(cfg)?;
    let variant = runner.cfg.train.variant;
    match cli.command {
        Command::Preprocess { .. } => {
            let p = runner.preprocess()?;
            println!("sessions: {}", p.display());
        }
        Command::GraphEmbed { sessions, level } => {
            let sessions = match sessions {
                Some(s) => s,
                None => runner.preprocess()?,
            };
            let level = match level {
                LevelArg::Location => Level::Location,
                LevelArg::Category => Level::Category,
            };
            let p = runner.embed(&sessions, level)?;
            println!("embedding: {}", p.display());
        }
        Command::Priors { sessions } => {
            let sessions = match sessions {
                Some(s) => s,
                None => runner.preprocess()?,
            };
            let p = runner.priors(&sessions)?;
            println!("priors: {}", p.display());
        }
        Command::Train { .. } => {
            let (exp, up) = runner.experiment()?;
            let p = runner.train(&exp, &up, variant)?;
            println!("checkpoint: {}", p.display());
        }
        Command::Evaluate { checkpoint, variant: v } => {
            let (exp, up) = runner.experiment()?;
            let ckpt = match checkpoint {
                Some(c) => c,
                None => {
                    let v = v.as_deref().map(parse_variant).transpose()?.unwrap_or(variant);
                    runner.train(&exp, &up, v)?
                }
            };
            print_report(&runner.evaluate(&exp, &ckpt)?);
        }
        Command::Baseline { kind } => {
            let (exp, up) = runner.experiment()?;
            let report = match kind {
                BaselineKind::Markov => runner.markov(&exp, &up)?,
                BaselineKind::Lstm => {
                    let ckpt = runner.train_lstm(&exp, &up)?;
                    runner.evaluate(&exp, &ckpt)?
                }
            };
            print_report(&report);
        }
        Command::Ablate { all, variants } => {
            let list: Vec<Variant> = if all {
                Variant::ALL.to_vec()
            } else if !variants.is_empty() {
                variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?
            } else {
                runner.cfg.eval.ablation_variants.clone()
            };
            let (exp, up) = runner.experiment()?;
            let mut reports = Vec::new();
            for v in list {
                let ckpt = runner.train(&exp, &up, v)?;
                reports.push(runner.evaluate(&exp, &ckpt)?);
            }
            let table = comparison_table(&reports);
            write_text(&runner, "ablation.txt", &table)?;
            print!("{table}");
        }
        Command::Report { kind, variant: v, checkpoint } => {
            let (exp, up) = runner.experiment()?;
            let ckpt = match checkpoint {
                Some(c) => c,
                None => {
                    let v = v.as_deref().map(parse_variant).transpose()?.unwrap_or(variant);
                    runner.train(&exp, &up, v)?
                }
            };
            let path = match kind {
                ReportKind::DistanceDist => runner.distance_report(&exp, &ckpt)?,
                ReportKind::Weights => runner.weights_report(&exp, &ckpt)?,
                ReportKind::LossCurve => {
                    let name = ckpt.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                    let loss = name.replacen("model_", "loss_", 1).replace(".ckpt", ".csv");
                    runner.path(&loss)
                }
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            print!("{text}");
        }
        Command::Pipeline { .. } => {
            let (exp, up) = runner.experiment()?;
            let ckpt = runner.train(&exp, &up, variant)?;
            let main = runner.evaluate(&exp, &ckpt)?;
            let markov = runner.markov(&exp, &up)?;
            let lstm_ckpt = runner.train_lstm(&exp, &up)?;
            let lstm = runner.evaluate(&exp, &lstm_ckpt)?;
            runner.distance_report(&exp, &ckpt)?;
            runner.weights_report(&exp, &ckpt)?;
            let table = comparison_table(&[main, markov, lstm]);
            write_text(&runner, "summary.txt", &table)?;
            print!("{table}");
        }
    }
    Ok(())
}

/// Parses `argv` (program name first) and runs the command; returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
