use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pg2net::data::DatasetMode;
use pg2net::synth::{periodic_corpus, write_records, PeriodicConfig};

const CONFIG: &str = r#"
seed = 3

[input]
mode = "checkin"
has_header = true

[walk]
walks_per_node = 2
walk_length = 10
epochs = 1

[model]
user_dim = 2
location_dim = 8
category_dim = 2
time_dim = 2
hidden = 4

[train]
learning_rate = 0.01
epochs = 2
accumulation = 16
"#;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    input: PathBuf,
    config: PathBuf,
}

fn fixture(config: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let input = root.join("checkins.tsv");
    let records = periodic_corpus(&PeriodicConfig {
        users: 5,
        locations: 12,
        ..Default::default()
    });
    write_records(&input, &records, DatasetMode::Checkin, true).unwrap();
    let cfg = root.join("run.toml");
    let config = config.replace("[input]\n", &format!("[input]\npath = {:?}\n", input.display().to_string()));
    std::fs::write(&cfg, config).unwrap();
    Fixture {
        _dir: dir,
        root,
        input,
        config: cfg,
    }
}

fn pg2net(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pg2net")).args(args).output().unwrap()
}

impl Fixture {
    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        let out = self.root.join(out);
        let mut args = vec![
            cmd,
            "--config",
            self.config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        let input = self.input.to_str().unwrap();
        if matches!(cmd, "pipeline" | "preprocess") {
            args.extend(["--input", input]);
        }
        args.extend(extra);
        pg2net(&args)
    }
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn usage_errors_exit_one() {
    let out = pg2net(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("Usage"));
    assert_eq!(pg2net(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pg2net(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(pg2net(&["--help"]).status.code(), Some(0));
    let help = text(&pg2net(&["--help"]).stdout);
    for cmd in ["preprocess", "graph-embed", "priors", "train", "evaluate", "baseline", "ablate", "report", "pipeline"] {
        assert!(help.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn pipeline_writes_artifacts_and_reruns_from_cache() {
    let f = fixture(CONFIG);
    let first = f.run("pipeline", "run", &[]);
    assert_eq!(first.status.code(), Some(0), "{}", text(&first.stderr));
    let dir = f.root.join("run");
    for name in [
        "manifest.json",
        "config.resolved.toml",
        "sessions.jsonl",
        "model_full.ckpt",
        "model_full.json",
        "loss_full.csv",
        "eval_full.json",
        "eval_markov.json",
        "eval_lstm.json",
        "report_distance_full.csv",
        "report_weights_full.csv",
        "summary.txt",
    ] {
        assert!(dir.join(name).is_file(), "{name} missing");
    }
    let summary = text(&first.stdout);
    assert!(summary.contains("markov") && summary.contains("lstm"));
    let before = files(&dir);

    let second = f.run("pipeline", "run", &[]);
    assert_eq!(second.status.code(), Some(0));
    let log = text(&second.stdout);
    assert!(log.contains("cached"));
    assert!(!log.contains("done in"), "{log}");
    assert_eq!(files(&dir), before);
}

#[test]
fn deleted_artifacts_are_rebuilt_downstream_only() {
    let f = fixture(CONFIG);
    assert_eq!(f.run("pipeline", "run", &[]).status.code(), Some(0));
    let dir = f.root.join("run");
    let before = files(&dir);
    std::fs::remove_file(dir.join("eval_full.json")).unwrap();
    let again = f.run("pipeline", "run", &[]);
    assert_eq!(again.status.code(), Some(0));
    let log = text(&again.stdout);
    assert!(log.contains("preprocess: cached"), "{log}");
    assert!(log.contains("done in"), "{log}");
    assert_eq!(files(&dir), before);
}

#[test]
fn stages_run_one_at_a_time() {
    let f = fixture(CONFIG);
    let ok = |o: Output| {
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
        text(&o.stdout)
    };
    let p = ok(f.run("preprocess", "s", &[]));
    assert!(p.contains("sessions:"));
    ok(f.run("graph-embed", "s", &["--level", "location"]));
    ok(f.run("graph-embed", "s", &["--level", "category"]));
    ok(f.run("priors", "s", &[]));
    let t = ok(f.run("train", "s", &["--variant", "gnet"]));
    assert!(t.contains("model_gnet.ckpt"));
    let ckpt = f.root.join("s/model_gnet.ckpt");
    let e = ok(f.run("evaluate", "s", &["--checkpoint", ckpt.to_str().unwrap()]));
    assert!(e.contains("Recall"));
    ok(f.run("baseline", "s", &["--kind", "markov"]));
    let w = ok(f.run("report", "s", &["--kind", "weights", "--variant", "gnet"]));
    assert!(w.contains("part,share\n"), "{w}");
    let l = ok(f.run("report", "s", &["--kind", "loss-curve", "--variant", "gnet"]));
    assert!(l.contains("epoch,train_loss,test_loss\n"), "{l}");
    let a = ok(f.run("ablate", "s", &["--variant", "gnet", "--variant", "no-aux"]));
    assert!(a.contains("gnet") && f.root.join("s/ablation.txt").is_file());
}

#[test]
fn config_errors_exit_two_with_key_path() {
    let cases = [
        ("[model]\nepsilon = -1.0\n", "model.aux_weight (epsilon) must be >= 0"),
        ("[model]\nhiden = 3\n", "hiden"),
        ("[input]\nmode = \"cdr\"\n[priors]\nactivity = true\n", "priors.activity"),
        ("[train]\nlearning_rate = 0.0\n", "train.learning_rate"),
    ];
    for (cfg, needle) in cases {
        let f = fixture(cfg);
        let out = f.run("preprocess", "x", &[]);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        assert!(text(&out.stderr).contains(needle), "{cfg}: {}", text(&out.stderr));
    }
}

#[test]
fn missing_input_is_a_data_error() {
    let f = fixture(CONFIG);
    let out = pg2net(&[
        "preprocess",
        "--input",
        f.root.join("nope.tsv").to_str().unwrap(),
        "--out",
        f.root.join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("nope.tsv"));
}
