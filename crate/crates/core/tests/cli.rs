use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use delay_sde_net::sdde::read_paths_csv;

fn delay_sde(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_delay-sde"));
    cmd.args(args).arg("--out-dir").arg(dir.join("runs")).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run_dir(out: &Output) -> PathBuf {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

const SMALL_TRAIN: &str = r#"
[train.model]
width = 4
drift = { learning_rate = 0.01, iterations = 2, minibatch = 16 }
aleatoric = { learning_rate = 0.0003, iterations = 2, minibatch = 16 }
epistemic = { learning_rate = 0.02, iterations = 2, minibatch = 16 }
"#;

#[test]
fn simulate_writes_paths_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = delay_sde(
        tmp.path(),
        &["simulate", "--seed", "5"],
        &[("DELAY_SDE__SIMULATE__PATHS", "3"), ("DELAY_SDE__SIMULATE__HORIZON", "20.0")],
    );
    let dir = run_dir(&out);
    let paths = read_paths_csv(fs::File::open(dir.join("paths.csv")).unwrap()).unwrap();
    assert_eq!(paths.len(), 3);
    assert_eq!(paths[0].grid().last_index(), 20);
    assert_eq!(paths[0].grid().first_index(), -3);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["simulate"]["paths"], 3);
    assert!(manifest["spec_hash"].is_string());
}

#[test]
fn same_seed_gives_identical_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let env = [("DELAY_SDE__SIMULATE__PATHS", "2"), ("DELAY_SDE__SIMULATE__HORIZON", "30.0")];
    let a = run_dir(&delay_sde(tmp.path(), &["simulate", "--seed", "8"], &env));
    let b = run_dir(&delay_sde(tmp.path(), &["simulate", "--seed", "8"], &env));
    assert_ne!(a, b);
    assert_eq!(fs::read(a.join("paths.csv")).unwrap(), fs::read(b.join("paths.csv")).unwrap());
}

#[test]
fn bad_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "[simulate]\nno_such_key = 1\n").unwrap();
    let out = delay_sde(tmp.path(), &["-c", cfg.to_str().unwrap(), "simulate"], &[]);
    assert_eq!(out.status.code(), Some(1));

    let out = delay_sde(tmp.path(), &["simulate"], &[("DELAY_SDE__SIMULATE__DT", "0.3")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_then_predict_and_short_history() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = run_dir(&delay_sde(
        tmp.path(),
        &["simulate", "--seed", "2"],
        &[("DELAY_SDE__SIMULATE__PATHS", "6"), ("DELAY_SDE__SIMULATE__HORIZON", "60.0")],
    ));
    let data = sim.join("paths.csv");
    let cfg = tmp.path().join("train.cfg");
    fs::write(&cfg, SMALL_TRAIN).unwrap();
    let trained =
        run_dir(&delay_sde(tmp.path(), &["-c", cfg.to_str().unwrap(), "train", "--data", data.to_str().unwrap()], &[]));
    let model = trained.join("model.json");
    assert!(model.exists());
    assert!(trained.join("training_log.csv").exists());

    let predicted = run_dir(&delay_sde(
        tmp.path(),
        &["predict", "--model", model.to_str().unwrap(), "--history", data.to_str().unwrap(), "--steps", "3"],
        &[],
    ));
    let text = fs::read_to_string(predicted.join("prediction.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,coord,mean,std_a,std_e,ci_lo,ci_hi"));
    assert_eq!(lines.count(), 3 * 2);

    // the model needs four lags; two rows of history are not enough
    let short = tmp.path().join("short.csv");
    fs::write(&short, "t,x1,x2\n0,0.1,0.2\n1,0.3,0.4\n").unwrap();
    let out = delay_sde(
        tmp.path(),
        &["predict", "--model", model.to_str().unwrap(), "--history", short.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            delay_sde_net::cli::load_config(Some(&path)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}
