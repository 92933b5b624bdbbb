//! File-based configuration, run directories and the command bodies behind
//! the `delay-sde` binary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{
    run_comparison, run_convergence_study, run_nstep_eval, write_comparison_csv, write_convergence_csv, write_plot_csv,
    ComparisonConfig, ConvergenceConfig, NstepConfig,
};
use crate::model::{build_windows, fit, gaussian_quantile, DelaySdeNet, ModelConfig, Split, SplitSpec};
use crate::ood::{soft_brownian_offset, SboConfig};
use crate::sdde::{
    make_time_grid, read_paths_csv, simulate_paths, write_paths_csv, ConstantSegment, InitialSegment, SddeSpec,
    SinCosSegment,
};

/// Prefix of environment variables overriding config keys; nested keys
/// are joined by `__`, e.g. `DELAY_SDE__COMPARE__YEARS=30`.
pub const ENV_PREFIX: &str = "DELAY_SDE__";

/// Parameters of the benchmark system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Slope of the drift tanh.
    pub alpha: f64,
    /// Slope of the diffusion sigmoid.
    pub lambda: f64,
    /// Multiplier of every diffusion output.
    pub diffusion_factor: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig { alpha: 1.0, lambda: 1.0, diffusion_factor: 1.0 }
    }
}

impl SystemConfig {
    pub fn spec(&self) -> Result<SddeSpec> {
        let s = SddeSpec::benchmark(self.alpha, self.lambda)?;
        if self.diffusion_factor == 1.0 {
            Ok(s)
        } else {
            s.with_diffusion_scale(self.diffusion_factor)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    SinCos,
    Constant(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub paths: usize,
    pub dt: f64,
    pub tau: f64,
    pub horizon: f64,
    pub initial: InitialKind,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { paths: 110, dt: 1.0, tau: 3.0, horizon: 365.0, initial: InitialKind::SinCos }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct TrainConfig {
    pub split: SplitSpec,
    pub model: ModelConfig,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OodCommandConfig {
    pub lags: usize,
    /// OOD windows to generate.
    pub count: usize,
    pub split: SplitSpec,
    pub sbo: SboConfig,
}

impl Default for OodCommandConfig {
    fn default() -> Self {
        OodCommandConfig { lags: 4, count: 1000, split: SplitSpec::default(), sbo: SboConfig::default() }
    }
}

/// Every command's settings; sections a command does not use are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub system: SystemConfig,
    pub simulate: SimulateConfig,
    pub train: TrainConfig,
    pub convergence: ConvergenceConfig,
    pub compare: ComparisonConfig,
    pub ood: OodCommandConfig,
    pub eval: NstepConfig,
}

fn parse_env_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `path` (e.g. `["compare", "years"]`) in `table`, creating sections.
fn set_key(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| Error::Config("empty override key".into()))?;
    let mut cur = table;
    for key in parents {
        let entry = cur.entry(key.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override of `{}` descends into a non-table", path.join("."))))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Parses TOML text, applies `(key, value)` overrides, and validates the
/// result against the schema. Unknown keys are errors.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for (key, raw) in overrides {
        let path: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
        set_key(&mut table, &path, parse_env_value(raw))?;
    }
    let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.train.model.validate()?;
    cfg.convergence.validate()?;
    cfg.compare.validate()?;
    cfg.eval.model.validate()?;
    cfg.ood.sbo.validate()?;
    Ok(cfg)
}

/// Environment overrides carrying [`ENV_PREFIX`], prefix stripped.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> =
        std::env::vars().filter_map(|(k, val)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_string(), val))).collect();
    v.sort();
    v
}

/// Reads a config file (or the defaults when `path` is `None`) with environment overrides.
pub fn load_config(path: Option<&FsPath>) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_config(&text, &env_overrides())
}

/// Process exit code for an error: 1 configuration or input, 2 numerical,
/// 3 training divergence, 4 insufficient history.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => 3,
        Error::InsufficientHistory { .. } => 4,
        Error::NumericalBlowup { .. }
        | Error::QuadratureFailure { .. }
        | Error::SingularDesign
        | Error::NegativeLogArgument
        | Error::GuardUnsatisfiable { .. }
        | Error::SingleClass => 2,
        _ => 1,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the command, the effective config and the seed.
pub fn config_hash(command: &str, cfg: &RunConfig, seed: u64) -> Result<String> {
    let body = serde_json::to_string(&(command, cfg, seed))?;
    Ok(sha256_hex(body.as_bytes()))
}

/// Creates `<out_dir>/<unix seconds>-<command>-<hash prefix>`.
pub fn create_run_dir(out_dir: &FsPath, command: &str, hash: &str) -> Result<PathBuf> {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let base = out_dir.join(format!("{secs}-{command}-{}", &hash[..12]));
    let mut dir = base.clone();
    let mut n = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{n}", base.display()));
        n += 1;
    }
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Run metadata written next to every command's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub threads: usize,
    pub version: String,
    pub created_unix: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_hash: Option<String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, seed: u64) -> Result<Self> {
        Ok(Manifest {
            command: command.to_string(),
            seed,
            config_hash: config_hash(command, cfg, seed)?,
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: Vec::new(),
            outputs: Vec::new(),
            spec_hash: None,
            summary: serde_json::Map::new(),
            config: cfg.clone(),
        })
    }

    pub fn write(&self, dir: &FsPath) -> Result<()> {
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn create(dir: &FsPath, name: &str, m: &mut Manifest) -> Result<BufWriter<File>> {
    m.outputs.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn read_series(path: &FsPath, m: &mut Manifest) -> Result<Vec<crate::sdde::Path>> {
    m.inputs.push(path.display().to_string());
    read_paths_csv(File::open(path)?)
}

/// Simulated paths as `paths.csv`.
pub fn cmd_simulate(cfg: &RunConfig, seed: u64, dir: &FsPath, m: &mut Manifest) -> Result<()> {
    let s = &cfg.simulate;
    let spec = cfg.system.spec()?;
    m.spec_hash = Some(sha256_hex(serde_json::to_string(&spec)?.as_bytes()));
    let grid = make_time_grid(s.tau, s.horizon, s.dt)?;
    let eta: Box<dyn InitialSegment> = match &s.initial {
        InitialKind::SinCos => Box::new(SinCosSegment),
        InitialKind::Constant(c) => {
            if c.len() != spec.dim {
                return Err(Error::Config(format!("constant initial segment needs {} values", spec.dim)));
            }
            Box::new(ConstantSegment(c.clone()))
        }
    };
    let set = simulate_paths(&spec, eta.as_ref(), &grid, s.paths, seed)?;
    write_paths_csv(&set.paths, create(dir, "paths.csv", m)?)?;
    Ok(())
}

/// `model.json` and a per-epoch `training_log.csv`.
pub fn cmd_train(cfg: &RunConfig, data: &FsPath, seed: u64, dir: &FsPath, m: &mut Manifest) -> Result<()> {
    let t = &cfg.train;
    let paths = read_series(data, m)?;
    let w = build_windows(&paths, t.model.lags, t.model.horizon, &t.split.assign(paths.len())?)?;
    let model = fit(&w, &t.model, seed)?;
    fs::write(dir.join("model.json"), model.to_json()?)?;
    m.outputs.push("model.json".into());
    let mut log = csv::Writer::from_writer(create(dir, "training_log.csv", m)?);
    log.write_record(["net", "epoch", "loss"])?;
    for stage in &model.log {
        for (e, l) in stage.losses.iter().enumerate() {
            log.write_record([stage.role.name().to_string(), (e + 1).to_string(), format!("{l}")])?;
        }
    }
    log.flush()?;
    m.summary.insert("sigma_e".into(), model.sigma_e.into());
    Ok(())
}

/// `prediction.csv` (`t,coord,mean,std_a,std_e,ci_lo,ci_hi`) from the end of
/// the last series in a history CSV.
pub fn cmd_predict(
    model_path: &FsPath,
    history: &FsPath,
    steps: usize,
    level: f64,
    sigma_e: Option<f64>,
    dir: &FsPath,
    m: &mut Manifest,
) -> Result<()> {
    m.inputs.push(model_path.display().to_string());
    let mut model = DelaySdeNet::load(model_path)?;
    if let Some(s) = sigma_e {
        model.sigma_e = s;
    }
    let series = read_series(history, m)?;
    let last = series.last().ok_or_else(|| Error::InvalidArgument("empty history".into()))?;
    if last.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: last.dim() });
    }
    let g = last.grid();
    let pred = model.predict(g.time(g.last_index()), last.values(), steps)?;
    let z = gaussian_quantile(level)?;
    let mut w = csv::Writer::from_writer(create(dir, "prediction.csv", m)?);
    w.write_record(["t", "coord", "mean", "std_a", "std_e", "ci_lo", "ci_hi"])?;
    for s in 1..=steps {
        for j in 0..model.dim {
            let at = (s - 1) * model.dim + j;
            let (mean, std_a, std_e) = (pred.mean[at], pred.aleatoric_var[at].sqrt(), pred.epistemic_std[j]);
            let half = z * (std_a + std_e);
            let t = pred.time + s as f64 * pred.dt;
            w.write_record([format!("{t}"), (j + 1).to_string()].into_iter().chain(
                [mean, std_a, std_e, mean - half, mean + half].map(|v| format!("{v}")),
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_convergence(cfg: &RunConfig, seed: u64, dir: &FsPath, m: &mut Manifest) -> Result<()> {
    let run = run_convergence_study(&cfg.system.spec()?, &cfg.convergence, seed)?;
    write_convergence_csv(&run.report, create(dir, "convergence.csv", m)?)?;
    m.summary.insert("gamma".into(), run.report.gamma.into());
    m.summary.insert("intercept".into(), run.report.intercept.into());
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig, seed: u64, dir: &FsPath, m: &mut Manifest) -> Result<()> {
    let report = run_comparison(&cfg.system.spec()?, &cfg.compare, seed)?;
    write_comparison_csv(&report, create(dir, "comparison.csv", m)?)?;
    Ok(())
}

/// Soft-Brownian-offset windows around the training windows of a data CSV,
/// in raw `[t, window]` coordinates.
pub fn cmd_ood(cfg: &RunConfig, data: &FsPath, seed: u64, dir: &FsPath, m: &mut Manifest) -> Result<()> {
    let o = &cfg.ood;
    let paths = read_series(data, m)?;
    let w = build_windows(&paths, o.lags, 1, &o.split.assign(paths.len())?)?;
    let train: Vec<Vec<f64>> = w
        .rows
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| std::iter::once(r.time).chain(r.lags.iter().copied()).collect())
        .collect();
    let out = soft_brownian_offset(&train, w.dim, &o.sbo, o.count, seed)?;
    let mut csv = csv::Writer::from_writer(create(dir, "ood_windows.csv", m)?);
    let mut header = vec!["t".to_string()];
    for l in 0..o.lags {
        header.extend((1..=w.dim).map(|j| format!("lag{}_x{j}", o.lags - l)));
    }
    csv.write_record(&header)?;
    for p in &out.points {
        csv.write_record(p.iter().map(|v| format!("{v}")))?;
    }
    csv.flush()?;
    m.summary.insert("d_minus".into(), out.d_minus.into());
    m.summary.insert("failed".into(), out.failed.into());
    Ok(())
}

/// `report.csv` plus `plot_h<N>.csv` per horizon.
pub fn cmd_eval(cfg: &RunConfig, data: &FsPath, seed: u64, dir: &FsPath, m: &mut Manifest) -> Result<()> {
    let series = read_series(data, m)?;
    let out = run_nstep_eval(&series, &cfg.eval, seed)?;
    write_comparison_csv(&out.report, create(dir, "report.csv", m)?)?;
    for (n, rows) in &out.plots {
        write_plot_csv(rows, create(dir, &format!("plot_h{n}.csv"), m)?)?;
    }
    Ok(())
}
