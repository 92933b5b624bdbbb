use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_windows, fit, DelaySdeNet, ModelConfig, Split};
use crate::sdde::{
    aggregate_increments, make_time_grid, path_increments, simulate_path, simulate_paths, Coefficients, PathSet, SddeSpec,
    SinCosSegment, DEFAULT_BLOWUP_CAP,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Simulated paths `M`.
    pub paths: usize,
    pub train_fraction: f64,
    pub dt_ref: f64,
    pub horizon: f64,
    pub tau: f64,
    pub kappas: Vec<usize>,
    pub model: ModelConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            paths: 1000,
            train_fraction: 0.7,
            dt_ref: 0.01,
            horizon: 5.0,
            tau: 15.0,
            kappas: vec![5, 10, 50, 100, 500],
            model: reference_model(),
        }
    }
}

/// Drift lr 0.01 for 30 epochs, aleatoric lr 0.0003 for 22, no classifier.
pub fn reference_model() -> ModelConfig {
    let mut m = ModelConfig { train_epistemic: false, ..ModelConfig::default() };
    m.drift.learning_rate = 0.01;
    m.drift.iterations = 30;
    m.aleatoric.learning_rate = 0.0003;
    m.aleatoric.iterations = 22;
    m
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.paths < 2 || !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("need at least two paths and a train fraction in (0, 1)".into()));
        }
        if self.kappas.iter().any(|k| *k < 2) {
            return Err(Error::Config("every kappa must be at least 2".into()));
        }
        let mut k = self.kappas.clone();
        k.sort_unstable();
        k.dedup();
        if k.len() != self.kappas.len() {
            return Err(Error::Config("kappa values must be distinct".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub kappa: usize,
    pub dt: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Terminal error of the model run at the reference step.
    pub delta_ref: f64,
    pub dt_ref: f64,
    pub points: Vec<ConvergencePoint>,
    /// Slope of `ln(Δ − Δ_ref)` on `ln Δt`.
    pub gamma: f64,
    pub intercept: f64,
    /// Kappas left out of the regression because `Δ ≤ Δ_ref`.
    pub dropped: Vec<usize>,
}

/// `√(mean_s ‖x̂_T − x_T‖²)` over `test` paths of `set`, running `model` on the
/// grid coarsened by `kappa` with the summed Brownian increments of each path.
pub fn terminal_error(model: &dyn Coefficients, set: &PathSet, test: &[usize], kappa: usize) -> Result<f64> {
    let coarse = set.grid.coarsen(kappa)?;
    let d = set.dim;
    let squared = test
        .par_iter()
        .map(|&i| {
            let truth = &set.paths[i];
            let inc = aggregate_increments(&path_increments(set, i), kappa)?;
            let initial = truth.coarsen(kappa)?;
            let initial = &initial.values()[..(coarse.lags + 1) * d];
            let pred = simulate_path(model, initial, &coarse, &inc, DEFAULT_BLOWUP_CAP)?;
            let end = pred.at(coarse.last_index());
            Ok(end.iter().zip(truth.at(set.grid.last_index())).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((squared.iter().sum::<f64>() / test.len().max(1) as f64).sqrt())
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope and intercept from `Δ_ref` and the coarse errors; points with
/// `Δ ≤ Δ_ref` are dropped with a warning.
pub fn convergence_rate(delta_ref: f64, points: &[ConvergencePoint]) -> Result<(f64, f64, Vec<usize>)> {
    let mut dropped = Vec::new();
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| {
            if p.delta > delta_ref {
                Some((p.dt.ln(), (p.delta - delta_ref).ln()))
            } else {
                log::warn!("kappa {}: error {} does not exceed the reference {}", p.kappa, p.delta, delta_ref);
                dropped.push(p.kappa);
                None
            }
        })
        .collect();
    if xy.len() < 2 {
        return Err(Error::NegativeLogArgument);
    }
    let (slope, intercept) = fit_line(&xy);
    Ok((slope, intercept, dropped))
}

/// Outputs of a convergence run besides the report.
pub struct ConvergenceRun {
    pub report: ConvergenceReport,
    pub model: DelaySdeNet,
    pub data: PathSet,
    pub test: Vec<usize>,
}

/// Simulates `cfg.paths` paths at `dt_ref`, fits the model on the training
/// share, then measures terminal errors at `dt_ref` and at each `κ·dt_ref`.
pub fn run_convergence_study(spec: &SddeSpec, cfg: &ConvergenceConfig, seed: u64) -> Result<ConvergenceRun> {
    cfg.validate()?;
    let grid = make_time_grid(cfg.tau, cfg.horizon, cfg.dt_ref)?;
    for &k in &cfg.kappas {
        grid.coarsen(k)?;
    }
    let data = simulate_paths(spec, &SinCosSegment, &grid, cfg.paths, seed)?;
    let n_train = ((cfg.paths as f64 * cfg.train_fraction).round() as usize).clamp(1, cfg.paths - 1);
    let splits: Vec<Split> = (0..n_train).map(|_| Split::Train).collect();
    let windows = build_windows(&data.paths[..n_train], cfg.model.lags, cfg.model.horizon, &splits)?;
    log::info!("convergence study: fitting on {} windows from {} paths", windows.rows.len(), n_train);
    let model = fit(&windows, &cfg.model, seed)?;
    let test: Vec<usize> = (n_train..cfg.paths).collect();

    let delta_ref = terminal_error(&model, &data, &test, 1)?;
    let points = cfg
        .kappas
        .iter()
        .map(|&kappa| {
            let delta = terminal_error(&model, &data, &test, kappa)?;
            log::info!("kappa {kappa}: delta {delta}");
            Ok(ConvergencePoint { kappa, dt: kappa as f64 * cfg.dt_ref, delta })
        })
        .collect::<Result<Vec<_>>>()?;
    let (gamma, intercept, dropped) = convergence_rate(delta_ref, &points)?;
    let report = ConvergenceReport { delta_ref, dt_ref: cfg.dt_ref, points, gamma, intercept, dropped };
    Ok(ConvergenceRun { report, model, data, test })
}
