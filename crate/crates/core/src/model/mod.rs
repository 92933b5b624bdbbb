//! The three-network model: drift, aleatoric diffusion, epistemic classifier.
//!
//! Training runs strictly in that order. The drift is fitted on `N`-step
//! Euler rollouts, the aleatoric net on the drift's residuals, and the
//! classifier on in-distribution windows against soft-Brownian-offset
//! windows. A final scale `σₑ` for the classifier is tuned on validation rows.

pub mod bound;
pub mod calibrate;
pub mod objectives;
pub mod train;
pub mod windows;

use std::path::Path as FsPath;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::net::{logistic, Activation, Minibatch, SgdConfig, TwoLayerNet};
use crate::ood::{soft_brownian_offset, SboConfig, SboMode};
use crate::sdde::Coefficients;

pub use bound::{barron_norms, estimate_approximation, estimate_lipschitz, theoretical_bound, BoundConstants};
pub use calibrate::{sigma_objective, tune_sigma_e};
pub use objectives::{drift_rollout, AleatoricObjective, DriftObjective, EpistemicObjective};
pub use train::{train_epochs, Objective, Role, TrainState};
pub use windows::{build_windows, Normalizer, Split, SplitSpec, Window, WindowSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_lags")]
    pub lags: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Hidden units of every net.
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_drift")]
    pub drift: SgdConfig,
    #[serde(default = "default_aleatoric")]
    pub aleatoric: SgdConfig,
    #[serde(default = "default_epistemic")]
    pub epistemic: SgdConfig,
    /// Train the classifier; otherwise the epistemic part is zero.
    #[serde(default = "default_true")]
    pub train_epistemic: bool,
    /// One classifier per coordinate instead of one shared probability.
    #[serde(default)]
    pub per_coordinate_prob: bool,
    #[serde(default)]
    pub sbo: SboConfig,
    /// SBO variants mixed in equal shares; each replaces `sbo.mode`.
    #[serde(default = "default_ood_modes")]
    pub ood_modes: Vec<SboMode>,
    /// OOD windows generated per training window.
    #[serde(default = "default_ood_ratio")]
    pub ood_ratio: f64,
    /// Fixed `σₑ`; tuned on validation rows when absent.
    #[serde(default)]
    pub sigma_e: Option<f64>,
}

fn default_lags() -> usize {
    4
}

fn default_horizon() -> usize {
    1
}

fn default_width() -> usize {
    32
}

fn default_true() -> bool {
    true
}

fn default_ood_modes() -> Vec<SboMode> {
    vec![SboMode::PerLagNoise]
}

fn default_ood_ratio() -> f64 {
    1.0
}

fn sgd(lr: f64, iterations: usize) -> SgdConfig {
    let mut c = SgdConfig::new(lr, iterations);
    c.minibatch = Minibatch::Size(64);
    c
}

fn default_drift() -> SgdConfig {
    sgd(0.01, 500)
}

fn default_aleatoric() -> SgdConfig {
    sgd(0.0003, 500)
}

fn default_epistemic() -> SgdConfig {
    sgd(0.02, 100)
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lags: default_lags(),
            horizon: default_horizon(),
            width: default_width(),
            activation: Activation::default(),
            drift: default_drift(),
            aleatoric: default_aleatoric(),
            epistemic: default_epistemic(),
            train_epistemic: true,
            per_coordinate_prob: false,
            sbo: SboConfig::default(),
            ood_modes: default_ood_modes(),
            ood_ratio: default_ood_ratio(),
            sigma_e: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 || self.horizon == 0 || self.width == 0 {
            return Err(Error::Config("lags, horizon and width must be positive".into()));
        }
        self.drift.validate()?;
        self.aleatoric.validate()?;
        if self.train_epistemic {
            self.epistemic.validate()?;
            self.sbo.validate()?;
            if self.ood_modes.is_empty() {
                return Err(Error::Config("ood_modes must name at least one SBO variant".into()));
            }
            if !(self.ood_ratio > 0.0 && self.ood_ratio.is_finite()) {
                return Err(Error::Config(format!("ood_ratio must be positive, got {}", self.ood_ratio)));
            }
        }
        if let Some(s) = self.sigma_e {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma_e must be nonnegative, got {s}")));
            }
        }
        Ok(())
    }

    fn stage_config(&self, role: Role) -> &SgdConfig {
        match role {
            Role::Drift => &self.drift,
            Role::Aleatoric => &self.aleatoric,
            Role::Epistemic => &self.epistemic,
        }
    }
}

/// Per-epoch losses of one training stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageLog {
    pub role: Role,
    pub losses: Vec<f64>,
}

/// A trained model and everything needed to reuse it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySdeNet {
    pub dim: usize,
    pub lags: usize,
    pub horizon: usize,
    pub dt: f64,
    pub normalizer: Normalizer,
    pub drift: Vec<TwoLayerNet>,
    pub aleatoric: Vec<TwoLayerNet>,
    /// `g_a = scale · h`, fixed from the residual magnitude before training.
    pub aleatoric_scale: Vec<f64>,
    /// Empty when no classifier was trained.
    pub epistemic: Vec<TwoLayerNet>,
    pub sigma_e: f64,
    pub config: ModelConfig,
    pub seed: u64,
    pub log: Vec<StageLog>,
}

/// Mean path and uncertainty of one `N`-step prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionBundle {
    pub dim: usize,
    pub dt: f64,
    /// Time of the last observed state.
    pub time: f64,
    /// `x̂_1..x̂_N`, row-major over step then coordinate.
    pub mean: Vec<f64>,
    /// Accumulated `V·Δt` after each step.
    pub aleatoric_var: Vec<f64>,
    pub epistemic_prob: Vec<f64>,
    /// `σₑ·prob` per coordinate.
    pub epistemic_std: Vec<f64>,
    /// `√(V·Δt) + σₑ·prob` per step and coordinate.
    pub total_std: Vec<f64>,
}

impl PredictionBundle {
    pub fn steps(&self) -> usize {
        self.mean.len() / self.dim
    }

    pub fn mean_at(&self, step: usize) -> &[f64] {
        &self.mean[(step - 1) * self.dim..step * self.dim]
    }

    pub fn total_std_at(&self, step: usize) -> &[f64] {
        &self.total_std[(step - 1) * self.dim..step * self.dim]
    }

    pub fn aleatoric_std_at(&self, step: usize) -> Vec<f64> {
        self.aleatoric_var[(step - 1) * self.dim..step * self.dim].iter().map(|v| v.sqrt()).collect()
    }

    /// Two-sided Gaussian interval `mean ± z·total_std` at `level`.
    pub fn ci(&self, level: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = gaussian_quantile(level)?;
        let lo = self.mean.iter().zip(&self.total_std).map(|(m, s)| m - z * s).collect();
        let hi = self.mean.iter().zip(&self.total_std).map(|(m, s)| m + z * s).collect();
        Ok((lo, hi))
    }
}

/// `z` with `P(|Z| ≤ z) = level` for a standard normal `Z`.
pub fn gaussian_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + level / 2.0))
}

/// Saved progress of [`fit_resumable`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub seed: u64,
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    /// One state per started stage, in training order.
    pub states: Vec<TrainState>,
}

pub enum FitOutcome {
    Done(Box<DelaySdeNet>),
    Paused(Checkpoint),
}

fn init_nets(role: Role, count: usize, cfg: &ModelConfig, input_dim: usize, seed: u64) -> Vec<TwoLayerNet> {
    (0..count)
        .map(|j| TwoLayerNet::init(cfg.width, input_dim, cfg.activation, true, &mut role.init_stream(seed, j)))
        .collect()
}

/// Trains all three stages and tunes `σₑ`.
pub fn fit(windows: &WindowSet, cfg: &ModelConfig, seed: u64) -> Result<DelaySdeNet> {
    match fit_resumable(windows, cfg, seed, None, None)? {
        FitOutcome::Done(m) => Ok(*m),
        FitOutcome::Paused(_) => unreachable!("an unbounded fit always completes"),
    }
}

/// [`fit`] that stops after `epoch_budget` epochs in total and can continue
/// from a [`Checkpoint`]. A resumed fit ends bit-identical to an
/// uninterrupted one.
pub fn fit_resumable(
    windows: &WindowSet,
    cfg: &ModelConfig,
    seed: u64,
    resume: Option<Checkpoint>,
    epoch_budget: Option<usize>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if windows.lags != cfg.lags || windows.horizon != cfg.horizon {
        return Err(Error::Config(format!(
            "windows have {} lags and horizon {}, config asks for {} and {}",
            windows.lags, windows.horizon, cfg.lags, cfg.horizon
        )));
    }
    let train = windows.split(Split::Train);
    let validation = windows.split(Split::Validation);
    let (d, n, dt) = (windows.dim, windows.horizon, windows.dt);
    let input_dim = 1 + d * cfg.lags;
    let (normalizer, mut states) = match resume {
        Some(c) => {
            if c.seed != seed || &c.config != cfg {
                return Err(Error::Config("checkpoint was written with a different seed or config".into()));
            }
            (c.normalizer, c.states)
        }
        None => (Normalizer::fit(&train, d, n, dt)?, Vec::new()),
    };
    let mut budget = epoch_budget.unwrap_or(usize::MAX);

    // Runs one stage from its saved state; returns false when the budget ran out.
    let mut run_stage = |stage: usize, role: Role, nets: &mut Vec<TwoLayerNet>, obj: &dyn Objective| -> Result<bool> {
        if states.len() <= stage {
            states.push(TrainState::new(role, seed, nets));
        }
        let st = &mut states[stage];
        let target = cfg.stage_config(role).iterations;
        let before = st.epoch;
        train_epochs(obj, nets, cfg.stage_config(role), st, before.saturating_add(budget))?;
        budget -= st.epoch - before;
        Ok(st.epoch >= target)
    };

    let mut drift = init_nets(Role::Drift, d, cfg, input_dim, seed);
    let drift_obj = DriftObjective { rows: &train, norm: &normalizer, horizon: n, dt };
    let mut finished = run_stage(0, Role::Drift, &mut drift, &drift_obj)?;

    let mut aleatoric = init_nets(Role::Aleatoric, d, cfg, input_dim, seed);
    let mut scale = vec![1.0; d];
    if finished {
        let residuals = residuals_of(&drift, &normalizer, &train, n, dt);
        scale = (0..d)
            .map(|j| {
                let ms = residuals.iter().map(|e| e[j] * e[j]).sum::<f64>() / residuals.len() as f64;
                let q = (ms / (n as f64 * dt)).sqrt();
                if q > 0.0 { q } else { 1.0 }
            })
            .collect();
        let inputs = objectives::aleatoric_inputs(&train, &normalizer, n, dt);
        let obj = AleatoricObjective::new(&inputs, &residuals, &scale, n, dt);
        finished = run_stage(1, Role::Aleatoric, &mut aleatoric, &obj)?;
    }

    let classifiers = if cfg.per_coordinate_prob { d } else { 1 };
    let mut epistemic = Vec::new();
    if finished && cfg.train_epistemic {
        epistemic = init_nets(Role::Epistemic, classifiers, cfg, input_dim, seed);
        let mut inputs: Vec<Vec<f64>> = train.iter().map(|w| normalizer.encoded(w.time, &w.lags)).collect();
        let n_ood = ((inputs.len() as f64) * cfg.ood_ratio).round().max(1.0) as usize;
        let modes = cfg.ood_modes.len();
        let mut ood = Vec::with_capacity(n_ood);
        for (m, mode) in cfg.ood_modes.iter().enumerate() {
            let share = n_ood * (m + 1) / modes - n_ood * m / modes;
            let sbo = SboConfig { mode: *mode, ..cfg.sbo.clone() };
            ood.extend(soft_brownian_offset(&inputs, d, &sbo, share, seed.wrapping_add(m as u64))?.points);
        }
        if ood.is_empty() {
            return Err(Error::InvalidArgument("soft Brownian offset produced no OOD windows".into()));
        }
        let n_ood = ood.len();
        inputs.extend(ood);
        let obj = EpistemicObjective::new(&inputs, n_ood);
        finished = run_stage(2, Role::Epistemic, &mut epistemic, &obj)?;
    }

    if !finished {
        return Ok(FitOutcome::Paused(Checkpoint { seed, config: cfg.clone(), normalizer, states }));
    }

    let log = states.iter().map(|s| StageLog { role: s.role, losses: s.losses.clone() }).collect();
    let mut model = DelaySdeNet {
        dim: d,
        lags: cfg.lags,
        horizon: n,
        dt,
        normalizer,
        drift,
        aleatoric,
        aleatoric_scale: scale,
        epistemic,
        sigma_e: 0.0,
        config: cfg.clone(),
        seed,
        log,
    };
    model.sigma_e = match cfg.sigma_e {
        Some(s) => s,
        None if model.epistemic.is_empty() => 0.0,
        None => {
            let rows = if validation.is_empty() { &train } else { &validation };
            model.tuned_sigma_e(rows)
        }
    };
    Ok(FitOutcome::Done(Box::new(model)))
}

fn residuals_of(nets: &[TwoLayerNet], norm: &Normalizer, rows: &[Window], horizon: usize, dt: f64) -> Vec<Vec<f64>> {
    let d = norm.dim();
    rows.par_iter()
        .map(|w| {
            let path = drift_rollout(nets, norm, w.time, &w.lags, horizon, dt);
            path[(horizon - 1) * d..].iter().zip(&w.target).map(|(a, b)| a - b).collect()
        })
        .collect()
}

impl DelaySdeNet {
    /// Drift at `(t, window)`.
    pub fn drift_at(&self, time: f64, window: &[f64], out: &mut [f64]) {
        let mut enc = vec![0.0; 1 + window.len()];
        objectives::drift_into(&self.drift, &self.normalizer, time, window, &mut enc, out);
    }

    /// `|g_a|` at `(t, window)`.
    pub fn aleatoric_std_at(&self, time: f64, window: &[f64], out: &mut [f64]) {
        let enc = self.normalizer.encoded(time, window);
        for ((o, net), q) in out.iter_mut().zip(&self.aleatoric).zip(&self.aleatoric_scale) {
            *o = (q * net.eval(&enc)).abs();
        }
    }

    /// Classifier probability per coordinate, in `[0, 1]`.
    pub fn prob_at(&self, time: f64, window: &[f64], out: &mut [f64]) {
        if self.epistemic.is_empty() {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let enc = self.normalizer.encoded(time, window);
        let probs: Vec<f64> = self.epistemic.iter().map(|n| logistic(n.eval(&enc))).collect();
        for (j, o) in out.iter_mut().enumerate() {
            *o = probs[j.min(probs.len() - 1)];
        }
    }

    /// `e = x̂_N − x_N` for each row.
    pub fn residuals(&self, rows: &[Window]) -> Vec<Vec<f64>> {
        residuals_of(&self.drift, &self.normalizer, rows, self.horizon, self.dt)
    }

    /// `σₑ` tuned on `rows` with the current drift, aleatoric net and classifier.
    pub fn tuned_sigma_e(&self, rows: &[Window]) -> f64 {
        let e = self.residuals(rows);
        let preds: Vec<PredictionBundle> =
            rows.par_iter().map(|w| self.predict_unchecked(w.time, &w.lags, self.horizon)).collect();
        let ale: Vec<Vec<f64>> = preds.iter().map(|p| p.aleatoric_std_at(self.horizon)).collect();
        let prob: Vec<Vec<f64>> = preds.iter().map(|p| p.epistemic_prob.clone()).collect();
        tune_sigma_e(&e, &ale, &prob)
    }

    /// `N`-step prediction from the last `p` states of `history`
    /// (row-major, oldest first), the most recent observed at `time`.
    pub fn predict(&self, time: f64, history: &[f64], steps: usize) -> Result<PredictionBundle> {
        let need = self.lags * self.dim;
        if history.len() < need || !history.len().is_multiple_of(self.dim) {
            return Err(Error::InsufficientHistory {
                needed: self.lags as i64,
                available: (history.len() / self.dim) as i64,
            });
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("prediction needs at least one step".into()));
        }
        Ok(self.predict_unchecked(time, &history[history.len() - need..], steps))
    }

    fn predict_unchecked(&self, time: f64, window: &[f64], steps: usize) -> PredictionBundle {
        let d = self.dim;
        let mean = drift_rollout(&self.drift, &self.normalizer, time, window, steps, self.dt);
        let mut g = vec![0.0; d];
        let mut acc = vec![0.0; d];
        let mut aleatoric_var = Vec::with_capacity(steps * d);
        for s in 0..steps {
            self.aleatoric_std_at(time + s as f64 * self.dt, window, &mut g);
            for j in 0..d {
                acc[j] += g[j] * g[j] * self.dt;
            }
            aleatoric_var.extend_from_slice(&acc);
        }
        let mut prob = vec![0.0; d];
        self.prob_at(time, window, &mut prob);
        let epistemic_std: Vec<f64> = prob.iter().map(|p| self.sigma_e * p).collect();
        let total_std = aleatoric_var.iter().enumerate().map(|(i, v)| v.sqrt() + epistemic_std[i % d]).collect();
        PredictionBundle {
            dim: d,
            dt: self.dt,
            time,
            mean,
            aleatoric_var,
            epistemic_prob: prob,
            epistemic_std,
            total_std,
        }
    }

    /// Predictions for every row at the model's horizon.
    pub fn predict_rows(&self, rows: &[Window]) -> Vec<PredictionBundle> {
        rows.par_iter().map(|w| self.predict_unchecked(w.time, &w.lags, self.horizon)).collect()
    }

    /// Classifier score of each row, averaged over coordinates.
    pub fn ood_scores(&self, rows: &[Window]) -> Vec<f64> {
        rows.par_iter()
            .map(|w| {
                let mut p = vec![0.0; self.dim];
                self.prob_at(w.time, &w.lags, &mut p);
                p.iter().sum::<f64>() / self.dim as f64
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: DelaySdeNet = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &FsPath) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let input_dim = 1 + self.dim * self.lags;
        let expected = [(self.drift.len(), self.dim), (self.aleatoric.len(), self.dim), (self.aleatoric_scale.len(), self.dim)];
        if let Some((got, want)) = expected.iter().find(|(g, w)| g != w) {
            return Err(Error::DimensionMismatch { expected: *want, got: *got });
        }
        if let Some(n) = self.drift.iter().chain(&self.aleatoric).chain(&self.epistemic).find(|n| n.input_dim() != input_dim) {
            return Err(Error::DimensionMismatch { expected: input_dim, got: n.input_dim() });
        }
        if !(self.sigma_e >= 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("model needs sigma_e ≥ 0 and dt > 0".into()));
        }
        Ok(())
    }
}

/// The fitted system `dX = f_m dt + (|g_a| + σₑ·prob) dW`.
impl Coefficients for DelaySdeNet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lags(&self) -> usize {
        self.lags
    }

    fn drift_into(&self, input: &[f64], out: &mut [f64]) {
        self.drift_at(input[0], &input[1..], out);
    }

    fn diffusion_into(&self, input: &[f64], out: &mut [f64]) {
        self.aleatoric_std_at(input[0], &input[1..], out);
        if self.sigma_e > 0.0 {
            let mut p = vec![0.0; self.dim];
            self.prob_at(input[0], &input[1..], &mut p);
            out.iter_mut().zip(&p).for_each(|(o, p)| *o += self.sigma_e * p);
        }
    }
}

#[cfg(test)]
mod tests;
