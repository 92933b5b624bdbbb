use serde::{Deserialize, Serialize};

use crate::baselines::{fit_var, sde_net_baseline, var_predict};
use crate::error::{Error, Result};
use crate::model::{build_windows, fit, DelaySdeNet, ModelConfig, Split, SplitSpec, Window, WindowSet};
use crate::net::SgdConfig;
use crate::ood::{amplified_diffusion_paths, comparison_intervals, inject_ood_intervals, InjectedPaths, RangeGuard};
use crate::sdde::{make_time_grid, simulate_paths, Path, SddeSpec, SinCosSegment};

use super::metrics::{rmse, rocauc};

pub const DELAY_SDE_NET: &str = "delay_sde_net";
pub const SDE_NET: &str = "sde_net";
pub const VAR: &str = "var";

/// Seed offset of the amplified-noise candidate paths.
const OOD_SEED_OFFSET: u64 = 0x00d0_0000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OodConfig {
    /// Diffusion multiplier of the candidate paths.
    pub factor: f64,
    /// Candidate paths simulated with amplified noise.
    pub candidates: usize,
    /// Require replaced values to leave the training envelope.
    pub range_guard: bool,
}

impl Default for OodConfig {
    fn default() -> Self {
        OodConfig { factor: 2.5, candidates: 20, range_guard: true }
    }
}

/// Stage settings replacing the base model's for one horizon of one net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonTuning {
    pub horizon: usize,
    /// [`DELAY_SDE_NET`] or [`SDE_NET`].
    pub model: String,
    #[serde(default)]
    pub drift: Option<SgdConfig>,
    #[serde(default)]
    pub aleatoric: Option<SgdConfig>,
    #[serde(default)]
    pub epistemic: Option<SgdConfig>,
}

impl HorizonTuning {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("tuning horizons must be positive".into()));
        }
        if self.model != DELAY_SDE_NET && self.model != SDE_NET {
            return Err(Error::Config(format!("tuning model must be `{DELAY_SDE_NET}` or `{SDE_NET}`, got `{}`", self.model)));
        }
        for c in [&self.drift, &self.aleatoric, &self.epistemic].into_iter().flatten() {
            c.validate()?;
        }
        Ok(())
    }
}

/// `base` with every entry of `tuning` for `(model, horizon)` applied in order.
pub fn tuned_model(base: &ModelConfig, tuning: &[HorizonTuning], model: &str, horizon: usize) -> ModelConfig {
    let mut m = ModelConfig { horizon, ..base.clone() };
    for t in tuning.iter().filter(|t| t.horizon == horizon && t.model == model) {
        if let Some(c) = &t.drift {
            m.drift = c.clone();
        }
        if let Some(c) = &t.aleatoric {
            m.aleatoric = c.clone();
        }
        if let Some(c) = &t.epistemic {
            m.epistemic = c.clone();
        }
    }
    m
}

/// Default model of the comparison: SBO windows at least 1.2 from the
/// standardized training windows.
pub fn comparison_model() -> ModelConfig {
    let mut m = ModelConfig::default();
    m.sbo.d_minus = Some(1.2);
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparisonConfig {
    /// Simulated years, one path each.
    pub years: usize,
    pub days: usize,
    pub tau: f64,
    pub split: SplitSpec,
    pub horizons: Vec<usize>,
    /// Coordinate whose value and variance are scored.
    pub target: usize,
    pub model: ModelConfig,
    /// Per-horizon stage settings for either net.
    pub tuning: Vec<HorizonTuning>,
    pub sde_net: bool,
    /// VAR order; no VAR when absent.
    pub var_order: Option<usize>,
    /// OOD contamination of the test years; no ROCAUC when absent.
    pub ood: Option<OodConfig>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            years: 110,
            days: 365,
            tau: 3.0,
            split: SplitSpec { train: 90.0, validation: 10.0, test: 10.0 },
            horizons: (1..=7).collect(),
            target: 0,
            model: comparison_model(),
            tuning: Vec::new(),
            sde_net: true,
            var_order: Some(4),
            ood: Some(OodConfig::default()),
        }
    }
}

impl ComparisonConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for t in &self.tuning {
            t.validate()?;
        }
        if self.years < 3 || self.days < 2 {
            return Err(Error::Config("need at least three years of at least two days".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("horizons must be strictly increasing".into()));
        }
        if let Some(o) = &self.ood {
            if !(o.factor > 0.0) || o.candidates == 0 {
                return Err(Error::Config("OOD factor and candidate count must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One line of a comparison report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub horizon: usize,
    pub model: String,
    pub value_rmse: f64,
    pub var_rmse: f64,
    pub rocauc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
}

impl ComparisonReport {
    pub fn get(&self, model: &str, horizon: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model && r.horizon == horizon)
    }

    pub fn has_rocauc(&self) -> bool {
        self.rows.iter().any(|r| r.rocauc.is_some())
    }
}

/// Simulated years, their split, and the contaminated test years.
pub struct ComparisonData {
    pub paths: Vec<Path>,
    pub splits: Vec<Split>,
    pub contaminated: Option<InjectedPaths>,
}

impl ComparisonData {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.paths.len()).filter(|&i| self.splits[i] == split).collect()
    }
}

/// Simulates the years and splices amplified-noise intervals into the test years.
pub fn comparison_data(spec: &SddeSpec, cfg: &ComparisonConfig, seed: u64) -> Result<ComparisonData> {
    cfg.validate()?;
    let grid = make_time_grid(cfg.tau, cfg.days as f64, 1.0)?;
    let paths = simulate_paths(spec, &SinCosSegment, &grid, cfg.years, seed)?.paths;
    let splits = cfg.split.assign(paths.len())?;
    let contaminated = match &cfg.ood {
        None => None,
        Some(o) => {
            let pick = |s: Split| -> Vec<Path> {
                paths.iter().zip(&splits).filter(|(_, x)| **x == s).map(|(p, _)| p.clone()).collect()
            };
            let (train, test) = (pick(Split::Train), pick(Split::Test));
            if test.is_empty() {
                return Err(Error::Config("OOD contamination needs at least one test year".into()));
            }
            let candidates =
                amplified_diffusion_paths(spec, &SinCosSegment, o.factor, &grid, o.candidates, seed ^ OOD_SEED_OFFSET)?;
            let guard = if o.range_guard { Some(RangeGuard::from_paths(&train)?) } else { None };
            let injected = inject_ood_intervals(
                &test,
                &candidates.paths,
                &comparison_intervals(test.len()),
                guard.as_ref(),
                seed,
            )?;
            log::info!("OOD contamination: {:.2}% of test points", 100.0 * injected.point_contamination());
            Some(injected)
        }
    };
    Ok(ComparisonData { paths, splits, contaminated })
}

/// `Σ_{s<N} g_j(t_k + s, window₀)²` from the generating system, per coordinate.
fn true_variance(spec: &SddeSpec, path: &Path, w: &Window, horizon: usize, dt: f64) -> Vec<f64> {
    let mut input = vec![0.0; spec.input_dim()];
    input[1..].copy_from_slice(path.span(1 - spec.lags as i64, 1));
    let mut g = vec![0.0; spec.dim];
    let mut acc = vec![0.0; spec.dim];
    for s in 0..horizon {
        input[0] = w.time + s as f64 * dt;
        spec.diffusion_into(&input, &mut g);
        for (a, v) in acc.iter_mut().zip(&g) {
            *a += v * v * dt;
        }
    }
    acc
}

/// Value and aleatoric-variance RMSE of a fitted model on test rows.
fn score_model(
    model: &DelaySdeNet,
    test: &[Window],
    truth_var: &dyn Fn(&Window) -> Vec<f64>,
    target: usize,
) -> Result<(f64, f64)> {
    let preds = model.predict_rows(test);
    let n = model.horizon;
    let mean: Vec<f64> = preds.iter().map(|p| p.mean_at(n)[target]).collect();
    let truth: Vec<f64> = test.iter().map(|w| w.target[target]).collect();
    let var: Vec<f64> = preds.iter().map(|p| p.aleatoric_var[(n - 1) * p.dim + target]).collect();
    let true_var: Vec<f64> = test.iter().map(|w| truth_var(w)[target]).collect();
    Ok((rmse(&mean, &truth)?, rmse(&var, &true_var)?))
}

/// ROCAUC of the model's classifier on every window of the contaminated years.
pub fn contaminated_rocauc(model: &DelaySdeNet, injected: &InjectedPaths) -> Result<f64> {
    let splits = vec![Split::Test; injected.paths.len()];
    let w = build_windows(&injected.paths, model.lags, 1, &splits)?;
    let labels: Vec<bool> = w.rows.iter().map(|r| injected.window_label(r.path, r.index, model.lags)).collect();
    rocauc(&model.ood_scores(&w.rows), &labels)
}

fn windows_for(data: &ComparisonData, lags: usize, horizon: usize) -> Result<WindowSet> {
    build_windows(&data.paths, lags, horizon, &data.splits)
}

/// Trains the Delay-SDE-net, the SDE-net and a VAR per horizon and scores
/// them on the test years; classifiers are scored on the contaminated years.
pub fn run_comparison(spec: &SddeSpec, cfg: &ComparisonConfig, seed: u64) -> Result<ComparisonReport> {
    let data = comparison_data(spec, cfg, seed)?;
    run_comparison_on(spec, cfg, &data, seed)
}

/// [`run_comparison`] on already simulated data.
pub fn run_comparison_on(spec: &SddeSpec, cfg: &ComparisonConfig, data: &ComparisonData, seed: u64) -> Result<ComparisonReport> {
    cfg.validate()?;
    if cfg.target >= spec.dim {
        return Err(Error::Config(format!("target coordinate {} of a {}-dimensional system", cfg.target, spec.dim)));
    }
    let dt = data.paths[0].grid().dt;
    let truth_var = |n: usize| {
        move |w: &Window| true_variance(spec, &data.paths[w.path], w, n, dt)
    };
    let mut nets = vec![(DELAY_SDE_NET, cfg.model.clone())];
    if cfg.sde_net {
        nets.push((SDE_NET, sde_net_baseline(&cfg.model)));
    }
    let mut rows = Vec::new();
    for &n in &cfg.horizons {
        for (name, base) in &nets {
            let mut mcfg = tuned_model(base, &cfg.tuning, name, n);
            mcfg.train_epistemic = base.train_epistemic && cfg.ood.is_some();
            let w = windows_for(data, mcfg.lags, n)?;
            log::info!("{name}, horizon {n}: training on {} windows", w.count(Split::Train));
            let model = fit(&w, &mcfg, seed)?;
            let (value_rmse, var_rmse) = score_model(&model, &w.split(Split::Test), &truth_var(n), cfg.target)?;
            let auc = match (&data.contaminated, model.epistemic.is_empty()) {
                (Some(inj), false) => Some(contaminated_rocauc(&model, inj)?),
                _ => None,
            };
            rows.push(ReportRow { horizon: n, model: name.to_string(), value_rmse, var_rmse, rocauc: auc });
        }
        if let Some(p) = cfg.var_order {
            let w = windows_for(data, p, n)?;
            let train = windows_for(data, p, 1)?.split(Split::Train);
            let var = fit_var(&train, spec.dim, p)?.model;
            let test = w.split(Split::Test);
            let (mut mean, mut truth, mut var_hat, mut var_true) = (vec![], vec![], vec![], vec![]);
            for r in &test {
                let pred = var_predict(&var, &r.lags, r.index, n)?;
                mean.push(pred.mean_at(n)[cfg.target]);
                truth.push(r.target[cfg.target]);
                var_hat.push(pred.variance_at(n)[cfg.target]);
                var_true.push(truth_var(n)(r)[cfg.target]);
            }
            rows.push(ReportRow {
                horizon: n,
                model: VAR.to_string(),
                value_rmse: rmse(&mean, &truth)?,
                var_rmse: rmse(&var_hat, &var_true)?,
                rocauc: None,
            });
        }
    }
    Ok(ComparisonReport { rows })
}
