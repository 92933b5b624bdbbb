use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_windows, fit, gaussian_quantile, ModelConfig, Split, SplitSpec};
use crate::sdde::{Path, TimeGrid};

use super::comparison::{tuned_model, ComparisonReport, HorizonTuning, ReportRow, DELAY_SDE_NET};
use super::metrics::rmse;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NstepConfig {
    /// Split over series; a single series is cut into consecutive blocks.
    pub split: SplitSpec,
    pub horizons: Vec<usize>,
    pub target: usize,
    pub model: ModelConfig,
    /// Per-horizon stage settings; entries for other nets are ignored.
    pub tuning: Vec<HorizonTuning>,
    pub ci_level: f64,
    /// Replaces the tuned `σₑ` in the plot output.
    pub sigma_e_override: Option<f64>,
}

impl Default for NstepConfig {
    fn default() -> Self {
        NstepConfig {
            split: SplitSpec { train: 0.75, validation: 0.0, test: 0.25 },
            horizons: (1..=7).collect(),
            target: 0,
            model: ModelConfig::default(),
            tuning: Vec::new(),
            ci_level: 0.95,
            sigma_e_override: None,
        }
    }
}

/// One row of prediction plot data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    /// Time of the predicted state.
    pub t: f64,
    pub truth: f64,
    pub mean: f64,
    pub std_a: f64,
    pub std_e: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub struct NstepReport {
    pub report: ComparisonReport,
    /// `(horizon, rows over every test window)`.
    pub plots: Vec<(usize, Vec<PlotRow>)>,
}

/// Cuts one series into consecutive blocks sized by `split`.
pub fn split_series(series: &Path, split: &SplitSpec) -> Result<(Vec<Path>, Vec<Split>)> {
    let n = series.grid().steps + 1;
    let (tr, va, te) = split.counts(n)?;
    let g = series.grid();
    let d = series.dim();
    let mut parts = Vec::new();
    let mut labels = Vec::new();
    let mut from = g.first_index();
    for (len, label) in [(tr + g.lags, Split::Train), (va, Split::Validation), (te, Split::Test)] {
        if len < 2 {
            from += len as i64;
            continue;
        }
        let grid = TimeGrid::from_counts(g.time(from), g.dt, 0, len - 1)?;
        parts.push(Path::new(grid, d, series.span(from, from + len as i64).to_vec())?);
        labels.push(label);
        from += len as i64;
    }
    Ok((parts, labels))
}

/// Trains one model per horizon on ingested series and scores value and
/// total-uncertainty RMSE on the test share, where the uncertainty score
/// compares `(ĝ_a + ĝ_e)²` with the squared residual.
pub fn run_nstep_eval(series: &[Path], cfg: &NstepConfig, seed: u64) -> Result<NstepReport> {
    cfg.model.validate()?;
    for t in &cfg.tuning {
        t.validate()?;
    }
    let first = series.first().ok_or_else(|| Error::InvalidArgument("no series to evaluate".into()))?;
    if cfg.target >= first.dim() {
        return Err(Error::MissingColumns(format!("value column {} of {}", cfg.target + 1, first.dim())));
    }
    let (paths, splits) = if series.len() == 1 { split_series(first, &cfg.split)? } else { (series.to_vec(), cfg.split.assign(series.len())?) };
    let z = gaussian_quantile(cfg.ci_level)?;
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for &n in &cfg.horizons {
        let mcfg = tuned_model(&cfg.model, &cfg.tuning, DELAY_SDE_NET, n);
        let w = build_windows(&paths, mcfg.lags, n, &splits)?;
        let mut model = fit(&w, &mcfg, seed)?;
        let test = w.split(Split::Test);
        if test.is_empty() {
            return Err(Error::Config("the split leaves no test windows".into()));
        }
        let preds = model.predict_rows(&test);
        let j = cfg.target;
        let at = (n - 1) * model.dim + j;
        let mean: Vec<f64> = preds.iter().map(|p| p.mean[at]).collect();
        let truth: Vec<f64> = test.iter().map(|r| r.target[j]).collect();
        let total_var: Vec<f64> = preds.iter().map(|p| p.total_std[at].powi(2)).collect();
        let sq_err: Vec<f64> = mean.iter().zip(&truth).map(|(m, t)| (m - t).powi(2)).collect();
        rows.push(ReportRow {
            horizon: n,
            model: DELAY_SDE_NET.to_string(),
            value_rmse: rmse(&mean, &truth)?,
            var_rmse: rmse(&total_var, &sq_err)?,
            rocauc: None,
        });

        if let Some(s) = cfg.sigma_e_override {
            model.sigma_e = s;
        }
        let preds = model.predict_rows(&test);
        let plot = preds
            .iter()
            .zip(&test)
            .map(|(p, r)| {
                let std_a = p.aleatoric_var[at].sqrt();
                let std_e = p.epistemic_std[j];
                let mean = p.mean[at];
                let half = z * (std_a + std_e);
                PlotRow { t: r.time + n as f64 * model.dt, truth: r.target[j], mean, std_a, std_e, ci_lo: mean - half, ci_hi: mean + half }
            })
            .collect();
        plots.push((n, plot));
    }
    Ok(NstepReport { report: ComparisonReport { rows }, plots })
}
