//! Comparison models: a VAR(p) fitted by least squares with a day-of-year
//! exponential residual variance, and the memoryless SDE-net.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Window};

/// Variance floor used when every residual on a day is zero.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Day of year `(k mod 365) + 1` of grid index `k`.
pub fn day_of_year(k: i64) -> f64 {
    (k.rem_euclid(365) + 1) as f64
}

/// `y = exp(a + b·x)` over day of year `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpVariance {
    pub a: f64,
    pub b: f64,
    /// Some daily mean squared residual was raised to [`VARIANCE_FLOOR`].
    #[serde(default)]
    pub floored: bool,
}

impl ExpVariance {
    pub fn at(&self, day: f64) -> f64 {
        (self.a + self.b * day).exp()
    }
}

/// Least squares of `ln(mean e² per day)` on the day.
pub fn fit_exp_variance(residuals: &[f64], days: &[f64]) -> Result<ExpVariance> {
    if residuals.len() != days.len() {
        return Err(Error::LengthMismatch { left: residuals.len(), right: days.len() });
    }
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("no residuals to fit".into()));
    }
    let mut per_day: Vec<(f64, f64, usize)> = Vec::new();
    for (e, x) in residuals.iter().zip(days) {
        match per_day.iter_mut().find(|d| d.0 == *x) {
            Some(d) => {
                d.1 += e * e;
                d.2 += 1;
            }
            None => per_day.push((*x, e * e, 1)),
        }
    }
    let mut floored = false;
    let points: Vec<(f64, f64)> = per_day
        .iter()
        .map(|(x, s, n)| {
            let y = s / *n as f64;
            if y < VARIANCE_FLOOR {
                floored = true;
            }
            (*x, y.max(VARIANCE_FLOOR).ln())
        })
        .collect();
    if floored {
        log::warn!("exponential variance fit: zero residual variance on some days, floored at {VARIANCE_FLOOR:e}");
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(ExpVariance { a: my - b * mx, b, floored })
}

/// `x_k = c + Σᵢ φᵢ x_{k-i} + e_k` with a residual variance per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarModel {
    pub order: usize,
    pub dim: usize,
    pub intercept: Vec<f64>,
    /// `φ₁..φ_p`, each `d×d` row-major; `φᵢ[j][l]` weighs coordinate `l` at lag `i` in equation `j`.
    pub coefficients: Vec<Vec<f64>>,
    pub variance: Vec<ExpVariance>,
    /// Standard errors of `φ₁..φ_p`, same layout.
    pub standard_errors: Vec<Vec<f64>>,
}

/// A fitted model with its in-sample residuals, one per row.
#[derive(Clone, Debug)]
pub struct VarFit {
    pub model: VarModel,
    pub residuals: Vec<Vec<f64>>,
    pub design: DMatrix<f64>,
}

/// Per-equation least squares on one-step rows whose `lags` hold the `p`
/// most recent states oldest first.
pub fn fit_var(rows: &[Window], dim: usize, p: usize) -> Result<VarFit> {
    if p == 0 || dim == 0 {
        return Err(Error::InvalidArgument("VAR needs positive order and dimension".into()));
    }
    let k = 1 + dim * p;
    if rows.len() <= dim * p + dim {
        return Err(Error::SingularDesign);
    }
    let mut x = DMatrix::zeros(rows.len(), k);
    let mut y = DMatrix::zeros(rows.len(), dim);
    for (r, w) in rows.iter().enumerate() {
        if w.lags.len() < dim * p || w.target.len() < dim {
            return Err(Error::DimensionMismatch { expected: dim * p, got: w.lags.len() });
        }
        let lags = &w.lags[w.lags.len() - dim * p..];
        x[(r, 0)] = 1.0;
        for i in 1..=p {
            let state = &lags[(p - i) * dim..(p - i + 1) * dim];
            for (l, v) in state.iter().enumerate() {
                x[(r, 1 + (i - 1) * dim + l)] = *v;
            }
        }
        for j in 0..dim {
            y[(r, j)] = w.target[j];
        }
    }
    let svd = x.clone().svd(true, true);
    let (smax, smin) = svd.singular_values.iter().fold((0.0f64, f64::INFINITY), |(a, b), s| (a.max(*s), b.min(*s)));
    if !(smin > smax * 1e-12) {
        return Err(Error::SingularDesign);
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| Error::SingularDesign)?;
    let fitted = &x * &beta;
    let resid = &y - fitted;
    let dof = (rows.len() - k) as f64;
    // diag((XᵀX)⁻¹) from the SVD: Σ_s (v_is / s_s)²
    let v_t = svd.v_t.as_ref().ok_or(Error::SingularDesign)?;
    let inv_diag: Vec<f64> =
        (0..k).map(|i| (0..k).map(|s| (v_t[(s, i)] / svd.singular_values[s]).powi(2)).sum()).collect();

    let intercept = (0..dim).map(|j| beta[(0, j)]).collect();
    let mut coefficients = vec![vec![0.0; dim * dim]; p];
    let mut standard_errors = vec![vec![0.0; dim * dim]; p];
    for j in 0..dim {
        let s2 = resid.column(j).iter().map(|e| e * e).sum::<f64>() / dof;
        for i in 0..p {
            for l in 0..dim {
                let row = 1 + i * dim + l;
                coefficients[i][j * dim + l] = beta[(row, j)];
                standard_errors[i][j * dim + l] = (s2 * inv_diag[row]).sqrt();
            }
        }
    }
    let days: Vec<f64> = rows.iter().map(|w| day_of_year(w.index + 1)).collect();
    let variance = (0..dim)
        .map(|j| fit_exp_variance(&resid.column(j).iter().copied().collect::<Vec<_>>(), &days))
        .collect::<Result<Vec<_>>>()?;
    let residuals = (0..rows.len()).map(|r| resid.row(r).iter().copied().collect()).collect();
    Ok(VarFit {
        model: VarModel { order: p, dim, intercept, coefficients, variance, standard_errors },
        residuals,
        design: x,
    })
}

/// Mean and accumulated variance of a VAR forecast.
#[derive(Clone, Debug, PartialEq)]
pub struct VarPrediction {
    pub dim: usize,
    /// Row-major over step then coordinate.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl VarPrediction {
    pub fn mean_at(&self, step: usize) -> &[f64] {
        &self.mean[(step - 1) * self.dim..step * self.dim]
    }

    pub fn variance_at(&self, step: usize) -> &[f64] {
        &self.variance[(step - 1) * self.dim..step * self.dim]
    }
}

impl VarModel {
    /// `c + Σᵢ φᵢ x_{k+1-i}` for a window oldest first.
    pub fn one_step(&self, window: &[f64], out: &mut [f64]) {
        let (d, p) = (self.dim, self.order);
        let w = &window[window.len() - d * p..];
        for j in 0..d {
            let mut v = self.intercept[j];
            for i in 1..=p {
                let state = &w[(p - i) * d..(p - i + 1) * d];
                v += self.coefficients[i - 1][j * d..(j + 1) * d].iter().zip(state).map(|(a, b)| a * b).sum::<f64>();
            }
            out[j] = v;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `steps`-ahead recursion from `history` (row-major, oldest first) whose
/// last state sits at grid index `last_index`. The variance after step `s`
/// sums the fitted daily variance over the predicted days.
pub fn var_predict(model: &VarModel, history: &[f64], last_index: i64, steps: usize) -> Result<VarPrediction> {
    let (d, p) = (model.dim, model.order);
    if history.len() < d * p || !history.len().is_multiple_of(d) {
        return Err(Error::InsufficientHistory { needed: p as i64, available: (history.len() / d) as i64 });
    }
    let mut window = history[history.len() - d * p..].to_vec();
    let mut mean = Vec::with_capacity(steps * d);
    let mut variance = Vec::with_capacity(steps * d);
    let mut acc = vec![0.0; d];
    let mut next = vec![0.0; d];
    for s in 1..=steps {
        model.one_step(&window, &mut next);
        mean.extend_from_slice(&next);
        window.drain(..d);
        window.extend_from_slice(&next);
        let day = day_of_year(last_index + s as i64);
        for (a, v) in acc.iter_mut().zip(&model.variance) {
            *a += v.at(day);
        }
        variance.extend_from_slice(&acc);
    }
    Ok(VarPrediction { dim: d, mean, variance })
}

/// The SDE-net configuration: the same pipeline restricted to the current state.
pub fn sde_net_baseline(cfg: &ModelConfig) -> ModelConfig {
    ModelConfig { lags: 1, ..cfg.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_windows, Split, SplitSpec};
    use crate::rng;
    use crate::sdde::{Path, TimeGrid};

    fn var1_paths(phi: [[f64; 2]; 2], c: [f64; 2], sd: f64, n: usize, seed: u64) -> Vec<Path> {
        let mut r = rng::stream(seed, 0);
        let mut x = [0.0, 0.0];
        let mut v = Vec::with_capacity(2 * n);
        for _ in 0..n {
            v.extend_from_slice(&x);
            let e = [sd * rng::standard_normal(&mut r), sd * rng::standard_normal(&mut r)];
            x = [
                c[0] + phi[0][0] * x[0] + phi[0][1] * x[1] + e[0],
                c[1] + phi[1][0] * x[0] + phi[1][1] * x[1] + e[1],
            ];
        }
        vec![Path::new(TimeGrid::from_counts(0.0, 1.0, 0, n - 1).unwrap(), 2, v).unwrap()]
    }

    fn rows(paths: &[Path], p: usize) -> Vec<Window> {
        build_windows(paths, p, 1, &SplitSpec::all_train().assign(paths.len()).unwrap()).unwrap().rows
    }

    #[test]
    fn recovers_var1_generator() {
        let phi = [[0.5, 0.2], [-0.3, 0.4]];
        let w = rows(&var1_paths(phi, [1.0, -0.5], 1e-3, 2000, 1), 1);
        let fit = fit_var(&w, 2, 1).unwrap();
        for j in 0..2 {
            for l in 0..2 {
                assert!((fit.model.coefficients[0][j * 2 + l] - phi[j][l]).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn white_noise_has_no_structure() {
        let w = rows(&var1_paths([[0.0; 2]; 2], [0.0; 2], 1.0, 3000, 2), 2);
        let fit = fit_var(&w, 2, 2).unwrap();
        for (c, se) in fit.model.coefficients.iter().flatten().zip(fit.model.standard_errors.iter().flatten()) {
            assert!(c.abs() < 3.0 * se, "{c} vs se {se}");
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let w = rows(&var1_paths([[0.9, 0.05], [0.1, 0.7]], [0.3, 0.1], 0.5, 500, 3), 3);
        let fit = fit_var(&w, 2, 3).unwrap();
        let e = DMatrix::from_fn(fit.residuals.len(), 2, |r, j| fit.residuals[r][j]);
        let xte = fit.design.transpose() * &e;
        let scale = fit.design.abs().max() * e.abs().max() * fit.residuals.len() as f64;
        assert!(xte.abs().max() <= 1e-8 * scale, "{}", xte.abs().max());
    }

    #[test]
    fn singular_design_is_rejected() {
        let p = Path::new(TimeGrid::from_counts(0.0, 1.0, 0, 99).unwrap(), 2, vec![1.0; 200]).unwrap();
        let w = rows(&[p], 1);
        assert!(matches!(fit_var(&w, 2, 1), Err(Error::SingularDesign)));
        assert!(matches!(fit_var(&w[..3], 2, 1), Err(Error::SingularDesign)));
    }

    fn manual_model() -> VarModel {
        VarModel {
            order: 2,
            dim: 2,
            intercept: vec![0.5, -1.0],
            coefficients: vec![vec![0.5, 0.1, -0.2, 0.3], vec![0.05, 0.0, 0.1, -0.1]],
            variance: vec![ExpVariance { a: 0.1, b: -0.01, floored: false }; 2],
            standard_errors: vec![vec![0.0; 4]; 2],
        }
    }

    #[test]
    fn one_step_matches_closed_form() {
        let m = manual_model();
        let hist = [1.0, 2.0, 3.0, 4.0];
        let pred = var_predict(&m, &hist, 9, 1).unwrap();
        // lag 1 is (3, 4), lag 2 is (1, 2)
        let x1 = 0.5 + (0.5 * 3.0 + 0.1 * 4.0) + (0.05 * 1.0 + 0.0 * 2.0);
        let x2 = -1.0 + (-0.2 * 3.0 + 0.3 * 4.0) + (0.1 * 1.0 - 0.1 * 2.0);
        assert_eq!(pred.mean, vec![x1, x2]);
        assert_eq!(pred.variance[0], (0.1f64 - 0.01 * 11.0).exp());
    }

    #[test]
    fn zero_coefficients_predict_intercept() {
        let mut m = manual_model();
        m.coefficients = vec![vec![0.0; 4]; 2];
        let pred = var_predict(&m, &[7.0, 8.0, 9.0, 10.0], 363, 3).unwrap();
        assert_eq!(pred.mean_at(3), &[0.5, -1.0]);
        // days 365, 1, 2
        let v = m.variance[0];
        assert_eq!(pred.variance_at(3)[0], v.at(365.0) + v.at(1.0) + v.at(2.0));
        assert!(matches!(var_predict(&m, &[1.0, 2.0], 0, 1), Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn exponential_variance_is_exact_on_noiseless_data() {
        let days: Vec<f64> = (1..=365).map(f64::from).collect();
        let e: Vec<f64> = days.iter().map(|x| (1.0 - 0.02 * x).exp().sqrt()).collect();
        let v = fit_exp_variance(&e, &days).unwrap();
        assert!((v.a - 1.0).abs() < 1e-9 && (v.b + 0.02).abs() < 1e-9, "{v:?}");
    }

    #[test]
    fn flat_and_zero_residuals() {
        let days: Vec<f64> = (0..730).map(day_of_year).collect();
        let e: Vec<f64> = (0..730).map(|k| if k % 2 == 0 { 0.7 } else { -0.7 }).collect();
        let v = fit_exp_variance(&e, &days).unwrap();
        assert!(v.b.abs() < 1e-12 && (v.a - 0.49f64.ln()).abs() < 1e-12);
        let z = fit_exp_variance(&vec![0.0; 730], &days).unwrap();
        assert!(z.floored && (z.a - VARIANCE_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn json_roundtrip() {
        let m = manual_model();
        assert_eq!(VarModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn sde_net_uses_single_lag() {
        let cfg = sde_net_baseline(&ModelConfig::default());
        assert_eq!(cfg.lags, 1);
        let p = Path::new(TimeGrid::from_counts(0.0, 1.0, 0, 9).unwrap(), 1, (0..10).map(f64::from).collect()).unwrap();
        let w = build_windows(&[p], 1, 1, &[Split::Train]).unwrap();
        assert_eq!(w.rows[3].lags, vec![3.0]);
    }
}
