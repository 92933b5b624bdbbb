use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::path_norm;
use crate::rng::{self, domain};
use crate::sdde::{Coefficients, SddeSpec};

/// Inputs of the model error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    /// Time horizon `T`.
    pub horizon: f64,
    pub lags: usize,
    /// Hidden width `m`.
    pub width: usize,
    /// Lipschitz constant of the generating coefficients.
    pub lipschitz: f64,
    /// Squared approximation error of the coefficients on the bounded domain.
    pub approx: f64,
    /// Probability mass outside the bounded domain.
    pub eps_f: f64,
    /// Bound on the squared epistemic diffusion.
    pub c_ge: f64,
    pub c_f: f64,
    pub c_g: f64,
    pub c_sigma: f64,
    /// Time-discretization order.
    pub gamma: f64,
    #[serde(default = "one")]
    pub c_t: f64,
}

fn one() -> f64 {
    1.0
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            self.horizon,
            self.lipschitz,
            self.approx,
            self.eps_f,
            self.c_ge,
            self.c_f,
            self.c_g,
            self.c_sigma,
            self.gamma,
            self.c_t,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("bound constants must be finite and nonnegative".into()));
        }
        if self.eps_f > 1.0 {
            return Err(Error::InvalidArgument(format!("eps_f = {} is not a probability", self.eps_f)));
        }
        if self.width == 0 {
            return Err(Error::InvalidArgument("width must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(C_m, C_T^{1/2}·Δt^γ + C_m)` with
/// `C_m² = 4T(C_ge + 2C_Bε_F + (3C_σ/m)(2C_g + T·C_f))·exp(2pC_L(4+2T)T)`.
pub fn theoretical_bound(c: &BoundConstants, dt: f64) -> Result<(f64, f64)> {
    c.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let t = c.horizon;
    let barron = 3.0 * c.c_sigma / c.width as f64 * (2.0 * c.c_g + t * c.c_f);
    let growth = (2.0 * c.lags as f64 * c.lipschitz * (4.0 + 2.0 * t) * t).exp();
    let c_m = (4.0 * t * (c.c_ge + 2.0 * c.approx * c.eps_f + barron) * growth).sqrt();
    Ok((c_m, c.c_t.sqrt() * dt.powf(c.gamma) + c_m))
}

/// `(C_f, C_g)`: sums over coordinates of squared path norms of the generator.
pub fn barron_norms(spec: &SddeSpec) -> (f64, f64) {
    let sq = |nets: &[crate::net::TwoLayerNet]| nets.iter().map(|n| path_norm(n).powi(2)).sum();
    (sq(&spec.drift), sq(&spec.diffusion))
}

fn sample_box(lo: &[f64], hi: &[f64], r: &mut impl Rng) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| if b > a { r.random_range(*a..*b) } else { *a }).collect()
}

fn coefficients(c: &dyn Coefficients, x: &[f64]) -> Vec<f64> {
    let d = c.dim();
    let mut out = vec![0.0; 2 * d];
    let (f, g) = out.split_at_mut(d);
    c.drift_into(x, f);
    c.diffusion_into(x, g);
    out
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest `‖h(x) − h(y)‖ / ‖x − y‖` over `pairs` uniform pairs from the box
/// `[lo, hi]` of inputs `[t, window]`, with `h = (f, g)`.
pub fn estimate_lipschitz(c: &dyn Coefficients, lo: &[f64], hi: &[f64], pairs: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, domain::BOUND_SAMPLES);
    (0..pairs).fold(0.0, |best, _| {
        let x = sample_box(lo, hi, &mut r);
        let y = sample_box(lo, hi, &mut r);
        let dx = norm(x.iter().zip(&y).map(|(a, b)| a - b));
        if dx == 0.0 {
            return best;
        }
        let (hx, hy) = (coefficients(c, &x), coefficients(c, &y));
        best.max(norm(hx.iter().zip(&hy).map(|(a, b)| a - b)) / dx)
    })
}

/// Largest of `‖f_m − f‖²` and `‖g_m − g‖²` over `samples` uniform points of the box.
pub fn estimate_approximation(
    truth: &dyn Coefficients,
    model: &dyn Coefficients,
    lo: &[f64],
    hi: &[f64],
    samples: usize,
    seed: u64,
) -> f64 {
    let d = truth.dim();
    let mut r = rng::stream(seed, domain::BOUND_SAMPLES | 1);
    (0..samples).fold(0.0, |best, _| {
        let x = sample_box(lo, hi, &mut r);
        let (a, b) = (coefficients(truth, &x), coefficients(model, &x));
        let df: f64 = (0..d).map(|j| (a[j] - b[j]).powi(2)).sum();
        let dg: f64 = (d..2 * d).map(|j| (a[j] - b[j]).powi(2)).sum();
        best.max(df).max(dg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(width: usize) -> BoundConstants {
        BoundConstants {
            horizon: 5.0,
            lags: 4,
            width,
            lipschitz: 0.01,
            approx: 0.3,
            eps_f: 0.0,
            c_ge: 0.0,
            c_f: 2.0,
            c_g: 1.5,
            c_sigma: 25.0,
            gamma: 0.5,
            c_t: 1.0,
        }
    }

    #[test]
    fn doubling_width_divides_by_root_two() {
        let (a, _) = theoretical_bound(&consts(16), 0.1).unwrap();
        let (b, _) = theoretical_bound(&consts(32), 0.1).unwrap();
        assert!((a / b - 2f64.sqrt()).abs() < 1e-12);
        let (c, _) = theoretical_bound(&consts(1 << 40), 0.1).unwrap();
        assert!(c < a * 1e-5);
    }

    #[test]
    fn total_increases_with_dt() {
        let c = consts(8);
        let totals: Vec<f64> = [0.01, 0.1, 0.5, 1.0, 5.0].iter().map(|dt| theoretical_bound(&c, *dt).unwrap().1).collect();
        assert!(totals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_constants() {
        let mut c = consts(4);
        c.eps_f = 1.5;
        assert!(theoretical_bound(&c, 1.0).is_err());
        let mut c = consts(4);
        c.width = 0;
        assert!(theoretical_bound(&c, 1.0).is_err());
        assert!(theoretical_bound(&consts(4), 0.0).is_err());
    }

    #[test]
    fn lipschitz_of_benchmark_is_small_and_self_error_zero() {
        let spec = SddeSpec::benchmark(1.0, 1.0).unwrap();
        let lo = vec![0.0; 9];
        let mut hi = vec![5.0; 9];
        hi[0] = 365.0;
        let l = estimate_lipschitz(&spec, &lo, &hi, 2000, 1);
        // per coordinate L ≤ Σ|a|·‖w‖·sup σ': 0.47, 0.25, 0.014, 0.0003 in root-sum-square
        assert!(l > 0.0 && l < 0.54, "{l}");
        assert_eq!(estimate_approximation(&spec, &spec, &lo, &hi, 100, 1), 0.0);
    }

    #[test]
    fn benchmark_norms() {
        let spec = SddeSpec::benchmark(1.0, 1.0).unwrap();
        let (_, cg) = barron_norms(&spec);
        let g1 = 4.0 * (5.0 / 365.0 + 1.0);
        assert!((cg - g1 * g1 - 0.25125f64.powi(2)).abs() < 1e-12);
    }
}
