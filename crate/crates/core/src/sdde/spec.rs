use serde::{Deserialize, Serialize};

use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::net::{Activation, TwoLayerNet};
use crate::rng;

/// What the diffusion coefficient is allowed to see.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionDependence {
    /// Time and the lag window of the initial segment ending at `t = 0`.
    #[default]
    InitialPath,
    /// Time only; the window input is zero.
    None,
}

/// Coefficients of a `d`-dimensional SDDE with `p` lags.
///
/// Coordinate `j` has drift `drift[j](t, window)` and diffusion
/// `diffusion[j](t, window)`, each a two-layer net on `[t, window]` where the
/// window holds the `p` most recent states, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SddeSpec {
    pub dim: usize,
    pub lags: usize,
    pub drift: Vec<TwoLayerNet>,
    pub diffusion: Vec<TwoLayerNet>,
    #[serde(default)]
    pub diffusion_dependence: DiffusionDependence,
}

impl SddeSpec {
    pub fn new(
        dim: usize,
        lags: usize,
        drift: Vec<TwoLayerNet>,
        diffusion: Vec<TwoLayerNet>,
        diffusion_dependence: DiffusionDependence,
    ) -> Result<Self> {
        let spec = SddeSpec { dim, lags, drift, diffusion, diffusion_dependence };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.lags == 0 {
            return Err(Error::InvalidArgument("dim and lags must be positive".into()));
        }
        for nets in [&self.drift, &self.diffusion] {
            if nets.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: nets.len() });
            }
            if let Some(n) = nets.iter().find(|n| n.input_dim() != self.input_dim()) {
                return Err(Error::DimensionMismatch { expected: self.input_dim(), got: n.input_dim() });
            }
        }
        Ok(())
    }

    /// `1 + d·p`: time followed by the flattened window.
    pub fn input_dim(&self) -> usize {
        1 + self.dim * self.lags
    }

    /// The two-dimensional, four-lag benchmark system with seasonal diffusion.
    ///
    /// Drift: `f^j = Σᵢ 5·tanh(α wᵢʲ·[t, window])`. Diffusion:
    /// `g¹ = 4·sigmoid(λ(-5t/365))`, `g² = sigmoid(λ(0.01·X²(t-4Δt) + 1))/8`.
    /// The drift weights carry a factor 10⁻² and are listed below
    /// most-recent-lag first with coordinates interleaved, then permuted into
    /// the oldest-first window layout.
    pub fn benchmark(alpha: f64, lambda: f64) -> Result<Self> {
        const DRIFT_ROWS: [[f64; 9]; 4] = [
            [0.0, 3.0, 2.0, 2.0, 5.0, -3.0, 1.0, -3.0, -1.0],
            [0.0, 1.0, 0.0, -0.5, 0.0, -1.0, 0.0, -0.5, 0.0],
            [0.0, 0.0, 2.0, 0.0, -3.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, -0.5, 0.0, 0.0, 0.0, -0.5],
        ];
        let (dim, lags) = (2, 4);
        let tanh = Activation::tanh(alpha)?;
        let sigmoid = Activation::sigmoid(lambda)?;
        let reorder = |row: &[f64; 9], scale: f64| -> Vec<f64> {
            let mut w = vec![0.0; 9];
            w[0] = row[0] * scale;
            for block in 0..lags {
                for j in 0..dim {
                    w[1 + (lags - 1 - block) * dim + j] = row[1 + block * dim + j] * scale;
                }
            }
            w
        };
        let drift = (0..dim)
            .map(|j| {
                let mut w = reorder(&DRIFT_ROWS[2 * j], 1e-2);
                w.extend(reorder(&DRIFT_ROWS[2 * j + 1], 1e-2));
                TwoLayerNet::new(tanh, 9, vec![5.0, 5.0], w, vec![0.0, 0.0], None)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g1 = [0.0; 9];
        g1[0] = -5.0 / 365.0;
        let mut g2 = [0.0; 9];
        g2[8] = 1.0;
        let diffusion = vec![
            TwoLayerNet::new(sigmoid, 9, vec![4.0], reorder(&g1, 1.0), vec![0.0], None)?,
            TwoLayerNet::new(sigmoid, 9, vec![0.125], reorder(&g2, 1e-2), vec![1.0], None)?,
        ];
        SddeSpec::new(dim, lags, drift, diffusion, DiffusionDependence::InitialPath)
    }

    /// The same system with every diffusion output multiplied by `factor`.
    pub fn with_diffusion_scale(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("diffusion factor must be positive, got {factor}")));
        }
        let mut spec = self.clone();
        spec.diffusion.iter_mut().for_each(|n| n.scale_output(factor));
        Ok(spec)
    }

    /// Drift at `input = [t, window]`.
    pub fn drift_into(&self, input: &[f64], out: &mut [f64]) {
        for (o, net) in out.iter_mut().zip(&self.drift) {
            *o = net.eval(input);
        }
    }

    /// Diffusion at `input = [t, window]`; the window is ignored when the
    /// diffusion is time-only.
    pub fn diffusion_into(&self, input: &[f64], out: &mut [f64]) {
        match self.diffusion_dependence {
            DiffusionDependence::InitialPath => {
                for (o, net) in out.iter_mut().zip(&self.diffusion) {
                    *o = net.eval(input);
                }
            }
            DiffusionDependence::None => {
                let mut x = vec![0.0; input.len()];
                x[0] = input[0];
                for (o, net) in out.iter_mut().zip(&self.diffusion) {
                    *o = net.eval(&x);
                }
            }
        }
    }
}

/// Drift and diffusion of a `d`-dimensional system on `p` lags, evaluated
/// at `[t, window]` with the window oldest first.
pub trait Coefficients: Sync {
    fn dim(&self) -> usize;
    fn lags(&self) -> usize;
    fn drift_into(&self, input: &[f64], out: &mut [f64]);
    fn diffusion_into(&self, input: &[f64], out: &mut [f64]);
}

impl Coefficients for SddeSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lags(&self) -> usize {
        self.lags
    }

    fn drift_into(&self, input: &[f64], out: &mut [f64]) {
        SddeSpec::drift_into(self, input, out)
    }

    fn diffusion_into(&self, input: &[f64], out: &mut [f64]) {
        SddeSpec::diffusion_into(self, input, out)
    }
}

/// Generator of initial segments on `k = -L..=0`.
pub trait InitialSegment: Sync {
    /// Returns `(L+1)·d` values, row-major over grid index then coordinate.
    fn sample(&self, grid: &TimeGrid, dim: usize, rng: &mut dyn rand::RngCore) -> Vec<f64>;
}

/// `η(t) = [sin(z₁t), cos(z₂t), sin(z₃t), …]` with `zⱼ ~ N(0,1)` drawn per path.
#[derive(Clone, Copy, Debug, Default)]
pub struct SinCosSegment;

impl InitialSegment for SinCosSegment {
    fn sample(&self, grid: &TimeGrid, dim: usize, mut rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let z: Vec<f64> = (0..dim).map(|_| rng::standard_normal(&mut rng)).collect();
        (grid.first_index()..=0)
            .flat_map(|k| {
                let t = grid.time(k);
                z.iter()
                    .enumerate()
                    .map(move |(j, zj)| if j % 2 == 0 { (zj * t).sin() } else { (zj * t).cos() })
            })
            .collect()
    }
}

/// `η(t) ≡ c`.
#[derive(Clone, Debug)]
pub struct ConstantSegment(pub Vec<f64>);

impl InitialSegment for ConstantSegment {
    fn sample(&self, grid: &TimeGrid, dim: usize, _rng: &mut dyn rand::RngCore) -> Vec<f64> {
        assert_eq!(self.0.len(), dim, "constant segment dimension");
        (0..=grid.lags).flat_map(|_| self.0.iter().copied()).collect()
    }
}

/// Uses the given values verbatim, e.g. from [`super::path::linearize_initial`].
#[derive(Clone, Debug)]
pub struct FixedSegment(pub Vec<f64>);

impl InitialSegment for FixedSegment {
    fn sample(&self, grid: &TimeGrid, dim: usize, _rng: &mut dyn rand::RngCore) -> Vec<f64> {
        assert_eq!(self.0.len(), (grid.lags + 1) * dim, "fixed segment length");
        self.0.clone()
    }
}
