//! Out-of-distribution samples: soft Brownian offset, plain Gaussian offset,
//! amplified-diffusion simulation and interval injection into test paths.

pub mod neighbors;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::sdde::{simulate_paths, InitialSegment, Path, PathSet, SddeSpec, TimeGrid};

pub use neighbors::NearestNeighbors;

/// How the offset noise is applied to a window `[t, x_{k+1-p}, …, x_k]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SboMode {
    /// Independent noise on every lag entry.
    #[default]
    PerLagNoise,
    /// One `d`-vector of noise added to every lag.
    WholeWindowShift,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SboConfig {
    /// Minimum distance to the training set; derived from the data when absent.
    #[serde(default)]
    pub d_minus: Option<f64>,
    #[serde(default = "default_d_plus")]
    pub d_plus: f64,
    #[serde(default)]
    pub noise_mean: f64,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default)]
    pub mode: SboMode,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_d_plus() -> f64 {
    0.1
}

fn default_noise_std() -> f64 {
    1.0
}

fn default_max_iters() -> usize {
    10_000
}

impl Default for SboConfig {
    fn default() -> Self {
        SboConfig {
            d_minus: None,
            d_plus: default_d_plus(),
            noise_mean: 0.0,
            noise_std: default_noise_std(),
            mode: SboMode::default(),
            max_iters: default_max_iters(),
        }
    }
}

impl SboConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.d_minus {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("d_minus must be positive, got {d}")));
            }
        }
        if !(self.d_plus > 0.0 && self.d_plus.is_finite()) {
            return Err(Error::Config(format!("d_plus must be positive, got {}", self.d_plus)));
        }
        if !(self.noise_std >= 0.0 && self.noise_mean.is_finite()) {
            return Err(Error::Config("noise_std must be nonnegative and noise_mean finite".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of [`soft_brownian_offset`]; points that never reached the
/// distance within `max_iters` are dropped and counted.
#[derive(Clone, Debug, PartialEq)]
pub struct SboOutput {
    pub points: Vec<Vec<f64>>,
    pub d_minus: f64,
    pub failed: usize,
}

/// `√(d·p)` times the median nearest-neighbour distance of the training set,
/// estimated on at most 2000 evenly spaced points.
pub fn default_d_minus(train: &[Vec<f64>], dim: usize) -> f64 {
    let lags = (train[0].len() - 1) / dim;
    let nn = NearestNeighbors::new(train, train.len().min(2000));
    let stride = train.len().div_ceil(2000).max(1);
    let mut d: Vec<f64> = train
        .par_iter()
        .step_by(stride)
        .map(|x| nn.nearest(x, 2).get(1).copied().unwrap_or(0.0))
        .collect();
    d.sort_by(f64::total_cmp);
    let median = d[d.len() / 2];
    ((dim * lags) as f64).sqrt() * median.max(f64::MIN_POSITIVE)
}

/// Soft Brownian offset on windows laid out as `[t, lag block 1, …, lag block p]`
/// with blocks of `dim` entries.
///
/// Each output starts at a uniformly drawn training window and takes steps
/// `x̃ ← x̃ + d⁺·e`, `e ~ N(μ, σ)`, until its Euclidean distance to every
/// training window is at least `d⁻`. The time entry is never perturbed.
pub fn soft_brownian_offset(train: &[Vec<f64>], dim: usize, cfg: &SboConfig, n: usize, seed: u64) -> Result<SboOutput> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("soft Brownian offset needs training windows".into()));
    }
    let width = train[0].len();
    if dim == 0 || !(width - 1).is_multiple_of(dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: width - 1 });
    }
    let d_minus = cfg.d_minus.unwrap_or_else(|| default_d_minus(train, dim));
    let nn = NearestNeighbors::new(train, n.saturating_mul(8));
    let drawn: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, domain::SBO | i as u64);
            let mut x = train[r.random_range(0..train.len())].clone();
            let mut e = vec![0.0; width - 1];
            for _ in 0..cfg.max_iters {
                match cfg.mode {
                    SboMode::PerLagNoise => {
                        e.iter_mut().for_each(|v| *v = cfg.noise_mean + cfg.noise_std * rng::standard_normal(&mut r));
                    }
                    SboMode::WholeWindowShift => {
                        let shift: Vec<f64> =
                            (0..dim).map(|_| cfg.noise_mean + cfg.noise_std * rng::standard_normal(&mut r)).collect();
                        e.iter_mut().enumerate().for_each(|(l, v)| *v = shift[l % dim]);
                    }
                }
                for (xi, ei) in x[1..].iter_mut().zip(&e) {
                    *xi += cfg.d_plus * ei;
                }
                if nn.distance(&x) >= d_minus {
                    return Some(x);
                }
            }
            None
        })
        .collect();
    let failed = drawn.iter().filter(|p| p.is_none()).count();
    if failed > 0 {
        log::warn!("soft Brownian offset: {failed} of {n} points did not reach distance {d_minus} in {} steps", cfg.max_iters);
    }
    Ok(SboOutput { points: drawn.into_iter().flatten().collect(), d_minus, failed })
}

/// One-shot `x̃ = x + σ·ε` on the lag entries of uniformly resampled
/// training windows; no distance guarantee.
pub fn gaussian_offset(train: &[Vec<f64>], sigma: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    if train.is_empty() {
        return Vec::new();
    }
    (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, domain::GAUSSIAN_OFFSET | i as u64);
            let mut x = train[r.random_range(0..train.len())].clone();
            for v in &mut x[1..] {
                *v += sigma * rng::standard_normal(&mut r);
            }
            x
        })
        .collect()
}

/// Paths from the same system with every diffusion output multiplied by `factor`.
pub fn amplified_diffusion_paths(
    spec: &SddeSpec,
    eta: &dyn InitialSegment,
    factor: f64,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
) -> Result<PathSet> {
    simulate_paths(&spec.with_diffusion_scale(factor)?, eta, grid, n, seed)
}

/// Grid indices `start..=end` of test path `path` to overwrite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OodInterval {
    pub path: usize,
    pub start: i64,
    pub end: i64,
}

/// The ten intervals of the comparison protocol as `(test year, first day, last day)`,
/// with 1-based years.
pub const COMPARISON_INTERVALS: [(usize, i64, i64); 10] = [
    (1, 23, 25),
    (1, 313, 327),
    (3, 79, 91),
    (3, 344, 364),
    (4, 275, 294),
    (5, 67, 71),
    (8, 1, 5),
    (8, 190, 197),
    (9, 48, 52),
    (9, 323, 333),
];

/// Comparison intervals on `n_test` test paths; with fewer test paths than
/// listed years, the years wrap around.
pub fn comparison_intervals(n_test: usize) -> Vec<OodInterval> {
    COMPARISON_INTERVALS
        .iter()
        .map(|&(year, start, end)| OodInterval { path: (year - 1) % n_test.max(1), start, end })
        .collect()
}

/// Training envelope per grid index and coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeGuard {
    pub grid: TimeGrid,
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl RangeGuard {
    /// Min and max of the training paths at each grid index; paths must share a grid.
    pub fn from_paths(paths: &[Path]) -> Result<Self> {
        let first = paths.first().ok_or_else(|| Error::InvalidArgument("no training paths".into()))?;
        let (grid, dim) = (*first.grid(), first.dim());
        let mut lo = vec![f64::INFINITY; grid.len() * dim];
        let mut hi = vec![f64::NEG_INFINITY; grid.len() * dim];
        for p in paths {
            if p.grid() != &grid || p.dim() != dim {
                return Err(Error::InvalidArgument("range guard paths must share one grid".into()));
            }
            for (i, v) in p.values().iter().enumerate() {
                lo[i] = lo[i].min(*v);
                hi[i] = hi[i].max(*v);
            }
        }
        Ok(RangeGuard { grid, dim, lo, hi })
    }

    /// True when some replaced value in `start..=end` lies outside the envelope.
    pub fn admits(&self, source: &Path, start: i64, end: i64) -> bool {
        (start..=end).any(|k| {
            let at = self.grid.offset(k) * self.dim;
            source.at(k).iter().enumerate().any(|(j, v)| *v < self.lo[at + j] || *v > self.hi[at + j])
        })
    }
}

/// Test paths with OOD intervals spliced in, and which grid points were replaced.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectedPaths {
    pub paths: Vec<Path>,
    /// Per path, one flag per grid index.
    pub mask: Vec<Vec<bool>>,
    /// Source path used for each interval.
    pub sources: Vec<usize>,
}

impl InjectedPaths {
    /// Fraction of replaced grid points over `t > 0`.
    pub fn point_contamination(&self) -> f64 {
        let (hits, total) = self.paths.iter().zip(&self.mask).fold((0, 0), |(h, t), (p, m)| {
            let from = p.grid().offset(1);
            (h + m[from..].iter().filter(|b| **b).count(), t + m.len() - from)
        });
        hits as f64 / total.max(1) as f64
    }

    /// OOD label of a window: any of its `p` lag points was replaced.
    pub fn window_label(&self, path: usize, index: i64, lags: usize) -> bool {
        let g = self.paths[path].grid();
        (index + 1 - lags as i64..=index).any(|k| self.mask[path][g.offset(k)])
    }
}

/// Overwrites each interval of the test paths with values from a candidate
/// OOD path whose values there pass the range guard.
///
/// Candidates are tried in order from a seeded starting point; an interval
/// for which no candidate passes fails with [`Error::GuardUnsatisfiable`].
pub fn inject_ood_intervals(
    test: &[Path],
    candidates: &[Path],
    intervals: &[OodInterval],
    guard: Option<&RangeGuard>,
    seed: u64,
) -> Result<InjectedPaths> {
    let mut paths = test.to_vec();
    let mut mask: Vec<Vec<bool>> = test.iter().map(|p| vec![false; p.grid().len()]).collect();
    let mut sources = Vec::with_capacity(intervals.len());
    for (n, iv) in intervals.iter().enumerate() {
        let target = paths.get(iv.path).ok_or_else(|| {
            Error::InvalidArgument(format!("interval refers to test path {} of {}", iv.path + 1, test.len()))
        })?;
        let g = *target.grid();
        if iv.start > iv.end || !g.contains(iv.start) || !g.contains(iv.end) {
            return Err(Error::InvalidArgument(format!("interval {}..={} outside the test grid", iv.start, iv.end)));
        }
        if candidates.is_empty() {
            return Err(Error::GuardUnsatisfiable { retries: 0 });
        }
        let offset = rng::stream(seed, domain::INJECT | n as u64).random_range(0..candidates.len());
        let pick = (0..candidates.len())
            .map(|a| (offset + a) % candidates.len())
            .find(|&c| {
                candidates[c].grid() == &g && guard.is_none_or(|gd| gd.admits(&candidates[c], iv.start, iv.end))
            })
            .ok_or(Error::GuardUnsatisfiable { retries: candidates.len() })?;
        let d = target.dim();
        let mut values = target.values().to_vec();
        for k in iv.start..=iv.end {
            let at = g.offset(k);
            values[at * d..(at + 1) * d].copy_from_slice(candidates[pick].at(k));
            mask[iv.path][at] = true;
        }
        paths[iv.path] = Path::new(g, d, values)?;
        sources.push(pick);
    }
    Ok(InjectedPaths { paths, mask, sources })
}
