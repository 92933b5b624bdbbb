use rayon::prelude::*;

use super::brownian::{sample_brownian_stream, BrownianIncrements};
use super::grid::TimeGrid;
use super::path::{Path, PathSet};
use super::spec::{Coefficients, InitialSegment, SddeSpec};
use crate::error::{Error, Result};
use crate::rng::{self, domain};

pub const DEFAULT_BLOWUP_CAP: f64 = 1e12;

/// Simulates `n` paths with the default blow-up cap.
pub fn simulate_paths(
    spec: &SddeSpec,
    eta: &dyn InitialSegment,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
) -> Result<PathSet> {
    simulate_paths_capped(spec, eta, grid, n, seed, DEFAULT_BLOWUP_CAP)
}

/// Euler–Maruyama for every path in parallel.
///
/// Path `i` draws its initial segment and its Brownian increments from
/// substreams `i` of the seed, so [`path_increments`] recovers the exact
/// noise a path was driven by.
pub fn simulate_paths_capped(
    spec: &SddeSpec,
    eta: &dyn InitialSegment,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
    cap: f64,
) -> Result<PathSet> {
    spec.validate()?;
    check_history(spec.lags, grid)?;
    let paths = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, domain::INITIAL_PATH | i as u64);
            let initial = eta.sample(grid, spec.dim, &mut r);
            let inc = sample_brownian_stream(grid, spec.dim, seed, i as u64);
            simulate_path(spec, &initial, grid, &inc, cap).map_err(|e| match e {
                Error::NumericalBlowup { step, value, cap, .. } => Error::NumericalBlowup { path: i, step, value, cap },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathSet { grid: *grid, dim: spec.dim, seed, paths })
}

/// The increments that drove path `i` of [`simulate_paths`].
pub fn path_increments(set: &PathSet, i: usize) -> BrownianIncrements {
    sample_brownian_stream(&set.grid, set.dim, set.seed, i as u64)
}

fn check_history(lags: usize, grid: &TimeGrid) -> Result<()> {
    if lags == 0 {
        return Err(Error::InvalidArgument("lags must be positive".into()));
    }
    if lags > grid.lags + 1 {
        return Err(Error::InsufficientHistory { needed: 1 - lags as i64, available: grid.first_index() });
    }
    Ok(())
}

/// One path driven by given increments.
///
/// `X(t_{k+1}) = X(t_k) + f(t_k, window_k)Δt + g(t_k, window_0)ΔW_{k+1}`, where
/// `window_k` holds the `p` states up to and including `X(t_k)`.
pub fn simulate_path<C: Coefficients + ?Sized>(
    coefficients: &C,
    initial: &[f64],
    grid: &TimeGrid,
    increments: &BrownianIncrements,
    cap: f64,
) -> Result<Path> {
    let d = coefficients.dim();
    let p = coefficients.lags();
    check_history(p, grid)?;
    if initial.len() != (grid.lags + 1) * d {
        return Err(Error::DimensionMismatch { expected: (grid.lags + 1) * d, got: initial.len() });
    }
    if increments.dim != d || increments.steps() != grid.steps {
        return Err(Error::DimensionMismatch { expected: grid.steps * d, got: increments.increments.len() });
    }
    let mut values = Vec::with_capacity(grid.len() * d);
    values.extend_from_slice(initial);

    let window_start = |k: usize| (grid.lags + k + 1 - p) * d;
    let mut diff_input = vec![0.0; 1 + d * p];
    diff_input[1..].copy_from_slice(&values[window_start(0)..window_start(0) + d * p]);
    let mut input = vec![0.0; 1 + d * p];
    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    for k in 0..grid.steps {
        let t = grid.time(k as i64);
        let w0 = window_start(k);
        input[0] = t;
        input[1..].copy_from_slice(&values[w0..w0 + d * p]);
        coefficients.drift_into(&input, &mut f);
        diff_input[0] = t;
        coefficients.diffusion_into(&diff_input, &mut g);
        let dw = increments.step(k + 1);
        let cur = (grid.lags + k) * d;
        for j in 0..d {
            let next = values[cur + j] + f[j] * grid.dt + g[j] * dw[j];
            if !(next.abs() <= cap) {
                return Err(Error::NumericalBlowup { path: 0, step: k + 1, value: next, cap });
            }
            values.push(next);
        }
    }
    Ok(Path::from_raw(*grid, d, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, TwoLayerNet};
    use crate::sdde::brownian::aggregate_increments;
    use crate::sdde::grid::make_time_grid;
    use crate::sdde::spec::{ConstantSegment, DiffusionDependence, SinCosSegment};

    /// `f ≡ c_f`, `g ≡ c_g` through a relu unit on a constant-one bias.
    fn constant_spec(dim: usize, lags: usize, cf: f64, cg: f64) -> SddeSpec {
        let n = 1 + dim * lags;
        let net = |c: f64| TwoLayerNet::new(Activation::Relu, n, vec![c], vec![0.0; n], vec![1.0], None).unwrap();
        SddeSpec::new(dim, lags, vec![net(cf); dim], vec![net(cg); dim], DiffusionDependence::InitialPath).unwrap()
    }

    #[test]
    fn frozen_dynamics() {
        let spec = constant_spec(2, 3, 0.0, 0.0);
        let grid = make_time_grid(3.0, 10.0, 1.0).unwrap();
        let set = simulate_paths(&spec, &ConstantSegment(vec![1.5, -2.0]), &grid, 3, 9).unwrap();
        for p in &set.paths {
            assert!(p.values().chunks(2).all(|x| x == [1.5, -2.0]));
        }
    }

    #[test]
    fn deterministic_euler() {
        let spec = constant_spec(1, 1, 1.0, 0.0);
        let grid = make_time_grid(0.0, 1.0, 0.5).unwrap();
        let set = simulate_paths(&spec, &ConstantSegment(vec![0.0]), &grid, 1, 0).unwrap();
        assert_eq!(set.paths[0].at(2), &[1.0]);
    }

    #[test]
    fn linear_drift_matches_recursion() {
        // f(x) = a·relu(x) with x > 0 stays linear
        let net = TwoLayerNet::new(Activation::Relu, 2, vec![-0.3], vec![0.0, 1.0], vec![0.0], None).unwrap();
        let zero = TwoLayerNet::new(Activation::Relu, 2, vec![0.0], vec![0.0, 0.0], vec![0.0], None).unwrap();
        let spec = SddeSpec::new(1, 1, vec![net], vec![zero], DiffusionDependence::InitialPath).unwrap();
        let grid = make_time_grid(0.0, 2.0, 0.1).unwrap();
        let set = simulate_paths(&spec, &ConstantSegment(vec![2.0]), &grid, 1, 0).unwrap();
        let mut x = 2.0f64;
        for k in 1..=20 {
            x += -0.3 * x * 0.1;
            assert_eq!(set.paths[0].at(k)[0], x);
        }
    }

    #[test]
    fn reproducible_and_recoverable_noise() {
        let spec = SddeSpec::benchmark(1.0, 1.0).unwrap();
        let grid = make_time_grid(4.0, 30.0, 1.0).unwrap();
        let a = simulate_paths(&spec, &SinCosSegment, &grid, 4, 11).unwrap();
        let b = simulate_paths(&spec, &SinCosSegment, &grid, 4, 11).unwrap();
        assert_eq!(a, b);
        let initial = a.paths[2].span(-4, 1).to_vec();
        let again = simulate_path(&spec, &initial, &grid, &path_increments(&a, 2), DEFAULT_BLOWUP_CAP).unwrap();
        assert_eq!(again, a.paths[2]);
    }

    #[test]
    fn coarse_run_reuses_fine_brownian_path() {
        let grid = make_time_grid(15.0, 5.0, 0.01).unwrap();
        let fine = sample_brownian_stream(&grid, 2, 3, 0);
        for kappa in [5, 10, 50, 100, 500] {
            let coarse = aggregate_increments(&fine, kappa).unwrap();
            let mut w_fine = [0.0; 2];
            let mut w_coarse = [0.0; 2];
            for k in 1..=grid.steps {
                for j in 0..2 {
                    w_fine[j] += fine.step(k)[j];
                }
                if k % kappa == 0 {
                    for j in 0..2 {
                        w_coarse[j] += coarse.step(k / kappa)[j];
                        assert!((w_coarse[j] - w_fine[j]).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn blowup_is_reported() {
        let spec = constant_spec(1, 1, 1e6, 0.0);
        let grid = make_time_grid(0.0, 10.0, 1.0).unwrap();
        let r = simulate_paths_capped(&spec, &ConstantSegment(vec![0.0]), &grid, 2, 0, 1e6);
        assert!(matches!(r, Err(Error::NumericalBlowup { step: 2, .. })));
    }

    #[test]
    fn too_many_lags_for_segment() {
        let spec = constant_spec(1, 3, 0.0, 0.0);
        let grid = make_time_grid(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            simulate_paths(&spec, &ConstantSegment(vec![0.0]), &grid, 1, 0),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn benchmark_year_has_plausible_range() {
        let spec = SddeSpec::benchmark(1.0, 1.0).unwrap();
        let grid = make_time_grid(4.0, 365.0, 1.0).unwrap();
        let set = simulate_paths(&spec, &SinCosSegment, &grid, 20, 5).unwrap();
        let max = set.paths.iter().flat_map(|p| p.coordinate(0)).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max > 2.0 && max < 40.0, "max |X¹| = {max}");
    }
}
