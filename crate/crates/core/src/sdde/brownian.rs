use std::io::Write;

use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Brownian increments `ΔW_k^j ~ N(0, Δt)` for steps `k = 1..=K`,
/// row-major over step then coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianIncrements {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub dim: usize,
    pub increments: Vec<f64>,
}

impl BrownianIncrements {
    pub fn steps(&self) -> usize {
        self.increments.len() / self.dim
    }

    /// Increment for the step from `t_{k-1}` to `t_k`, `k ≥ 1`.
    pub fn step(&self, k: usize) -> &[f64] {
        &self.increments[(k - 1) * self.dim..k * self.dim]
    }
}

/// Increments for one path; `stream` selects an independent substream so
/// that path `i` of a simulation uses `stream = i`.
pub fn sample_brownian_stream(grid: &TimeGrid, dim: usize, seed: u64, stream: u64) -> BrownianIncrements {
    let mut r = rng::stream(seed, domain::BROWNIAN | stream);
    let sd = grid.dt.sqrt();
    let increments = (0..grid.steps * dim).map(|_| sd * rng::standard_normal(&mut r)).collect();
    BrownianIncrements { seed, stream, dt: grid.dt, dim, increments }
}

pub fn sample_brownian(grid: &TimeGrid, dim: usize, seed: u64) -> BrownianIncrements {
    sample_brownian_stream(grid, dim, seed, 0)
}

/// Coarse increments over blocks of `kappa` fine steps.
pub fn aggregate_increments(fine: &BrownianIncrements, kappa: usize) -> Result<BrownianIncrements> {
    let steps = fine.steps();
    if kappa == 0 || !steps.is_multiple_of(kappa) {
        return Err(Error::NotDivisible { len: steps, kappa });
    }
    let d = fine.dim;
    let mut increments = vec![0.0; steps / kappa * d];
    for (k, row) in fine.increments.chunks_exact(d).enumerate() {
        let coarse = &mut increments[(k / kappa) * d..(k / kappa + 1) * d];
        for (c, v) in coarse.iter_mut().zip(row) {
            *c += v;
        }
    }
    Ok(BrownianIncrements {
        seed: fine.seed,
        stream: fine.stream,
        dt: fine.dt * kappa as f64,
        dim: d,
        increments,
    })
}

/// Writes `k,j,dW` rows with 1-based step and coordinate.
pub fn write_increments_csv<W: Write>(inc: &BrownianIncrements, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "j", "dW"])?;
    for (i, v) in inc.increments.iter().enumerate() {
        w.write_record([(i / inc.dim + 1).to_string(), (i % inc.dim + 1).to_string(), format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdde::grid::make_time_grid;

    fn from_values(v: Vec<f64>, dt: f64) -> BrownianIncrements {
        BrownianIncrements { seed: 0, stream: 0, dt, dim: 1, increments: v }
    }

    #[test]
    fn aggregation_sums_blocks() {
        let fine = from_values(vec![0.1, -0.3, 0.2, 0.4], 0.5);
        let coarse = aggregate_increments(&fine, 2).unwrap();
        assert!((coarse.increments[0] + 0.2).abs() < 1e-15);
        assert!((coarse.increments[1] - 0.6).abs() < 1e-15);
        assert_eq!(coarse.dt, 1.0);
        assert_eq!(aggregate_increments(&fine, 1).unwrap().increments, fine.increments);
        assert!(matches!(aggregate_increments(&fine, 3), Err(Error::NotDivisible { len: 4, kappa: 3 })));
    }

    #[test]
    fn sample_count_and_variance() {
        let grid = make_time_grid(0.0, 5.0, 0.01).unwrap();
        let inc = sample_brownian(&grid, 2, 42);
        assert_eq!(inc.increments.len(), 1000);
        let n = inc.increments.len() as f64;
        let mean = inc.increments.iter().sum::<f64>() / n;
        let var = inc.increments.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // standard error of the sample variance of a normal is Δt·√(2/(n-1))
        let se = 0.01 * (2.0 / (n - 1.0)).sqrt();
        assert!((var - 0.01).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn same_seed_same_increments() {
        let grid = make_time_grid(0.0, 1.0, 0.1).unwrap();
        assert_eq!(sample_brownian(&grid, 3, 7), sample_brownian(&grid, 3, 7));
        assert_ne!(sample_brownian(&grid, 3, 7).increments, sample_brownian(&grid, 3, 8).increments);
        assert_ne!(
            sample_brownian_stream(&grid, 3, 7, 1).increments,
            sample_brownian_stream(&grid, 3, 7, 2).increments
        );
    }

    #[test]
    fn minimal_case() {
        let grid = make_time_grid(0.0, 1.0, 1.0).unwrap();
        assert_eq!(sample_brownian(&grid, 1, 0).increments.len(), 1);
    }

    #[test]
    fn csv_rows() {
        let inc = BrownianIncrements { seed: 0, stream: 0, dt: 1.0, dim: 2, increments: vec![0.5, -1.0] };
        let mut buf = Vec::new();
        write_increments_csv(&inc, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,j,dW\n1,1,0.5\n1,2,-1\n");
    }
}
