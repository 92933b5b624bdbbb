use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const COMMENSURATE_TOL: f64 = 1e-9;

/// Equidistant grid `t_k = origin + k·Δt`, `k = -L..=K`.
///
/// `[-L, 0]` carries the initial segment and `[0, K]` the forward solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tau: f64,
    pub horizon: f64,
    pub dt: f64,
    pub lags: usize,
    pub steps: usize,
    #[serde(default)]
    pub origin: f64,
}

pub fn make_time_grid(tau: f64, horizon: f64, dt: f64) -> Result<TimeGrid> {
    TimeGrid::new(tau, horizon, dt)
}

fn whole_multiple(what: &'static str, value: f64, dt: f64) -> Result<usize> {
    let ratio = value / dt;
    let n = ratio.round();
    if !ratio.is_finite() || (ratio - n).abs() > COMMENSURATE_TOL * n.max(1.0) {
        return Err(Error::NonCommensurate { what, value, dt });
    }
    Ok(n as usize)
}

impl TimeGrid {
    pub fn new(tau: f64, horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {tau}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let lags = whole_multiple("tau", tau, dt)?;
        let steps = whole_multiple("horizon", horizon, dt)?;
        if steps == 0 {
            return Err(Error::NonCommensurate { what: "horizon", value: horizon, dt });
        }
        Ok(TimeGrid { tau, horizon, dt, lags, steps, origin: 0.0 })
    }

    /// Grid of `lags + steps + 1` points whose first point is `start`.
    pub fn from_counts(start: f64, dt: f64, lags: usize, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one forward step".into()));
        }
        Ok(TimeGrid {
            tau: lags as f64 * dt,
            horizon: steps as f64 * dt,
            dt,
            lags,
            steps,
            origin: start + lags as f64 * dt,
        })
    }

    pub fn len(&self) -> usize {
        self.lags + self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_index(&self) -> i64 {
        -(self.lags as i64)
    }

    pub fn last_index(&self) -> i64 {
        self.steps as i64
    }

    pub fn contains(&self, k: i64) -> bool {
        (self.first_index()..=self.last_index()).contains(&k)
    }

    /// Storage offset of grid index `k`.
    pub fn offset(&self, k: i64) -> usize {
        debug_assert!(self.contains(k));
        (k + self.lags as i64) as usize
    }

    pub fn time(&self, k: i64) -> f64 {
        self.origin + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (self.first_index()..=self.last_index()).map(|k| self.time(k))
    }

    /// Grid with step `kappa·dt` sharing this grid's points.
    pub fn coarsen(&self, kappa: usize) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::InvalidArgument("kappa must be positive".into()));
        }
        if !self.steps.is_multiple_of(kappa) {
            return Err(Error::NotDivisible { len: self.steps, kappa });
        }
        if !self.lags.is_multiple_of(kappa) {
            return Err(Error::NotDivisible { len: self.lags, kappa });
        }
        Ok(TimeGrid {
            tau: self.tau,
            horizon: self.horizon,
            dt: self.dt * kappa as f64,
            lags: self.lags / kappa,
            steps: self.steps / kappa,
            origin: self.origin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        let g = make_time_grid(15.0, 5.0, 0.01).unwrap();
        assert_eq!((g.lags, g.steps), (1500, 500));
        let g = make_time_grid(4.0, 365.0, 1.0).unwrap();
        assert_eq!((g.lags, g.steps), (4, 365));
        let g = make_time_grid(0.0, 1.0, 0.5).unwrap();
        assert_eq!((g.lags, g.steps, g.len()), (0, 2, 3));
    }

    #[test]
    fn rejects_non_commensurate() {
        assert!(matches!(make_time_grid(1.0, 1.25, 0.5), Err(Error::NonCommensurate { what: "horizon", .. })));
        assert!(matches!(make_time_grid(0.3, 1.0, 0.25), Err(Error::NonCommensurate { what: "tau", .. })));
        assert!(make_time_grid(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn points_are_equidistant_and_hit_endpoints() {
        let g = make_time_grid(15.0, 5.0, 0.01).unwrap();
        let t: Vec<f64> = g.times().collect();
        assert!((t[0] + 15.0).abs() < 1e-12);
        assert!((t[t.len() - 1] - 5.0).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[1] > w[0] && ((w[1] - w[0]) - 0.01).abs() < 1e-12));
    }

    #[test]
    fn coarsening() {
        let g = make_time_grid(15.0, 5.0, 0.01).unwrap();
        let c = g.coarsen(500).unwrap();
        assert_eq!((c.lags, c.steps), (3, 1));
        assert!((c.dt - 5.0).abs() < 1e-12);
        assert!(matches!(g.coarsen(7), Err(Error::NotDivisible { .. })));
    }
}
