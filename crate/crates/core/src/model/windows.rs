use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdde::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Path-level split proportions; they need not sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.8, validation: 0.1, test: 0.1 }
    }
}

impl SplitSpec {
    pub fn all_train() -> Self {
        SplitSpec { train: 1.0, validation: 0.0, test: 0.0 }
    }

    /// Path counts `(train, validation, test)` for `n` paths, in path order.
    pub fn counts(&self, n: usize) -> Result<(usize, usize, usize)> {
        let total = self.train + self.validation + self.test;
        if !(self.train > 0.0 && self.validation >= 0.0 && self.test >= 0.0 && total.is_finite()) {
            return Err(Error::Config("split proportions must be nonnegative with a positive train share".into()));
        }
        let train = ((n as f64) * self.train / total).round() as usize;
        let validation = ((n as f64) * self.validation / total).round() as usize;
        let train = train.clamp(1, n);
        let validation = validation.min(n - train);
        Ok((train, validation, n - train - validation))
    }

    pub fn assign(&self, n: usize) -> Result<Vec<Split>> {
        let (tr, va, _) = self.counts(n)?;
        Ok((0..n)
            .map(|i| if i < tr { Split::Train } else if i < tr + va { Split::Validation } else { Split::Test })
            .collect())
    }
}

/// One supervised example: `p` observed states up to and including
/// `X(t_k)`, and the state `N` steps later.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub path: usize,
    /// Grid index `k` of the most recent observed state.
    pub index: i64,
    /// `t_k`.
    pub time: f64,
    /// `(x_{k+1-p}, …, x_k)`, flattened oldest first.
    pub lags: Vec<f64>,
    /// `x_{k+N}`.
    pub target: Vec<f64>,
    pub split: Split,
}

impl Window {
    pub fn last(&self, dim: usize) -> &[f64] {
        &self.lags[self.lags.len() - dim..]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    pub dim: usize,
    pub lags: usize,
    pub horizon: usize,
    pub dt: f64,
    pub rows: Vec<Window>,
}

impl WindowSet {
    pub fn split(&self, split: Split) -> Vec<Window> {
        self.rows.iter().filter(|w| w.split == split).cloned().collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.rows.iter().filter(|w| w.split == split).count()
    }

    /// Rows as `split,path,k,t,x…,target…` CSV; `flags` appends an `is_ood` column.
    pub fn write_csv<W: Write>(&self, out: W, flags: Option<&[bool]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["split".to_string(), "path".into(), "k".into(), "t".into()];
        for l in 0..self.lags {
            for j in 1..=self.dim {
                header.push(format!("lag{}_x{j}", self.lags - l));
            }
        }
        header.extend((1..=self.dim).map(|j| format!("target_x{j}")));
        if flags.is_some() {
            header.push("is_ood".into());
        }
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let split = match row.split {
                Split::Train => "train",
                Split::Validation => "validation",
                Split::Test => "test",
            };
            let mut rec = vec![split.to_string(), row.path.to_string(), row.index.to_string(), format!("{}", row.time)];
            rec.extend(row.lags.iter().chain(&row.target).map(|v| format!("{v}")));
            if let Some(f) = flags {
                rec.push(u8::from(f[i]).to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Every admissible window of every path, in path then time order.
///
/// A window needs `p` observed states and a target `N` steps ahead. When a
/// path carries an initial segment, targets are restricted to `t > 0` so
/// that only simulated dynamics are learned.
pub fn build_windows(paths: &[Path], p: usize, horizon: usize, splits: &[Split]) -> Result<WindowSet> {
    if p == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("lags and horizon must be positive".into()));
    }
    if splits.len() != paths.len() {
        return Err(Error::LengthMismatch { left: paths.len(), right: splits.len() });
    }
    let first = paths.first().ok_or_else(|| Error::InvalidArgument("no paths".into()))?;
    let (dim, dt) = (first.dim(), first.grid().dt);
    let mut rows = Vec::new();
    for (pi, (path, &split)) in paths.iter().zip(splits).enumerate() {
        if path.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: path.dim() });
        }
        let g = path.grid();
        if ((g.dt - dt) / dt).abs() > 1e-9 {
            return Err(Error::InvalidArgument("paths must share one step size".into()));
        }
        let lo = (g.first_index() + p as i64 - 1).max(0);
        let hi = g.last_index() - horizon as i64;
        if hi < lo {
            return Err(Error::PathTooShort { len: g.len(), p, horizon });
        }
        for k in lo..=hi {
            rows.push(Window {
                path: pi,
                index: k,
                time: g.time(k),
                lags: path.span(k + 1 - p as i64, k + 1).to_vec(),
                target: path.at(k + horizon as i64).to_vec(),
                split,
            });
        }
    }
    Ok(WindowSet { dim, lags: p, horizon, dt, rows })
}

/// Affine input scaling fitted on training rows, plus output scales that
/// keep each net's raw output of order one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub time_mean: f64,
    pub time_std: f64,
    pub state_mean: Vec<f64>,
    pub state_std: Vec<f64>,
    /// Standard deviation of `(x_{k+N} - x_k)/(NΔt)`, the drift output unit.
    pub drift_scale: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let delta = v - mean;
        mean += delta / n;
        m2 += delta * (v - mean);
    }
    let sd = if n > 1.0 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, if sd > 1e-12 { sd } else { 1.0 })
}

impl Normalizer {
    pub fn fit(rows: &[Window], dim: usize, horizon: usize, dt: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("cannot fit a normalizer on zero rows".into()));
        }
        let (time_mean, time_std) = mean_std(rows.iter().map(|w| w.time));
        let mut state_mean = Vec::with_capacity(dim);
        let mut state_std = Vec::with_capacity(dim);
        let mut drift_scale = Vec::with_capacity(dim);
        for j in 0..dim {
            let (m, s) = mean_std(rows.iter().flat_map(|w| w.lags.iter().skip(j).step_by(dim).copied()));
            state_mean.push(m);
            state_std.push(s);
            let h = horizon as f64 * dt;
            let (_, ds) = mean_std(rows.iter().map(|w| (w.target[j] - w.last(dim)[j]) / h));
            drift_scale.push(ds);
        }
        Ok(Normalizer { time_mean, time_std, state_mean, state_std, drift_scale })
    }

    pub fn dim(&self) -> usize {
        self.state_mean.len()
    }

    /// Writes `[t̃, x̃…]` into `out`, whose length is `1 + lags.len()`.
    #[inline]
    pub fn encode(&self, time: f64, lags: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out[0] = (time - self.time_mean) / self.time_std;
        for (i, (o, x)) in out[1..].iter_mut().zip(lags).enumerate() {
            *o = (x - self.state_mean[i % d]) / self.state_std[i % d];
        }
    }

    pub fn encoded(&self, time: f64, lags: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; 1 + lags.len()];
        self.encode(time, lags, &mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdde::{make_time_grid, TimeGrid};

    fn series(n: usize) -> Path {
        let grid = TimeGrid::from_counts(1.0, 1.0, 0, n - 1).unwrap();
        Path::new(grid, 1, (0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn window_counts() {
        let w = build_windows(&[series(10)], 4, 1, &[Split::Train]).unwrap();
        assert_eq!(w.rows.len(), 6);
        let w = build_windows(&[series(365)], 4, 7, &[Split::Train]).unwrap();
        assert_eq!(w.rows.len(), 355);
        assert!(matches!(build_windows(&[series(4)], 4, 1, &[Split::Train]), Err(Error::PathTooShort { .. })));
    }

    #[test]
    fn windows_are_contiguous_and_exclude_target() {
        let w = build_windows(&[series(10)], 3, 2, &[Split::Train]).unwrap();
        for row in &w.rows {
            assert!(row.lags.windows(2).all(|p| p[1] - p[0] == 1.0));
            assert_eq!(row.target[0], row.lags[2] + 2.0);
            assert!(!row.lags.contains(&row.target[0]));
        }
    }

    #[test]
    fn initial_segment_only_feeds_history() {
        let grid = make_time_grid(4.0, 10.0, 1.0).unwrap();
        let path = Path::new(grid, 1, grid.times().collect()).unwrap();
        let w = build_windows(&[path], 4, 1, &[Split::Train]).unwrap();
        assert_eq!(w.rows.len(), 10);
        assert_eq!(w.rows[0].lags, vec![-3.0, -2.0, -1.0, 0.0]);
        assert_eq!(w.rows[0].target, vec![1.0]);
    }

    #[test]
    fn split_by_path_never_mixes() {
        let paths = vec![series(20), series(20)];
        let splits = SplitSpec { train: 0.5, validation: 0.0, test: 0.5 }.assign(2).unwrap();
        let w = build_windows(&paths, 2, 1, &splits).unwrap();
        for row in &w.rows {
            assert_eq!(row.split, if row.path == 0 { Split::Train } else { Split::Test });
        }
    }

    #[test]
    fn split_counts() {
        let s = SplitSpec { train: 90.0, validation: 10.0, test: 10.0 };
        assert_eq!(s.counts(110).unwrap(), (90, 10, 10));
        assert_eq!(SplitSpec::default().counts(30).unwrap(), (24, 3, 3));
    }

    #[test]
    fn normalizer_standardizes() {
        let w = build_windows(&[series(50)], 2, 1, &[Split::Train]).unwrap();
        let n = Normalizer::fit(&w.rows, 1, 1, 1.0).unwrap();
        let enc: Vec<Vec<f64>> = w.rows.iter().map(|r| n.encoded(r.time, &r.lags)).collect();
        let m = enc.iter().map(|e| e[0]).sum::<f64>() / enc.len() as f64;
        assert!(m.abs() < 1e-12);
        // deterministic increments have zero spread, so the unit falls back to 1
        assert_eq!(n.drift_scale, vec![1.0]);
    }
}
