use std::io::{Read, Write};

use super::grid::TimeGrid;
use crate::error::{Error, Result};

/// A `d`-dimensional trajectory on every point of a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

/// The `p` most recent states before a reference index, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct LagVector {
    pub time: f64,
    pub entries: Vec<f64>,
}

impl Path {
    /// `values` is row-major over grid index then coordinate.
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch { expected: grid.len() * dim, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite path value at row {}", i / dim)));
        }
        Ok(Path { grid, dim, values })
    }

    pub(crate) fn from_raw(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * dim);
        Path { grid, dim, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// State at grid index `k`.
    pub fn at(&self, k: i64) -> &[f64] {
        let o = self.grid.offset(k) * self.dim;
        &self.values[o..o + self.dim]
    }

    /// States for grid indices `from..to`, flattened.
    pub fn span(&self, from: i64, to: i64) -> &[f64] {
        &self.values[self.grid.offset(from) * self.dim..self.grid.offset(to - 1) * self.dim + self.dim]
    }

    /// Coordinate `j` over the whole grid.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.dim).copied().collect()
    }

    /// The same trajectory sampled every `kappa` grid points.
    pub fn coarsen(&self, kappa: usize) -> Result<Path> {
        let grid = self.grid.coarsen(kappa)?;
        let values = (grid.first_index()..=grid.last_index())
            .flat_map(|k| self.at(k * kappa as i64).iter().copied())
            .collect();
        Ok(Path::from_raw(grid, self.dim, values))
    }
}

/// `(X(t_{k-p}), …, X(t_{k-1}))` flattened, with reference time `t_k`.
pub fn project(path: &Path, p: usize, k: i64) -> Result<LagVector> {
    let first = k - p as i64;
    if first < path.grid.first_index() {
        return Err(Error::InsufficientHistory { needed: first, available: path.grid.first_index() });
    }
    if k - 1 > path.grid.last_index() {
        return Err(Error::InvalidArgument(format!("index {k} lies beyond the grid")));
    }
    Ok(LagVector { time: path.grid.time(k), entries: path.span(first, k).to_vec() })
}

/// Offsets `u_i = -(p - i + 1)·Δt`, `i = 1..=p`, relative to the reference time.
pub fn lag_offsets(p: usize, dt: f64) -> Vec<f64> {
    (1..=p).map(|i| -((p - i + 1) as f64) * dt).collect()
}

/// Simulated trajectories sharing a grid, with the seed that generated them.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSet {
    pub grid: TimeGrid,
    pub dim: usize,
    pub seed: u64,
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Piecewise-linear interpolation of `(time, value)` samples onto the grid
/// points `k = -L..=0`. Returns `(L+1)·d` values.
pub fn linearize_initial(grid: &TimeGrid, dim: usize, samples: &[(f64, Vec<f64>)]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::GapTooLarge { t: grid.time(grid.first_index()) });
    }
    if let Some(s) = samples.iter().find(|s| s.1.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: s.1.len() });
    }
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
    }
    let tol = 1e-9 * grid.dt;
    let mut out = Vec::with_capacity((grid.lags + 1) * dim);
    let mut j = 0;
    for k in grid.first_index()..=0 {
        let t = grid.time(k);
        while j + 1 < samples.len() && samples[j + 1].0 < t - tol {
            j += 1;
        }
        let (t0, v0) = (&samples[j].0, &samples[j].1);
        if (t - t0).abs() <= tol {
            out.extend_from_slice(v0);
            continue;
        }
        if j + 1 >= samples.len() || *t0 > t {
            return Err(Error::GapTooLarge { t });
        }
        let (t1, v1) = (&samples[j + 1].0, &samples[j + 1].1);
        if (t - t1).abs() <= tol {
            out.extend_from_slice(v1);
            continue;
        }
        let w = (t - t0) / (t1 - t0);
        out.extend(v0.iter().zip(v1).map(|(a, b)| a + w * (b - a)));
    }
    Ok(out)
}

fn fmt(v: f64) -> String {
    // shortest representation that parses back to the same f64
    format!("{v}")
}

fn header(dim: usize, with_id: bool) -> Vec<String> {
    let mut h = Vec::with_capacity(dim + 2);
    if with_id {
        h.push("path_id".to_string());
    }
    h.push("t".to_string());
    h.extend((1..=dim).map(|j| format!("x{j}")));
    h
}

/// Writes `t,x1,…,xd` rows for every grid point.
pub fn write_path_csv<W: Write>(path: &Path, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(path.dim, false))?;
    for (i, t) in path.grid.times().enumerate() {
        let mut row = vec![fmt(t)];
        row.extend(path.values[i * path.dim..(i + 1) * path.dim].iter().map(|v| fmt(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: `path_id,t,x1,…,xd`.
pub fn write_paths_csv<W: Write>(paths: &[Path], out: W) -> Result<()> {
    let dim = paths.first().map_or(1, |p| p.dim);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(dim, true))?;
    for (id, path) in paths.iter().enumerate() {
        if path.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: path.dim });
        }
        for (i, t) in path.grid.times().enumerate() {
            let mut row = vec![id.to_string(), fmt(t)];
            row.extend(path.values[i * dim..(i + 1) * dim].iter().map(|v| fmt(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads one or more paths from `t,x…` or `path_id,t,x…` CSV.
///
/// Value columns are every column other than `t` and `path_id`, in file
/// order. The grid is inferred from the time column: when it passes through
/// 0 the earlier points become the initial segment, otherwise the first
/// point is the grid origin.
pub fn read_paths_csv<R: Read>(input: R) -> Result<Vec<Path>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let t_col = headers
        .iter()
        .position(|h| h.trim() == "t")
        .ok_or_else(|| Error::MissingColumns("t".into()))?;
    let id_col = headers.iter().position(|h| h.trim() == "path_id");
    let value_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != t_col && Some(c) != id_col).collect();
    if value_cols.is_empty() {
        return Err(Error::MissingColumns("at least one value column".into()));
    }
    let dim = value_cols.len();

    let mut groups: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id = id_col.map_or(String::new(), |c| rec[c].trim().to_string());
        let parse = |c: usize| -> Result<f64> {
            rec[c]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse `{}` as a number", &rec[c])))
        };
        let t = parse(t_col)?;
        let group = match groups.iter().position(|g| g.0 == id) {
            Some(i) => i,
            None => {
                groups.push((id, Vec::new(), Vec::new()));
                groups.len() - 1
            }
        };
        groups[group].1.push(t);
        for &c in &value_cols {
            groups[group].2.push(parse(c)?);
        }
    }
    groups
        .into_iter()
        .map(|(_, times, values)| {
            let grid = infer_grid(&times)?;
            Path::new(grid, dim, values)
        })
        .collect()
}

fn infer_grid(times: &[f64]) -> Result<TimeGrid> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument("a series needs at least two time points".into()));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::NonUniformSampling { t: times[1] });
    }
    let tol = 1e-6 * dt;
    for (i, &t) in times.iter().enumerate() {
        if (t - (times[0] + i as f64 * dt)).abs() > tol.max(1e-9 * t.abs()) {
            return Err(Error::NonUniformSampling { t });
        }
    }
    let n = times.len();
    let zero = times.iter().position(|t| t.abs() <= tol);
    let lags = match zero {
        Some(z) if z + 1 < n => z,
        _ => 0,
    };
    TimeGrid::from_counts(times[0], dt, lags, n - 1 - lags)
}
