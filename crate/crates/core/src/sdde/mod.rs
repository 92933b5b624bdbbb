//! Time grids, lag windows, Brownian increments and Euler–Maruyama
//! simulation of delay SDEs whose diffusion does not depend on the state.

pub mod brownian;
pub mod grid;
pub mod path;
pub mod simulate;
pub mod spec;

pub use brownian::{aggregate_increments, sample_brownian, sample_brownian_stream, write_increments_csv, BrownianIncrements};
pub use grid::{make_time_grid, TimeGrid};
pub use path::{lag_offsets, linearize_initial, project, read_paths_csv, write_path_csv, write_paths_csv, LagVector, Path, PathSet};
pub use simulate::{path_increments, simulate_path, simulate_paths, simulate_paths_capped, DEFAULT_BLOWUP_CAP};
pub use spec::{Coefficients, ConstantSegment, DiffusionDependence, FixedSegment, InitialSegment, SddeSpec, SinCosSegment};
