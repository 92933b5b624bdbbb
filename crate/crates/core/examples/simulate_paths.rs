//! Simulates years of the benchmark system and prints summary statistics.
//!
//! `cargo run --release --example simulate_paths -- [paths] [seed] [out.csv]`

use std::fs::File;

use delay_sde_net::sdde::{make_time_grid, simulate_paths, write_paths_csv, SddeSpec, SinCosSegment};

fn main() -> delay_sde_net::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let grid = make_time_grid(3.0, 365.0, 1.0)?;
    let set = simulate_paths(&spec, &SinCosSegment, &grid, n, seed)?;

    for j in 0..spec.dim {
        let end: Vec<f64> = set.paths.iter().map(|p| p.at(grid.last_index())[j]).collect();
        let mean = end.iter().sum::<f64>() / n as f64;
        let sd = (end.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        println!("x{} at t = {}: mean {mean:.4}, sd {sd:.4}", j + 1, grid.time(grid.last_index()));
    }
    if let Some(out) = args.get(3) {
        write_paths_csv(&set.paths, File::create(out)?)?;
        println!("wrote {out}");
    }
    Ok(())
}
