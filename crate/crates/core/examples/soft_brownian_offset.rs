//! Soft Brownian offset keeps every generated window at least `d⁻` from the
//! training set; a one-shot Gaussian offset does not.

use delay_sde_net::model::{build_windows, Split};
use delay_sde_net::ood::{gaussian_offset, soft_brownian_offset, NearestNeighbors, SboConfig, SboMode};
use delay_sde_net::sdde::{make_time_grid, simulate_paths, SddeSpec, SinCosSegment};

fn main() -> delay_sde_net::Result<()> {
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let grid = make_time_grid(3.0, 365.0, 1.0)?;
    let paths = simulate_paths(&spec, &SinCosSegment, &grid, 3, 5)?.paths;
    let w = build_windows(&paths, 4, 1, &vec![Split::Train; paths.len()])?;
    let train: Vec<Vec<f64>> =
        w.rows.iter().map(|r| std::iter::once(r.time).chain(r.lags.iter().copied()).collect()).collect();
    let nn = NearestNeighbors::new(&train, 1000);

    let mut d_minus = 0.0;
    for mode in [SboMode::PerLagNoise, SboMode::WholeWindowShift] {
        let cfg = SboConfig { mode, ..SboConfig::default() };
        let out = soft_brownian_offset(&train, 2, &cfg, 1000, 11)?;
        let min = out.points.iter().map(|p| nn.distance(p)).fold(f64::INFINITY, f64::min);
        println!("{mode:?}: d- = {:.3}, closest generated window at {min:.3}, {} failed", out.d_minus, out.failed);
        d_minus = out.d_minus;
    }
    let gauss = gaussian_offset(&train, 1.0, 1000, 11);
    let inside = gauss.iter().filter(|p| nn.distance(p) < d_minus).count();
    println!("gaussian offset: {inside} of 1000 windows closer than d- to a training window");
    Ok(())
}
