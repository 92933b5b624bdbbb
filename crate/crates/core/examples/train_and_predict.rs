//! Trains a Delay-SDE-net on simulated years and forecasts a week ahead with
//! 95% intervals.
//!
//! `cargo run --release --example train_and_predict -- [years] [seed]`

use delay_sde_net::model::{build_windows, fit, ModelConfig, Split, SplitSpec};
use delay_sde_net::sdde::{make_time_grid, simulate_paths, SddeSpec, SinCosSegment};

fn main() -> delay_sde_net::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let years = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let grid = make_time_grid(3.0, 365.0, 1.0)?;
    let paths = simulate_paths(&spec, &SinCosSegment, &grid, years, seed)?.paths;
    let splits = SplitSpec { train: 0.8, validation: 0.2, test: 0.0 }.assign(paths.len())?;
    let mut cfg = ModelConfig::default();
    cfg.drift.iterations = 100;
    cfg.aleatoric.iterations = 100;
    let windows = build_windows(&paths, cfg.lags, cfg.horizon, &splits)?;
    println!("training on {} windows", windows.count(Split::Train));
    let model = fit(&windows, &cfg, seed)?;
    println!("tuned sigma_e = {:.4}", model.sigma_e);

    let last = paths.last().unwrap();
    let t = 100;
    let history = last.span(t - cfg.lags as i64 + 1, t + 1);
    let pred = model.predict(grid.time(t), history, 7)?;
    let (lo, hi) = pred.ci(0.95)?;
    println!("step  truth     mean      95% interval");
    for s in 1..=7 {
        let at = (s - 1) * model.dim;
        println!(
            "{s:>4}  {:>8.3}  {:>8.3}  [{:.3}, {:.3}]",
            last.at(t + s as i64)[0],
            pred.mean[at],
            lo[at],
            hi[at]
        );
    }
    Ok(())
}
