//! Stops training after a fixed epoch budget, saves a checkpoint and resumes
//! it; the result equals an uninterrupted fit.

use delay_sde_net::model::{build_windows, fit, fit_resumable, Checkpoint, FitOutcome, ModelConfig, SplitSpec};
use delay_sde_net::sdde::{make_time_grid, simulate_paths, SddeSpec, SinCosSegment};

fn main() -> delay_sde_net::Result<()> {
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let grid = make_time_grid(3.0, 60.0, 1.0)?;
    let paths = simulate_paths(&spec, &SinCosSegment, &grid, 6, 4)?.paths;
    let splits = SplitSpec { train: 0.7, validation: 0.3, test: 0.0 }.assign(paths.len())?;
    let mut cfg = ModelConfig { width: 8, ..ModelConfig::default() };
    cfg.drift.iterations = 20;
    cfg.aleatoric.iterations = 20;
    cfg.epistemic.iterations = 10;
    let w = build_windows(&paths, cfg.lags, cfg.horizon, &splits)?;

    let mut outcome = fit_resumable(&w, &cfg, 9, None, Some(15))?;
    let mut pauses = 0;
    let model = loop {
        match outcome {
            FitOutcome::Done(m) => break *m,
            FitOutcome::Paused(c) => {
                pauses += 1;
                let saved = serde_json::to_string(&c)?;
                let c: Checkpoint = serde_json::from_str(&saved)?;
                outcome = fit_resumable(&w, &cfg, 9, Some(c), Some(15))?;
            }
        }
    };
    let direct = fit(&w, &cfg, 9)?;
    println!("resumed {pauses} times; identical to uninterrupted fit: {}", model == direct);
    Ok(())
}
