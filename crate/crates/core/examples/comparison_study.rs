//! Desk-scale comparison of the Delay-SDE-net, the SDE-net and VAR(4).
//!
//! `cargo run --release --example comparison_study -- [years] [seed]`

use delay_sde_net::eval::{run_comparison, write_comparison_csv, ComparisonConfig};
use delay_sde_net::model::SplitSpec;
use delay_sde_net::sdde::SddeSpec;

fn main() -> delay_sde_net::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let years = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ComparisonConfig {
        years,
        split: SplitSpec { train: 0.8, validation: 0.1, test: 0.1 },
        horizons: vec![1, 3, 7],
        ..ComparisonConfig::default()
    };
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let report = run_comparison(&spec, &cfg, seed)?;
    write_comparison_csv(&report, std::io::stdout())?;
    Ok(())
}
