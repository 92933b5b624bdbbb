//! Desk-scale discretization study on the benchmark system.
//!
//! `cargo run --release --example convergence_study -- [paths] [seed]`

use delay_sde_net::eval::{run_convergence_study, write_convergence_csv, ConvergenceConfig};
use delay_sde_net::sdde::SddeSpec;

fn main() -> delay_sde_net::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let paths = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ConvergenceConfig { paths, ..ConvergenceConfig::default() };
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let run = run_convergence_study(&spec, &cfg, seed)?;
    write_convergence_csv(&run.report, std::io::stdout())?;
    println!("gamma = {:.4}, intercept = {:.4}", run.report.gamma, run.report.intercept);
    Ok(())
}
