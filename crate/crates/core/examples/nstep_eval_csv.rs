//! Evaluates horizons 1 to 3 on series read back from CSV, the path used for
//! real measurement data.

use delay_sde_net::eval::{run_nstep_eval, write_comparison_csv, NstepConfig};
use delay_sde_net::model::SplitSpec;
use delay_sde_net::sdde::{make_time_grid, read_paths_csv, simulate_paths, write_paths_csv, SddeSpec, SinCosSegment};

fn main() -> delay_sde_net::Result<()> {
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let grid = make_time_grid(3.0, 365.0, 1.0)?;
    let paths = simulate_paths(&spec, &SinCosSegment, &grid, 8, 2)?.paths;
    let mut buf = Vec::new();
    write_paths_csv(&paths, &mut buf)?;
    let series = read_paths_csv(buf.as_slice())?;

    let mut cfg = NstepConfig { horizons: vec![1, 2, 3], split: SplitSpec { train: 0.75, validation: 0.0, test: 0.25 }, ..NstepConfig::default() };
    cfg.model.drift.iterations = 50;
    cfg.model.aleatoric.iterations = 50;
    cfg.model.epistemic.iterations = 20;
    let out = run_nstep_eval(&series, &cfg, 2)?;
    write_comparison_csv(&out.report, std::io::stdout())?;
    for (n, rows) in &out.plots {
        let covered = rows.iter().filter(|r| r.ci_lo <= r.truth && r.truth <= r.ci_hi).count();
        println!("h{n}: 95% interval covers {covered} of {} test points", rows.len());
    }
    Ok(())
}
