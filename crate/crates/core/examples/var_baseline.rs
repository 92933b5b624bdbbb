//! Fits VAR(4) with a day-of-year exponential variance to simulated years
//! and forecasts a week ahead.

use delay_sde_net::baselines::{fit_var, var_predict};
use delay_sde_net::model::{build_windows, Split};
use delay_sde_net::sdde::{make_time_grid, simulate_paths, SddeSpec, SinCosSegment};

fn main() -> delay_sde_net::Result<()> {
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let grid = make_time_grid(3.0, 365.0, 1.0)?;
    let paths = simulate_paths(&spec, &SinCosSegment, &grid, 20, 3)?.paths;
    let w = build_windows(&paths, 4, 1, &vec![Split::Train; paths.len()])?;
    let fit = fit_var(&w.rows, 2, 4)?;
    let m = &fit.model;
    println!("intercept {:?}", m.intercept);
    for (l, phi) in m.coefficients.iter().enumerate() {
        println!("phi_{} = [[{:.4}, {:.4}], [{:.4}, {:.4}]]", l + 1, phi[0], phi[1], phi[2], phi[3]);
    }
    for (j, v) in m.variance.iter().enumerate() {
        println!("x{} residual variance exp({:.4} + {:.6} day)", j + 1, v.a, v.b);
    }

    let row = &w.rows[100];
    let pred = var_predict(m, &row.lags, row.index, 7)?;
    for s in 1..=7 {
        println!("step {s}: mean {:.3}, variance {:.3}", pred.mean_at(s)[0], pred.variance_at(s)[0]);
    }
    Ok(())
}
