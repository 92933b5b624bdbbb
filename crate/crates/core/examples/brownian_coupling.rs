//! Coarse Brownian increments are sums of the fine ones, so coarse and fine
//! simulations share one Brownian path.

use delay_sde_net::sdde::{aggregate_increments, sample_brownian, TimeGrid};

fn main() -> delay_sde_net::Result<()> {
    let fine_grid = TimeGrid::new(15.0, 5.0, 0.01)?;
    let fine = sample_brownian(&fine_grid, 2, 7);
    for kappa in [5, 10, 50, 100, 500] {
        let coarse = aggregate_increments(&fine, kappa)?;
        let worst = (1..=coarse.steps())
            .flat_map(|k| {
                let sum: Vec<f64> = (0..2)
                    .map(|j| ((k - 1) * kappa + 1..=k * kappa).map(|i| fine.step(i)[j]).sum())
                    .collect();
                coarse.step(k).iter().zip(sum).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        println!("kappa {kappa:>3}: {} coarse steps, max |coarse - sum of fine| = {worst:.1e}", coarse.steps());
    }
    Ok(())
}
