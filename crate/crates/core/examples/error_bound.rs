//! Evaluates the model error bound for the benchmark system: Barron norms of
//! the generator, the activation constant, and how the bound moves with the
//! width and the time step.

use delay_sde_net::model::{barron_norms, estimate_lipschitz, theoretical_bound, BoundConstants};
use delay_sde_net::net::{activation_constant, Activation};
use delay_sde_net::sdde::SddeSpec;

fn main() -> delay_sde_net::Result<()> {
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let (c_f, c_g) = barron_norms(&spec);
    let act = Activation::tanh(1.0)?;
    let c_sigma = activation_constant(act)?.c_sigma;
    println!("C_f = {c_f:.4}, C_g = {c_g:.5}, C_sigma(tanh) = {c_sigma:.4}");
    println!("C_sigma(relu) = {}", activation_constant(Activation::Relu)?.c_sigma);

    let lo = vec![-1.0; spec.input_dim()];
    let hi = vec![1.0; spec.input_dim()];
    let lipschitz = estimate_lipschitz(&spec, &lo, &hi, 20_000, 1);
    println!("Lipschitz estimate on [-1, 1]^9: {lipschitz:.4}");

    let base = BoundConstants {
        horizon: 1.0,
        lags: 4,
        width: 32,
        lipschitz,
        approx: 0.0,
        eps_f: 0.0,
        c_ge: 0.0,
        c_f,
        c_g,
        c_sigma,
        gamma: 0.5,
        c_t: 1.0,
    };
    for width in [32, 64, 128, 256] {
        let (c_m, total) = theoretical_bound(&BoundConstants { width, ..base.clone() }, 0.01)?;
        println!("m = {width:>3}: C_m = {c_m:.4e}, bound at dt = 0.01: {total:.4e}");
    }
    for dt in [1.0, 0.1, 0.01] {
        let (c_m, total) = theoretical_bound(&base, dt)?;
        println!("dt = {dt:>4}: discretization term {:.4}, bound {total:.6e}", total - c_m);
    }
    Ok(())
}
