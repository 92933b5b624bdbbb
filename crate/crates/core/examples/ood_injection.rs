//! Splices amplified-noise intervals into test years and reports how well the
//! envelope guard separates them.

use delay_sde_net::eval::{comparison_data, ComparisonConfig};
use delay_sde_net::model::SplitSpec;
use delay_sde_net::sdde::SddeSpec;

fn main() -> delay_sde_net::Result<()> {
    let cfg = ComparisonConfig { years: 30, split: SplitSpec { train: 0.8, validation: 0.1, test: 0.1 }, ..ComparisonConfig::default() };
    let spec = SddeSpec::benchmark(1.0, 1.0)?;
    let data = comparison_data(&spec, &cfg, 1)?;
    let inj = data.contaminated.expect("OOD is on by default");
    println!("{} test years, {:.2}% of points replaced", inj.paths.len(), 100.0 * inj.point_contamination());
    println!("candidate path per interval: {:?}", inj.sources);
    for (i, m) in inj.mask.iter().enumerate() {
        let runs = m.windows(2).filter(|w| !w[0] && w[1]).count() + usize::from(m[0]);
        println!("test year {}: {} replaced points in {runs} runs", i + 1, m.iter().filter(|b| **b).count());
    }
    Ok(())
}
