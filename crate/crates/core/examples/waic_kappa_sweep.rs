//! Choosing the truncation level by WAIC over a grid of CPE percentiles.
//!
//! cargo run --release --example waic_kappa_sweep

use trunc_cpe::experiments::{run_waic_sweep, simulate_dataset, synthetic_dataset, SyntheticSpec, WaicSweepConfig};
use trunc_cpe::rng;
use trunc_cpe::sampler::{default_decay_levels, ModelSpec};

fn main() -> trunc_cpe::Result<()> {
    let data = synthetic_dataset(&SyntheticSpec::default(), 0)?;
    let sim = simulate_dataset(&data.response, 3.0, &mut rng::stream(0, &[1]))?;
    let spec = ModelSpec::new(
        data.design(),
        data.locations.clone(),
        sim.sigma2,
        default_decay_levels(),
    )?;
    let sweep = run_waic_sweep(&spec, &sim.z, &WaicSweepConfig::default())?;

    println!(
        "untruncated WAIC {:.3} +- {:.3}",
        sweep.untruncated_waic, sweep.untruncated_se
    );
    for p in &sweep.points {
        match (p.waic, p.se) {
            (Some(w), Some(se)) => println!("d={:.2} kappa={:>8.3} WAIC {w:>8.3} +- {se:.3}", p.d, p.kappa),
            _ => println!(
                "d={:.2} kappa={:>8.3} {}",
                p.d,
                p.kappa,
                p.error.as_deref().unwrap_or("no value")
            ),
        }
    }
    println!("argmin d = {:?}", sweep.argmin_d);
    Ok(())
}
