//! The SNR x percentile factorial on a synthetic spatial dataset, summarised
//! by cell means and a two-way ANOVA of the response.
//!
//! cargo run --release --example empirical_anova -- [replicates]

use trunc_cpe::experiments::empirical::{cell_summaries, response_anova};
use trunc_cpe::experiments::{run_empirical_simulation, synthetic_dataset, EmpiricalConfig, SyntheticSpec};

fn main() -> trunc_cpe::Result<()> {
    let mut config = EmpiricalConfig::desk(0);
    if let Some(r) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        config.design.replicates = r;
    }
    let data = synthetic_dataset(&SyntheticSpec::default(), 0)?;
    let rows = run_empirical_simulation(&config, &data)?;

    println!("{:>5} {:>5} {:>10} {:>8}", "SNR", "d", "mean", "se");
    for c in cell_summaries(&rows) {
        println!("{:>5} {:>5} {:>10.4} {:>8.4}", c.snr, c.d, c.mean_response, c.se);
    }
    println!();
    println!(
        "{:<10} {:>4} {:>10} {:>10} {:>8} {:>10}",
        "effect", "DF", "SumSq", "MeanSq", "F", "p"
    );
    for r in &response_anova(&rows)?.rows {
        println!(
            "{:<10} {:>4} {:>10.4} {:>10.4} {:>8.3} {:>10.3e}",
            r.name, r.df, r.sum_sq, r.mean_sq, r.f, r.p
        );
    }
    Ok(())
}
