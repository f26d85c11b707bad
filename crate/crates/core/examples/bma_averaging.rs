//! Bayesian model averaging over the eight regression subsets: posterior
//! model weights and the uniform-versus-restricted prior comparison.
//!
//! cargo run --example bma_averaging -- [replicates]

use trunc_cpe::bma::{self, DEFAULT_PRIOR_VAR};
use trunc_cpe::experiments::regression::{simulate_regression, RegressionDesign};
use trunc_cpe::experiments::{run_bma_experiment, BmaExperimentConfig};
use trunc_cpe::stats;

fn main() -> trunc_cpe::Result<()> {
    let sigma = 2.0;
    let sample = simulate_regression(&RegressionDesign::default(), sigma, &mut trunc_cpe::rng::stream(8, &[]));
    let models = bma::regression_candidates(&sample.covariates, &bma::uniform_prior(8))?;
    let weights = bma::bma_weights(&sample.z, &models, DEFAULT_PRIOR_VAR, sigma * sigma)?;
    for (m, w) in models.iter().zip(&weights) {
        println!("model {} {:?}: weight {w:.4}", m.index, m.flags);
    }
    let pred = bma::bma_predict(&sample.z, &models, DEFAULT_PRIOR_VAR, sigma * sigma)?;
    println!("BMA squared error vs truth: {:.3}", (&pred - &sample.y).norm_squared());

    let replicates = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let diffs = run_bma_experiment(&BmaExperimentConfig {
        replicates,
        ..Default::default()
    })?;
    let positive = diffs.iter().filter(|&&d| d > 0.0).count();
    println!(
        "uniform minus restricted SSE: {positive}/{} positive, median {:.3e}",
        diffs.len(),
        stats::percentile(&diffs, 0.5)?
    );
    Ok(())
}
