//! Subset selection by Mallows' Cp on simulated regressions, plus K-fold
//! cross-validation as an alternative error estimate.
//!
//! cargo run --example mallows_cp_selection -- [replicates]

use trunc_cpe::bma::{design_from_flags, REGRESSION_FLAGS};
use trunc_cpe::criteria;
use trunc_cpe::experiments::regression::{simulate_regression, RegressionDesign};
use trunc_cpe::experiments::{run_cp_experiment, CpExperimentConfig};
use trunc_cpe::predictors::ols_fit;

fn main() -> trunc_cpe::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let rows = run_cp_experiment(&CpExperimentConfig {
        replicates,
        ..Default::default()
    })?;
    println!(
        "{:>6} {}",
        "sigma",
        (1..=8).map(|b| format!("{b:>7}")).collect::<String>()
    );
    for row in &rows {
        let freqs: String = (1..=8).map(|b| format!("{:>7.3}", row.frequency(b))).collect();
        println!("{:>6} {freqs}", row.sigma);
    }

    // One replicate scored by Cp and by 10-fold CV.
    let sample = simulate_regression(&RegressionDesign::default(), 2.0, &mut trunc_cpe::rng::stream(4, &[]));
    println!("\nmodel      Cp   10-fold CV");
    for (k, flags) in REGRESSION_FLAGS.iter().enumerate() {
        let x = design_from_flags(&sample.covariates, flags)?;
        let fit = ols_fit(&x, &sample.z)?;
        let cp = criteria::mallows_cp(&sample.z, &fit.fitted, x.ncols(), 4.0)?;
        let cv = criteria::kfold_cv_err(&sample.z, 10, 4, |train, test| {
            if x.ncols() == 0 {
                return Ok(vec![0.0; test.len()]);
            }
            let xt = x.select_rows(train);
            let zt = sample.z.select_rows(train);
            let coef = ols_fit(&xt, &zt)?.coefficients;
            Ok(test.iter().map(|&i| x.row(i).dot(&coef.transpose())).collect())
        })?;
        println!("{:>5} {:>8.1} {:>10.3}", k + 1, cp.value, cv.value);
    }
    Ok(())
}
