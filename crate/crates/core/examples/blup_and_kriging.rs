//! BLUP smoothing of noisy data, its CPE and effective degrees of freedom,
//! and a kriging prediction at a new site.
//!
//! cargo run --example blup_and_kriging

use nalgebra::{DMatrix, DVector};
use trunc_cpe::criteria;
use trunc_cpe::predictors::{self, BlupInputs};
use trunc_cpe::stats::{self, CovarianceSpec, SpatialLocations};

fn main() -> trunc_cpe::Result<()> {
    let rows: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64 * 0.2, (k % 2) as f64 * 0.3]).collect();
    let locs = SpatialLocations::from_rows(&rows)?;
    let z = DVector::from_vec(vec![1.2, 0.8, 1.9, 2.4, 2.0, 3.1]);
    let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { rows[i][0] });
    let beta = DVector::from_vec(vec![0.9, 2.0]);
    let (tau2, decay, sigma2) = (0.5, 3.0, 0.2);

    let spec = CovarianceSpec::exponential(tau2, decay)?;
    let sigma_y = stats::exp_covariance(&stats::distance_matrix(&locs), &spec)?;
    let inputs = BlupInputs::new(&x * &beta, sigma_y, sigma2)?;
    let fit = predictors::blup_fit(&z, &inputs)?;
    println!("z    = {:.3}", z.transpose());
    println!("BLUP = {:.3}", fit.yhat.transpose());
    println!("effective df = {:.4}", fit.effective_df(&inputs));

    let cpe = criteria::cpe_blup(&z, &x, &locs, sigma2, &beta, tau2, decay)?;
    let parts = cpe.components.expect("cpe has components");
    println!(
        "CPE = {:.4} (training {:.4} + penalty {:.4})",
        cpe.value, parts.fit, parts.penalty
    );

    let s0 = [0.5, 0.15];
    let mu = |s: &[f64]| beta[0] + beta[1] * s[0];
    let pred = predictors::kriging_point(&s0, &z, &locs, mu, &spec, sigma2)?;
    println!("kriging prediction at {s0:?}: {pred:.4}");
    Ok(())
}
