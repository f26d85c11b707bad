//! Distances, exponential covariance, Cholesky log-determinants and
//! multivariate normal densities.
//!
//! cargo run --example stat_core_basics

use nalgebra::DVector;
use trunc_cpe::stats::{self, CovarianceSpec, SpatialLocations};

fn main() -> trunc_cpe::Result<()> {
    let locs = SpatialLocations::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![1.5, 1.5]])?;
    let d = stats::distance_matrix(&locs);
    let cov = stats::exp_covariance(&d, &CovarianceSpec::exponential(2.0, 0.7)?)?;
    println!("covariance:{cov:.4}");

    let chol = stats::chol_factor(&cov)?;
    println!("log det = {:.6} (jitter {:e})", chol.log_det(), chol.jitter());

    let x = DVector::from_vec(vec![0.3, -0.4, 1.1, 0.2]);
    let mean = DVector::zeros(4);
    println!("log N(x; 0, cov) = {:.6}", stats::mvn_logpdf(&x, &mean, &cov)?);

    let mut rng = trunc_cpe::rng::stream(1, &[]);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| stats::sample_inverse_gamma(3.0, 4.0, &mut rng))
        .collect::<Result<_, _>>()?;
    println!("IG(3, 4) sample mean {:.3} (exact 2.0)", stats::mean(&draws));
    println!("median of the draws: {:.3}", stats::percentile(&draws, 0.5)?);
    Ok(())
}
