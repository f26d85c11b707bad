//! Point predictors: least squares, BLUP, kriging and chain summaries.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, chol_factor, CholFactor, CovarianceSpec, SpatialLocations};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub fitted: DVector<f64>,
    pub coefficients: DVector<f64>,
}

/// Least squares through a QR factorization. Columns whose `R` diagonal is
/// negligible relative to the largest one make the design rank deficient.
pub fn ols_fit(x: &DMatrix<f64>, z: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows, data has {}",
            z.len()
        )));
    }
    if p == 0 || p > n {
        return Err(Error::RankDeficient);
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().abs().max();
    if !(scale > 0.0) || r.diagonal().iter().any(|v| v.abs() <= 1e-10 * scale) {
        return Err(Error::RankDeficient);
    }
    let qtz = qr.q().transpose() * z;
    let coefficients = r.solve_upper_triangular(&qtz).ok_or(Error::RankDeficient)?;
    let fitted = x * &coefficients;
    Ok(OlsFit { fitted, coefficients })
}

/// Process mean and covariance plus the noise variance. The marginal data
/// covariance is always `sigma_y + sigma2 I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlupInputs {
    pub mu_y: DVector<f64>,
    pub sigma_y: DMatrix<f64>,
    pub sigma2: f64,
}

impl BlupInputs {
    pub fn new(mu_y: DVector<f64>, sigma_y: DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let n = mu_y.len();
        if sigma_y.shape() != (n, n) {
            return Err(Error::DimensionMismatch(
                "process covariance does not match mean".into(),
            ));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma2 must be >= 0 (got {sigma2})")));
        }
        Ok(Self { mu_y, sigma_y, sigma2 })
    }

    pub fn sigma_z(&self) -> DMatrix<f64> {
        let mut s = self.sigma_y.clone();
        for i in 0..s.nrows() {
            s[(i, i)] += self.sigma2;
        }
        s
    }
}

/// BLUP together with the factor of `sigma_z`, so callers can reuse it.
#[derive(Debug, Clone)]
pub struct BlupFit {
    pub yhat: DVector<f64>,
    pub sigma_z: CholFactor,
}

impl BlupFit {
    /// `trace(sigma_y sigma_z^{-1})`, the effective degrees of freedom.
    pub fn effective_df(&self, inputs: &BlupInputs) -> f64 {
        self.sigma_z.solve_mat(&inputs.sigma_y).trace()
    }
}

pub fn blup_fit(z: &DVector<f64>, inputs: &BlupInputs) -> Result<BlupFit> {
    if z.len() != inputs.mu_y.len() {
        return Err(Error::DimensionMismatch("data and prior mean differ in length".into()));
    }
    let sigma_z = chol_factor(&inputs.sigma_z())?;
    let resid = z - &inputs.mu_y;
    let yhat = &inputs.mu_y + &inputs.sigma_y * sigma_z.solve(&resid);
    Ok(BlupFit { yhat, sigma_z })
}

pub fn blup(z: &DVector<f64>, inputs: &BlupInputs) -> Result<DVector<f64>> {
    blup_fit(z, inputs).map(|f| f.yhat)
}

/// Simple kriging at `s0` under an exponential covariance.
pub fn kriging_point<F>(
    s0: &[f64],
    z: &DVector<f64>,
    locs: &SpatialLocations,
    mu_fn: F,
    spec: &CovarianceSpec,
    sigma2: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if s0.len() != locs.dim() {
        return Err(Error::DimensionMismatch("prediction point dimension".into()));
    }
    if z.len() != locs.len() {
        return Err(Error::DimensionMismatch("data and locations differ in length".into()));
    }
    let mu_y = DVector::from_iterator(locs.len(), locs.iter().map(&mu_fn));
    let sigma_y = stats::exp_covariance(&stats::distance_matrix(locs), spec)?;
    let inputs = BlupInputs::new(mu_y, sigma_y, sigma2)?;
    let f = chol_factor(&inputs.sigma_z())?;
    let weights = f.solve(&(z - &inputs.mu_y));
    let cross = DVector::from_iterator(locs.len(), locs.iter().map(|s| spec.eval(stats::euclidean(s0, s))));
    Ok(mu_fn(s0) + cross.dot(&weights))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Coordinatewise mean, interpolated median and standard deviation.
pub fn posterior_summary(samples: &[DVector<f64>]) -> Result<PosteriorSummary> {
    let first = samples.first().ok_or(Error::EmptyInput("posterior samples"))?;
    let n = first.len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::DimensionMismatch("samples differ in length".into()));
    }
    let g = samples.len();
    let mut mean = Vec::with_capacity(n);
    let mut median = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    let mut column = vec![0.0; g];
    for i in 0..n {
        for (c, s) in column.iter_mut().zip(samples) {
            *c = s[i];
        }
        let m = column.iter().sum::<f64>() / g as f64;
        mean.push(m);
        sd.push(if g > 1 {
            stats::sample_variance(&column).sqrt()
        } else {
            0.0
        });
        column.sort_by(f64::total_cmp);
        median.push(stats::interpolate_sorted(&column, 0.5));
    }
    Ok(PosteriorSummary { mean, median, sd })
}
