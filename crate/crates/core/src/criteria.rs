//! Estimates of prediction error: training error, Mallows' Cp, the
//! covariance penalized error under the BLUP, K-fold CV and WAIC, plus the
//! uniform-augmentation quantities that rewrite any Gaussian-likelihood
//! posterior as a CPE-truncated one.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::{blup_fit, BlupInputs};
use crate::rng;
use crate::stats::{self, CovarianceSpec, SpatialLocations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Training,
    Cp,
    CpeBlup,
    KfoldCv,
    Waic,
}

/// Fit term and penalty of a penalized criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub fit: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub value: f64,
    pub kind: CriterionKind,
    pub components: Option<Components>,
}

impl CriterionValue {
    fn penalized(kind: CriterionKind, fit: f64, penalty: f64) -> Self {
        Self {
            value: fit + penalty,
            kind,
            components: Some(Components { fit, penalty }),
        }
    }
}

/// Sum of squared residuals.
pub fn training_error(z: &DVector<f64>, fitted: &DVector<f64>) -> Result<f64> {
    if z.len() != fitted.len() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} entries, fitted values {}",
            z.len(),
            fitted.len()
        )));
    }
    Ok((z - fitted).norm_squared())
}

/// `training_error + 2 sigma2 p` where `p` counts the nonzero coefficients.
pub fn mallows_cp(z: &DVector<f64>, fitted: &DVector<f64>, p: usize, sigma2: f64) -> Result<CriterionValue> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be > 0 (got {sigma2})")));
    }
    let fit = training_error(z, fitted)?;
    Ok(CriterionValue::penalized(
        CriterionKind::Cp,
        fit,
        2.0 * sigma2 * p as f64,
    ))
}

/// CPE of the BLUP for arbitrary process moments:
/// `|z - yhat|^2 + 2 sigma2 trace(sigma_y sigma_z^{-1})`.
pub fn cpe_for_inputs(z: &DVector<f64>, inputs: &BlupInputs) -> Result<CriterionValue> {
    let fit = blup_fit(z, inputs)?;
    let edf = fit.effective_df(inputs);
    let resid = training_error(z, &fit.yhat)?;
    Ok(CriterionValue::penalized(
        CriterionKind::CpeBlup,
        resid,
        2.0 * inputs.sigma2 * edf,
    ))
}

/// CPE of the BLUP under the spatial model with mean `X beta` and covariance
/// `tau2 exp(-decay |s_i - s_j|)`.
pub fn cpe_blup(
    z: &DVector<f64>,
    x: &DMatrix<f64>,
    locs: &SpatialLocations,
    sigma2: f64,
    beta: &DVector<f64>,
    tau2: f64,
    decay: f64,
) -> Result<CriterionValue> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be > 0 (got {sigma2})")));
    }
    if x.nrows() != z.len() || x.ncols() != beta.len() || locs.len() != z.len() {
        return Err(Error::DimensionMismatch("cpe_blup operands disagree".into()));
    }
    let spec = CovarianceSpec::exponential(tau2, decay)?;
    let sigma_y = stats::exp_covariance(&stats::distance_matrix(locs), &spec)?;
    let inputs = BlupInputs::new(x * beta, sigma_y, sigma2)?;
    cpe_for_inputs(z, &inputs)
}

/// K-fold cross-validation error.
///
/// Indices are shuffled with the stream keyed by `seed`, then cut into `k`
/// contiguous folds whose sizes differ by at most one. `fit_predict` receives
/// the training and validation indices and returns predictions for the
/// validation indices. The value is the average over folds of the fold's
/// mean squared validation error; `k = n` gives leave-one-out.
pub fn kfold_cv_err<F>(z: &DVector<f64>, k: usize, seed: u64, mut fit_predict: F) -> Result<CriterionValue>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<f64>>,
{
    let n = z.len();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("fold count {k} outside [2, {n}]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[0x006b_666f_6c64]));

    let mut total = 0.0;
    let mut start = 0;
    for fold in 0..k {
        let size = n / k + usize::from(fold < n % k);
        let test = &order[start..start + size];
        let train: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
        start += size;

        let pred = fit_predict(&train, test)?;
        if pred.len() != test.len() {
            return Err(Error::DimensionMismatch(format!(
                "fold {fold}: {} predictions for {} validation points",
                pred.len(),
                test.len()
            )));
        }
        let sse: f64 = test.iter().zip(&pred).map(|(&i, p)| (z[i] - p).powi(2)).sum();
        total += sse / size as f64;
    }
    Ok(CriterionValue {
        value: total / k as f64,
        kind: CriterionKind::KfoldCv,
        components: None,
    })
}

/// WAIC from a pointwise log-likelihood matrix with one row per posterior
/// draw and one column per observation. Uses the posterior-variance penalty.
/// `components.fit` is `-2 lppd` and `components.penalty` is `2 p_waic`.
pub fn waic(loglik: &DMatrix<f64>) -> Result<CriterionValue> {
    let (g, n) = loglik.shape();
    if g < 2 {
        return Err(Error::InvalidArgument("WAIC needs at least two posterior draws".into()));
    }
    if n == 0 {
        return Err(Error::EmptyInput("pointwise log-likelihood"));
    }
    if loglik.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite pointwise log-likelihood".into()));
    }
    let log_g = (g as f64).ln();
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for col in loglik.column_iter() {
        let values: Vec<f64> = col.iter().copied().collect();
        lppd += stats::log_sum_exp(&values) - log_g;
        p_waic += stats::sample_variance(&values);
    }
    Ok(CriterionValue::penalized(
        CriterionKind::Waic,
        -2.0 * lppd,
        2.0 * p_waic,
    ))
}

/// Quantities behind the uniform augmentation of a Gaussian likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationQuantities {
    /// Power applied to the likelihood.
    pub r: f64,
    /// `log f(z | y, sigma2)`.
    pub log_f: f64,
    /// `f^r min(1, f^(1 - r))`.
    pub quantity: f64,
}

pub fn augmentation_quantities(
    z: &DVector<f64>,
    y: &DVector<f64>,
    sigma2: f64,
    cpe: f64,
) -> Result<AugmentationQuantities> {
    if z.len() != y.len() {
        return Err(Error::DimensionMismatch("data and mean differ in length".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be > 0 (got {sigma2})")));
    }
    let log_f = stats::iso_normal_logpdf(z, y, sigma2);
    if log_f == 0.0 {
        return Err(Error::InvalidArgument(
            "log-likelihood is exactly zero; r is undefined".into(),
        ));
    }
    let r = cpe / (2.0 * log_f) + 1.0;
    // f^(1 - r) = exp(-cpe / 2)
    let log_tail = (-0.5 * cpe).min(0.0);
    Ok(AugmentationQuantities {
        r,
        log_f,
        quantity: (r * log_f + log_tail).exp(),
    })
}

/// Implicit CPE bound `-2 log u` for a uniform auxiliary draw `u`.
pub fn kappa_star(u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::InvalidArgument(format!("u = {u} outside (0, 1]")));
    }
    Ok(-2.0 * u.ln())
}
