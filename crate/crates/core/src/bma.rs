//! Bayesian model averaging over linear regression candidates.
//!
//! Each candidate has `y = X_b beta` with `beta ~ N(0, v I)`, so marginally
//! `z ~ N(0, v X_b X_b' + sigma2 I)` and the posterior mean of `y` is the ridge
//! fit `X_b (X_b'X_b + sigma2/v I)^{-1} X_b' z`. Everything is evaluated in the
//! `p x p` form, which keeps the 200-observation experiments cheap.

use crate::error::{Error, Result};
use crate::stats::{self, LN_2PI};
use nalgebra::{DMatrix, DVector};

/// Default prior variance of the regression coefficients.
pub const DEFAULT_PRIOR_VAR: f64 = 10.0;

/// Inclusion flags for the eight candidates, in index order 1..=8.
pub const REGRESSION_FLAGS: [[bool; 3]; 8] = [
    [false, false, false],
    [true, false, false],
    [false, true, false],
    [false, false, true],
    [true, true, false],
    [true, false, true],
    [false, true, true],
    [true, true, true],
];

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    /// One-based model index.
    pub index: usize,
    pub flags: Vec<bool>,
    pub design: DMatrix<f64>,
    pub prior_mass: f64,
}

impl CandidateModel {
    pub fn new(index: usize, flags: Vec<bool>, design: DMatrix<f64>, prior_mass: f64) -> Result<Self> {
        if !(prior_mass >= 0.0 && prior_mass.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prior mass {prior_mass} must be nonnegative"
            )));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design has non-finite entries".into()));
        }
        Ok(Self {
            index,
            flags,
            design,
            prior_mass,
        })
    }

    /// Number of regression coefficients.
    pub fn p(&self) -> usize {
        self.design.ncols()
    }
}

/// Intercept plus the covariate columns selected by `flags`.
pub fn design_from_flags(covariates: &DMatrix<f64>, flags: &[bool]) -> Result<DMatrix<f64>> {
    if flags.len() != covariates.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} flags for {} covariates",
            flags.len(),
            covariates.ncols()
        )));
    }
    let n = covariates.nrows();
    let chosen: Vec<usize> = (0..flags.len()).filter(|&j| flags[j]).collect();
    Ok(DMatrix::from_fn(n, chosen.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            covariates[(i, chosen[j - 1])]
        }
    }))
}

/// The eight intercept-plus-subset models over three covariates.
pub fn regression_candidates(covariates: &DMatrix<f64>, priors: &[f64]) -> Result<Vec<CandidateModel>> {
    if covariates.ncols() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "expected 3 covariates, got {}",
            covariates.ncols()
        )));
    }
    validate_priors(priors, REGRESSION_FLAGS.len())?;
    REGRESSION_FLAGS
        .iter()
        .zip(priors)
        .enumerate()
        .map(|(k, (flags, &mass))| {
            CandidateModel::new(k + 1, flags.to_vec(), design_from_flags(covariates, flags)?, mass)
        })
        .collect()
}

/// Uniform prior mass over `count` models.
pub fn uniform_prior(count: usize) -> Vec<f64> {
    vec![1.0 / count as f64; count]
}

/// Mass split evenly over the listed one-based indices.
pub fn restricted_prior(count: usize, support: &[usize]) -> Result<Vec<f64>> {
    if support.is_empty() || support.iter().any(|&k| k == 0 || k > count) {
        return Err(Error::InvalidArgument(format!(
            "support {support:?} outside 1..={count}"
        )));
    }
    let mut prior = vec![0.0; count];
    for &k in support {
        prior[k - 1] = 1.0 / support.len() as f64;
    }
    Ok(prior)
}

fn validate_priors(priors: &[f64], count: usize) -> Result<()> {
    if priors.len() != count {
        return Err(Error::DimensionMismatch(format!(
            "{} prior masses for {count} models",
            priors.len()
        )));
    }
    if priors.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument("prior masses must be nonnegative".into()));
    }
    let total: f64 = priors.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroWeight);
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("prior masses sum to {total}")));
    }
    Ok(())
}

fn check_inputs(z: &DVector<f64>, model: &CandidateModel, v: f64, sigma2: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("prior variance {v} must be positive")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma2 {sigma2} must be positive")));
    }
    if z.len() != model.design.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "z has {} entries, model {} has {} rows",
            z.len(),
            model.index,
            model.design.nrows()
        )));
    }
    Ok(())
}

/// Factor of `X'X + (sigma2/v) I` together with `X'z`.
fn ridge_system(z: &DVector<f64>, x: &DMatrix<f64>, v: f64, sigma2: f64) -> Result<(stats::CholFactor, DVector<f64>)> {
    let mut a = x.tr_mul(x);
    for j in 0..a.nrows() {
        a[(j, j)] += sigma2 / v;
    }
    Ok((stats::chol_factor(&a)?, x.tr_mul(z)))
}

/// `log N(z; 0, v X X' + sigma2 I)`.
pub fn log_marginal_likelihood(z: &DVector<f64>, model: &CandidateModel, v: f64, sigma2: f64) -> Result<f64> {
    check_inputs(z, model, v, sigma2)?;
    let n = z.len() as f64;
    let p = model.p();
    let zz = z.norm_squared();
    if p == 0 {
        return Ok(-0.5 * (n * (LN_2PI + sigma2.ln()) + zz / sigma2));
    }
    let (f, xtz) = ridge_system(z, &model.design, v, sigma2)?;
    // det(v XX' + s I) = s^n det(I + v/s X'X) = s^(n-p) v^p det(X'X + s/v I)
    let log_det = (n - p as f64) * sigma2.ln() + p as f64 * v.ln() + f.log_det();
    let quad = (zz - f.quad_form_inv(&xtz)) / sigma2;
    Ok(-0.5 * (n * LN_2PI + log_det + quad))
}

/// Posterior mean of `y = X beta` under one candidate.
pub fn posterior_mean(z: &DVector<f64>, model: &CandidateModel, v: f64, sigma2: f64) -> Result<DVector<f64>> {
    check_inputs(z, model, v, sigma2)?;
    if model.p() == 0 {
        return Ok(DVector::zeros(z.len()));
    }
    let (f, xtz) = ridge_system(z, &model.design, v, sigma2)?;
    Ok(&model.design * f.solve(&xtz))
}

/// Softmax of `log_marginal + log prior`; zero-prior models get weight 0.
pub fn weights_from_log_marginals(log_marginals: &[f64], priors: &[f64]) -> Result<Vec<f64>> {
    if log_marginals.is_empty() {
        return Err(Error::EmptyInput("models"));
    }
    if log_marginals.len() != priors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} log-marginals for {} priors",
            log_marginals.len(),
            priors.len()
        )));
    }
    if priors.iter().all(|&p| p <= 0.0) {
        return Err(Error::ZeroWeight);
    }
    let scores: Vec<f64> = log_marginals
        .iter()
        .zip(priors)
        .map(|(&l, &p)| if p > 0.0 { l + p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let lse = stats::log_sum_exp(&scores);
    Ok(scores.iter().map(|s| (s - lse).exp()).collect())
}

pub fn bma_weights(z: &DVector<f64>, models: &[CandidateModel], v: f64, sigma2: f64) -> Result<Vec<f64>> {
    let log_marginals = models
        .iter()
        .map(|m| log_marginal_likelihood(z, m, v, sigma2))
        .collect::<Result<Vec<_>>>()?;
    let priors: Vec<f64> = models.iter().map(|m| m.prior_mass).collect();
    weights_from_log_marginals(&log_marginals, &priors)
}

/// `sum_b weight_b * mean_b`
pub fn mixture_mean(weights: &[f64], means: &[DVector<f64>]) -> Result<DVector<f64>> {
    if weights.len() != means.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} means",
            weights.len(),
            means.len()
        )));
    }
    let first = means.first().ok_or(Error::EmptyInput("means"))?;
    let mut out = DVector::zeros(first.len());
    for (w, m) in weights.iter().zip(means) {
        if m.len() != out.len() {
            return Err(Error::DimensionMismatch("component means differ in length".into()));
        }
        if *w != 0.0 {
            out.axpy(*w, m, 1.0);
        }
    }
    Ok(out)
}

pub fn bma_predict(z: &DVector<f64>, models: &[CandidateModel], v: f64, sigma2: f64) -> Result<DVector<f64>> {
    let weights = bma_weights(z, models, v, sigma2)?;
    let means = models
        .iter()
        .map(|m| posterior_mean(z, m, v, sigma2))
        .collect::<Result<Vec<_>>>()?;
    mixture_mean(&weights, &means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_matrix(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
        let mut r = rng::stream(seed, &[0]);
        DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal))
    }

    fn model(index: usize, design: DMatrix<f64>, mass: f64) -> CandidateModel {
        let p = design.ncols();
        CandidateModel::new(index, vec![true; p], design, mass).unwrap()
    }

    fn dense_log_marginal(z: &DVector<f64>, x: &DMatrix<f64>, v: f64, sigma2: f64) -> f64 {
        let n = z.len();
        let cov = x * x.transpose() * v + DMatrix::identity(n, n) * sigma2;
        stats::mvn_logpdf(z, &DVector::zeros(n), &cov).unwrap()
    }

    fn dense_posterior_mean(z: &DVector<f64>, x: &DMatrix<f64>, v: f64, sigma2: f64) -> DVector<f64> {
        let n = z.len();
        let sy = x * x.transpose() * v;
        let sz = &sy + DMatrix::identity(n, n) * sigma2;
        sy * sz.try_inverse().unwrap() * z
    }

    #[test]
    fn intercept_only_zero_data() {
        let n = 6;
        let m = model(1, DMatrix::from_element(n, 1, 1.0), 1.0);
        let z = DVector::zeros(n);
        let cov = DMatrix::from_element(n, n, 10.0) + DMatrix::identity(n, n) * 0.5;
        let expected = stats::mvn_logpdf(&z, &z, &cov).unwrap();
        assert_abs_diff_eq!(
            log_marginal_likelihood(&z, &m, 10.0, 0.5).unwrap(),
            expected,
            epsilon = 1e-10
        );
    }

    #[test]
    fn vanishing_prior_variance() {
        let n = 5;
        let x = gaussian_matrix(1, n, 2);
        let z = gaussian_matrix(2, n, 1).column(0).into_owned();
        let m = model(1, x, 1.0);
        let expected = stats::iso_normal_logpdf(&z, &DVector::zeros(n), 0.7);
        assert_abs_diff_eq!(
            log_marginal_likelihood(&z, &m, 1e-12, 0.7).unwrap(),
            expected,
            epsilon = 1e-8
        );
    }

    #[test]
    fn matches_dense_covariance_route() {
        let n = 30;
        let x = gaussian_matrix(3, n, 4);
        let z = gaussian_matrix(4, n, 1).column(0).into_owned() * 3.0;
        let m = model(1, x.clone(), 1.0);
        let fast = log_marginal_likelihood(&z, &m, 10.0, 2.0).unwrap();
        assert_abs_diff_eq!(fast, dense_log_marginal(&z, &x, 10.0, 2.0), epsilon = 1e-9);
        let mean = posterior_mean(&z, &m, 10.0, 2.0).unwrap();
        assert!((mean - dense_posterior_mean(&z, &x, 10.0, 2.0)).abs().max() < 1e-10);
    }

    #[test]
    fn matches_two_dimensional_quadrature() {
        let n = 5;
        let (v, sigma2) = (2.0, 0.8);
        let x = gaussian_matrix(5, n, 2);
        let z = gaussian_matrix(6, n, 1).column(0).into_owned();
        let m = model(1, x.clone(), 1.0);

        // Trapezoid rule over beta, centred on the posterior mode.
        let mode = (x.transpose() * &x + DMatrix::identity(2, 2) * (sigma2 / v))
            .try_inverse()
            .unwrap()
            * x.transpose()
            * &z;
        let half_width = 8.0;
        let steps = 800;
        let h = 2.0 * half_width / steps as f64;
        let log_integrand = |b: &DVector<f64>| {
            stats::iso_normal_logpdf(&z, &(&x * b), sigma2) + stats::iso_normal_logpdf(b, &DVector::zeros(2), v)
        };
        let peak = log_integrand(&mode);
        let mut total = 0.0;
        for i in 0..=steps {
            for j in 0..=steps {
                let b = DVector::from_vec(vec![
                    mode[0] - half_width + i as f64 * h,
                    mode[1] - half_width + j as f64 * h,
                ]);
                let wi = if i == 0 || i == steps { 0.5 } else { 1.0 };
                let wj = if j == 0 || j == steps { 0.5 } else { 1.0 };
                total += wi * wj * (log_integrand(&b) - peak).exp();
            }
        }
        let quadrature = peak + (total * h * h).ln();
        assert_abs_diff_eq!(
            log_marginal_likelihood(&z, &m, v, sigma2).unwrap(),
            quadrature,
            epsilon = 1e-4
        );
    }

    #[test]
    fn single_model_has_unit_weight() {
        let z = gaussian_matrix(7, 8, 1).column(0).into_owned();
        let m = model(1, gaussian_matrix(8, 8, 2), 1.0);
        assert_eq!(bma_weights(&z, std::slice::from_ref(&m), 10.0, 1.0).unwrap(), vec![1.0]);
        let pred = bma_predict(&z, std::slice::from_ref(&m), 10.0, 1.0).unwrap();
        assert!((pred - posterior_mean(&z, &m, 10.0, 1.0).unwrap()).abs().max() < 1e-14);
    }

    #[test]
    fn identical_models_split_evenly() {
        let z = gaussian_matrix(9, 8, 1).column(0).into_owned();
        let x = gaussian_matrix(10, 8, 2);
        let models = [model(1, x.clone(), 0.5), model(2, x, 0.5)];
        let w = bma_weights(&z, &models, 10.0, 1.0).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn restricted_prior_zeroes_excluded_models() {
        let n = 40;
        let cov = gaussian_matrix(11, n, 3);
        let z = gaussian_matrix(12, n, 1).column(0).into_owned();
        let prior = restricted_prior(8, &[5, 8]).unwrap();
        assert_eq!(prior, vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5]);
        let models = regression_candidates(&cov, &prior).unwrap();
        let w = bma_weights(&z, &models, 10.0, 4.0).unwrap();
        for (k, wk) in w.iter().enumerate() {
            if k != 4 && k != 7 {
                assert_eq!(*wk, 0.0);
            }
        }
        assert_abs_diff_eq!(w[4] + w[7], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_priors_rejected() {
        assert!(matches!(
            weights_from_log_marginals(&[0.0, 1.0], &[0.0, 0.0]),
            Err(Error::ZeroWeight)
        ));
        assert!(weights_from_log_marginals(&[], &[]).is_err());
    }

    #[test]
    fn candidate_designs_follow_flags() {
        let cov = gaussian_matrix(13, 10, 3);
        let models = regression_candidates(&cov, &uniform_prior(8)).unwrap();
        let widths: Vec<usize> = models.iter().map(|m| m.p()).collect();
        assert_eq!(widths, vec![1, 2, 2, 2, 3, 3, 3, 4]);
        assert_eq!(models[5].design.column(1), cov.column(0));
        assert_eq!(models[5].design.column(2), cov.column(2));
        assert!(models[0].design.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn two_model_mixture_matches_components() {
        let n = 12;
        let (v, sigma2) = (10.0, 1.5);
        let z = gaussian_matrix(14, n, 1).column(0).into_owned();
        let xa = gaussian_matrix(15, n, 1);
        let xb = gaussian_matrix(16, n, 3);
        let models = [model(1, xa.clone(), 0.3), model(2, xb.clone(), 0.7)];
        let la = dense_log_marginal(&z, &xa, v, sigma2) + 0.3f64.ln();
        let lb = dense_log_marginal(&z, &xb, v, sigma2) + 0.7f64.ln();
        let wa = 1.0 / (1.0 + (lb - la).exp());
        let expected =
            dense_posterior_mean(&z, &xa, v, sigma2) * wa + dense_posterior_mean(&z, &xb, v, sigma2) * (1.0 - wa);
        let got = bma_predict(&z, &models, v, sigma2).unwrap();
        assert!((got - expected).abs().max() < 1e-10);
    }

    #[test]
    fn forced_weights_select_component() {
        let a = DVector::from_vec(vec![1.0, 2.0]);
        let b = DVector::from_vec(vec![-3.0, 5.0]);
        assert_eq!(mixture_mean(&[1.0, 0.0], &[a.clone(), b]).unwrap(), a);
    }

    proptest! {
        #[test]
        fn weights_shift_invariant(lm in prop::collection::vec(-50.0f64..50.0, 1..8), shift in -1e3f64..1e3) {
            let priors = uniform_prior(lm.len());
            let shifted: Vec<f64> = lm.iter().map(|l| l + shift).collect();
            let a = weights_from_log_marginals(&lm, &priors).unwrap();
            let b = weights_from_log_marginals(&shifted, &priors).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-10);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mixture_linear_in_weights(w1 in prop::collection::vec(0.0f64..1.0, 3), w2 in prop::collection::vec(0.0f64..1.0, 3), t in 0.0f64..1.0) {
            let means: Vec<DVector<f64>> = (0..3).map(|k| gaussian_matrix(20 + k, 4, 1).column(0).into_owned()).collect();
            let wt: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let lhs = mixture_mean(&wt, &means).unwrap();
            let rhs = mixture_mean(&w1, &means).unwrap() * t + mixture_mean(&w2, &means).unwrap() * (1.0 - t);
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }

        #[test]
        fn dominant_prior_recovers_component(eps in 1e-14f64..1e-10) {
            let n = 10;
            let z = gaussian_matrix(30, n, 1).column(0).into_owned();
            let xa = gaussian_matrix(31, n, 2);
            let xb = gaussian_matrix(32, n, 1);
            let models = [model(1, xa.clone(), 1.0 - eps), model(2, xb, eps)];
            let pred = bma_predict(&z, &models, 10.0, 1.0).unwrap();
            let target = posterior_mean(&z, &models[0], 10.0, 1.0).unwrap();
            prop_assert!((pred - target).abs().max() < 1e-6);
        }
    }
}
