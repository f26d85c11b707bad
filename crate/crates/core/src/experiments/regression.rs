//! Subset selection by Mallows' Cp, and BMA under two model priors, on
//! simulated three-covariate regressions.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bma::{self, CandidateModel, REGRESSION_FLAGS};
use crate::criteria::mallows_cp;
use crate::error::{Error, Result};
use crate::predictors::ols_fit;
use crate::rng;

const CP_STREAM: u64 = 0x4350;
const BMA_STREAM: u64 = 0x424d41;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDesign {
    pub n: usize,
    /// Intercept and three slopes.
    pub beta: [f64; 4],
}

impl Default for RegressionDesign {
    fn default() -> Self {
        Self {
            n: 200,
            beta: [2.0, 1.0, 1.0, 0.0],
        }
    }
}

/// One simulated replicate: covariates, true mean and noisy data.
#[derive(Debug, Clone)]
pub struct RegressionSample {
    pub covariates: DMatrix<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

pub fn simulate_regression<R: Rng + ?Sized>(design: &RegressionDesign, sigma: f64, rng: &mut R) -> RegressionSample {
    let n = design.n;
    let covariates = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = design.beta;
    let y = DVector::from_fn(n, |i, _| {
        b[0] + b[1] * covariates[(i, 0)] + b[2] * covariates[(i, 1)] + b[3] * covariates[(i, 2)]
    });
    let z = DVector::from_fn(n, |i, _| y[i] + sigma * rng.sample::<f64, _>(StandardNormal));
    RegressionSample { covariates, y, z }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be positive (got {sigma})")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpExperimentConfig {
    pub replicates: usize,
    pub sigmas: Vec<f64>,
    pub design: RegressionDesign,
    pub seed: u64,
}

impl Default for CpExperimentConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            sigmas: vec![0.5, 1.0, 2.0, 3.5],
            design: RegressionDesign::default(),
            seed: 0,
        }
    }
}

/// How often each model index won, at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRow {
    pub sigma: f64,
    pub replicates: usize,
    /// `counts[b - 1]` is the number of replicates selecting model `b`.
    pub counts: Vec<usize>,
}

impl SelectionRow {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.replicates as f64).collect()
    }

    pub fn frequency(&self, model: usize) -> f64 {
        self.counts[model - 1] as f64 / self.replicates as f64
    }
}

/// One-based index of the model minimising Cp (first on ties).
pub fn select_by_cp(covariates: &DMatrix<f64>, z: &DVector<f64>, sigma2: f64) -> Result<usize> {
    let mut best = (f64::INFINITY, 0);
    for (k, flags) in REGRESSION_FLAGS.iter().enumerate() {
        let x = bma::design_from_flags(covariates, flags)?;
        let fit = ols_fit(&x, z)?;
        let cp = mallows_cp(z, &fit.fitted, x.ncols(), sigma2)?.value;
        if cp < best.0 {
            best = (cp, k + 1);
        }
    }
    Ok(best.1)
}

pub fn run_cp_experiment(config: &CpExperimentConfig) -> Result<Vec<SelectionRow>> {
    if config.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    config.sigmas.iter().try_for_each(|&s| check_sigma(s))?;
    config
        .sigmas
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let picks = (0..config.replicates)
                .into_par_iter()
                .map(|rep| {
                    let mut r = rng::stream(config.seed, &[CP_STREAM, si as u64, rep as u64]);
                    let sample = simulate_regression(&config.design, sigma, &mut r);
                    select_by_cp(&sample.covariates, &sample.z, sigma * sigma)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut counts = vec![0; REGRESSION_FLAGS.len()];
            for b in picks {
                counts[b - 1] += 1;
            }
            Ok(SelectionRow {
                sigma,
                replicates: config.replicates,
                counts,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmaExperimentConfig {
    pub replicates: usize,
    pub sigma: f64,
    pub design: RegressionDesign,
    pub prior_var: f64,
    /// One-based models sharing the restricted prior's mass.
    pub restricted_support: Vec<usize>,
    pub seed: u64,
}

impl Default for BmaExperimentConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            sigma: 2.0,
            design: RegressionDesign::default(),
            prior_var: bma::DEFAULT_PRIOR_VAR,
            restricted_support: vec![5, 8],
            seed: 0,
        }
    }
}

/// `sum (y - yhat_uniform)^2 - sum (y - yhat_restricted)^2` per replicate.
pub fn run_bma_experiment(config: &BmaExperimentConfig) -> Result<Vec<f64>> {
    if config.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    check_sigma(config.sigma)?;
    let count = REGRESSION_FLAGS.len();
    let uniform = bma::uniform_prior(count);
    let restricted = bma::restricted_prior(count, &config.restricted_support)?;
    let sigma2 = config.sigma * config.sigma;
    (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::stream(config.seed, &[BMA_STREAM, rep as u64]);
            let sample = simulate_regression(&config.design, config.sigma, &mut r);
            let models: Vec<CandidateModel> = bma::regression_candidates(&sample.covariates, &uniform)?;
            let log_marginals = models
                .iter()
                .map(|m| bma::log_marginal_likelihood(&sample.z, m, config.prior_var, sigma2))
                .collect::<Result<Vec<_>>>()?;
            let means = models
                .iter()
                .map(|m| bma::posterior_mean(&sample.z, m, config.prior_var, sigma2))
                .collect::<Result<Vec<_>>>()?;
            let yhat_v = bma::mixture_mean(&bma::weights_from_log_marginals(&log_marginals, &uniform)?, &means)?;
            let yhat_w = bma::mixture_mean(&bma::weights_from_log_marginals(&log_marginals, &restricted)?, &means)?;
            Ok((&sample.y - yhat_v).norm_squared() - (&sample.y - yhat_w).norm_squared())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_sum_to_one() {
        let cfg = CpExperimentConfig {
            replicates: 40,
            sigmas: vec![1.0, 3.5],
            seed: 3,
            ..Default::default()
        };
        for row in run_cp_experiment(&cfg).unwrap() {
            assert_eq!(row.counts.iter().sum::<usize>(), 40);
            assert_eq!(row.frequencies().iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn null_signal_prefers_intercept_only() {
        let cfg = CpExperimentConfig {
            replicates: 200,
            sigmas: vec![1.0],
            design: RegressionDesign {
                n: 200,
                beta: [2.0, 0.0, 0.0, 0.0],
            },
            seed: 5,
        };
        let row = &run_cp_experiment(&cfg).unwrap()[0];
        let best = (1..=8).max_by_key(|&b| row.counts[b - 1]).unwrap();
        assert_eq!(best, 1);
    }

    #[test]
    fn strong_signal_selects_true_model_often() {
        let cfg = CpExperimentConfig {
            replicates: 100,
            sigmas: vec![1.0],
            seed: 11,
            ..Default::default()
        };
        let row = &run_cp_experiment(&cfg).unwrap()[0];
        assert!(row.frequency(5) > 0.7);
        assert!(row.frequency(5) + row.frequency(8) == 1.0);
    }

    #[test]
    fn identical_priors_give_zero_differences() {
        let cfg = BmaExperimentConfig {
            replicates: 20,
            restricted_support: (1..=8).collect(),
            seed: 2,
            ..Default::default()
        };
        assert!(run_bma_experiment(&cfg).unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn bma_experiment_is_reproducible() {
        let cfg = BmaExperimentConfig {
            replicates: 1,
            seed: 17,
            ..Default::default()
        };
        let a = run_bma_experiment(&cfg).unwrap();
        let b = run_bma_experiment(&cfg).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn invalid_configs() {
        assert!(run_cp_experiment(&CpExperimentConfig {
            replicates: 0,
            ..Default::default()
        })
        .is_err());
        assert!(run_bma_experiment(&BmaExperimentConfig {
            sigma: -1.0,
            ..Default::default()
        })
        .is_err());
    }
}
