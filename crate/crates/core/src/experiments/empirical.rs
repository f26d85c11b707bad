//! Factorial study of truncation level and signal-to-noise ratio.
//!
//! Data are simulated around a fixed signal `L`; the truncated fit is scored
//! against the untruncated one by the difference in squared prediction error.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{fit_truncated, point_prediction, AnovaTable, KappaChoice, McmcSettings, PointPredictor};
use crate::io::Dataset;
use crate::rng;
use crate::sampler::{default_decay_levels, ModelSpec};
use crate::stats::{self, CovarianceSpec, SpatialLocations};

const EMPIRICAL_STREAM: u64 = 0x454d50;
const SYNTHETIC_STREAM: u64 = 0x53594e;

/// Generator for the stand-in dataset used when no data file is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub tau2: f64,
    pub decay: f64,
    /// Intercept and two covariate slopes.
    pub beta: [f64; 3],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 40,
            tau2: 1.0,
            decay: 5.0,
            beta: [1.0, 0.5, -0.5],
        }
    }
}

/// Unit-square locations, two standard normal covariates and
/// `L = X beta + GP(tau2 exp(-decay d))`.
pub fn synthetic_dataset(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if spec.n < 2 {
        return Err(Error::InvalidArgument("synthetic dataset needs n >= 2".into()));
    }
    let mut r = rng::stream(seed, &[SYNTHETIC_STREAM]);
    let rows: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| vec![r.random::<f64>(), r.random::<f64>()])
        .collect();
    let locations = SpatialLocations::from_rows(&rows)?;
    let covariates = DMatrix::from_fn(spec.n, 2, |_, _| r.sample::<f64, _>(StandardNormal));
    let cov = stats::exp_covariance(
        &stats::distance_matrix(&locations),
        &CovarianceSpec::exponential(spec.tau2, spec.decay)?,
    )?;
    let field = stats::sample_mvn(&DVector::zeros(spec.n), &cov, &mut r)?;
    let b = spec.beta;
    let response = DVector::from_fn(spec.n, |i, _| {
        b[0] + b[1] * covariates[(i, 0)] + b[2] * covariates[(i, 1)] + field[i]
    });
    Dataset::new(locations, response, covariates, vec!["cov1".into(), "cov2".into()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub z: DVector<f64>,
    pub sigma2: f64,
    /// The true latent vector, equal to the signal.
    pub y: DVector<f64>,
}

/// `z ~ N(L, sigma2 I)` with `sigma2` set from the signal-to-noise ratio.
pub fn simulate_dataset<R: Rng + ?Sized>(signal: &DVector<f64>, snr: f64, rng: &mut R) -> Result<SimulatedData> {
    let sigma2 = stats::snr_to_sigma2(signal.as_slice(), snr)?;
    let sd = sigma2.sqrt();
    let z = DVector::from_fn(signal.len(), |i, _| {
        signal[i] + sd * rng.sample::<f64, _>(StandardNormal)
    });
    Ok(SimulatedData {
        z,
        sigma2,
        y: signal.clone(),
    })
}

/// `sum (y - yhat_tc)^2 - sum (y - yhat_m)^2`; negative favours truncation.
pub fn response_metric(y: &DVector<f64>, yhat_tc: &DVector<f64>, yhat_m: &DVector<f64>) -> Result<f64> {
    if yhat_tc.len() != y.len() || yhat_m.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "lengths {}, {}, {}",
            y.len(),
            yhat_tc.len(),
            yhat_m.len()
        )));
    }
    Ok((y - yhat_tc).norm_squared() - (y - yhat_m).norm_squared())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorialDesign {
    pub snr_levels: Vec<f64>,
    pub d_levels: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for FactorialDesign {
    fn default() -> Self {
        Self {
            snr_levels: vec![3.0, 5.0, 10.0],
            d_levels: vec![0.1, 0.5, 0.9],
            replicates: 100,
            seed: 0,
        }
    }
}

impl FactorialDesign {
    pub fn validate(&self) -> Result<()> {
        if self.snr_levels.is_empty() || self.d_levels.is_empty() {
            return Err(Error::InvalidArgument("factor levels must be nonempty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be >= 1".into()));
        }
        if self.snr_levels.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("SNR levels must be positive".into()));
        }
        if self.d_levels.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::InvalidArgument("percentile levels must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub design: FactorialDesign,
    pub mcmc: McmcSettings,
    pub predictor: PointPredictor,
}

impl EmpiricalConfig {
    /// 30 replicates of 4000-iteration chains.
    pub fn desk(seed: u64) -> Self {
        Self {
            design: FactorialDesign {
                replicates: 30,
                seed,
                ..Default::default()
            },
            mcmc: McmcSettings::desk(),
            predictor: PointPredictor::Latent,
        }
    }

    /// 100 replicates of 12000-iteration chains.
    pub fn paper(seed: u64) -> Self {
        Self {
            design: FactorialDesign {
                seed,
                ..Default::default()
            },
            mcmc: McmcSettings::paper(),
            predictor: PointPredictor::Latent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseRow {
    pub snr: f64,
    pub d: f64,
    pub replicate: usize,
    pub sigma2: f64,
    pub kappa: f64,
    pub sse_truncated: f64,
    pub sse_untruncated: f64,
    pub response: f64,
    pub stalls: u64,
    pub warm_start: bool,
}

/// One row per (SNR, d, replicate), in design order.
pub fn run_empirical_simulation(config: &EmpiricalConfig, data: &Dataset) -> Result<Vec<ResponseRow>> {
    let design = &config.design;
    design.validate()?;
    let signal = &data.response;
    let x = data.design();
    let specs = design
        .snr_levels
        .iter()
        .map(|&snr| {
            let sigma2 = stats::snr_to_sigma2(signal.as_slice(), snr)?;
            ModelSpec::new(x.clone(), data.locations.clone(), sigma2, default_decay_levels())
        })
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize, usize)> = (0..design.snr_levels.len())
        .flat_map(|si| {
            (0..design.d_levels.len()).flat_map(move |di| (0..design.replicates).map(move |rep| (si, di, rep)))
        })
        .collect();

    tasks
        .into_par_iter()
        .map(|(si, di, rep)| {
            let (snr, d) = (design.snr_levels[si], design.d_levels[di]);
            let key = |purpose: u64| [EMPIRICAL_STREAM, si as u64, di as u64, rep as u64, purpose];
            let run = || -> Result<ResponseRow> {
                let sim = simulate_dataset(signal, snr, &mut rng::stream(design.seed, &key(0)))?;
                let model = specs[si].bind(&sim.z)?;
                let fit = fit_truncated(
                    &model,
                    KappaChoice::Percentile(d),
                    &config.mcmc,
                    &mut rng::stream(design.seed, &key(1)),
                    &mut rng::stream(design.seed, &key(2)),
                )?;
                let yhat_m = point_prediction(&fit.untruncated, &model, config.predictor)?;
                let yhat_tc = point_prediction(&fit.truncated, &model, config.predictor)?;
                let sse_truncated = (&sim.y - &yhat_tc).norm_squared();
                let sse_untruncated = (&sim.y - &yhat_m).norm_squared();
                Ok(ResponseRow {
                    snr,
                    d,
                    replicate: rep,
                    sigma2: sim.sigma2,
                    kappa: fit.kappa,
                    sse_truncated,
                    sse_untruncated,
                    response: response_metric(&sim.y, &yhat_tc, &yhat_m)?,
                    stalls: fit.truncated.stall_count,
                    warm_start: fit.warm_start,
                })
            };
            run().map_err(|e| e.context(format!("cell (snr={snr}, d={d}), replicate {rep}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub snr: f64,
    pub d: f64,
    pub count: usize,
    pub mean_response: f64,
    pub se: f64,
}

/// Mean response and its standard error per (SNR, d) cell, in first-seen order.
pub fn cell_summaries(rows: &[ResponseRow]) -> Vec<CellSummary> {
    let mut cells: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    for r in rows {
        match cells.iter_mut().find(|c| c.0 == r.snr && c.1 == r.d) {
            Some(c) => c.2.push(r.response),
            None => cells.push((r.snr, r.d, vec![r.response])),
        }
    }
    cells
        .into_iter()
        .map(|(snr, d, v)| {
            let (mean_response, se) = stats::mean_and_se(&v).unwrap_or((stats::mean(&v), f64::NAN));
            CellSummary {
                snr,
                d,
                count: v.len(),
                mean_response,
                se,
            }
        })
        .collect()
}

pub fn response_anova(rows: &[ResponseRow]) -> Result<AnovaTable> {
    let responses: Vec<f64> = rows.iter().map(|r| r.response).collect();
    let snr: Vec<f64> = rows.iter().map(|r| r.snr).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.d).collect();
    Ok(crate::experiments::two_way_anova(&responses, &snr, &d)?.with_names("SNR", "d"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn response_examples() {
        let y = DVector::from_element(10, 2.0);
        assert_eq!(response_metric(&y, &y, &y).unwrap(), 0.0);
        let off = y.add_scalar(1.0);
        assert_eq!(response_metric(&y, &y, &off).unwrap(), -10.0);
        assert!(response_metric(&y, &DVector::zeros(3), &y).is_err());
    }

    #[test]
    fn response_matches_loop() {
        let mut r = rng::stream(1, &[]);
        let mut v = || DVector::from_fn(15, |_, _| r.sample::<f64, _>(StandardNormal));
        let (y, a, b) = (v(), v(), v());
        let mut expected = 0.0;
        for i in 0..15 {
            expected += (y[i] - a[i]).powi(2) - (y[i] - b[i]).powi(2);
        }
        assert_abs_diff_eq!(response_metric(&y, &a, &b).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn huge_snr_reproduces_signal() {
        let l = DVector::from_vec(vec![1.0, 4.0, -2.0, 0.5]);
        let sim = simulate_dataset(&l, 1e12, &mut rng::stream(2, &[])).unwrap();
        assert!((sim.z - &l).abs().max() < 1e-4);
        assert!(simulate_dataset(&DVector::from_element(4, 1.0), 3.0, &mut rng::stream(2, &[])).is_err());
    }

    #[test]
    fn seeds_change_noise_not_variance() {
        let l = DVector::from_vec(vec![1.0, 4.0, -2.0, 0.5]);
        let a = simulate_dataset(&l, 3.0, &mut rng::stream(3, &[])).unwrap();
        let b = simulate_dataset(&l, 3.0, &mut rng::stream(4, &[])).unwrap();
        assert_ne!(a.z, b.z);
        assert_eq!(a.sigma2, b.sigma2);
    }

    #[test]
    fn noise_variance_moment() {
        let l = DVector::from_fn(50, |i, _| (i as f64).sin() * 3.0);
        let mut r = rng::stream(5, &[]);
        let mut residuals = Vec::new();
        let mut sigma2 = 0.0;
        for _ in 0..200 {
            let sim = simulate_dataset(&l, 4.0, &mut r).unwrap();
            sigma2 = sim.sigma2;
            residuals.extend((sim.z - &l).iter().copied());
        }
        assert_eq!(residuals.len(), 10_000);
        let var = residuals.iter().map(|e| e * e).sum::<f64>() / residuals.len() as f64;
        assert!((var / sigma2 - 1.0).abs() < 0.03);
    }

    #[test]
    fn synthetic_dataset_shape() {
        let d = synthetic_dataset(&SyntheticSpec::default(), 9).unwrap();
        assert_eq!(d.len(), 40);
        assert_eq!(d.design().ncols(), 3);
        assert_eq!(d, synthetic_dataset(&SyntheticSpec::default(), 9).unwrap());
    }

    fn small_config() -> EmpiricalConfig {
        EmpiricalConfig {
            design: FactorialDesign {
                snr_levels: vec![3.0, 10.0],
                d_levels: vec![0.5, 1.0],
                replicates: 2,
                seed: 4,
            },
            mcmc: McmcSettings {
                total_iterations: 300,
                burn_in: 100,
                max_rejections: 200,
            },
            predictor: PointPredictor::Latent,
        }
    }

    #[test]
    fn small_run_is_reproducible_and_ordered() {
        let data = synthetic_dataset(
            &SyntheticSpec {
                n: 12,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let cfg = small_config();
        let a = run_empirical_simulation(&cfg, &data).unwrap();
        let b = run_empirical_simulation(&cfg, &data).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert_eq!((a[0].snr, a[0].d, a[0].replicate), (3.0, 0.5, 0));
        assert_eq!((a[7].snr, a[7].d, a[7].replicate), (10.0, 1.0, 1));
        let cells = cell_summaries(&a);
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.count == 2));
        assert_eq!(response_anova(&a).unwrap().df(), vec![1, 1, 1, 4]);
    }

    #[test]
    fn invalid_design() {
        let data = synthetic_dataset(
            &SyntheticSpec {
                n: 8,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let mut cfg = small_config();
        cfg.design.d_levels = vec![0.0];
        assert!(run_empirical_simulation(&cfg, &data).is_err());
    }
}
