//! WAIC across truncation levels, for choosing `kappa` from data.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::waic;
use crate::error::{Error, Result};
use crate::experiments::{truncate_from, McmcSettings};
use crate::rng;
use crate::sampler::{kappa_from_percentile, run_gibbs, Chain, ModelSpec};
use crate::stats;

const WAIC_STREAM: u64 = 0x5741_4943;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicSweepConfig {
    pub d_grid: Vec<f64>,
    pub mcmc: McmcSettings,
    /// Contiguous batches for the Monte Carlo standard error.
    pub batches: usize,
    pub seed: u64,
}

impl WaicSweepConfig {
    /// `count` evenly spaced levels ending at 1.
    pub fn even_grid(count: usize) -> Vec<f64> {
        (1..=count).map(|k| k as f64 / count as f64).collect()
    }
}

impl Default for WaicSweepConfig {
    fn default() -> Self {
        Self {
            d_grid: Self::even_grid(20),
            mcmc: McmcSettings::desk(),
            batches: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaicPoint {
    pub d: f64,
    pub kappa: f64,
    pub waic: Option<f64>,
    pub se: Option<f64>,
    /// Why this level has no WAIC, e.g. an inadmissible `kappa`.
    pub error: Option<String>,
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaicSweep {
    pub untruncated_waic: f64,
    pub untruncated_se: f64,
    pub points: Vec<WaicPoint>,
    pub argmin_d: Option<f64>,
}

/// WAIC of a chain and its batch-means standard error.
pub fn chain_waic(chain: &Chain, spec: &ModelSpec, z: &DVector<f64>, batches: usize) -> Result<(f64, f64)> {
    let ll: DMatrix<f64> = chain.pointwise_loglik(spec.x(), z, spec.sigma2());
    let value = waic(&ll)?.value;
    let per_batch = stats::batch_ranges(ll.nrows(), batches)?
        .into_iter()
        .map(|r| waic(&ll.rows(r.start, r.len()).into_owned()).map(|c| c.value))
        .collect::<Result<Vec<_>>>()?;
    Ok((value, stats::batch_means_se(&per_batch)?))
}

pub fn run_waic_sweep(spec: &ModelSpec, z: &DVector<f64>, config: &WaicSweepConfig) -> Result<WaicSweep> {
    if config.d_grid.is_empty() {
        return Err(Error::EmptyInput("d grid"));
    }
    if let Some(d) = config.d_grid.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
        return Err(Error::InvalidArgument(format!("grid level {d} outside (0, 1]")));
    }
    let model = spec.bind(z)?;
    let reference = run_gibbs(
        &model,
        &config.mcmc.gibbs(f64::INFINITY, 0),
        &mut rng::stream(config.seed, &[WAIC_STREAM, 0]),
    )?;
    let (untruncated_waic, untruncated_se) = chain_waic(&reference, spec, z, config.batches)?;

    let points = config
        .d_grid
        .par_iter()
        .enumerate()
        .map(|(k, &d)| {
            let kappa = kappa_from_percentile(&reference, d)?;
            let mut r = rng::stream(config.seed, &[WAIC_STREAM, 1, k as u64]);
            match truncate_from(&model, &reference, kappa, &config.mcmc, &mut r) {
                Ok((chain, warm_start)) => {
                    let (w, se) = chain_waic(&chain, spec, z, config.batches)?;
                    Ok(WaicPoint {
                        d,
                        kappa,
                        waic: Some(w),
                        se: Some(se),
                        error: None,
                        warm_start,
                    })
                }
                Err(e) if e.is_initialization_exhausted() => Ok(WaicPoint {
                    d,
                    kappa,
                    waic: None,
                    se: None,
                    error: Some(e.to_string()),
                    warm_start: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let argmin_d = points
        .iter()
        .filter_map(|p| p.waic.map(|w| (w, p.d)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, d)| d);
    Ok(WaicSweep {
        untruncated_waic,
        untruncated_se,
        points,
        argmin_d,
    })
}
