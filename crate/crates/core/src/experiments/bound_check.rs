//! Monte Carlo check that truncating at the comparator's expected prediction
//! error plus `n sigma2` lowers expected squared error.
//!
//! Phase one fits the untruncated model to each replicate and estimates
//! `kappa = E sum (Y - Yhat_m)^2 + n sigma2`. Phase two reruns each replicate
//! with that `kappa` (bound arm) and with `kappa = inf` on a fresh stream
//! (control arm). Differences are paired by replicate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{point_prediction, simulate_dataset, truncate_from, McmcSettings, PointPredictor};
use crate::io::Dataset;
use crate::rng;
use crate::sampler::{default_decay_levels, run_gibbs, ModelSpec};
use crate::stats;

const BOUND_STREAM: u64 = 0x0054_4832;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckConfig {
    pub replicates: usize,
    pub snr: f64,
    pub mcmc: McmcSettings,
    pub predictor: PointPredictor,
    pub seed: u64,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self {
            replicates: 50,
            snr: 3.0,
            mcmc: McmcSettings::desk(),
            predictor: PointPredictor::Latent,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub kappa: f64,
    /// Mean of `sum (Y - Yhat_arm)^2`.
    pub mean_sse: f64,
    /// Mean paired difference `sse_arm - sse_m`.
    pub difference: f64,
    pub difference_se: f64,
    pub stalls: u64,
    pub warm_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub n: usize,
    pub replicates: usize,
    pub sigma2: f64,
    pub n_sigma2: f64,
    /// Estimate of `E sum (Y - Yhat_m)^2` and its standard error.
    pub comparator_sse: f64,
    pub comparator_se: f64,
    pub kappa: f64,
    pub bound_arm: ArmReport,
    pub control_arm: ArmReport,
}

struct ReplicatePhase {
    sse_m: f64,
    model_z: nalgebra::DVector<f64>,
    reference: crate::sampler::Chain,
}

pub fn bound_check(config: &BoundCheckConfig, data: &Dataset) -> Result<BoundCheckReport> {
    if config.replicates < 2 {
        return Err(Error::InvalidArgument("bound check needs >= 2 replicates".into()));
    }
    if data.len() > 50 {
        return Err(Error::InvalidArgument(format!(
            "bound check is sized for n <= 50 (got {})",
            data.len()
        )));
    }
    let signal = &data.response;
    let sigma2 = stats::snr_to_sigma2(signal.as_slice(), config.snr)?;
    let spec = ModelSpec::new(data.design(), data.locations.clone(), sigma2, default_decay_levels())?;
    let key = |rep: usize, purpose: u64| [BOUND_STREAM, rep as u64, purpose];

    let phase_one = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let sim = simulate_dataset(signal, config.snr, &mut rng::stream(config.seed, &key(rep, 0)))?;
            let model = spec.bind(&sim.z)?;
            let reference = run_gibbs(
                &model,
                &config.mcmc.gibbs(f64::INFINITY, 0),
                &mut rng::stream(config.seed, &key(rep, 1)),
            )?;
            let yhat_m = point_prediction(&reference, &model, config.predictor)?;
            Ok(ReplicatePhase {
                sse_m: (&sim.y - yhat_m).norm_squared(),
                model_z: sim.z,
                reference,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let sse_m: Vec<f64> = phase_one.iter().map(|p| p.sse_m).collect();
    let (comparator_sse, comparator_se) = stats::mean_and_se(&sse_m)?;
    let n_sigma2 = data.len() as f64 * sigma2;
    let kappa = comparator_sse + n_sigma2;

    let arm = |arm_kappa: f64, purpose: u64| -> Result<ArmReport> {
        let results = phase_one
            .par_iter()
            .enumerate()
            .map(|(rep, phase)| {
                let model = spec.bind(&phase.model_z)?;
                let mut r = rng::stream(config.seed, &key(rep, purpose));
                let (chain, warm) = truncate_from(&model, &phase.reference, arm_kappa, &config.mcmc, &mut r)
                    .map_err(|e| e.context(format!("replicate {rep}")))?;
                let yhat = point_prediction(&chain, &model, config.predictor)?;
                Ok(((signal - yhat).norm_squared(), chain.stall_count, warm))
            })
            .collect::<Result<Vec<_>>>()?;
        let sse: Vec<f64> = results.iter().map(|r| r.0).collect();
        let diffs: Vec<f64> = sse.iter().zip(&sse_m).map(|(a, b)| a - b).collect();
        let (difference, difference_se) = stats::mean_and_se(&diffs)?;
        Ok(ArmReport {
            kappa: arm_kappa,
            mean_sse: stats::mean(&sse),
            difference,
            difference_se,
            stalls: results.iter().map(|r| r.1).sum(),
            warm_starts: results.iter().filter(|r| r.2).count(),
        })
    };

    Ok(BoundCheckReport {
        n: data.len(),
        replicates: config.replicates,
        sigma2,
        n_sigma2,
        comparator_sse,
        comparator_se,
        kappa,
        bound_arm: arm(kappa, 2)?,
        control_arm: arm(f64::INFINITY, 3)?,
    })
}
