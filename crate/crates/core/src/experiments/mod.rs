//! Seeded, parallel runners for the selection, averaging and truncation
//! studies, plus the ANOVA used to analyse them.
//!
//! Every task draws from its own RNG stream keyed by its position in the
//! design, and results are collected in design order, so output does not
//! depend on thread scheduling.

pub mod anova;
pub mod bound_check;
pub mod empirical;
pub mod regression;
pub mod waic;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{self, BoundModel, Chain, GibbsConfig};

pub use anova::{two_way_anova, AnovaRow, AnovaTable};
pub use bound_check::{bound_check, ArmReport, BoundCheckConfig, BoundCheckReport};
pub use empirical::{
    response_metric, run_empirical_simulation, simulate_dataset, synthetic_dataset, EmpiricalConfig, FactorialDesign,
    ResponseRow, SimulatedData, SyntheticSpec,
};
pub use regression::{run_bma_experiment, run_cp_experiment, BmaExperimentConfig, CpExperimentConfig, SelectionRow};
pub use waic::{run_waic_sweep, WaicPoint, WaicSweep, WaicSweepConfig};

/// Chain lengths shared by every run in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub max_rejections: usize,
}

impl McmcSettings {
    pub fn desk() -> Self {
        Self {
            total_iterations: 4_000,
            burn_in: 1_000,
            max_rejections: 1_000,
        }
    }

    pub fn paper() -> Self {
        Self {
            total_iterations: 12_000,
            burn_in: 2_000,
            max_rejections: 1_000,
        }
    }

    pub fn gibbs(&self, kappa: f64, seed: u64) -> GibbsConfig {
        GibbsConfig {
            total_iterations: self.total_iterations,
            burn_in: self.burn_in,
            kappa,
            max_rejections: self.max_rejections,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaChoice {
    /// Percentile of the untruncated chain's CPE trace.
    Percentile(f64),
    Absolute(f64),
}

/// Element-wise posterior median used as the point prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointPredictor {
    /// Median of `X beta + w`.
    Latent,
    /// Median of the BLUP evaluated at each state's parameters.
    Blup,
}

pub fn point_prediction(chain: &Chain, model: &BoundModel<'_>, predictor: PointPredictor) -> Result<DVector<f64>> {
    let summary = match predictor {
        PointPredictor::Latent => chain.y_summary(model.spec().x())?,
        PointPredictor::Blup => chain.blup_summary(model)?,
    };
    Ok(DVector::from_vec(summary.median))
}

#[derive(Debug, Clone)]
pub struct TruncatedFit {
    pub kappa: f64,
    pub untruncated: Chain,
    pub truncated: Chain,
    /// True when prior initialization was exhausted and the truncated chain
    /// started from the untruncated chain's lowest-CPE state.
    pub warm_start: bool,
}

/// Untruncated chain, then a chain truncated at the chosen `kappa`.
pub fn fit_truncated<R: Rng + ?Sized>(
    model: &BoundModel<'_>,
    choice: KappaChoice,
    settings: &McmcSettings,
    untruncated_rng: &mut R,
    truncated_rng: &mut R,
) -> Result<TruncatedFit> {
    let untruncated = sampler::run_gibbs(model, &settings.gibbs(f64::INFINITY, 0), untruncated_rng)?;
    let kappa = match choice {
        KappaChoice::Percentile(d) => sampler::kappa_from_percentile(&untruncated, d)?,
        KappaChoice::Absolute(k) => k,
    };
    let (truncated, warm_start) = truncate_from(model, &untruncated, kappa, settings, truncated_rng)?;
    Ok(TruncatedFit {
        kappa,
        untruncated,
        truncated,
        warm_start,
    })
}

/// Truncated chain with the reference chain's lowest-CPE state as fallback start.
pub fn truncate_from<R: Rng + ?Sized>(
    model: &BoundModel<'_>,
    reference: &Chain,
    kappa: f64,
    settings: &McmcSettings,
    rng: &mut R,
) -> Result<(Chain, bool)> {
    let start = reference.min_cpe_state().ok_or(Error::EmptyInput("reference chain"))?;
    sampler::run_gibbs_with_fallback(model, &settings.gibbs(kappa, 0), start, rng)
}
