//! Constraint-filtered Gibbs sampler for the spatial model
//!
//! ```text
//! z | y        ~ N(y, sigma2 I) restricted to { CPE(z, yhat(beta, tau2, b)) < kappa }
//! y = X beta + w,  w | tau2, b ~ N(0, tau2 H(b)),  H(b)_ij = exp(-b |s_i - s_j|)
//! beta ~ N(0, v I),  tau2 ~ IG(1, 0.01),  b uniform on a finite ladder
//! ```
//!
//! Each constrained block proposes from its untruncated full conditional and
//! keeps the first proposal whose CPE is below `kappa`. A block that exhausts
//! its rejection budget keeps its current value (which already satisfies the
//! constraint) and counts as a stall.

pub mod spectral;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::{posterior_summary, PosteriorSummary};
use crate::rng;
use crate::stats::{self, chol_factor, iso_normal_logpdf, CholFactor, SpatialLocations};

use self::spectral::LevelCache;

pub const DEFAULT_BETA_PRIOR_VAR: f64 = 10.0;
pub const DEFAULT_TAU2_SHAPE: f64 = 1.0;
pub const DEFAULT_TAU2_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayLevel {
    pub decay: f64,
    pub prior_mass: f64,
}

/// Decays `10, 15, .., 35` with equal mass.
pub fn default_decay_levels() -> Vec<DecayLevel> {
    (0..6)
        .map(|k| DecayLevel {
            decay: 10.0 + 5.0 * k as f64,
            prior_mass: 1.0 / 6.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tau2Prior {
    InverseGamma {
        shape: f64,
        rate: f64,
    },
    /// Degenerate prior; the tau2 block becomes a no-op.
    Fixed {
        value: f64,
    },
    /// Discrete prior on a finite set of `(value, mass)` pairs.
    Grid {
        points: Vec<(f64, f64)>,
    },
}

impl Default for Tau2Prior {
    fn default() -> Self {
        Tau2Prior::InverseGamma {
            shape: DEFAULT_TAU2_SHAPE,
            rate: DEFAULT_TAU2_RATE,
        }
    }
}

impl Tau2Prior {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Tau2Prior::InverseGamma { shape, rate } => *shape > 0.0 && *rate > 0.0,
            Tau2Prior::Fixed { value } => *value > 0.0 && value.is_finite(),
            Tau2Prior::Grid { points } => {
                !points.is_empty()
                    && points.iter().all(|(v, m)| *v > 0.0 && *m > 0.0)
                    && (points.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid tau2 prior {self:?}")))
        }
    }
}

/// Design, locations, known noise variance, priors, and the per-level
/// eigendecompositions of `H(b)`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    x: DMatrix<f64>,
    locs: SpatialLocations,
    sigma2: f64,
    decay_levels: Vec<DecayLevel>,
    levels: Vec<LevelCache>,
    beta_prior_var: f64,
    tau2_prior: Tau2Prior,
    beta_cov_chol: CholFactor,
    beta_cov: DMatrix<f64>,
}

impl ModelSpec {
    pub fn new(x: DMatrix<f64>, locs: SpatialLocations, sigma2: f64, decay_levels: Vec<DecayLevel>) -> Result<Self> {
        if x.nrows() != locs.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows but there are {} locations",
                x.nrows(),
                locs.len()
            )));
        }
        if x.ncols() == 0 || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "design must be finite with at least one column".into(),
            ));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma2 must be > 0 (got {sigma2})")));
        }
        if decay_levels.is_empty() {
            return Err(Error::EmptyInput("decay levels"));
        }
        if decay_levels.iter().any(|l| !(l.prior_mass > 0.0) || !(l.decay > 0.0)) {
            return Err(Error::InvalidArgument(
                "decay levels need positive decay and mass".into(),
            ));
        }
        let total: f64 = decay_levels.iter().map(|l| l.prior_mass).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("decay prior masses sum to {total}")));
        }
        let distances = stats::distance_matrix(&locs);
        let levels = decay_levels
            .iter()
            .map(|l| LevelCache::new(&distances, l.decay, l.prior_mass, &x))
            .collect::<Result<Vec<_>>>()?;
        let (beta_cov, beta_cov_chol) = beta_posterior_cov(&x, sigma2, DEFAULT_BETA_PRIOR_VAR)?;
        Ok(Self {
            x,
            locs,
            sigma2,
            decay_levels,
            levels,
            beta_prior_var: DEFAULT_BETA_PRIOR_VAR,
            tau2_prior: Tau2Prior::default(),
            beta_cov_chol,
            beta_cov,
        })
    }

    pub fn with_beta_prior_var(mut self, v: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta prior variance must be > 0 (got {v})"
            )));
        }
        let (cov, chol) = beta_posterior_cov(&self.x, self.sigma2, v)?;
        self.beta_prior_var = v;
        self.beta_cov = cov;
        self.beta_cov_chol = chol;
        Ok(self)
    }

    pub fn with_tau2_prior(mut self, prior: Tau2Prior) -> Result<Self> {
        prior.validate()?;
        self.tau2_prior = prior;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn locs(&self) -> &SpatialLocations {
        &self.locs
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn decay_levels(&self) -> &[DecayLevel] {
        &self.decay_levels
    }

    pub fn level_cache(&self, level: usize) -> &LevelCache {
        &self.levels[level]
    }

    pub fn beta_prior_var(&self) -> f64 {
        self.beta_prior_var
    }

    pub fn tau2_prior(&self) -> &Tau2Prior {
        &self.tau2_prior
    }

    /// Covariance of the untruncated beta full conditional,
    /// `(X'X / sigma2 + I / v)^{-1}`.
    pub fn beta_conditional_cov(&self) -> &DMatrix<f64> {
        &self.beta_cov
    }

    /// Attaches observed data, caching `Q'z` for every decay level.
    pub fn bind(&self, z: &DVector<f64>) -> Result<BoundModel<'_>> {
        if z.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} entries, model expects {}",
                z.len(),
                self.n()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data vector has non-finite entries".into()));
        }
        let qtz = self.levels.iter().map(|l| l.rotate(z)).collect();
        Ok(BoundModel {
            spec: self,
            z: z.clone(),
            qtz,
        })
    }
}

fn beta_posterior_cov(x: &DMatrix<f64>, sigma2: f64, v: f64) -> Result<(DMatrix<f64>, CholFactor)> {
    let p = x.ncols();
    let precision = x.tr_mul(x) / sigma2 + DMatrix::identity(p, p) / v;
    let cov = chol_factor(&precision)?.inverse();
    let cov = (&cov + cov.transpose()) * 0.5;
    let chol = chol_factor(&cov)?;
    Ok((cov, chol))
}

/// A model specification with data attached.
#[derive(Debug, Clone)]
pub struct BoundModel<'a> {
    spec: &'a ModelSpec,
    z: DVector<f64>,
    qtz: Vec<DVector<f64>>,
}

impl BoundModel<'_> {
    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    fn rotated_resid(&self, beta: &DVector<f64>, level: usize) -> DVector<f64> {
        &self.qtz[level] - &self.spec.levels[level].qtx * beta
    }

    /// CPE of the BLUP at `(beta, tau2, b_level)`.
    pub fn cpe(&self, beta: &DVector<f64>, tau2: f64, level: usize) -> f64 {
        self.spec.levels[level].cpe_rotated(&self.rotated_resid(beta, level), tau2, self.spec.sigma2)
    }

    pub fn recompute_cpe(&self, state: &ChainState) -> f64 {
        self.cpe(&state.beta, state.tau2, state.level)
    }

    /// BLUP `X beta + Sigma_Y Sigma_Z^{-1} (z - X beta)` at a state's parameters.
    pub fn blup_fitted(&self, state: &ChainState) -> DVector<f64> {
        let cache = &self.spec.levels[state.level];
        let mut r = self.rotated_resid(&state.beta, state.level);
        for (ri, l) in r.iter_mut().zip(cache.eigvals.iter()) {
            let signal = state.tau2 * l;
            *ri *= signal / (signal + self.spec.sigma2);
        }
        &self.spec.x * &state.beta + &cache.eigvecs * r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    /// `f64::INFINITY` runs the untruncated model.
    pub kappa: f64,
    pub max_rejections: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            total_iterations: 12_000,
            burn_in: 2_000,
            kappa: f64::INFINITY,
            max_rejections: 1_000,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iterations {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be below total iterations {}",
                self.burn_in, self.total_iterations
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kappa must be > 0 (got {})",
                self.kappa
            )));
        }
        if self.max_rejections == 0 {
            return Err(Error::InvalidArgument("max_rejections must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn is_truncated(&self) -> bool {
        self.kappa.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: DVector<f64>,
    pub w: DVector<f64>,
    pub tau2: f64,
    /// Index into the model's decay levels.
    pub level: usize,
    /// The decay value of `level`.
    pub b: f64,
    pub cpe: f64,
}

impl ChainState {
    /// `y = X beta + w`.
    pub fn y(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * &self.beta + &self.w
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStats {
    pub proposals: u64,
    pub accepted: u64,
    pub stalls: u64,
}

impl BlockStats {
    fn record<T>(&mut self, draw: &BlockDraw<T>) {
        self.proposals += draw.proposals as u64;
        if draw.stalled {
            self.stalls += 1;
        } else {
            self.accepted += 1;
        }
    }

    /// Accepted proposals over all proposals (1 when nothing was proposed).
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub beta: BlockStats,
    pub tau2: BlockStats,
    pub b: BlockStats,
}

/// Result of one constrained block update.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDraw<T> {
    pub value: T,
    pub cpe: f64,
    pub proposals: usize,
    pub stalled: bool,
}

fn satisfies(cpe: f64, kappa: f64) -> bool {
    cpe < kappa
}

fn rejection_step<T, P, C>(
    current: T,
    current_cpe: f64,
    config: &GibbsConfig,
    mut propose: P,
    cpe_of: C,
) -> BlockDraw<T>
where
    P: FnMut() -> T,
    C: Fn(&T) -> f64,
{
    for attempt in 1..=config.max_rejections {
        let candidate = propose();
        let cpe = cpe_of(&candidate);
        if satisfies(cpe, config.kappa) {
            return BlockDraw {
                value: candidate,
                cpe,
                proposals: attempt,
                stalled: false,
            };
        }
    }
    BlockDraw {
        value: current,
        cpe: current_cpe,
        proposals: config.max_rejections,
        stalled: true,
    }
}

fn categorical<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Result<usize> {
    let lse = stats::log_sum_exp(log_weights);
    if !lse.is_finite() {
        return Err(Error::ZeroWeight);
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, lw) in log_weights.iter().enumerate() {
        acc += (lw - lse).exp();
        if u < acc {
            return Ok(k);
        }
    }
    Ok(log_weights
        .iter()
        .rposition(|lw| lw.is_finite())
        .expect("finite log-sum-exp implies a finite weight"))
}

fn draw_tau2_prior<R: Rng + ?Sized>(prior: &Tau2Prior, rng: &mut R) -> Result<f64> {
    match prior {
        Tau2Prior::InverseGamma { shape, rate } => stats::sample_inverse_gamma(*shape, *rate, rng),
        Tau2Prior::Fixed { value } => Ok(*value),
        Tau2Prior::Grid { points } => {
            let lw: Vec<f64> = points.iter().map(|(_, m)| m.ln()).collect();
            Ok(points[categorical(&lw, rng)?].0)
        }
    }
}

/// Draw of `w ~ N(0, tau2 H(b))`.
fn draw_w_prior<R: Rng + ?Sized>(cache: &LevelCache, tau2: f64, rng: &mut R) -> DVector<f64> {
    let coeffs = DVector::from_fn(cache.n(), |i, _| {
        let xi: f64 = StandardNormal.sample(rng);
        (tau2 * cache.eigvals[i]).sqrt() * xi
    });
    &cache.eigvecs * coeffs
}

/// Whole-state draw from the prior, repeated until the CPE constraint holds.
pub fn init_state<R: Rng + ?Sized>(model: &BoundModel<'_>, config: &GibbsConfig, rng: &mut R) -> Result<ChainState> {
    init_state_counted(model, config, rng).map(|(s, _)| s)
}

/// Like [`init_state`], also returning the number of whole-state draws used.
pub fn init_state_counted<R: Rng + ?Sized>(
    model: &BoundModel<'_>,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<(ChainState, usize)> {
    config.validate()?;
    let spec = model.spec;
    let budget = config.max_rejections.saturating_mul(10);
    let level_lw: Vec<f64> = spec.levels.iter().map(|l| l.log_prior).collect();
    let beta_sd = spec.beta_prior_var.sqrt();
    for attempt in 1..=budget {
        let beta = DVector::from_fn(spec.p(), |_, _| {
            beta_sd * Distribution::<f64>::sample(&StandardNormal, rng)
        });
        let tau2 = draw_tau2_prior(&spec.tau2_prior, rng)?;
        let level = categorical(&level_lw, rng)?;
        let w = draw_w_prior(&spec.levels[level], tau2, rng);
        let cpe = model.cpe(&beta, tau2, level);
        if satisfies(cpe, config.kappa) {
            let state = ChainState {
                beta,
                w,
                tau2,
                level,
                b: spec.levels[level].decay,
                cpe,
            };
            return Ok((state, attempt));
        }
    }
    Err(Error::InitializationExhausted {
        attempts: budget,
        kappa: config.kappa,
    })
}

/// Draw from `N(mu_w, Sigma_w)` with `Sigma_w = (I / sigma2 + H(b)^{-1} / tau2)^{-1}`
/// and `mu_w = Sigma_w (z - X beta) / sigma2`. The CPE does not involve `w`,
/// so no rejection step is needed.
pub fn sample_w_fullcond<R: Rng + ?Sized>(state: &ChainState, model: &BoundModel<'_>, rng: &mut R) -> DVector<f64> {
    let sigma2 = model.spec.sigma2;
    let cache = &model.spec.levels[state.level];
    let r = model.rotated_resid(&state.beta, state.level);
    let coeffs = DVector::from_fn(cache.n(), |i, _| {
        let signal = state.tau2 * cache.eigvals[i];
        let s = signal / (signal + sigma2);
        let xi: f64 = StandardNormal.sample(rng);
        s * r[i] + (sigma2 * s).sqrt() * xi
    });
    &cache.eigvecs * coeffs
}

/// Mean of the untruncated beta full conditional, `Sigma_beta X'(z - w) / sigma2`.
pub fn beta_conditional_mean(state: &ChainState, model: &BoundModel<'_>) -> DVector<f64> {
    let spec = model.spec;
    let rhs = spec.x.tr_mul(&(&model.z - &state.w)) / spec.sigma2;
    &spec.beta_cov * rhs
}

pub fn sample_beta_fullcond<R: Rng + ?Sized>(
    state: &ChainState,
    model: &BoundModel<'_>,
    config: &GibbsConfig,
    rng: &mut R,
) -> BlockDraw<DVector<f64>> {
    let mean = beta_conditional_mean(state, model);
    let chol = &model.spec.beta_cov_chol;
    rejection_step(
        state.beta.clone(),
        state.cpe,
        config,
        || stats::sample_mvn_chol(&mean, chol, rng),
        |beta| model.cpe(beta, state.tau2, state.level),
    )
}

/// Untruncated tau2 full-conditional parameters `(shape, rate)` under the
/// inverse gamma prior.
pub fn tau2_conditional_params(state: &ChainState, model: &BoundModel<'_>) -> Option<(f64, f64)> {
    match model.spec.tau2_prior {
        Tau2Prior::InverseGamma { shape, rate } => {
            let q = model.spec.levels[state.level].quad_form_inv(&state.w);
            Some((shape + 0.5 * model.spec.n() as f64, rate + 0.5 * q))
        }
        _ => None,
    }
}

pub fn sample_tau2_fullcond<R: Rng + ?Sized>(
    state: &ChainState,
    model: &BoundModel<'_>,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<BlockDraw<f64>> {
    let spec = model.spec;
    let cpe_of = |t: &f64| model.cpe(&state.beta, *t, state.level);
    match &spec.tau2_prior {
        Tau2Prior::InverseGamma { .. } => {
            let (shape, rate) = tau2_conditional_params(state, model).expect("inverse gamma prior");
            // Parameters were validated at construction; the draw cannot fail.
            let mut draw = || stats::sample_inverse_gamma(shape, rate, rng).expect("valid inverse gamma");
            Ok(rejection_step(state.tau2, state.cpe, config, &mut draw, cpe_of))
        }
        Tau2Prior::Fixed { value } => Ok(BlockDraw {
            value: *value,
            cpe: state.cpe,
            proposals: 0,
            stalled: false,
        }),
        Tau2Prior::Grid { points } => {
            let q = spec.levels[state.level].quad_form_inv(&state.w);
            let half_n = 0.5 * spec.n() as f64;
            let lw: Vec<f64> = points
                .iter()
                .map(|(t, m)| m.ln() - half_n * t.ln() - 0.5 * q / t)
                .collect();
            let first = categorical(&lw, rng)?;
            let mut pending = Some(first);
            let mut draw = || match pending.take() {
                Some(k) => points[k].0,
                None => points[categorical(&lw, rng).expect("weights checked above")].0,
            };
            Ok(rejection_step(state.tau2, state.cpe, config, &mut draw, cpe_of))
        }
    }
}

/// Log-weights of the untruncated decay full conditional.
pub fn b_conditional_log_weights(state: &ChainState, model: &BoundModel<'_>) -> Vec<f64> {
    model
        .spec
        .levels
        .iter()
        .map(|l| -0.5 * l.quad_form_inv(&state.w) / state.tau2 - 0.5 * l.log_det + l.log_prior)
        .collect()
}

pub fn sample_b_fullcond<R: Rng + ?Sized>(
    state: &ChainState,
    model: &BoundModel<'_>,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<BlockDraw<usize>> {
    let lw = b_conditional_log_weights(state, model);
    let first = categorical(&lw, rng)?;
    let mut pending = Some(first);
    let mut draw = || match pending.take() {
        Some(k) => k,
        None => categorical(&lw, rng).expect("weights checked above"),
    };
    Ok(rejection_step(state.level, state.cpe, config, &mut draw, |&k| {
        model.cpe(&state.beta, state.tau2, k)
    }))
}

/// Post-burn-in output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub states: Vec<ChainState>,
    pub cpe_trace: Vec<f64>,
    pub stall_count: u64,
    pub acceptance: Acceptance,
    pub kappa: f64,
    pub burn_in: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `X beta + w` for every stored state.
    pub fn y_draws(&self, x: &DMatrix<f64>) -> Vec<DVector<f64>> {
        self.states.iter().map(|s| s.y(x)).collect()
    }

    pub fn y_summary(&self, x: &DMatrix<f64>) -> Result<PosteriorSummary> {
        posterior_summary(&self.y_draws(x))
    }

    /// Posterior summary of the BLUP fitted values over the stored states.
    pub fn blup_summary(&self, model: &BoundModel<'_>) -> Result<PosteriorSummary> {
        let draws: Vec<DVector<f64>> = self.states.iter().map(|s| model.blup_fitted(s)).collect();
        posterior_summary(&draws)
    }

    /// Matrix of `log f(z_i | y_i, sigma2)` with one row per stored state.
    pub fn pointwise_loglik(&self, x: &DMatrix<f64>, z: &DVector<f64>, sigma2: f64) -> DMatrix<f64> {
        let n = z.len();
        let mut out = DMatrix::zeros(self.states.len(), n);
        let norm = -0.5 * (stats::LN_2PI + sigma2.ln());
        for (g, s) in self.states.iter().enumerate() {
            let y = s.y(x);
            for i in 0..n {
                let r = z[i] - y[i];
                out[(g, i)] = norm - 0.5 * r * r / sigma2;
            }
        }
        out
    }

    /// Full-data log-likelihood per state.
    pub fn loglik_trace(&self, x: &DMatrix<f64>, z: &DVector<f64>, sigma2: f64) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| iso_normal_logpdf(z, &s.y(x), sigma2))
            .collect()
    }
}

/// Systematic-scan Gibbs sampler (w, beta, tau2, b).
pub fn run_gibbs<R: Rng + ?Sized>(model: &BoundModel<'_>, config: &GibbsConfig, rng: &mut R) -> Result<Chain> {
    config.validate()?;
    let state = init_state(model, config, rng)?;
    sweep(model, config, state, rng)
}

/// Runs a chain from a supplied starting state, which must satisfy the constraint.
pub fn run_gibbs_from<R: Rng + ?Sized>(
    model: &BoundModel<'_>,
    config: &GibbsConfig,
    start: ChainState,
    rng: &mut R,
) -> Result<Chain> {
    config.validate()?;
    let spec = model.spec;
    if start.beta.len() != spec.p() || start.w.len() != spec.n() || start.level >= spec.levels.len() {
        return Err(Error::DimensionMismatch("starting state does not fit the model".into()));
    }
    let mut start = start;
    start.b = spec.levels[start.level].decay;
    start.cpe = model.recompute_cpe(&start);
    if !satisfies(start.cpe, config.kappa) {
        return Err(Error::InvalidArgument(format!(
            "starting state has CPE {} >= kappa {}",
            start.cpe, config.kappa
        )));
    }
    sweep(model, config, start, rng)
}

/// Prior initialization, falling back to `fallback` when that is exhausted.
pub fn run_gibbs_with_fallback<R: Rng + ?Sized>(
    model: &BoundModel<'_>,
    config: &GibbsConfig,
    fallback: &ChainState,
    rng: &mut R,
) -> Result<(Chain, bool)> {
    match run_gibbs(model, config, rng) {
        Err(e) if e.is_initialization_exhausted() => {
            let chain = run_gibbs_from(model, config, fallback.clone(), rng).map_err(|_| e)?;
            Ok((chain, true))
        }
        other => other.map(|c| (c, false)),
    }
}

fn sweep<R: Rng + ?Sized>(
    model: &BoundModel<'_>,
    config: &GibbsConfig,
    mut state: ChainState,
    rng: &mut R,
) -> Result<Chain> {
    let kept = config.total_iterations - config.burn_in;
    let mut states = Vec::with_capacity(kept);
    let mut cpe_trace = Vec::with_capacity(kept);
    let mut acceptance = Acceptance::default();

    for iter in 0..config.total_iterations {
        state.w = sample_w_fullcond(&state, model, rng);

        let beta = sample_beta_fullcond(&state, model, config, rng);
        acceptance.beta.record(&beta);
        state.beta = beta.value;
        state.cpe = beta.cpe;

        let tau2 = sample_tau2_fullcond(&state, model, config, rng)?;
        acceptance.tau2.record(&tau2);
        state.tau2 = tau2.value;
        state.cpe = tau2.cpe;

        let b = sample_b_fullcond(&state, model, config, rng)?;
        acceptance.b.record(&b);
        state.level = b.value;
        state.b = model.spec.levels[b.value].decay;
        state.cpe = b.cpe;

        if iter >= config.burn_in {
            cpe_trace.push(state.cpe);
            states.push(state.clone());
        }
    }
    let stall_count = acceptance.beta.stalls + acceptance.tau2.stalls + acceptance.b.stalls;
    Ok(Chain {
        states,
        cpe_trace,
        stall_count,
        acceptance,
        kappa: config.kappa,
        burn_in: config.burn_in,
    })
}

/// Runs a chain on the stream keyed by `config.seed`.
pub fn run_gibbs_seeded(model: &BoundModel<'_>, config: &GibbsConfig) -> Result<Chain> {
    run_gibbs(model, config, &mut rng::stream(config.seed, &[]))
}

/// `d`-th percentile of the chain's stored CPE values.
pub fn kappa_from_percentile(chain: &Chain, d: f64) -> Result<f64> {
    if chain.cpe_trace.is_empty() {
        return Err(Error::EmptyInput("cpe trace"));
    }
    stats::percentile(&chain.cpe_trace, d)
}

impl Chain {
    /// Stored state with the smallest CPE.
    pub fn min_cpe_state(&self) -> Option<&ChainState> {
        self.states.iter().min_by(|a, b| a.cpe.total_cmp(&b.cpe))
    }
}
