//! Numeric substrate: distances, exponential covariances, Cholesky solves,
//! Gaussian and inverse-gamma draws, percentiles and SNR calibration.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Relative size of the one-shot diagonal jitter applied when a
/// factorization fails.
pub const JITTER_SCALE: f64 = 1e-8;

/// Points `s_1, .., s_n` in a common `d`-dimensional space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialLocations {
    dim: usize,
    coords: Vec<f64>,
}

impl SpatialLocations {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("locations"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("locations must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "location {i} has dimension {} but expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!("location {i} is not finite")));
            }
            coords.extend_from_slice(row);
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceFamily {
    Exponential,
}

/// `tau2 * exp(-decay * distance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub family: CovarianceFamily,
    pub scale: f64,
    pub decay: f64,
}

impl CovarianceSpec {
    pub fn exponential(scale: f64, decay: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "covariance needs scale > 0 and decay > 0 (got {scale}, {decay})"
            )));
        }
        Ok(Self {
            family: CovarianceFamily::Exponential,
            scale,
            decay,
        })
    }

    pub fn eval(&self, distance: f64) -> f64 {
        match self.family {
            CovarianceFamily::Exponential => self.scale * (-self.decay * distance).exp(),
        }
    }
}

/// Observed data `z` with known noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    pub z: DVector<f64>,
    pub sigma2: f64,
}

impl DataVector {
    pub fn new(z: DVector<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma2 must be > 0 (got {sigma2})")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data vector has non-finite entries".into()));
        }
        Ok(Self { z, sigma2 })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

pub fn distance_matrix(locs: &SpatialLocations) -> DMatrix<f64> {
    let n = locs.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = euclidean(locs.point(i), locs.point(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

pub fn exp_covariance(distances: &DMatrix<f64>, spec: &CovarianceSpec) -> Result<DMatrix<f64>> {
    if !distances.is_square() {
        return Err(Error::DimensionMismatch("distance matrix must be square".into()));
    }
    // Rebuild the spec so hand-constructed values are validated too.
    CovarianceSpec::exponential(spec.scale, spec.decay)?;
    Ok(distances.map(|d| spec.eval(d)))
}

/// Lower Cholesky factor with its log-determinant.
#[derive(Debug, Clone)]
pub struct CholFactor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
    jitter: f64,
}

impl CholFactor {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Diagonal jitter that was added (0 when the first attempt succeeded).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `x' A^{-1} x` through one triangular solve.
    pub fn quad_form_inv(&self, x: &DVector<f64>) -> f64 {
        let l = self.chol.l_dirty();
        let y = l
            .solve_lower_triangular(x)
            .expect("cholesky factor has nonzero diagonal");
        y.norm_squared()
    }

    /// `L x`.
    pub fn mul_l(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol.l() * x
    }
}

pub fn chol_factor(a: &DMatrix<f64>) -> Result<CholFactor> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("cholesky needs a square matrix".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("matrix"));
    }
    let attempt = |m: DMatrix<f64>, jitter: f64| {
        Cholesky::new(m).map(|chol| {
            let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            CholFactor { chol, log_det, jitter }
        })
    };
    if let Some(f) = attempt(a.clone(), 0.0) {
        return Ok(f);
    }
    let mean_diag = a.diagonal().mean();
    let jitter = JITTER_SCALE * mean_diag.abs().max(f64::MIN_POSITIVE);
    let mut b = a.clone();
    for i in 0..n {
        b[(i, i)] += jitter;
    }
    attempt(b, jitter).ok_or(Error::NotPositiveDefinite)
}

pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    if x.len() != mean.len() || cov.nrows() != x.len() {
        return Err(Error::DimensionMismatch("mvn_logpdf operands disagree".into()));
    }
    let f = chol_factor(cov)?;
    Ok(mvn_logpdf_chol(x, mean, &f))
}

pub fn mvn_logpdf_chol(x: &DVector<f64>, mean: &DVector<f64>, f: &CholFactor) -> f64 {
    let r = x - mean;
    -0.5 * (x.len() as f64 * LN_2PI + f.log_det() + f.quad_form_inv(&r))
}

/// Log-density of `N(mean, sigma2 I)` evaluated at `x`.
pub fn iso_normal_logpdf(x: &DVector<f64>, mean: &DVector<f64>, sigma2: f64) -> f64 {
    let n = x.len() as f64;
    let ss = (x - mean).norm_squared();
    -0.5 * (n * (LN_2PI + sigma2.ln()) + ss / sigma2)
}

pub fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn sample_mvn<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> Result<DVector<f64>> {
    if cov.nrows() != mean.len() {
        return Err(Error::DimensionMismatch("sample_mvn operands disagree".into()));
    }
    let f = chol_factor(cov)?;
    Ok(sample_mvn_chol(mean, &f, rng))
}

pub fn sample_mvn_chol<R: Rng + ?Sized>(mean: &DVector<f64>, f: &CholFactor, rng: &mut R) -> DVector<f64> {
    let xi = standard_normal_vec(mean.len(), rng);
    mean + f.mul_l(&xi)
}

/// Draw from the inverse gamma with density proportional to
/// `x^(-shape-1) exp(-rate/x)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inverse gamma needs shape > 0 and rate > 0 (got {shape}, {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut x = rate / g.sample(rng);
    // A Gamma draw can underflow to zero for tiny shapes.
    while !x.is_finite() {
        x = rate / g.sample(rng);
    }
    Ok(x)
}

/// Linearly interpolated order statistic at position `(m - 1) d`.
pub fn percentile(values: &[f64], d: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile values"));
    }
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::InvalidArgument(format!("percentile level {d} outside (0, 1]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("percentile of non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(interpolate_sorted(&sorted, d))
}

pub(crate) fn interpolate_sorted(sorted: &[f64], d: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * d;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
}

/// Noise variance giving `snr = sample_variance(signal) / sigma2`.
pub fn snr_to_sigma2(signal: &[f64], snr: f64) -> Result<f64> {
    if signal.len() < 2 {
        return Err(Error::InvalidArgument("SNR calibration needs n >= 2".into()));
    }
    if !(snr > 0.0) {
        return Err(Error::InvalidArgument(format!("SNR must be > 0 (got {snr})")));
    }
    let var = sample_variance(signal);
    if !(var > 0.0) {
        return Err(Error::InvalidArgument("signal has zero variance".into()));
    }
    Ok(var / snr)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and standard error of independent draws.
pub fn mean_and_se(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("standard error needs at least 2 values".into()));
    }
    Ok((mean(values), (sample_variance(values) / values.len() as f64).sqrt()))
}

/// Standard error of a statistic from its values on `batches` contiguous batches.
pub fn batch_means_se(batch_values: &[f64]) -> Result<f64> {
    mean_and_se(batch_values).map(|(_, se)| se)
}

/// Splits `0..len` into `batches` contiguous, nearly equal ranges.
pub fn batch_ranges(len: usize, batches: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if batches < 2 || len < batches {
        return Err(Error::InvalidArgument(format!(
            "cannot split {len} values into {batches} batches"
        )));
    }
    Ok((0..batches)
        .map(|k| (k * len / batches)..((k + 1) * len / batches))
        .collect())
}

/// Numerically stable `log(sum(exp(values)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn batch_ranges_cover_everything() {
        let r = batch_ranges(10, 3).unwrap();
        assert_eq!(r, vec![0..3, 3..6, 6..10]);
        assert!(batch_ranges(2, 3).is_err());
        assert!(batch_ranges(10, 1).is_err());
    }

    #[test]
    fn mean_and_se_of_known_values() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert_abs_diff_eq!(se, (5.0f64 / 12.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn distance_single_point_is_zero() {
        let locs = SpatialLocations::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(distance_matrix(&locs), DMatrix::zeros(1, 1));
    }

    #[test]
    fn distance_three_four_five() {
        let locs = SpatialLocations::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let d = distance_matrix(&locs);
        assert_eq!(d[(0, 1)], 5.0);
        assert_eq!(d[(1, 0)], 5.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn distance_matches_pairwise_loop() {
        let mut r = rng::stream(1, &[0]);
        let rows: Vec<Vec<f64>> = (0..10).map(|_| vec![r.random(), r.random(), r.random()]).collect();
        let locs = SpatialLocations::from_rows(&rows).unwrap();
        let d = distance_matrix(&locs);
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += (rows[i][k] - rows[j][k]).powi(2);
                }
                assert_abs_diff_eq!(d[(i, j)], s.sqrt(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn locations_reject_ragged_rows() {
        let err = SpatialLocations::from_rows(&[vec![0.0, 0.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn covariance_zero_distance() {
        let c = exp_covariance(&DMatrix::zeros(3, 3), &CovarianceSpec::exponential(2.0, 1.0).unwrap()).unwrap();
        assert!(c.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn covariance_half_at_ln2() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = exp_covariance(&d, &CovarianceSpec::exponential(1.0, 2f64.ln()).unwrap()).unwrap();
        assert_abs_diff_eq!(c[(0, 1)], 0.5, epsilon = 1e-15);
        assert_eq!(c[(0, 0)], 1.0);
    }

    #[test]
    fn covariance_matches_formula() {
        let mut r = rng::stream(2, &[0]);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| vec![r.random(), r.random()]).collect();
        let locs = SpatialLocations::from_rows(&rows).unwrap();
        let c = exp_covariance(&distance_matrix(&locs), &CovarianceSpec::exponential(1.7, 3.2).unwrap()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let dist = ((rows[i][0] - rows[j][0]).powi(2) + (rows[i][1] - rows[j][1]).powi(2)).sqrt();
                assert_abs_diff_eq!(c[(i, j)], 1.7 * (-3.2 * dist).exp(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn covariance_rejects_bad_params() {
        assert!(CovarianceSpec::exponential(0.0, 1.0).is_err());
        assert!(CovarianceSpec::exponential(1.0, -1.0).is_err());
        let bad = CovarianceSpec {
            family: CovarianceFamily::Exponential,
            scale: -1.0,
            decay: 1.0,
        };
        assert!(exp_covariance(&DMatrix::zeros(2, 2), &bad).is_err());
    }

    #[test]
    fn chol_identity() {
        let f = chol_factor(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(f.l(), DMatrix::identity(4, 4));
        assert_eq!(f.log_det(), 0.0);
    }

    #[test]
    fn chol_two_by_two_logdet() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = chol_factor(&a).unwrap();
        assert_abs_diff_eq!(f.log_det(), 8f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn chol_reconstructs_random_spd() {
        let mut r = rng::stream(3, &[0]);
        let m = DMatrix::from_fn(8, 8, |_, _| r.random::<f64>() - 0.5);
        let a = m.transpose() * &m + DMatrix::identity(8, 8);
        let l = chol_factor(&a).unwrap().l();
        let err = (&l * l.transpose() - &a).abs().max();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn chol_jitter_rescues_singular_psd() {
        // Rank-one PSD matrix: fails without jitter, succeeds with it.
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let f = chol_factor(&a).unwrap();
        assert!(f.jitter() > 0.0);
    }

    #[test]
    fn chol_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(matches!(chol_factor(&a), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn mvn_logpdf_standard_cases() {
        let x = DVector::from_vec(vec![0.3]);
        let v = mvn_logpdf(&x, &x, &DMatrix::identity(1, 1)).unwrap();
        assert_abs_diff_eq!(v, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);

        let s2 = 0.7;
        let zero = DVector::zeros(2);
        let v = mvn_logpdf(&zero, &zero, &(DMatrix::identity(2, 2) * s2)).unwrap();
        assert_abs_diff_eq!(v, -(2.0 * std::f64::consts::PI * s2).ln(), epsilon = 1e-14);
    }

    #[test]
    fn mvn_logpdf_matches_explicit_inverse() {
        let mut r = rng::stream(4, &[0]);
        let m = DMatrix::from_fn(3, 3, |_, _| r.random::<f64>());
        let cov = m.transpose() * &m + DMatrix::identity(3, 3) * 0.5;
        let x = DVector::from_fn(3, |_, _| r.random::<f64>());
        let mu = DVector::from_fn(3, |_, _| r.random::<f64>());
        let inv = cov.clone().try_inverse().unwrap();
        let diff = &x - &mu;
        let q = (diff.transpose() * inv * &diff)[(0, 0)];
        let expected = -0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + q);
        assert_abs_diff_eq!(mvn_logpdf(&x, &mu, &cov).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn mvn_tiny_variance_concentrates() {
        let mean = DVector::from_vec(vec![1.0, -2.0]);
        let cov = DMatrix::identity(2, 2) * 1e-14;
        let mut r = rng::stream(5, &[0]);
        for _ in 0..100 {
            let x = sample_mvn(&mean, &cov, &mut r).unwrap();
            assert!((x - &mean).abs().max() < 1e-5);
        }
    }

    #[test]
    fn mvn_sample_covariance_within_five_percent() {
        let mean = DVector::from_vec(vec![0.5, -1.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let f = chol_factor(&cov).unwrap();
        let mut r = rng::stream(6, &[0]);
        let n = 100_000;
        let draws: Vec<DVector<f64>> = (0..n).map(|_| sample_mvn_chol(&mean, &f, &mut r)).collect();
        let m = draws.iter().fold(DVector::zeros(2), |a, d| a + d) / n as f64;
        let mut s = DMatrix::zeros(2, 2);
        for d in &draws {
            let c = d - &m;
            s += &c * c.transpose();
        }
        s /= (n - 1) as f64;
        for i in 0..2 {
            for j in 0..2 {
                let tol = 0.05 * cov[(i, j)].abs();
                assert!((s[(i, j)] - cov[(i, j)]).abs() < tol, "{s}");
            }
        }
    }

    #[test]
    fn mvn_deterministic_under_seed() {
        let mean = DVector::from_vec(vec![0.0, 0.0]);
        let cov = DMatrix::identity(2, 2);
        let a = sample_mvn(&mean, &cov, &mut rng::stream(9, &[1])).unwrap();
        let b = sample_mvn(&mean, &cov, &mut rng::stream(9, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mvn_logpdf_average_approaches_negative_entropy() {
        let mean = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 2.0, 0.2, 0.1, 0.2, 0.5]);
        let f = chol_factor(&cov).unwrap();
        let neg_entropy = -0.5 * (3.0 * (1.0 + LN_2PI) + f.log_det());
        let mut r = rng::stream(10, &[0]);
        let n = 20_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| mvn_logpdf_chol(&sample_mvn_chol(&mean, &f, &mut r), &mean, &f))
            .collect();
        let avg = vals.iter().sum::<f64>() / n as f64;
        let se = (sample_variance(&vals) / n as f64).sqrt();
        assert!((avg - neg_entropy).abs() < 4.0 * se, "{avg} vs {neg_entropy}");
    }

    #[test]
    fn inverse_gamma_mean() {
        let mut r = rng::stream(11, &[0]);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_inverse_gamma(3.0, 2.0, &mut r).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn inverse_gamma_positive_and_reproducible() {
        let mut r = rng::stream(12, &[0]);
        assert!((0..10_000).all(|_| sample_inverse_gamma(1.0, 0.01, &mut r).unwrap() > 0.0));
        let a = sample_inverse_gamma(1.0, 0.01, &mut rng::stream(12, &[1])).unwrap();
        let b = sample_inverse_gamma(1.0, 0.01, &mut rng::stream(12, &[1])).unwrap();
        assert_eq!(a, b);
        assert!(sample_inverse_gamma(0.0, 1.0, &mut r).is_err());
        assert!(sample_inverse_gamma(1.0, -1.0, &mut r).is_err());
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5).unwrap(), 3.0);
        assert_eq!(percentile(&[10.0], 0.3).unwrap(), 10.0);
        assert_abs_diff_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), 1.75, epsilon = 1e-15);
        assert!(percentile(&[], 0.5).is_err());
        assert!(percentile(&[1.0], 0.0).is_err());
        assert!(percentile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn snr_examples() {
        // sample variance 9: values with mean 0 and sum of squares 9 * (n - 1)
        let l = [-3.0, 0.0, 3.0];
        assert_abs_diff_eq!(snr_to_sigma2(&l, 3.0).unwrap(), 3.0, epsilon = 1e-14);
        assert!(snr_to_sigma2(&l, 1e300).unwrap() < 1e-298);
        assert!(snr_to_sigma2(&[2.0, 2.0, 2.0], 3.0).is_err());
        assert!(snr_to_sigma2(&l, 0.0).is_err());
    }

    #[test]
    fn snr_decreasing_at_design_levels() {
        let mut r = rng::stream(13, &[0]);
        let l: Vec<f64> = (0..112).map(|_| r.random::<f64>()).collect();
        let s: Vec<f64> = [3.0, 5.0, 10.0]
            .iter()
            .map(|&snr| snr_to_sigma2(&l, snr).unwrap())
            .collect();
        assert!(s[0] > s[1] && s[1] > s[2]);
    }

    proptest! {
        #[test]
        fn covariance_symmetric_psd(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..8),
            tau2 in 0.01f64..10.0,
            decay in 0.1f64..40.0,
        ) {
            let rows: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let locs = SpatialLocations::from_rows(&rows).unwrap();
            let c = exp_covariance(&distance_matrix(&locs), &CovarianceSpec::exponential(tau2, decay).unwrap()).unwrap();
            prop_assert_eq!(&c, &c.transpose());
            let eig = c.symmetric_eigenvalues();
            prop_assert!(eig.min() > -1e-10 * tau2);
        }

        #[test]
        fn chol_reconstruction(seed in 0u64..1000, n in 1usize..10) {
            let mut r = rng::stream(seed, &[n as u64]);
            let m = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
            let a = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
            let l = chol_factor(&a).unwrap().l();
            prop_assert!((&l * l.transpose() - &a).abs().max() < 1e-8);
        }

        #[test]
        fn percentile_monotone(
            vals in proptest::collection::vec(-100.0f64..100.0, 1..30),
            d1 in 0.001f64..1.0,
            d2 in 0.001f64..1.0,
        ) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(percentile(&vals, lo).unwrap() <= percentile(&vals, hi).unwrap());
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(percentile(&vals, 1.0).unwrap(), max);
        }

        #[test]
        fn snr_homogeneous(
            vals in proptest::collection::vec(-10.0f64..10.0, 3..20),
            c in 0.1f64..10.0,
            snr in 0.5f64..20.0,
        ) {
            prop_assume!(sample_variance(&vals) > 1e-6);
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            let a = snr_to_sigma2(&vals, snr).unwrap();
            let b = snr_to_sigma2(&scaled, snr).unwrap();
            prop_assert!((b - c * c * a).abs() <= 1e-9 * b.abs());
        }
    }
}
