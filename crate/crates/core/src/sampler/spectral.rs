//! Eigen-decomposed correlation matrices `H(b) = Q diag(lambda) Q'`.
//!
//! With `Sigma_Y = tau2 H` and `Sigma_Z = tau2 H + sigma2 I` sharing the
//! eigenvectors `Q`, the BLUP smoother is `Q diag(s) Q'` with
//! `s_i = tau2 lambda_i / (tau2 lambda_i + sigma2)`. The CPE then reduces to
//! `sum (1 - s_i)^2 r_i^2 + 2 sigma2 sum s_i` where `r = Q'(z - X beta)`, an
//! `O(n p)` evaluation once `Q'z` and `Q'X` are cached.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::stats::JITTER_SCALE;

#[derive(Debug, Clone)]
pub struct LevelCache {
    pub decay: f64,
    pub log_prior: f64,
    pub eigvals: DVector<f64>,
    pub eigvecs: DMatrix<f64>,
    /// `Q' X`
    pub qtx: DMatrix<f64>,
    pub log_det: f64,
}

impl LevelCache {
    pub fn new(distances: &DMatrix<f64>, decay: f64, prior_mass: f64, x: &DMatrix<f64>) -> Result<Self> {
        let h = distances.map(|d| (-decay * d).exp());
        let mut eig = SymmetricEigen::new(h.clone());
        if eig.eigenvalues.min() <= 0.0 {
            let mut jittered = h;
            for i in 0..jittered.nrows() {
                jittered[(i, i)] += JITTER_SCALE;
            }
            eig = SymmetricEigen::new(jittered);
            if eig.eigenvalues.min() <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
        }
        let log_det = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        let qtx = eig.eigenvectors.transpose() * x;
        Ok(Self {
            decay,
            log_prior: prior_mass.ln(),
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
            qtx,
            log_det,
        })
    }

    pub fn n(&self) -> usize {
        self.eigvals.len()
    }

    /// `Q' v`
    pub fn rotate(&self, v: &DVector<f64>) -> DVector<f64> {
        self.eigvecs.tr_mul(v)
    }

    /// `w' H^{-1} w`
    pub fn quad_form_inv(&self, w: &DVector<f64>) -> f64 {
        self.rotate(w)
            .iter()
            .zip(self.eigvals.iter())
            .map(|(c, l)| c * c / l)
            .sum()
    }

    /// CPE given the rotated residual `Q'(z - X beta)`.
    pub fn cpe_rotated(&self, rotated_resid: &DVector<f64>, tau2: f64, sigma2: f64) -> f64 {
        let mut fit = 0.0;
        let mut edf = 0.0;
        for (r, l) in rotated_resid.iter().zip(self.eigvals.iter()) {
            let signal = tau2 * l;
            let s = signal / (signal + sigma2);
            let shrink = sigma2 / (signal + sigma2);
            fit += shrink * shrink * r * r;
            edf += s;
        }
        fit + 2.0 * sigma2 * edf
    }
}
