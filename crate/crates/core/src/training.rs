//! Pilot pattern, block-sparse training matrix and the UE-side observation
//! `y_tr = h^H X_tr + z_tr`.
//!
//! The training matrix is stored as a unit-power base `X_0` (one `M x T_p`
//! block per pilot subcarrier, entries `CN(0, 1/M)`) and a DL SNR, with
//! `X_tr = sqrt(snr_dl) X_0`. Changing the SNR never redraws the pilots.

use std::sync::Arc;

use rand::Rng;

use crate::channel_model::Covariance;
use crate::error::invalid;
use crate::linalg::{complex_normal_matrix, complex_normal_vector, scale_rows};
use crate::{CMatrix, CVector, Result};

/// Pilot subcarriers (1-based) `{offset, offset + s, offset + 2s, ...}` with
/// spacing `s = floor(N / N_p)`.
pub fn pilot_pattern(n: usize, n_p: usize) -> Result<Vec<usize>> {
    pilot_pattern_with_offset(n, n_p, 1)
}

pub fn pilot_pattern_with_offset(n: usize, n_p: usize, offset: usize) -> Result<Vec<usize>> {
    if n_p == 0 || n_p > n {
        return Err(invalid(format!("need 1 <= N_p <= N, got N_p = {n_p}, N = {n}")));
    }
    let spacing = n / n_p;
    if offset == 0 || offset + (n_p - 1) * spacing > n {
        return Err(invalid(format!("pilot offset {offset} places pilots outside [1, {n}]")));
    }
    Ok((0..n_p).map(|i| offset + i * spacing).collect())
}

/// Isotropic Gaussian training matrix of dimension `MN x β_tr`.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    pattern: Vec<usize>,
    t_p: usize,
    m: usize,
    n: usize,
    snr_dl: f64,
    blocks: Arc<Vec<CMatrix>>,
}

pub fn build_training_matrix<R: Rng + ?Sized>(
    pattern: &[usize],
    t_p: usize,
    m: usize,
    n: usize,
    snr_dl: f64,
    rng: &mut R,
) -> Result<TrainingMatrix> {
    if t_p == 0 {
        return Err(invalid("T_p must be at least 1"));
    }
    if m == 0 {
        return Err(invalid("M must be positive"));
    }
    if pattern.is_empty() || pattern.iter().any(|&sc| sc == 0 || sc > n) {
        return Err(invalid(format!("pilot pattern {pattern:?} is not a subset of [1, {n}]")));
    }
    if !(snr_dl >= 0.0) {
        return Err(invalid("snr_dl must be non-negative"));
    }
    let blocks = pattern
        .iter()
        .map(|_| complex_normal_matrix(rng, m, t_p, 1.0 / m as f64))
        .collect();
    Ok(TrainingMatrix {
        pattern: pattern.to_vec(),
        t_p,
        m,
        n,
        snr_dl,
        blocks: Arc::new(blocks),
    })
}

impl TrainingMatrix {
    /// Same pilots at a different DL SNR. `snr = 0` gives the all-zero
    /// training matrix.
    pub fn with_snr(&self, snr_dl: f64) -> Self {
        TrainingMatrix { snr_dl, ..self.clone() }
    }

    pub fn pattern(&self) -> &[usize] {
        &self.pattern
    }

    pub fn t_p(&self) -> usize {
        self.t_p
    }

    pub fn beta_tr(&self) -> usize {
        self.t_p * self.pattern.len()
    }

    pub fn snr_dl(&self) -> f64 {
        self.snr_dl
    }

    /// Channel dimension `MN`.
    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    pub fn antennas(&self) -> usize {
        self.m
    }

    pub fn subcarriers(&self) -> usize {
        self.n
    }

    fn rows_of(&self, block: usize) -> usize {
        (self.pattern[block] - 1) * self.m
    }

    /// Dense unit-power base `X_0`.
    pub fn base_matrix(&self) -> CMatrix {
        let mut x = CMatrix::zeros(self.dim(), self.beta_tr());
        for (b, blk) in self.blocks.iter().enumerate() {
            x.view_mut((self.rows_of(b), b * self.t_p), (self.m, self.t_p)).copy_from(blk);
        }
        x
    }

    /// Dense `X_tr = sqrt(snr_dl) X_0`.
    pub fn matrix(&self) -> CMatrix {
        self.base_matrix() * nalgebra::Complex::new(self.snr_dl.sqrt(), 0.0)
    }

    /// `B^H X_tr` for a basis `B` with `MN` rows, using the block sparsity.
    pub fn project(&self, basis: &CMatrix) -> CMatrix {
        assert_eq!(basis.nrows(), self.dim());
        let mut out = CMatrix::zeros(basis.ncols(), self.beta_tr());
        let s = self.snr_dl.sqrt();
        for (b, blk) in self.blocks.iter().enumerate() {
            let rows = basis.rows(self.rows_of(b), self.m);
            let mut prod = rows.ad_mul(blk);
            prod.scale_mut(s);
            out.view_mut((0, b * self.t_p), (basis.ncols(), self.t_p)).copy_from(&prod);
        }
        out
    }

    /// Entries of the row vector `h^H X_tr`.
    pub fn apply(&self, h: &CVector) -> Result<CVector> {
        if h.len() != self.dim() {
            return Err(invalid(format!(
                "channel length {} does not match training dimension {}",
                h.len(),
                self.dim()
            )));
        }
        let mut out = CVector::zeros(self.beta_tr());
        let s = self.snr_dl.sqrt();
        for (b, blk) in self.blocks.iter().enumerate() {
            let hb = h.rows(self.rows_of(b), self.m);
            let row = blk.ad_mul(&hb);
            for t in 0..self.t_p {
                out[b * self.t_p + t] = row[t].conj() * s;
            }
        }
        Ok(out)
    }

    /// `Σ_y = X^H Σ^h X + I`, formed in the eigenbasis of `cov`.
    pub fn observation_covariance(&self, cov: &Covariance) -> CMatrix {
        let beta = self.beta_tr();
        let mut sigma = CMatrix::identity(beta, beta);
        if cov.rank() > 0 {
            let p = self.project(cov.eigvecs());
            let sq: Vec<f64> = cov.eigvals().iter().map(|l| l.sqrt()).collect();
            let a = scale_rows(&p, &sq);
            sigma += a.ad_mul(&a);
        }
        crate::linalg::hermitian_part(&sigma)
    }
}

/// Noisy training observation `y_tr = h^H X_tr + z_tr`, `z_tr ~ CN(0, I)`.
/// Returned as the entries of the row vector.
pub fn observe<R: Rng + ?Sized>(h: &CVector, x: &TrainingMatrix, rng: &mut R) -> Result<CVector> {
    let clean = x.apply(h)?;
    Ok(clean + complex_normal_vector(rng, x.beta_tr(), 1.0))
}

/// Noise-free observation `h^H X_tr`, for deterministic checks.
pub fn observe_noiseless(h: &CVector, x: &TrainingMatrix) -> Result<CVector> {
    x.apply(h)
}
