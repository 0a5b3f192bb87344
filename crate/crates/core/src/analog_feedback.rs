//! Analog feedback: the UE forwards `y_tr Ψ` over the uplink and the BS forms
//! the MMSE estimate of `h` from `y_af = y_tr Ψ + z`.
//!
//! With `B = Λ^{1/2} U^H X Ψ` and `N = Ψ^H Ψ + I` the BS-side problem has the
//! same reduced structure as training, with core `G = B N^{-1} B^H`:
//! `ĥ = U Λ^{1/2} (I + G)^{-1} B N^{-1} y_af^H` and
//! `D_af = Tr(Λ (I + G)^{-1})`.

use std::sync::Arc;

use num_rational::Ratio;
use rand::Rng;

use crate::channel_model::Covariance;
use crate::error::invalid;
use crate::estimation::{conj, GramCore};
use crate::linalg::{complex_normal_vector, haar_unitary, scale_rows};
use crate::rate_distortion::rd_dof;
use crate::training::TrainingMatrix;
use crate::{CMatrix, CVector, Result};

/// Power-normalized spreading matrix `Ψ = [sqrt(a_1) φ_1, ...]`.
#[derive(Debug, Clone)]
pub struct SpreadingMatrix {
    pub psi: CMatrix,
    /// Unit-norm base directions `φ_i` (`β_tr x β_fb`).
    pub directions: CMatrix,
    /// `a_i = M snr_ul / (φ_i^H Σ_y φ_i)`.
    pub scales: Vec<f64>,
}

impl SpreadingMatrix {
    pub fn beta_tr(&self) -> usize {
        self.psi.nrows()
    }

    pub fn beta_fb(&self) -> usize {
        self.psi.ncols()
    }

    /// `ζ = β_fb / β_tr`.
    pub fn zeta(&self) -> f64 {
        self.beta_fb() as f64 / self.beta_tr() as f64
    }
}

/// Spreading matrix built on the columns of a fresh Haar unitary.
pub fn build_spreading_matrix<R: Rng + ?Sized>(
    sigma_y: &CMatrix,
    beta_fb: usize,
    m: usize,
    snr_ul: f64,
    rng: &mut R,
) -> Result<SpreadingMatrix> {
    let base = haar_unitary(rng, sigma_y.nrows());
    spreading_from_base(sigma_y, &base, beta_fb, m, snr_ul)
}

/// Spreading matrix on the columns of `base` (a `β_tr x β_tr` unitary),
/// reused cyclically when `β_fb > β_tr`.
pub fn spreading_from_base(
    sigma_y: &CMatrix,
    base: &CMatrix,
    beta_fb: usize,
    m: usize,
    snr_ul: f64,
) -> Result<SpreadingMatrix> {
    let beta_tr = sigma_y.nrows();
    if !sigma_y.is_square() || base.shape() != (beta_tr, beta_tr) {
        return Err(invalid("spreading base and Σ_y must both be β_tr x β_tr"));
    }
    if beta_tr == 0 {
        return Err(invalid("β_tr must be positive"));
    }
    if !(snr_ul > 0.0) {
        return Err(invalid(format!("snr_ul must be positive, got {snr_ul}")));
    }
    let directions = CMatrix::from_fn(beta_tr, beta_fb, |r, c| base[(r, c % beta_tr)]);
    let target = m as f64 * snr_ul;
    let mut psi = directions.clone();
    let mut scales = Vec::with_capacity(beta_fb);
    for i in 0..beta_fb {
        let phi = directions.column(i);
        let quad = phi.dotc(&(sigma_y * phi)).re;
        let a = target / quad;
        psi.column_mut(i).scale_mut(a.sqrt());
        scales.push(a);
    }
    Ok(SpreadingMatrix { psi, directions, scales })
}

/// Entries of `y_af = y_tr Ψ + z`, `z ~ CN(0, I)`.
pub fn af_transmit<R: Rng + ?Sized>(y_tr: &CVector, sp: &SpreadingMatrix, rng: &mut R) -> Result<CVector> {
    Ok(af_transmit_noiseless(y_tr, sp)? + complex_normal_vector(rng, sp.beta_fb(), 1.0))
}

/// `y_tr Ψ` without uplink noise.
pub fn af_transmit_noiseless(y_tr: &CVector, sp: &SpreadingMatrix) -> Result<CVector> {
    if y_tr.len() != sp.beta_tr() {
        return Err(invalid(format!(
            "observation length {} does not match spreading matrix with β_tr = {}",
            y_tr.len(),
            sp.beta_tr()
        )));
    }
    Ok(sp.psi.transpose() * y_tr)
}

/// BS-side MMSE estimator for one (covariance, training, spreading) triple.
#[derive(Debug, Clone)]
pub struct AfEstimator {
    basis: Arc<CMatrix>,
    coeff_filter: CMatrix,
    error: f64,
    gram: GramCore,
}

impl AfEstimator {
    pub fn new(cov: &Covariance, x: &TrainingMatrix, sp: &SpreadingMatrix) -> Result<Self> {
        if cov.dim() != x.dim() || x.beta_tr() != sp.beta_tr() {
            return Err(invalid("covariance, training and spreading dimensions disagree"));
        }
        let sqrt_l: Vec<f64> = cov.eigvals().iter().map(|l| l.sqrt()).collect();
        let a = scale_rows(&x.project(cov.eigvecs()), &sqrt_l);
        Ok(Self::from_core(cov, &a, &sp.psi))
    }

    /// From `A = Λ^{1/2} U^H X` and `Ψ`.
    pub(crate) fn from_core(cov: &Covariance, a: &CMatrix, psi: &CMatrix) -> Self {
        let r = cov.rank();
        let b = a * psi;
        let bf = psi.ncols();
        let nmat = psi.ad_mul(psi) + CMatrix::identity(bf, bf);
        let z = if bf == 0 {
            CMatrix::zeros(0, r)
        } else {
            nmat.cholesky().expect("Ψ^H Ψ + I is positive definite").solve(&b.adjoint())
        };
        let gram = GramCore::new(&b * &z);
        let sqrt_l: Vec<f64> = cov.eigvals().iter().map(|l| l.sqrt()).collect();
        let coeff_filter = if r == 0 {
            CMatrix::zeros(0, bf)
        } else {
            scale_rows(&(gram.regularized_inverse() * z.adjoint()), &sqrt_l)
        };
        let error = gram.residual_error(cov.eigvals());
        AfEstimator { basis: cov.eigvecs_shared(), coeff_filter, error, gram }
    }

    /// Analytic `E||h - ĥ||^2`.
    pub fn error(&self) -> f64 {
        self.error
    }

    pub fn gram(&self) -> &GramCore {
        &self.gram
    }

    /// Eigenbasis coordinates `U^H ĥ`.
    pub fn estimate_coefficients(&self, y_af: &CVector) -> Result<CVector> {
        if y_af.len() != self.coeff_filter.ncols() {
            return Err(invalid(format!(
                "feedback length {} does not match β_fb = {}",
                y_af.len(),
                self.coeff_filter.ncols()
            )));
        }
        Ok(&self.coeff_filter * conj(y_af))
    }

    /// Dense `MN x β_fb` estimator with `ĥ = F y_af^H`.
    pub fn filter(&self) -> CMatrix {
        &*self.basis * &self.coeff_filter
    }
}

/// `ĥ = E[h | y_af]`.
pub fn af_estimate(est: &AfEstimator, y_af: &CVector) -> Result<CVector> {
    let c = est.estimate_coefficients(y_af)?;
    if c.is_empty() {
        return Ok(CVector::zeros(est.basis.nrows()));
    }
    Ok(&*est.basis * c)
}

/// Analytic AF estimation error.
pub fn af_error(cov: &Covariance, x: &TrainingMatrix, sp: &SpreadingMatrix) -> Result<f64> {
    Ok(AfEstimator::new(cov, x, sp)?.error())
}

/// `α_af = 1{min(β_tr, β_fb) >= r}`.
pub fn af_exponent(beta_tr: usize, beta_fb: usize, r: usize) -> Ratio<usize> {
    assert!(r >= 1, "covariance rank must be at least 1");
    Ratio::from_integer(usize::from(beta_tr.min(beta_fb) >= r))
}

pub fn af_dof(alpha: Ratio<usize>, k: usize) -> Ratio<usize> {
    rd_dof(alpha, k)
}
