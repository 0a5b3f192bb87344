//! UE-side MMSE estimation of the channel from the training observation.
//!
//! With `Σ^h = U Λ U^H` (rank `r`) and `A = Λ^{1/2} U^H X_tr`, every quantity
//! reduces to the `r x r` core `G = A A^H`:
//!
//! * `E[h | y] = U Λ^{1/2} (I + G)^{-1} A y^H`,
//! * `Σ^u = U Λ^{1/2} G (I + G)^{-1} Λ^{1/2} U^H`,
//! * `D_mmse = Tr(Λ (I - G + G (I + G)^{-1} G)) = Tr(Λ (I + G)^{-1})`.
//!
//! Nothing of size `MN x MN` or `β_tr x β_tr` is factorized.

use std::sync::Arc;

use num_complex::Complex64;

use crate::channel_model::Covariance;
use crate::error::invalid;
use crate::linalg::{hermitian_eigen, hermitian_part, scale_cols, scale_rows, weighted_trace};
use crate::training::TrainingMatrix;
use crate::{CMatrix, CVector, Result};

/// Eigenvalues of `Σ^u` below this fraction of the largest are set to zero.
pub const POSTERIOR_CLAMP: f64 = 1e-12;

/// Gram core `G` in the channel eigenbasis together with its eigensystem.
#[derive(Debug, Clone)]
pub struct GramCore {
    pub matrix: CMatrix,
    /// Eigenvalues `μ_i`, descending, clamped at zero.
    pub eigvals: Vec<f64>,
    pub eigvecs: CMatrix,
}

impl GramCore {
    pub fn new(matrix: CMatrix) -> Self {
        let matrix = hermitian_part(&matrix);
        let (vals, vecs) = hermitian_eigen(&matrix);
        // G has rank at most min(r, β); drop the rounding dust of the null space
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        GramCore {
            matrix,
            eigvals: vals.into_iter().map(|v| if v > POSTERIOR_CLAMP * top { v } else { 0.0 }).collect(),
            eigvecs: vecs,
        }
    }

    /// `Tr(Λ (I + G)^{-1})` for the channel eigenvalues `lambda`.
    pub fn residual_error(&self, lambda: &[f64]) -> f64 {
        let w: Vec<f64> = self.eigvals.iter().map(|m| 1.0 / (1.0 + m)).collect();
        weighted_trace(&self.eigvecs, lambda, &w)
    }

    /// `g = Tr(I - G + G (I + G)^{-1} G) = r - Σ μ / (1 + μ)`.
    pub fn trace_factor(&self) -> f64 {
        self.eigvals.iter().map(|m| 1.0 / (1.0 + m)).sum()
    }

    /// `(I + G)^{-1}`.
    pub fn regularized_inverse(&self) -> CMatrix {
        let d: Vec<f64> = self.eigvals.iter().map(|m| 1.0 / (1.0 + m)).collect();
        spectral(&self.eigvecs, &d)
    }
}

/// `Q diag(d) Q^H`.
pub(crate) fn spectral(q: &CMatrix, d: &[f64]) -> CMatrix {
    let scaled = CMatrix::from_fn(q.nrows(), q.ncols(), |r, c| q[(r, c)] * d[c]);
    &scaled * q.adjoint()
}

/// Posterior statistics of `h` given `y_tr` for one (covariance, training
/// matrix) pair.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    basis: Arc<CMatrix>,
    channel_eigvals: Vec<f64>,
    coeff_filter: CMatrix,
    kl_basis: CMatrix,
    kl_filter: CMatrix,
    eigvals_u: Vec<f64>,
    d_mmse: f64,
    gram: GramCore,
}

pub fn posterior_stats(cov: &Covariance, x: &TrainingMatrix) -> Result<PosteriorModel> {
    if cov.rank() == 0 {
        return Err(invalid("posterior statistics need a covariance of rank >= 1"));
    }
    if cov.dim() != x.dim() {
        return Err(invalid(format!(
            "covariance dimension {} does not match training dimension {}",
            cov.dim(),
            x.dim()
        )));
    }
    let lambda = cov.eigvals().to_vec();
    let sqrt_l: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let a = scale_rows(&x.project(cov.eigvecs()), &sqrt_l);
    let gram = GramCore::new(&a * a.adjoint());

    let inv = gram.regularized_inverse();
    let coeff_filter = scale_rows(&(&inv * &a), &sqrt_l);
    let d_mmse = gram.residual_error(&lambda);

    // Σ^u core in the U basis: Λ^{1/2} G (I + G)^{-1} Λ^{1/2}.
    let shrink: Vec<f64> = gram.eigvals.iter().map(|m| m / (1.0 + m)).collect();
    let mid = spectral(&gram.eigvecs, &shrink);
    let core = scale_cols(&scale_rows(&mid, &sqrt_l), &sqrt_l);
    let (mut eigvals_u, kl_basis) = hermitian_eigen(&core);
    let top = eigvals_u.first().copied().unwrap_or(0.0).max(0.0);
    for v in eigvals_u.iter_mut() {
        if *v <= POSTERIOR_CLAMP * top {
            *v = 0.0;
        }
    }
    let kl_filter = kl_basis.ad_mul(&coeff_filter);

    Ok(PosteriorModel {
        basis: cov.eigvecs_shared(),
        channel_eigvals: lambda,
        coeff_filter,
        kl_basis,
        kl_filter,
        eigvals_u,
        d_mmse,
        gram,
    })
}

impl PosteriorModel {
    /// MMSE `D_mmse = E||h - u||^2`.
    pub fn d_mmse(&self) -> f64 {
        self.d_mmse
    }

    /// Eigenvalues `λ^u` of `Σ^u`, descending, length `r`.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals_u
    }

    /// `Σ_ℓ λ^u_ℓ`.
    pub fn signal_power(&self) -> f64 {
        self.eigvals_u.iter().sum()
    }

    /// `Tr(Σ^h)`.
    pub fn channel_power(&self) -> f64 {
        self.channel_eigvals.iter().sum()
    }

    pub fn gram(&self) -> &GramCore {
        &self.gram
    }

    pub fn rank(&self) -> usize {
        self.channel_eigvals.len()
    }

    /// Full `MN x β_tr` filter `W` with `u = W y^H`.
    pub fn filter(&self) -> CMatrix {
        &*self.basis * &self.coeff_filter
    }

    /// Eigenvectors `g_ℓ` of `Σ^u` (`MN x r`).
    pub fn eigvecs(&self) -> CMatrix {
        &*self.basis * &self.kl_basis
    }

    /// Rotation from KL coordinates to channel-eigenbasis coordinates.
    pub fn kl_basis(&self) -> &CMatrix {
        &self.kl_basis
    }

    /// `Σ^u` as a dense `MN x MN` matrix.
    pub fn posterior_covariance(&self) -> CMatrix {
        spectral(&self.eigvecs(), &self.eigvals_u)
    }

    fn check(&self, y: &CVector) -> Result<()> {
        if y.len() != self.coeff_filter.ncols() {
            return Err(invalid(format!(
                "observation length {} does not match β_tr = {}",
                y.len(),
                self.coeff_filter.ncols()
            )));
        }
        Ok(())
    }

    /// `U_h^H u` for the observation entries `y`.
    pub fn estimate_coefficients(&self, y: &CVector) -> Result<CVector> {
        self.check(y)?;
        Ok(&self.coeff_filter * conj(y))
    }

    /// KL coefficients `w_ℓ = g_ℓ^H u`.
    pub fn kl_coefficients(&self, y: &CVector) -> Result<CVector> {
        self.check(y)?;
        Ok(&self.kl_filter * conj(y))
    }

    /// Maps KL coordinates to the full channel space.
    pub fn synthesize(&self, w: &CVector) -> CVector {
        &*self.basis * (&self.kl_basis * w)
    }
}

pub(crate) fn conj(y: &CVector) -> CVector {
    y.map(|z: Complex64| z.conj())
}

/// `u = E[h | y_tr]` for the observation entries `y`.
pub fn mmse_estimate(pm: &PosteriorModel, y: &CVector) -> Result<CVector> {
    let c = pm.estimate_coefficients(y)?;
    Ok(&*pm.basis * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::{covariance_from_geometry, sample_channel, sample_geometry, ArrayParams};
    use crate::linalg::frobenius_rel_error;
    use crate::oracle::dense_mmse_error;
    use crate::training::{build_training_matrix, observe, pilot_pattern};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, paths: usize, t_p: usize, snr: f64) -> (Covariance, TrainingMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_geometry(paths, ArrayParams::for_subcarriers(4), &mut rng).unwrap();
        let cov = covariance_from_geometry(&g, 4, 4).unwrap();
        let x = build_training_matrix(&pilot_pattern(4, 2).unwrap(), t_p, 4, 4, snr, &mut rng).unwrap();
        (cov, x)
    }

    #[test]
    fn no_training_no_information() {
        let (cov, x) = setup(1, 5, 3, 0.0);
        let pm = posterior_stats(&cov, &x).unwrap();
        assert!(pm.filter().norm() == 0.0);
        assert!(pm.eigvals().iter().all(|&v| v == 0.0));
        assert!((pm.d_mmse() - 16.0).abs() < 1e-12);
    }

    #[test]
    fn rank_zero_rejected() {
        let (_, x) = setup(1, 5, 3, 1.0);
        assert!(posterior_stats(&Covariance::zero(16), &x).is_err());
    }

    #[test]
    fn reduced_matches_dense_formula() {
        for seed in 0..20 {
            let (cov, x) = setup(seed, 2 + (seed as usize % 6), 1 + seed as usize % 4, 10.0);
            let pm = posterior_stats(&cov, &x).unwrap();
            let dense = dense_mmse_error(cov.matrix(), &x.matrix());
            assert!((pm.d_mmse() - dense).abs() <= 1e-8 * dense, "{} vs {dense}", pm.d_mmse());
            let resid = pm.channel_power() - pm.signal_power();
            assert!((resid - pm.d_mmse()).abs() <= 1e-8 * pm.d_mmse());
        }
    }

    #[test]
    fn gram_definition_and_filter() {
        let (cov, x) = setup(3, 4, 3, 5.0);
        let pm = posterior_stats(&cov, &x).unwrap();
        let xd = x.matrix();
        let sqrt_l = CMatrix::from_diagonal(&CVector::from_iterator(
            cov.rank(),
            cov.eigvals().iter().map(|l| Complex64::new(l.sqrt(), 0.0)),
        ));
        let g = &sqrt_l * cov.eigvecs().adjoint() * &xd * xd.adjoint() * cov.eigvecs() * &sqrt_l;
        assert!(frobenius_rel_error(&pm.gram().matrix, &g) < 1e-10);

        let sy = xd.adjoint() * cov.matrix() * &xd + CMatrix::identity(6, 6);
        let w = cov.matrix() * &xd * sy.clone().cholesky().unwrap().inverse();
        assert!(frobenius_rel_error(&pm.filter(), &w) < 1e-9);
        let su = &w * &sy * w.adjoint();
        assert!(frobenius_rel_error(&pm.posterior_covariance(), &su) < 1e-9);
    }

    #[test]
    fn high_snr_decay_with_enough_pilots() {
        // beta_tr = 8 >= r = 5
        let (cov, x) = setup(4, 5, 4, 1e4);
        let d1 = posterior_stats(&cov, &x).unwrap().d_mmse();
        let d4 = posterior_stats(&cov, &x.with_snr(4e4)).unwrap().d_mmse();
        assert!((d4 / d1 - 0.25).abs() < 0.02, "{}", d4 / d1);
    }

    #[test]
    fn floor_with_too_few_pilots() {
        // beta_tr = 4 < r = 8
        let (cov, x) = setup(5, 8, 2, 1e2);
        let low = posterior_stats(&cov, &x).unwrap();
        let high = posterior_stats(&cov, &x.with_snr(1e6)).unwrap();
        assert!(high.d_mmse() >= 0.5 * low.d_mmse());
        assert_eq!(high.eigvals().iter().filter(|&&v| v > 0.0).count(), 4);
    }

    #[test]
    fn posterior_rank_is_min_of_pilots_and_rank() {
        for (paths, t_p) in [(3, 1), (3, 4), (6, 2), (6, 3)] {
            let (cov, x) = setup(6, paths, t_p, 20.0);
            let pm = posterior_stats(&cov, &x).unwrap();
            let nz = pm.eigvals().iter().filter(|&&v| v > 0.0).count();
            assert_eq!(nz, paths.min(x.beta_tr()));
        }
    }

    #[test]
    fn trace_sandwich() {
        for seed in 0..10 {
            let (cov, x) = setup(10 + seed, 6, 2, 3.0);
            let pm = posterior_stats(&cov, &x).unwrap();
            let g = pm.gram().trace_factor();
            let lmax = cov.eigvals()[0];
            let lmin = *cov.eigvals().last().unwrap();
            assert!(lmin * g <= pm.d_mmse() * (1.0 + 1e-12));
            assert!(pm.d_mmse() <= lmax * g * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_observation_zero_estimate() {
        let (cov, x) = setup(7, 3, 2, 2.0);
        let pm = posterior_stats(&cov, &x).unwrap();
        let u = mmse_estimate(&pm, &CVector::zeros(x.beta_tr())).unwrap();
        assert_eq!(u.norm(), 0.0);
        assert!(mmse_estimate(&pm, &CVector::zeros(3)).is_err());
    }

    #[test]
    fn monte_carlo_mmse_and_orthogonality() {
        let (cov, x) = setup(8, 5, 3, 3.0);
        let pm = posterior_stats(&cov, &x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let trials = 10_000;
        let mut err = 0.0;
        let mut cross = CMatrix::zeros(16, 16);
        let mut resid_sum = CVector::zeros(16);
        for _ in 0..trials {
            let h = sample_channel(&cov, &mut rng).h;
            let y = observe(&h, &x, &mut rng).unwrap();
            let u = mmse_estimate(&pm, &y).unwrap();
            let resid = &h - &u;
            assert!((&u - cov.eigvecs() * cov.project(&u)).norm() <= 1e-9 * u.norm().max(1e-300));
            err += resid.norm_squared();
            cross += &resid * u.adjoint();
            resid_sum += &resid;
        }
        let err = err / trials as f64;
        assert!((err - pm.d_mmse()).abs() < 0.03 * pm.d_mmse(), "{err} vs {}", pm.d_mmse());
        cross.unscale_mut(trials as f64);
        // Residual and estimate are independent Gaussians, so each entry of the
        // sample mean has standard deviation sqrt(E|e_i|^2 E|u_j|^2 / trials).
        let su = pm.posterior_covariance();
        let se = cov.matrix() - &su;
        let max_e = (0..16).map(|i| se[(i, i)].re).fold(0.0, f64::max);
        let max_u = (0..16).map(|i| su[(i, i)].re).fold(0.0, f64::max);
        let tol = 5.0 * (max_e * max_u / trials as f64).sqrt();
        let worst = cross.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < tol, "{worst} vs {tol}");
        assert!(resid_sum.norm() / (trials as f64) < 5.0 * (16.0 * max_e / trials as f64).sqrt());
    }

    #[test]
    fn empirical_posterior_covariance() {
        let (cov, x) = setup(9, 4, 3, 5.0);
        let pm = posterior_stats(&cov, &x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let trials = 100_000;
        let mut acc = CMatrix::zeros(16, 16);
        for _ in 0..trials {
            let h = sample_channel(&cov, &mut rng).h;
            let y = observe(&h, &x, &mut rng).unwrap();
            let u = mmse_estimate(&pm, &y).unwrap();
            acc += &u * u.adjoint();
        }
        acc.unscale_mut(trials as f64);
        assert!(frobenius_rel_error(&acc, &pm.posterior_covariance()) < 0.05);
    }
}
