//! Independent reference computations used by the self-test and the test
//! suites. These routines use the textbook dense formulas (or plain bisection)
//! and share no code path with the reduced solvers they check.

use crate::CMatrix;

/// `Tr(Σ - Σ X (X^H Σ X + I)^{-1} X^H Σ)` by dense inversion, evaluated
/// as `Tr(Σ (I + X X^H Σ)^{-1})`. The two are equal by the push-through
/// identity; the second avoids subtracting two traces of size `MN` when the
/// result is small.
pub fn dense_mmse_error(sigma_h: &CMatrix, x: &CMatrix) -> f64 {
    let dim = sigma_h.nrows();
    let m = CMatrix::identity(dim, dim) + x * x.adjoint() * sigma_h;
    solve(m, sigma_h, "I + X X^H Σ is invertible").trace().re
}

/// `M^{-1} B` by fully pivoted LU. nalgebra's `try_inverse` switches to
/// cofactor formulas up to 4 x 4, which lose digits on ill-conditioned input.
fn solve(m: CMatrix, b: &CMatrix, what: &str) -> CMatrix {
    m.full_piv_lu().solve(b).expect(what)
}

/// `Tr(Σ - Σ X Ψ Σ_af^{-1} Ψ^H X^H Σ)` with
/// `Σ_af = Ψ^H X^H Σ X Ψ + Ψ^H Ψ + I`, evaluated as
/// `Tr(Σ (I + X Ψ (Ψ^H Ψ + I)^{-1} Ψ^H X^H Σ)^{-1})`.
pub fn dense_af_error(sigma_h: &CMatrix, x: &CMatrix, psi: &CMatrix) -> f64 {
    let dim = sigma_h.nrows();
    let b = psi.ncols();
    let xp = x * psi;
    let noise = solve(psi.adjoint() * psi + CMatrix::identity(b, b), &xp.adjoint(), "Ψ^H Ψ + I is invertible");
    let m = CMatrix::identity(dim, dim) + &xp * noise * sigma_h;
    solve(m, sigma_h, "feedback information matrix is invertible").trace().re
}

/// Dense AF estimator matrix `Σ X Ψ Σ_af^{-1}`.
pub fn dense_af_filter(sigma_h: &CMatrix, x: &CMatrix, psi: &CMatrix) -> CMatrix {
    let b = psi.ncols();
    let xp = x * psi;
    let saf = xp.adjoint() * sigma_h * &xp + psi.adjoint() * psi + CMatrix::identity(b, b);
    let rhs = (sigma_h * &xp).adjoint();
    solve(saf.adjoint(), &rhs, "feedback covariance is positive definite").adjoint()
}

/// `Σ_ℓ min(γ, λ_ℓ)`.
pub fn clipped_sum(eigvals: &[f64], gamma: f64) -> f64 {
    eigvals.iter().map(|&l| l.min(gamma)).sum()
}

/// Water level solving `Σ min(γ, λ) = excess` by bisection on
/// `[0, max λ]`.
pub fn bisect_water_level(eigvals: &[f64], excess: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = eigvals.iter().cloned().fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clipped_sum(eigvals, mid) < excess {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Reverse water-filling rate `Σ [log2(λ / γ)]_+`.
pub fn rate_at_level(eigvals: &[f64], gamma: f64) -> f64 {
    eigvals.iter().filter(|&&l| l > gamma).map(|&l| (l / gamma).log2()).sum()
}

/// Water level for a target rate by bisection in `log γ`.
pub fn bisect_level_for_rate(eigvals: &[f64], rate: f64) -> f64 {
    let top = eigvals.iter().cloned().fold(0.0, f64::max);
    let mut lo = (top.ln()) - 800.0;
    let mut hi = top.ln();
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if rate_at_level(eigvals, mid.exp()) > rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Relative error `|a - b| / |b|` (absolute when `b = 0`).
pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a - b).abs()
    } else {
        ((a - b) / b).abs()
    }
}
