//! Remote rate-distortion function of the channel given the training
//! observation, its inverse, the feedback-capacity error bound and the
//! quality scaling exponent of the rate-distortion strategy.
//!
//! Rates are in bits (log base 2). The remote problem reduces to reverse
//! water-filling over the eigenvalues `λ^u` of the posterior-mean covariance:
//! `R(D) = Σ [log2(λ^u / γ)]_+` with `Σ min(γ, λ^u) = D - D_mmse`.

use num_rational::Ratio;

use crate::error::invalid;
use crate::estimation::PosteriorModel;
use crate::{Error, Result};

/// Reverse water-filling state for one water level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub gamma: f64,
    /// Indices `ℓ` (into the eigenvalue slice) with `λ_ℓ > γ`.
    pub active: Vec<usize>,
    pub rate_bits: f64,
    /// `Σ min(γ, λ_ℓ)`.
    pub distortion_excess: f64,
    /// Set when the requested excess exceeded `Σ λ` and was clamped.
    pub clamped: bool,
}

fn sorted_desc(eigvals: &[f64]) -> Result<Vec<(usize, f64)>> {
    if let Some(bad) = eigvals.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(invalid(format!("eigenvalues must be finite and non-negative, got {bad}")));
    }
    let mut s: Vec<(usize, f64)> = eigvals.iter().copied().enumerate().collect();
    s.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(s)
}

fn solution_at(eigvals: &[f64], gamma: f64, clamped: bool) -> WaterfillSolution {
    let active: Vec<usize> = (0..eigvals.len()).filter(|&i| eigvals[i] > gamma).collect();
    let rate_bits = active.iter().map(|&i| (eigvals[i] / gamma).log2()).sum();
    let distortion_excess = eigvals.iter().map(|&l| l.min(gamma)).sum();
    WaterfillSolution { gamma, active, rate_bits, distortion_excess, clamped }
}

/// Water level `γ` with `Σ min(γ, λ_ℓ) = excess`, found by scanning the
/// sorted eigenvalues: on `[λ_{k+1}, λ_k]` the clipped sum is `kγ + Σ_{i>k} λ_i`.
pub fn waterlevel_from_distortion(eigvals: &[f64], excess: f64) -> Result<WaterfillSolution> {
    if !(excess > 0.0) {
        return Err(invalid(format!("distortion excess must be positive, got {excess}")));
    }
    let sorted = sorted_desc(eigvals)?;
    let total: f64 = eigvals.iter().sum();
    let top = sorted.first().map(|p| p.1).unwrap_or(0.0);
    if excess >= total {
        return Ok(solution_at(eigvals, top, excess > total));
    }
    let n = sorted.len();
    // tail[k] = Σ_{i >= k} λ_(i) over the sorted order
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + sorted[k].1;
    }
    for k in 1..=n {
        let next = if k < n { sorted[k].1 } else { 0.0 };
        let gamma = (excess - tail[k]) / k as f64;
        if gamma >= next && gamma <= sorted[k - 1].1 {
            return Ok(solution_at(eigvals, gamma, false));
        }
    }
    unreachable!("excess {excess} below total {total} always has a segment");
}

/// Inverse parametrization: water level with `Σ [log2(λ/γ)]_+ = rate`.
/// On a segment with the `k` largest eigenvalues active,
/// `log2 γ = (Σ_{i<=k} log2 λ_i - rate) / k`.
pub fn waterlevel_from_rate(eigvals: &[f64], rate: f64) -> Result<WaterfillSolution> {
    if !(rate >= 0.0) {
        return Err(invalid(format!("rate must be non-negative, got {rate}")));
    }
    let sorted = sorted_desc(eigvals)?;
    let positive: Vec<f64> = sorted.iter().map(|p| p.1).filter(|&v| v > 0.0).collect();
    let Some(&top) = positive.first() else {
        return Ok(solution_at(eigvals, 0.0, false));
    };
    if rate == 0.0 {
        return Ok(solution_at(eigvals, top, false));
    }
    let mut log_sum = 0.0;
    for k in 1..=positive.len() {
        log_sum += positive[k - 1].log2();
        let log_gamma = (log_sum - rate) / k as f64;
        let next = positive.get(k).copied().unwrap_or(0.0);
        let gamma = log_gamma.exp2();
        if gamma >= next && gamma < positive[k - 1] {
            return Ok(solution_at(eigvals, gamma, false));
        }
    }
    unreachable!("positive rate always lands on a segment");
}

/// `R_h^r(D)` in bits. `D = D_mmse` needs infinite rate.
pub fn remote_rate(pm: &PosteriorModel, d: f64) -> Result<f64> {
    let floor = pm.d_mmse();
    if d < floor {
        return Err(Error::InfeasibleDistortion { requested: d, floor });
    }
    if pm.signal_power() == 0.0 {
        return Ok(0.0);
    }
    if d == floor {
        return Ok(f64::INFINITY);
    }
    Ok(waterlevel_from_distortion(pm.eigvals(), d - floor)?.rate_bits)
}

/// `D_h^r(R)`, the inverse of [`remote_rate`].
pub fn remote_distortion(pm: &PosteriorModel, rate: f64) -> Result<f64> {
    let sol = waterlevel_from_rate(pm.eigvals(), rate)?;
    Ok(pm.d_mmse() + sol.distortion_excess)
}

/// High-SNR uplink capacity `log2(1 + M κ snr_dl)` per channel use.
pub fn feedback_capacity(snr_dl: f64, kappa: f64, m: usize) -> f64 {
    (1.0 + m as f64 * kappa * snr_dl).log2()
}

/// Smallest error reachable with `β_fb` uplink uses: `D_h^r(β_fb C_ul)`.
pub fn rd_error_bound(pm: &PosteriorModel, beta_fb: usize, c_ul: f64) -> f64 {
    remote_distortion(pm, beta_fb as f64 * c_ul).expect("non-negative feedback budget")
}

/// Water-filling solution realized by the rate-distortion strategy.
pub fn rd_operating_point(pm: &PosteriorModel, beta_fb: usize, c_ul: f64) -> WaterfillSolution {
    waterlevel_from_rate(pm.eigvals(), beta_fb as f64 * c_ul).expect("non-negative feedback budget")
}

/// `α_rd = min(β_fb / r, 1) · 1{β_tr >= r}`.
pub fn rd_exponent(beta_tr: usize, beta_fb: usize, r: usize) -> Ratio<usize> {
    assert!(r >= 1, "covariance rank must be at least 1");
    if beta_tr >= r {
        Ratio::new(beta_fb.min(r), r)
    } else {
        Ratio::from_integer(0)
    }
}

/// DoF with rate-splitting, `1 + α (K - 1)`.
pub fn rd_dof(alpha: Ratio<usize>, k: usize) -> Ratio<usize> {
    assert!(k >= 1, "need at least one user");
    assert!(alpha <= Ratio::from_integer(1), "exponent must lie in [0, 1]");
    Ratio::from_integer(1) + alpha * (k - 1)
}
