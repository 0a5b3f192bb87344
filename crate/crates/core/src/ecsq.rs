//! Entropy-coded scalar quantization of the KL coefficients `w_ℓ` of the
//! MMSE estimate.
//!
//! Coefficients with `λ^u_ℓ > γ` are quantized with a subtractive-dithered
//! uniform quantizer of step `sqrt(6γ)` per real dimension (error `γ` per
//! complex coefficient) and charged `log2(λ^u_ℓ / γ) + 1.508` bits. The
//! remaining coefficients are reconstructed as zero. The entropy coder itself
//! is not realized: only its rate is accounted.

use rand::Rng;

use crate::estimation::PosteriorModel;
use crate::rate_distortion::waterlevel_from_distortion;
use crate::{CVector, Complex64, Error, Result};

/// Extra bits per complex coefficient over the Gaussian rate-distortion
/// function paid by a dithered uniform quantizer with ideal entropy coding.
pub const ECSQ_OVERHEAD_BITS: f64 = 1.508;

/// Water level, quantized set and bit accounting for one target error.
#[derive(Debug, Clone, PartialEq)]
pub struct BitAllocation {
    pub gamma: f64,
    /// KL indices that are quantized, ascending.
    pub quantized: Vec<usize>,
    /// `b_ℓ` for each entry of `quantized`.
    pub per_coeff_bits: Vec<f64>,
    /// `R_scalar = Σ b_ℓ`.
    pub total_bits: f64,
    /// `D_mmse + Σ min(γ, λ^u_ℓ)`.
    pub target_d: f64,
    /// Budget so large that the excess over `D_mmse` is below the floating
    /// point resolution of `target_d`.
    pub saturated: bool,
    /// Budget bits left unused (a budget that falls between two active-set
    /// sizes cannot be spent exactly).
    pub slack_bits: f64,
}

impl BitAllocation {
    fn build(pm: &PosteriorModel, gamma: f64) -> Self {
        let lam = pm.eigvals();
        let quantized: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] > gamma).collect();
        let per_coeff_bits: Vec<f64> = quantized
            .iter()
            .map(|&i| (lam[i] / gamma).log2() + ECSQ_OVERHEAD_BITS)
            .collect();
        let total_bits = per_coeff_bits.iter().sum();
        let excess: f64 = lam.iter().map(|&l| l.min(gamma)).sum();
        BitAllocation {
            gamma,
            quantized,
            per_coeff_bits,
            total_bits,
            target_d: pm.d_mmse() + excess,
            saturated: false,
            slack_bits: 0.0,
        }
    }

    fn empty(pm: &PosteriorModel) -> Self {
        BitAllocation {
            gamma: pm.eigvals().first().copied().unwrap_or(0.0),
            quantized: Vec::new(),
            per_coeff_bits: Vec::new(),
            total_bits: 0.0,
            target_d: pm.d_mmse() + pm.signal_power(),
            saturated: false,
            slack_bits: 0.0,
        }
    }

    /// Quantizer step per real dimension.
    pub fn step(&self) -> f64 {
        (6.0 * self.gamma).sqrt()
    }
}

/// Allocation reaching error `d`.
pub fn allocate_bits(pm: &PosteriorModel, d: f64) -> Result<BitAllocation> {
    let floor = pm.d_mmse();
    if d <= floor {
        return Err(Error::InfeasibleDistortion { requested: d, floor });
    }
    if d - floor >= pm.signal_power() {
        return Ok(BitAllocation::empty(pm));
    }
    let sol = waterlevel_from_distortion(pm.eigvals(), d - floor)?;
    Ok(BitAllocation::build(pm, sol.gamma))
}

/// Smallest ECSQ error whose rate fits `β_fb · C_ul` bits.
pub fn budget_to_error(pm: &PosteriorModel, beta_fb: usize, c_ul: f64) -> BitAllocation {
    allocation_for_bits(pm, beta_fb as f64 * c_ul)
}

/// Inverts `R_scalar(γ)` segment by segment. With the `k` largest
/// coefficients quantized, `R_scalar = Σ_{i<=k} log2 λ_i - k log2 γ + 1.508 k`
/// for `λ_{k+1} <= γ < λ_k`. Between segments the rate jumps by 1.508 bits;
/// a budget inside such a jump uses `k` coefficients at `γ = λ_{k+1}` and
/// leaves the rest as slack.
pub fn allocation_for_bits(pm: &PosteriorModel, budget: f64) -> BitAllocation {
    assert!(budget >= 0.0 && !budget.is_nan(), "bit budget must be non-negative");
    let lam: Vec<f64> = pm.eigvals().iter().copied().filter(|&v| v > 0.0).collect();
    let mut out = None;
    let mut log_sum = 0.0;
    for k in 1..=lam.len() {
        log_sum += lam[k - 1].log2();
        let next = lam.get(k).copied().unwrap_or(0.0);
        let entry = log_sum - k as f64 * lam[k - 1].log2() + ECSQ_OVERHEAD_BITS * k as f64;
        if budget < entry {
            // inside the jump below segment k: k - 1 coefficients at γ = λ_k
            let mut a = BitAllocation::build(pm, lam[k - 1]);
            a.slack_bits = budget - a.total_bits;
            out = Some(a);
            break;
        }
        let log_gamma = (log_sum + ECSQ_OVERHEAD_BITS * k as f64 - budget) / k as f64;
        let gamma = log_gamma.exp2();
        if gamma >= next {
            out = Some(BitAllocation::build(pm, gamma));
            break;
        }
    }
    let mut a = match out {
        Some(a) => a,
        None => {
            let mut a = BitAllocation::empty(pm);
            a.slack_bits = budget;
            a
        }
    };
    a.saturated = !a.quantized.is_empty() && a.target_d == pm.d_mmse();
    a
}

/// Shared dither `(d_re, d_im)` for each quantized coefficient, drawn from
/// `U(-Δ/2, Δ/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dither {
    offsets: Vec<(f64, f64)>,
}

impl Dither {
    pub fn draw<R: Rng + ?Sized>(alloc: &BitAllocation, rng: &mut R) -> Self {
        let half = 0.5 * alloc.step();
        let offsets = alloc
            .quantized
            .iter()
            .map(|_| (rng.random_range(-half..=half), rng.random_range(-half..=half)))
            .collect();
        Dither { offsets }
    }

    /// No dither (plain mid-tread quantizer).
    pub fn zero(alloc: &BitAllocation) -> Self {
        Dither { offsets: vec![(0.0, 0.0); alloc.quantized.len()] }
    }
}

/// Quantization indices `(q_re, q_im)` of the quantized coefficients.
pub fn ecsq_encode(w: &CVector, alloc: &BitAllocation, dither: &Dither) -> Vec<(i64, i64)> {
    let step = alloc.step();
    alloc
        .quantized
        .iter()
        .zip(&dither.offsets)
        .map(|(&i, &(dr, di))| {
            let q = |x: f64, d: f64| ((x + d) / step).round() as i64;
            (q(w[i].re, dr), q(w[i].im, di))
        })
        .collect()
}

/// Reconstruction `q Δ - d` on the quantized set, zero elsewhere.
pub fn ecsq_decode(indices: &[(i64, i64)], alloc: &BitAllocation, dither: &Dither, len: usize) -> CVector {
    let step = alloc.step();
    let mut w = CVector::zeros(len);
    for ((&i, &(qr, qi)), &(dr, di)) in alloc.quantized.iter().zip(indices).zip(&dither.offsets) {
        w[i] = Complex64::new(qr as f64 * step - dr, qi as f64 * step - di);
    }
    w
}

/// Encode then decode with a freshly drawn dither.
pub fn ecsq_encode_decode<R: Rng + ?Sized>(w: &CVector, alloc: &BitAllocation, rng: &mut R) -> CVector {
    let dither = Dither::draw(alloc, rng);
    let idx = ecsq_encode(w, alloc, &dither);
    ecsq_decode(&idx, alloc, &dither, w.len())
}
