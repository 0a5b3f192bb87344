//! Zero-forcing precoding from estimated CSIT and the ergodic sum-rate
//! `Σ_k avg_n w_n log2(1 + |g_kk|^2 / (N_0 + Σ_{k'≠k} |g_kk'|^2))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::link::UserLink;
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Smallest-to-largest eigenvalue ratio of `Ĥ Ĥ^H` below which a ZF
/// precoder is treated as singular.
pub const ZF_RANK_TOLERANCE: f64 = 1e-12;

/// How the BS learns the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rd,
    Ecsq,
    Af,
    Perfect,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Rd, Strategy::Ecsq, Strategy::Af, Strategy::Perfect];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rd => "rd",
            Strategy::Ecsq => "ecsq",
            Strategy::Af => "af",
            Strategy::Perfect => "perfect",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// Rate weight of pilot subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotWeighting {
    /// `(T - T_p) / T` on pilot subcarriers, 1 elsewhere.
    #[default]
    Overhead,
    /// 1 everywhere.
    Uniform,
}

/// Per-subcarrier weights `w_n` (0-based `n`, pattern 1-based).
pub fn subcarrier_weights(n: usize, pattern: &[usize], t_p: usize, t: usize, weighting: PilotWeighting) -> Vec<f64> {
    let mut w = vec![1.0; n];
    if weighting == PilotWeighting::Overhead {
        let pilot = (t as f64 - t_p as f64) / t as f64;
        for &sc in pattern {
            w[sc - 1] = pilot;
        }
    }
    w
}

/// ZF precoders `V[n]` (`M x K`, unit-norm columns) for every subcarrier.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub per_subcarrier: Vec<CMatrix>,
}

/// Column-normalized pseudo-inverse of `Ĥ = [ĥ_1, ..., ĥ_K]^H` built from
/// the estimates on one subcarrier (0-based index, used in the error).
pub fn zf_precoder(estimates: &[CVector], subcarrier: usize) -> Result<CMatrix> {
    let k = estimates.len();
    if k == 0 {
        return Err(invalid("need at least one user"));
    }
    let m = estimates[0].len();
    if k > m || estimates.iter().any(|e| e.len() != m) {
        return Err(invalid(format!("need K <= M and equal lengths, got K = {k}, M = {m}")));
    }
    // Ĥ^H is M x K with columns ĥ_k
    let hh = CMatrix::from_columns(estimates);
    let gram = hh.ad_mul(&hh);
    let (vals, _) = crate::linalg::hermitian_eigen(&gram);
    let (top, bottom) = (vals[0], vals[k - 1]);
    if !(top > 0.0 && bottom > ZF_RANK_TOLERANCE * top) {
        return Err(Error::SingularPrecoder { subcarrier });
    }
    let inv = gram.cholesky().ok_or(Error::SingularPrecoder { subcarrier })?.inverse();
    let mut v = hh * inv;
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        col.unscale_mut(norm);
    }
    Ok(v)
}

/// Precoders on all `N` subcarriers from full `MN` channel estimates.
pub fn zf_precoders(estimates: &[CVector], m: usize, n: usize) -> Result<PrecoderSet> {
    let per_subcarrier = (0..n)
        .map(|sc| {
            let sub: Vec<CVector> = estimates.iter().map(|e| e.rows(sc * m, m).into_owned()).collect();
            zf_precoder(&sub, sc)
        })
        .collect::<Result<_>>()?;
    Ok(PrecoderSet { per_subcarrier })
}

/// `g_{k,k'} = sqrt(P) h_k^H v_{k'}` for the true channels on one subcarrier.
pub fn effective_gains(channels: &[CVector], v: &CMatrix, power: f64) -> CMatrix {
    let hm = CMatrix::from_columns(channels);
    hm.ad_mul(v) * Complex64::new(power.sqrt(), 0.0)
}

/// `log2(1 + SINR_k)` for each user with unit noise.
pub fn user_rates(gains: &CMatrix) -> Vec<f64> {
    (0..gains.nrows())
        .map(|k| {
            let signal = gains[(k, k)].norm_sqr();
            let interference: f64 = (0..gains.ncols()).filter(|&j| j != k).map(|j| gains[(k, j)].norm_sqr()).sum();
            (1.0 + signal / (1.0 + interference)).log2()
        })
        .collect()
}

/// Weighted sum-rate of one frame from true and estimated full channels.
pub fn frame_sumrate(channels: &[CVector], estimates: &[CVector], m: usize, snr_dl: f64, weights: &[f64]) -> Result<f64> {
    let n = weights.len();
    let k = channels.len();
    let power = snr_dl / k as f64;
    let mut total = 0.0;
    for (sc, &w) in weights.iter().enumerate() {
        let est: Vec<CVector> = estimates.iter().map(|e| e.rows(sc * m, m).into_owned()).collect();
        let v = zf_precoder(&est, sc)?;
        let truth: Vec<CVector> = channels.iter().map(|h| h.rows(sc * m, m).into_owned()).collect();
        total += w * user_rates(&effective_gains(&truth, &v, power)).iter().sum::<f64>();
    }
    Ok(total / n as f64)
}

/// `K` user links sharing one training matrix, plus the rate weighting.
#[derive(Debug, Clone)]
pub struct DownlinkScenario {
    pub links: Vec<UserLink>,
    pub antennas: usize,
    pub snr_dl: f64,
    pub weights: Vec<f64>,
}

impl DownlinkScenario {
    /// Sum-rate of channel draw `channel` for each strategy; `None` marks a
    /// singular precoder (the trial is discarded).
    pub fn frame_sumrates(&self, channel: u64, strategies: &[Strategy]) -> Vec<Option<f64>> {
        let frames: Vec<_> = self.links.iter().map(|l| l.frame(channel)).collect();
        let truth: Vec<CVector> = self.links.iter().zip(&frames).map(|(l, f)| l.expand(&f.coeffs)).collect();
        strategies
            .iter()
            .map(|&s| {
                let est: Vec<CVector> = if s == Strategy::Perfect {
                    truth.clone()
                } else {
                    self.links.iter().zip(&frames).map(|(l, f)| l.expand(&l.estimate(s, f))).collect()
                };
                match frame_sumrate(&truth, &est, self.antennas, self.snr_dl, &self.weights) {
                    Ok(r) => Some(r),
                    Err(Error::SingularPrecoder { .. }) => None,
                    Err(e) => panic!("sum-rate evaluation failed: {e}"),
                }
            })
            .collect()
    }
}

/// Mean and standard error over accepted trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRateEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_trials: usize,
    pub discarded: usize,
}

/// Mean, standard error and count of a sample, in input order.
pub fn summarize(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Monte Carlo ergodic sum-rate of one strategy over channel draws
/// `0..trials`.
pub fn ergodic_sumrate(scenario: &DownlinkScenario, strategy: Strategy, trials: usize) -> Result<SumRateEstimate> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let draws: Vec<Option<f64>> = (0..trials as u64)
        .map(|t| scenario.frame_sumrates(t, &[strategy])[0])
        .collect();
    let ok: Vec<f64> = draws.iter().flatten().copied().collect();
    let (mean, stderr) = summarize(&ok);
    Ok(SumRateEstimate { mean, stderr, n_trials: ok.len(), discarded: trials - ok.len() })
}
