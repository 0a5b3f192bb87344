//! One user's training and feedback chain at a fixed operating point,
//! simulated in the rank-`r` eigenbasis of its channel covariance.
//!
//! A [`UserLink`] caches everything that does not change across channel
//! draws: the posterior model, the rate-distortion water level, the ECSQ
//! allocation and the analog-feedback estimator. Each frame then only touches
//! vectors of length `r`, `β_tr` and `β_fb`. Squared errors in these
//! coordinates equal squared errors of the full channel vector because
//! `U_h` has orthonormal columns.

use std::sync::Arc;

use crate::analog_feedback::{spreading_from_base, AfEstimator, SpreadingMatrix};
use crate::channel_model::Covariance;
use crate::downlink::Strategy;
use crate::ecsq::{budget_to_error, ecsq_encode_decode, BitAllocation};
use crate::estimation::{conj, posterior_stats, PosteriorModel};
use crate::linalg::{complex_normal, complex_normal_vector, scale_rows};
use crate::rate_distortion::{feedback_capacity, rd_operating_point, WaterfillSolution};
use crate::rng::{substream, Stream};
use crate::training::TrainingMatrix;
use crate::{CMatrix, CVector, Result};

/// Identifies a link's random substreams: `(seed, [covariance, matrix, user])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkKey {
    pub seed: u64,
    pub covariance: u64,
    pub matrix: u64,
    pub user: u64,
}

impl LinkKey {
    fn stream(&self, s: Stream, channel: u64) -> rand_chacha::ChaCha8Rng {
        substream(self.seed, s, &[self.covariance, self.matrix, self.user, channel])
    }
}

/// True channel coordinates and the UE's training observation for one frame.
#[derive(Debug, Clone)]
pub struct Frame {
    pub channel: u64,
    /// `c = U_h^H h`.
    pub coeffs: CVector,
    /// Entries of `y_tr = h^H X_tr + z`.
    pub y_tr: CVector,
}

#[derive(Debug, Clone)]
pub struct UserLink {
    key: LinkKey,
    cov: Arc<Covariance>,
    proj: CMatrix,
    pm: PosteriorModel,
    c_ul: f64,
    beta_fb: usize,
    rd: WaterfillSolution,
    ecsq: BitAllocation,
    spreading: SpreadingMatrix,
    af: AfEstimator,
}

impl UserLink {
    /// `spreading_base` is the `β_tr x β_tr` unitary whose columns give the
    /// AF directions.
    pub fn new(
        key: LinkKey,
        cov: Arc<Covariance>,
        x: &TrainingMatrix,
        spreading_base: &CMatrix,
        beta_fb: usize,
        kappa: f64,
    ) -> Result<Self> {
        let pm = posterior_stats(&cov, x)?;
        let proj = x.project(cov.eigvecs());
        let c_ul = feedback_capacity(x.snr_dl(), kappa, x.antennas());
        let rd = rd_operating_point(&pm, beta_fb, c_ul);
        let ecsq = budget_to_error(&pm, beta_fb, c_ul);

        let sqrt_l: Vec<f64> = cov.eigvals().iter().map(|l| l.sqrt()).collect();
        let a = scale_rows(&proj, &sqrt_l);
        let beta = x.beta_tr();
        let sigma_y = crate::linalg::hermitian_part(&(a.ad_mul(&a) + CMatrix::identity(beta, beta)));
        let spreading = spreading_from_base(&sigma_y, spreading_base, beta_fb, x.antennas(), kappa * x.snr_dl())?;
        let af = AfEstimator::from_core(&cov, &a, &spreading.psi);
        Ok(UserLink { key, cov, proj, pm, c_ul, beta_fb, rd, ecsq, spreading, af })
    }

    pub fn key(&self) -> LinkKey {
        self.key
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    pub fn posterior(&self) -> &PosteriorModel {
        &self.pm
    }

    pub fn uplink_capacity(&self) -> f64 {
        self.c_ul
    }

    pub fn beta_fb(&self) -> usize {
        self.beta_fb
    }

    pub fn rd_solution(&self) -> &WaterfillSolution {
        &self.rd
    }

    pub fn ecsq_allocation(&self) -> &BitAllocation {
        &self.ecsq
    }

    pub fn spreading(&self) -> &SpreadingMatrix {
        &self.spreading
    }

    pub fn af_estimator(&self) -> &AfEstimator {
        &self.af
    }

    /// Analytic CSIT error of a strategy.
    pub fn analytic_error(&self, strategy: Strategy) -> f64 {
        match strategy {
            Strategy::Rd => self.pm.d_mmse() + self.rd.distortion_excess,
            Strategy::Ecsq => self.ecsq.target_d,
            Strategy::Af => self.af.error(),
            Strategy::Perfect => 0.0,
        }
    }

    /// Draws channel `channel` of this link together with its training
    /// observation. The draws do not depend on the SNR.
    pub fn frame(&self, channel: u64) -> Frame {
        let mut g = self.key.stream(Stream::ChannelGains, channel);
        let coeffs = self.cov.sample_coefficients(&mut g);
        let mut z = self.key.stream(Stream::TrainingNoise, channel);
        let y_tr = conj(&self.proj.ad_mul(&coeffs)) + complex_normal_vector(&mut z, self.proj.ncols(), 1.0);
        Frame { channel, coeffs, y_tr }
    }

    /// BS-side channel estimate in eigenbasis coordinates.
    pub fn estimate(&self, strategy: Strategy, frame: &Frame) -> CVector {
        match strategy {
            Strategy::Perfect => frame.coeffs.clone(),
            Strategy::Rd => {
                let w = self.pm.kl_coefficients(&frame.y_tr).expect("frame matches link");
                let mut rng = self.key.stream(Stream::TestChannel, frame.channel);
                let lam = self.pm.eigvals();
                let gamma = self.rd.gamma;
                let mut wh = CVector::zeros(w.len());
                // backward Gaussian test channel w = ŵ + e, E|e|^2 = γ
                for &i in &self.rd.active {
                    let s = 1.0 - gamma / lam[i];
                    wh[i] = w[i] * s + complex_normal(&mut rng, s * gamma);
                }
                self.pm.kl_basis() * wh
            }
            Strategy::Ecsq => {
                let w = self.pm.kl_coefficients(&frame.y_tr).expect("frame matches link");
                let mut rng = self.key.stream(Stream::Dither, frame.channel);
                self.pm.kl_basis() * ecsq_encode_decode(&w, &self.ecsq, &mut rng)
            }
            Strategy::Af => {
                let mut rng = self.key.stream(Stream::FeedbackNoise, frame.channel);
                let y_af = self.spreading.psi.transpose() * &frame.y_tr
                    + complex_normal_vector(&mut rng, self.beta_fb, 1.0);
                self.af.estimate_coefficients(&y_af).expect("feedback matches link")
            }
        }
    }

    /// `||h - ĥ||^2` for one frame.
    pub fn squared_error(&self, strategy: Strategy, frame: &Frame) -> f64 {
        (&frame.coeffs - self.estimate(strategy, frame)).norm_squared()
    }

    /// Full `MN` vector `U_h c`.
    pub fn expand(&self, coeffs: &CVector) -> CVector {
        self.cov.expand(coeffs)
    }
}
