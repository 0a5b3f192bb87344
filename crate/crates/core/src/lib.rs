//! Simulation of downlink training and uplink CSI feedback in wideband FDD
//! massive MIMO.
//!
//! The crate models a base station with `M` antennas serving `K` users over
//! `N` OFDM subcarriers. Each user observes noisy isotropic pilots, and the
//! base station learns the channel through one of three feedback strategies:
//!
//! * `rd`: the remote rate-distortion bound evaluated over the uplink
//!   capacity budget,
//! * `ecsq`: entropy-coded dithered scalar quantization of the KL
//!   coefficients of the user's MMSE estimate,
//! * `af`: analog retransmission of the raw pilot observations through a
//!   power-normalized spreading matrix.
//!
//! All heavy algebra is carried out in the rank-`r` eigenbasis of the channel
//! covariance, so the `MN`-dimensional objects are only touched when a
//! full-dimensional vector is actually requested.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analog_feedback;
pub mod channel_model;
pub mod downlink;
pub mod ecsq;
mod error;
pub mod estimation;
pub mod harness;
pub mod link;
pub mod linalg;
pub mod oracle;
pub mod rate_distortion;
pub mod rng;
pub mod training;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
