//! Scenario configuration read from JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel_model::{ArrayParams, DEFAULT_DELTA_F};
use crate::downlink::{PilotWeighting, Strategy};
use crate::training::pilot_pattern_with_offset;
use crate::{Error, Result};

/// `T_p` as a single value or a list (sum-rate sweeps over `β_tr`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PilotLengths {
    One(usize),
    Many(Vec<usize>),
}

impl PilotLengths {
    pub fn values(&self) -> Vec<usize> {
        match self {
            PilotLengths::One(v) => vec![*v],
            PilotLengths::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trials {
    #[serde(default = "default_matrices")]
    pub matrices: usize,
    #[serde(default = "default_covariances")]
    pub covariances: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
}

fn default_matrices() -> usize {
    10
}
fn default_covariances() -> usize {
    1
}
fn default_channels() -> usize {
    100
}

impl Default for Trials {
    fn default() -> Self {
        Trials { matrices: 10, covariances: 1, channels: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N_p")]
    pub n_p: usize,
    #[serde(rename = "T_p")]
    pub t_p: PilotLengths,
    #[serde(rename = "T")]
    pub t: usize,
    pub snr_db_grid: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_fb: Option<usize>,
    #[serde(default = "default_d_over_lambda")]
    pub d_over_lambda: f64,
    #[serde(default = "default_delta_f")]
    pub delta_f: f64,
    /// Defaults to `1 / (Δf N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trials: Trials,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub pilot_weighting: PilotWeighting,
    /// First pilot subcarrier (1-based).
    #[serde(default = "default_offset")]
    pub pilot_offset: usize,
}

fn default_kappa() -> f64 {
    1.0
}
fn default_d_over_lambda() -> f64 {
    0.5
}
fn default_delta_f() -> f64 {
    DEFAULT_DELTA_F
}
fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}
fn default_offset() -> usize {
    1
}

impl SystemConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [("M", self.m), ("N", self.n), ("K", self.k), ("L", self.l), ("N_p", self.n_p), ("T", self.t)] {
            if v == 0 {
                bad.push(format!("{name} must be at least 1"));
            }
        }
        if self.k > self.m {
            bad.push(format!("K = {} exceeds M = {} (need K <= M)", self.k, self.m));
        }
        if self.n_p > self.n {
            bad.push(format!("N_p = {} exceeds N = {} (need N_p <= N)", self.n_p, self.n));
        } else if self.n_p > 0 && pilot_pattern_with_offset(self.n, self.n_p, self.pilot_offset).is_err() {
            bad.push(format!("pilot_offset = {} places pilots outside [1, N]", self.pilot_offset));
        }
        let t_p = self.t_p.values();
        if t_p.is_empty() {
            bad.push("T_p list is empty".into());
        }
        for &v in &t_p {
            if v == 0 || v > self.t {
                bad.push(format!("T_p = {v} must satisfy 1 <= T_p <= T = {}", self.t));
            }
        }
        if self.snr_db_grid.is_empty() {
            bad.push("snr_db_grid is empty".into());
        }
        if self.snr_db_grid.iter().any(|v| !v.is_finite()) {
            bad.push("snr_db_grid entries must be finite".into());
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            bad.push(format!("kappa = {} must be positive", self.kappa));
        }
        match (self.zeta, self.beta_fb) {
            (Some(_), Some(_)) => bad.push("give exactly one of zeta and beta_fb, not both".into()),
            (None, None) => bad.push("give exactly one of zeta and beta_fb".into()),
            (Some(z), None) if !(z >= 0.0 && z.is_finite()) => bad.push(format!("zeta = {z} must be non-negative")),
            _ => {}
        }
        if !(self.d_over_lambda > 0.0 && self.d_over_lambda.is_finite()) {
            bad.push("d_over_lambda must be positive".into());
        }
        if !(self.delta_f > 0.0 && self.delta_f.is_finite()) {
            bad.push("delta_f must be positive".into());
        }
        if let Some(t) = self.tau_max {
            if !(t > 0.0 && t.is_finite()) {
                bad.push("tau_max must be positive".into());
            }
        }
        for (name, v) in [
            ("trials.matrices", self.trials.matrices),
            ("trials.covariances", self.trials.covariances),
            ("trials.channels", self.trials.channels),
        ] {
            if v == 0 {
                bad.push(format!("{name} must be at least 1"));
            }
        }
        if self.strategies.is_empty() {
            bad.push("strategies is empty".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn array_params(&self) -> ArrayParams {
        ArrayParams {
            d_over_lambda: self.d_over_lambda,
            delta_f: self.delta_f,
            tau_max: self.tau_max.unwrap_or(1.0 / (self.delta_f * self.n as f64)),
        }
    }

    pub fn pilot_pattern(&self) -> Vec<usize> {
        pilot_pattern_with_offset(self.n, self.n_p, self.pilot_offset).expect("validated config")
    }

    pub fn beta_tr(&self, t_p: usize) -> usize {
        t_p * self.n_p
    }

    /// `β_fb` at a training dimension: the fixed value, or `ceil(ζ β_tr)`.
    /// A relative slack of 1e-9 keeps products such as `0.1 * 30` from
    /// rounding up past the exact integer.
    pub fn beta_fb_for(&self, beta_tr: usize) -> usize {
        match (self.beta_fb, self.zeta) {
            (Some(b), _) => b,
            (None, Some(z)) => {
                let x = z * beta_tr as f64;
                (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize
            }
            (None, None) => unreachable!("validated config"),
        }
    }

    /// Selected strategies in canonical order without duplicates.
    pub fn strategy_list(&self) -> Vec<Strategy> {
        Strategy::ALL.into_iter().filter(|s| self.strategies.contains(s)).collect()
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
