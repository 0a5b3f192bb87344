//! Experiment orchestration: configuration, sweeps, exponent fits,
//! persistence and the oracle self-test.
//!
//! The harness is the only place that schedules parallel work. Work units are
//! evaluated with rayon, collected in a fixed order and reduced sequentially,
//! so outputs do not depend on the number of worker threads.

mod config;
mod fit;
mod output;
mod selftest;
mod sweep;

use std::collections::BTreeMap;

use serde::Serialize;

pub use config::{PilotLengths, SystemConfig, Trials};
pub use fit::{fit_exponent, ExponentFit};
pub use output::{to_csv, write_csv, write_json, Row, CSV_HEADER};
pub use selftest::{run_selftest, Check, SelftestReport};
pub use sweep::{run_exponent, run_mse_sweep, run_sumrate_sweep, theory_for};

/// Closed-form exponents and DoF at one training/feedback dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theory {
    pub beta_tr: usize,
    pub beta_fb: usize,
    pub r: usize,
    pub alpha_rd: String,
    pub alpha_af: String,
    pub dof_rd: String,
    pub dof_af: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub config: SystemConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    /// Trials dropped because of a singular ZF precoder, per strategy.
    pub discarded_trials: BTreeMap<String, usize>,
    /// Ranks of the generated covariances, per covariance draw and user.
    pub covariance_ranks: Vec<Vec<usize>>,
    pub theory: Vec<Theory>,
    pub notes: Vec<String>,
}

/// Tabulated rows plus provenance.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    pub meta: Metadata,
}

impl SweepResult {
    pub fn csv(&self) -> String {
        to_csv(&self.rows)
    }

    /// Rows of one strategy and metric, in table order.
    pub fn series(&self, strategy: &str, metric: &str) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.strategy == strategy && r.metric == metric).collect()
    }
}
