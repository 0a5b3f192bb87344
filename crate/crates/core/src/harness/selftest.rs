//! Oracle self-test: reduced solvers against dense formulas and bisection.

use rand::Rng;
use serde::Serialize;

use crate::analog_feedback::{spreading_from_base, AfEstimator};
use crate::channel_model::{covariance_from_geometry, sample_geometry, ArrayParams};
use crate::ecsq::{allocate_bits, ECSQ_OVERHEAD_BITS};
use crate::estimation::posterior_stats;
use crate::linalg::haar_unitary;
use crate::oracle::{bisect_water_level, dense_af_error, dense_mmse_error, rel_err};
use crate::rate_distortion::{remote_distortion, remote_rate, waterlevel_from_distortion};
use crate::rng::{substream, Stream};
use crate::training::{build_training_matrix, pilot_pattern};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation and its tolerance.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, errs: impl IntoIterator<Item = f64>, tolerance: f64) -> Check {
    let errs: Vec<f64> = errs.into_iter().collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Check {
        name: name.to_string(),
        passed: errs.iter().all(|e| *e <= tolerance),
        worst,
        tolerance,
        cases: errs.len(),
    }
}

/// Runs the equivalence checks on small random instances (`MN <= 64`).
pub fn run_selftest(seed: u64) -> SelftestReport {
    let mut mmse = Vec::new();
    let mut af = Vec::new();
    let mut power = Vec::new();
    let mut trip = Vec::new();
    let mut overhead = Vec::new();
    for i in 0..50u64 {
        let mut rng = substream(seed, Stream::TestChannel, &[i]);
        let m = rng.random_range(1..=8usize);
        let n = rng.random_range(1..=8usize);
        let paths = rng.random_range(1..=(m * n + 4));
        let g = sample_geometry(paths, ArrayParams::for_subcarriers(n), &mut rng).expect("valid geometry");
        let cov = covariance_from_geometry(&g, m, n).expect("valid covariance");
        let n_p = rng.random_range(1..=n);
        let t_p = rng.random_range(1..=6usize);
        let snr = 10f64.powf(rng.random_range(-1.0..5.0));
        let x = build_training_matrix(&pilot_pattern(n, n_p).expect("valid pattern"), t_p, m, n, snr, &mut rng)
            .expect("valid training");
        let pm = posterior_stats(&cov, &x).expect("rank >= 1");
        mmse.push(rel_err(pm.d_mmse(), dense_mmse_error(cov.matrix(), &x.matrix())));

        let beta = x.beta_tr();
        let beta_fb = rng.random_range(1..=2 * beta);
        let sy = x.observation_covariance(&cov);
        let base = haar_unitary(&mut rng, beta);
        let sp = spreading_from_base(&sy, &base, beta_fb, m, snr).expect("valid spreading");
        let est = AfEstimator::new(&cov, &x, &sp).expect("dimensions agree");
        af.push(rel_err(est.error(), dense_af_error(cov.matrix(), &x.matrix(), &sp.psi)));
        for c in 0..beta_fb {
            let p = sp.psi.column(c);
            power.push(rel_err(p.dotc(&(&sy * p)).re, m as f64 * snr));
        }

        // Rates whose excess over D_mmse stays resolvable in D = D_mmse + excess.
        let top = remote_rate(&pm, pm.d_mmse() * (1.0 + 1e-4)).expect("feasible").min(20.0 * pm.rank() as f64);
        let rate = rng.random_range(0.0..top.max(1e-3));
        let d = remote_distortion(&pm, rate).expect("rate >= 0");
        if rate > 0.0 {
            trip.push((remote_rate(&pm, d).expect("feasible") - rate).abs() / rate.max(1.0));
        }
        if pm.signal_power() > 0.0 {
            let d = pm.d_mmse() + rng.random_range(0.01..1.0) * pm.signal_power();
            let a = allocate_bits(&pm, d).expect("feasible");
            let r = remote_rate(&pm, d).expect("feasible");
            overhead.push((a.total_bits - r - ECSQ_OVERHEAD_BITS * a.quantized.len() as f64).abs());
        }
    }

    let mut wf = Vec::new();
    let mut rng = substream(seed, Stream::TestChannel, &[u64::MAX]);
    for _ in 0..1000 {
        let len = rng.random_range(1..=40usize);
        let lam: Vec<f64> = (0..len).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let total: f64 = lam.iter().sum();
        let excess = rng.random_range(1e-3..1.0) * total;
        let sol = waterlevel_from_distortion(&lam, excess).expect("excess > 0");
        let oracle = bisect_water_level(&lam, excess);
        wf.push(rel_err(sol.gamma, oracle).max(rel_err(sol.distortion_excess, excess)));
    }

    SelftestReport {
        checks: vec![
            check("mmse error: eigenbasis route vs dense formula", mmse, 1e-8),
            check("af error: reduced form vs dense formula", af, 1e-8),
            check("spreading power constraint", power, 1e-8),
            check("reverse water-filling: closed form vs bisection", wf, 1e-10),
            check("remote rate/distortion round trip", trip, 1e-8),
            check("ecsq overhead of 1.508 bits per quantized coefficient", overhead, 1e-9),
        ],
    }
}
