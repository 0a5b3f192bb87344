//! MSE and sum-rate sweeps.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::fit::fit_exponent;
use super::{Metadata, Row, SweepResult, SystemConfig, Theory};
use crate::analog_feedback::{af_dof, af_exponent};
use crate::channel_model::{covariance_from_geometry, sample_geometry, Covariance};
use crate::downlink::{subcarrier_weights, summarize, DownlinkScenario, Strategy};
use crate::linalg::haar_unitary;
use crate::link::{LinkKey, UserLink};
use crate::rate_distortion::{rd_dof, rd_exponent};
use crate::rng::{substream, Stream};
use crate::training::{build_training_matrix, TrainingMatrix};
use crate::{CMatrix, Error, Result};

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn theory_for(cfg: &SystemConfig, beta_tr: usize) -> Theory {
    let beta_fb = cfg.beta_fb_for(beta_tr);
    let r = cfg.l.min(cfg.m * cfg.n);
    let a_rd = rd_exponent(beta_tr, beta_fb, r);
    let a_af = af_exponent(beta_tr, beta_fb, r);
    Theory {
        beta_tr,
        beta_fb,
        r,
        alpha_rd: a_rd.to_string(),
        alpha_af: a_af.to_string(),
        dof_rd: rd_dof(a_rd, cfg.k).to_string(),
        dof_af: af_dof(a_af, cfg.k).to_string(),
    }
}

/// Per-user covariances for every covariance draw, `[draw][user]`.
fn covariances(cfg: &SystemConfig) -> Result<Vec<Vec<Arc<Covariance>>>> {
    let params = cfg.array_params();
    let jobs: Vec<(usize, usize)> = (0..cfg.trials.covariances).flat_map(|c| (0..cfg.k).map(move |k| (c, k))).collect();
    let built: Vec<Result<Arc<Covariance>>> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let mut rng = substream(cfg.seed, Stream::Geometry, &[c as u64, k as u64]);
            let g = sample_geometry(cfg.l, params, &mut rng)?;
            Ok(Arc::new(covariance_from_geometry(&g, cfg.m, cfg.n)?))
        })
        .collect();
    let mut out = vec![Vec::with_capacity(cfg.k); cfg.trials.covariances];
    for ((c, _), cov) in jobs.into_iter().zip(built) {
        out[c].push(cov?);
    }
    Ok(out)
}

/// Unit-SNR training matrix of draw `matrix`; pilots do not depend on the
/// covariance draw, and all users share them.
fn training(cfg: &SystemConfig, matrix: usize, t_p: usize) -> Result<TrainingMatrix> {
    let mut rng = substream(cfg.seed, Stream::TrainingBase, &[matrix as u64, t_p as u64]);
    build_training_matrix(&cfg.pilot_pattern(), t_p, cfg.m, cfg.n, 1.0, &mut rng)
}

fn spreading_base(cfg: &SystemConfig, key: &LinkKey, beta_tr: usize) -> CMatrix {
    let mut rng = substream(cfg.seed, Stream::SpreadingBase, &[key.covariance, key.matrix, key.user, beta_tr as u64]);
    haar_unitary(&mut rng, beta_tr)
}

fn links(cfg: &SystemConfig, covs: &[Arc<Covariance>], x: &TrainingMatrix, cov_idx: usize, mat_idx: usize) -> Result<Vec<UserLink>> {
    let beta_tr = x.beta_tr();
    let beta_fb = cfg.beta_fb_for(beta_tr);
    covs.iter()
        .enumerate()
        .map(|(k, cov)| {
            let key = LinkKey { seed: cfg.seed, covariance: cov_idx as u64, matrix: mat_idx as u64, user: k as u64 };
            let base = spreading_base(cfg, &key, beta_tr);
            UserLink::new(key, Arc::clone(cov), x, &base, beta_fb, cfg.kappa)
        })
        .collect()
}

fn metadata(cfg: &SystemConfig, command: &str, started: Instant, covs: &[Vec<Arc<Covariance>>], theory: Vec<Theory>, notes: Vec<String>) -> Metadata {
    Metadata {
        command: command.to_string(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        discarded_trials: BTreeMap::new(),
        covariance_ranks: covs.iter().map(|c| c.iter().map(|v| v.rank()).collect()).collect(),
        theory,
        notes,
    }
}

fn single_t_p(cfg: &SystemConfig, what: &str) -> Result<usize> {
    match cfg.t_p.values().as_slice() {
        [t] => Ok(*t),
        _ => Err(Error::Config(vec![format!("{what} needs a single T_p value")])),
    }
}

struct MseUnit {
    analytic: Vec<f64>,
    simulated: Vec<Vec<f64>>,
}

const SIMULATED: [Strategy; 2] = [Strategy::Ecsq, Strategy::Af];

/// Average CSIT error `(1/K) Σ_k E||h_k - ĥ_k||^2` against SNR.
///
/// `rd` rows are the analytic bound. `ecsq` and `af` rows come in an
/// analytic and a simulated flavor. `perfect` has zero error and is skipped.
pub fn run_mse_sweep(cfg: &SystemConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let started = Instant::now();
    let t_p = single_t_p(cfg, "mse sweep")?;
    let strategies: Vec<Strategy> = cfg.strategy_list().into_iter().filter(|&s| s != Strategy::Perfect).collect();
    let covs = covariances(cfg)?;
    let mats: Vec<TrainingMatrix> = (0..cfg.trials.matrices).map(|i| training(cfg, i, t_p)).collect::<Result<_>>()?;

    let units: Vec<(usize, usize, usize)> = (0..cfg.snr_db_grid.len())
        .flat_map(|s| (0..covs.len()).flat_map(move |c| (0..cfg.trials.matrices).map(move |m| (s, c, m))))
        .collect();
    let k = cfg.k as f64;
    let results: Vec<Result<MseUnit>> = units
        .par_iter()
        .map(|&(s, c, m)| {
            let x = mats[m].with_snr(db_to_linear(cfg.snr_db_grid[s]));
            let ls = links(cfg, &covs[c], &x, c, m)?;
            let analytic = strategies.iter().map(|&st| ls.iter().map(|l| l.analytic_error(st)).sum::<f64>() / k).collect();
            let simulated = strategies
                .iter()
                .map(|&st| {
                    if !SIMULATED.contains(&st) {
                        return Vec::new();
                    }
                    (0..cfg.trials.channels as u64)
                        .map(|ch| ls.iter().map(|l| l.squared_error(st, &l.frame(ch))).sum::<f64>() / k)
                        .collect()
                })
                .collect();
            Ok(MseUnit { analytic, simulated })
        })
        .collect();
    let results: Vec<MseUnit> = results.into_iter().collect::<Result<_>>()?;

    let per_snr = covs.len() * cfg.trials.matrices;
    let mut rows = Vec::new();
    for (si, &st) in strategies.iter().enumerate() {
        for (s, &db) in cfg.snr_db_grid.iter().enumerate() {
            let group = &results[s * per_snr..(s + 1) * per_snr];
            let a: Vec<f64> = group.iter().map(|u| u.analytic[si]).collect();
            let (mean, se) = summarize(&a);
            rows.push(row(st, "snr_db", db, "mse_analytic", mean, se, a.len()));
            if SIMULATED.contains(&st) {
                let v: Vec<f64> = group.iter().flat_map(|u| u.simulated[si].iter().copied()).collect();
                let (mean, se) = summarize(&v);
                rows.push(row(st, "snr_db", db, "mse_simulated", mean, se, v.len()));
            }
        }
    }
    let notes = vec![
        "rd mse is the analytic remote distortion-rate bound at beta_fb * C_ul bits".to_string(),
        "analytic stderr is over training-matrix and covariance draws; simulated stderr is over channel draws".to_string(),
    ];
    let meta = metadata(cfg, "mse-sweep", started, &covs, vec![theory_for(cfg, cfg.beta_tr(t_p))], notes);
    Ok(SweepResult { rows, meta })
}

fn row(st: Strategy, x_name: &str, x: f64, metric: &str, value: f64, stderr: f64, n: usize) -> Row {
    Row {
        strategy: st.name().to_string(),
        x_name: x_name.to_string(),
        x_value: x,
        metric: metric.to_string(),
        value,
        stderr,
        n_trials: n,
    }
}

/// Ergodic sum-rate against the training dimension `β_tr = N_p T_p` at a
/// single SNR, with `β_fb` following `zeta` or the fixed `beta_fb`.
pub fn run_sumrate_sweep(cfg: &SystemConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let started = Instant::now();
    let snr_db = match cfg.snr_db_grid.as_slice() {
        [s] => *s,
        _ => return Err(Error::Config(vec!["sum-rate sweep needs exactly one SNR in snr_db_grid".into()])),
    };
    let snr = db_to_linear(snr_db);
    let strategies = cfg.strategy_list();
    let t_ps = cfg.t_p.values();
    let covs = covariances(cfg)?;
    let pattern = cfg.pilot_pattern();

    let units: Vec<(usize, usize, usize)> = (0..t_ps.len())
        .flat_map(|t| (0..covs.len()).flat_map(move |c| (0..cfg.trials.matrices).map(move |m| (t, c, m))))
        .collect();
    let results: Vec<Result<Vec<Vec<Option<f64>>>>> = units
        .par_iter()
        .map(|&(t, c, m)| {
            let x = training(cfg, m, t_ps[t])?.with_snr(snr);
            let scenario = DownlinkScenario {
                links: links(cfg, &covs[c], &x, c, m)?,
                antennas: cfg.m,
                snr_dl: snr,
                weights: subcarrier_weights(cfg.n, &pattern, t_ps[t], cfg.t, cfg.pilot_weighting),
            };
            Ok((0..cfg.trials.channels as u64).map(|ch| scenario.frame_sumrates(ch, &strategies)).collect())
        })
        .collect();
    let results: Vec<Vec<Vec<Option<f64>>>> = results.into_iter().collect::<Result<_>>()?;

    let per_point = covs.len() * cfg.trials.matrices;
    let mut rows = Vec::new();
    let mut discarded = BTreeMap::new();
    for (si, &st) in strategies.iter().enumerate() {
        for (t, &t_p) in t_ps.iter().enumerate() {
            let group = &results[t * per_point..(t + 1) * per_point];
            let all: Vec<Option<f64>> = group.iter().flat_map(|u| u.iter().map(|f| f[si])).collect();
            let ok: Vec<f64> = all.iter().flatten().copied().collect();
            *discarded.entry(st.name().to_string()).or_insert(0) += all.len() - ok.len();
            let (mean, se) = summarize(&ok);
            rows.push(row(st, "beta_tr", cfg.beta_tr(t_p) as f64, "sumrate", mean, se, ok.len()));
        }
    }
    let theory = t_ps.iter().map(|&t| theory_for(cfg, cfg.beta_tr(t))).collect();
    let notes = vec![
        "rd estimates use a Gaussian backward test channel at the reverse water-filling level".to_string(),
        "uplink feedback symbols are not charged against the downlink rate".to_string(),
    ];
    let mut meta = metadata(cfg, "sumrate-sweep", started, &covs, theory, notes);
    meta.discarded_trials = discarded;
    Ok(SweepResult { rows, meta })
}

/// MSE sweep followed by an exponent fit over the top `window_decades` of
/// the SNR grid, for every strategy and metric.
pub fn run_exponent(cfg: &SystemConfig, window_decades: f64) -> Result<SweepResult> {
    let started = Instant::now();
    let mse = run_mse_sweep(cfg)?;
    let theory = mse.meta.theory[0].clone();
    let mut rows = Vec::new();
    for st in cfg.strategy_list() {
        let alpha = match st {
            Strategy::Rd => theory.alpha_rd.parse::<num_rational::Ratio<usize>>(),
            Strategy::Ecsq => theory.alpha_rd.parse(),
            Strategy::Af => theory.alpha_af.parse(),
            Strategy::Perfect => continue,
        }
        .expect("formatted ratio parses");
        let alpha = *alpha.numer() as f64 / *alpha.denom() as f64;
        rows.push(row(st, "window_decades", window_decades, "alpha_theory", alpha, 0.0, 0));
        for metric in ["mse_analytic", "mse_simulated"] {
            let curve: Vec<(f64, f64)> = mse.series(st.name(), metric).iter().map(|r| (r.x_value, r.value)).collect();
            if curve.is_empty() {
                continue;
            }
            let fit = fit_exponent(&curve, window_decades)?;
            let name = metric.replace("mse_", "alpha_hat_");
            rows.push(row(st, "window_decades", window_decades, &name, fit.alpha, fit.stderr, fit.n_points));
        }
    }
    let mut meta = mse.meta;
    meta.command = "exponent".into();
    meta.wall_time_s = started.elapsed().as_secs_f64();
    meta.notes.push("ecsq shares the rd exponent; alpha_hat is the OLS slope of -log2 mse against log2 snr".into());
    Ok(SweepResult { rows, meta })
}
