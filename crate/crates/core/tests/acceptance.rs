//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any of them fails.
//!
//! Runs at full scale (`M = 32`, `N = 24`, `K = 6`, 30 paths); build with
//! optimizations (the workspace test profile already does).

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use csit_core::analog_feedback::{af_estimate, af_transmit};
use csit_core::channel_model::{covariance_from_geometry, sample_geometry};
use csit_core::downlink::Strategy;
use csit_core::ecsq::{allocate_bits, ECSQ_OVERHEAD_BITS};
use csit_core::estimation::mmse_estimate;
use csit_core::harness::{run_exponent, run_mse_sweep, run_selftest, run_sumrate_sweep, SweepResult, SystemConfig};
use csit_core::linalg::haar_unitary;
use csit_core::link::{LinkKey, UserLink};
use csit_core::oracle::rel_err;
use csit_core::rate_distortion::remote_rate;
use csit_core::rng::{substream, Stream};
use csit_core::training::{build_training_matrix, TrainingMatrix};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn config(name: &str) -> SystemConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    SystemConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn alpha(res: &SweepResult, strategy: &str, metric: &str) -> f64 {
    match res.series(strategy, metric).as_slice() {
        [r] => r.value,
        other => panic!("expected one {strategy}/{metric} row, found {}", other.len()),
    }
}

/// `(strategy, metric, target, tolerance)` checks on one exponent run.
fn exponents(cfg: &str, checks: &[(&str, &str, f64, f64)]) -> Outcome {
    let res = run_exponent(&config(cfg), 1.0).expect("exponent run");
    let mut ok = true;
    let mut parts = Vec::new();
    for &(st, metric, target, tol) in checks {
        let a = alpha(&res, st, metric);
        ok &= (a - target).abs() <= tol;
        parts.push(format!("{st} {} {a:.4} (target {target:.3} +/- {tol})", metric.trim_start_matches("alpha_hat_")));
    }
    outcome(ok, parts.join(", "))
}

fn exponent_full() -> Outcome {
    exponents(
        "mse_full_feedback.json",
        &[
            ("rd", "alpha_hat_analytic", 1.0, 0.10),
            ("af", "alpha_hat_analytic", 1.0, 0.10),
            ("ecsq", "alpha_hat_simulated", 1.0, 0.15),
        ],
    )
}

fn exponent_reduced() -> Outcome {
    exponents(
        "mse_reduced_feedback.json",
        &[
            ("rd", "alpha_hat_analytic", 1.0 / 3.0, 0.07),
            ("af", "alpha_hat_analytic", 0.0, 0.05),
            ("ecsq", "alpha_hat_analytic", 1.0 / 3.0, 0.10),
        ],
    )
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let report = run_selftest(20240);
    let secs = started.elapsed().as_secs_f64();
    let wanted = [
        ("mmse error", 50),
        ("af error", 50),
        ("reverse water-filling", 1000),
        ("remote rate/distortion round trip", 50),
    ];
    let mut ok = secs < 60.0;
    let mut parts = Vec::new();
    for (prefix, min_cases) in wanted {
        let c = report.checks.iter().find(|c| c.name.starts_with(prefix)).expect("check present");
        ok &= c.passed && c.cases >= min_cases;
        parts.push(format!("{prefix}: worst {:.1e} <= {:.0e} over {}", c.worst, c.tolerance, c.cases));
    }
    parts.push(format!("{secs:.1}s"));
    outcome(ok, parts.join(", "))
}

/// Six users of the full scenario sharing one training matrix.
fn full_links(snr_db: f64) -> (TrainingMatrix, Vec<UserLink>) {
    let cfg = config("mse_full_feedback.json");
    let t_p = cfg.t_p.values()[0];
    let snr = 10f64.powf(snr_db / 10.0);
    let mut rng = substream(7, Stream::TrainingBase, &[0]);
    let x = build_training_matrix(&cfg.pilot_pattern(), t_p, cfg.m, cfg.n, snr, &mut rng).expect("training");
    let beta_fb = cfg.beta_fb_for(x.beta_tr());
    let links = (0..cfg.k as u64)
        .map(|k| {
            let mut g = substream(7, Stream::Geometry, &[k]);
            let geo = sample_geometry(cfg.l, cfg.array_params(), &mut g).expect("geometry");
            let cov = Arc::new(covariance_from_geometry(&geo, cfg.m, cfg.n).expect("covariance"));
            let key = LinkKey { seed: 7, covariance: 0, matrix: 0, user: k };
            let base = haar_unitary(&mut substream(7, Stream::SpreadingBase, &[k]), x.beta_tr());
            UserLink::new(key, cov, &x, &base, beta_fb, cfg.kappa).expect("link")
        })
        .collect();
    (x, links)
}

fn monte_carlo() -> Outcome {
    const TRIALS: u64 = 10_000;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for snr_db in [20.0, 40.0, 60.0] {
        let (_, links) = full_links(snr_db);
        let (mut mse, mut af, mut ecsq) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        for (k, link) in links.iter().enumerate() {
            let mut noise = substream(11, Stream::FeedbackNoise, &[k as u64, snr_db as u64]);
            for ch in 0..TRIALS {
                let f = link.frame(ch);
                let h = link.expand(&f.coeffs);
                let u = mmse_estimate(link.posterior(), &f.y_tr).expect("mmse");
                mse[0] += (&h - u).norm_squared();
                let y_af = af_transmit(&f.y_tr, link.spreading(), &mut noise).expect("af transmit");
                let v = af_estimate(link.af_estimator(), &y_af).expect("af estimate");
                af[0] += (&h - v).norm_squared();
                ecsq[0] += link.squared_error(Strategy::Ecsq, &f);
            }
            mse[1] += link.posterior().d_mmse() * TRIALS as f64;
            af[1] += link.analytic_error(Strategy::Af) * TRIALS as f64;
            ecsq[1] += link.analytic_error(Strategy::Ecsq) * TRIALS as f64;
        }
        let errs = [rel_err(mse[0], mse[1]), rel_err(af[0], af[1]), rel_err(ecsq[0], ecsq[1])];
        worst = errs.iter().copied().fold(worst, f64::max);
        parts.push(format!("{snr_db} dB: mmse {:.2}%, af {:.2}%, ecsq {:.2}%", 100.0 * errs[0], 100.0 * errs[1], 100.0 * errs[2]));
    }
    outcome(worst <= 0.05, format!("{} (limit 5%, {TRIALS} trials per user)", parts.join("; ")))
}

fn ecsq_accounting() -> Outcome {
    let (_, links) = full_links(40.0);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for link in &links {
        let pm = link.posterior();
        for i in 0..100 {
            // log grid of the excess over D_mmse, from 1e-6 to 0.99 of the signal power
            let frac = 10f64.powf(-6.0 + 6.0 * i as f64 / 99.0) * 0.99;
            let d = pm.d_mmse() + frac * pm.signal_power();
            let a = allocate_bits(pm, d).expect("feasible");
            let rate = remote_rate(pm, d).expect("feasible");
            worst = worst.max((a.total_bits - rate - ECSQ_OVERHEAD_BITS * a.quantized.len() as f64).abs());
            points += 1;
        }
    }
    outcome(worst <= 1e-9, format!("worst |R_scalar - R - 1.508 |A|| = {worst:.1e} over {points} points"))
}

fn power_constraint() -> Outcome {
    let cfg = config("mse_full_feedback.json");
    let mut worst: f64 = 0.0;
    let mut columns = 0;
    for &db in &cfg.snr_db_grid {
        let snr_ul = cfg.kappa * 10f64.powf(db / 10.0);
        let (x, links) = full_links(db);
        for link in &links {
            let sp = link.spreading();
            let sy = x.observation_covariance(link.covariance());
            for c in 0..sp.beta_fb() {
                let p = sp.psi.column(c);
                worst = worst.max(rel_err(p.dotc(&(&sy * p)).re, cfg.m as f64 * snr_ul));
                columns += 1;
            }
        }
    }
    outcome(
        worst <= 1e-8,
        format!("worst relative deviation {worst:.1e} over {columns} columns at {} SNR points", cfg.snr_db_grid.len()),
    )
}

fn sumrates() -> Outcome {
    let full = run_sumrate_sweep(&config("sumrate_zeta1.json")).expect("zeta 1 sweep");
    let mut ok = true;
    let mut worst_gap: f64 = 0.0;
    let r = 30.0;
    for (a, d) in full.series("af", "sumrate").iter().zip(full.series("rd", "sumrate")) {
        assert_eq!(a.x_value, d.x_value);
        if a.x_value >= r {
            let gap = (d.value - a.value).abs() / d.value;
            worst_gap = worst_gap.max(gap);
            ok &= gap <= 0.05;
        }
    }

    let quarter = run_sumrate_sweep(&config("sumrate_zeta_quarter.json")).expect("zeta 1/4 sweep");
    let rd = quarter.series("rd", "sumrate");
    let ecsq = quarter.series("ecsq", "sumrate");
    let af = quarter.series("af", "sumrate");
    let mut margin = f64::INFINITY;
    let mut points = 0;
    for i in 0..rd.len() {
        let b = rd[i].x_value;
        if !(b > 30.0 && b < 120.0) {
            continue;
        }
        points += 1;
        for (hi, lo) in [(rd[i], ecsq[i]), (ecsq[i], af[i])] {
            let two_se = 2.0 * (hi.stderr.powi(2) + lo.stderr.powi(2)).sqrt();
            let m = (hi.value - lo.value) / two_se;
            margin = margin.min(m);
            ok &= m > 1.0;
        }
    }
    ok &= points > 0;
    outcome(
        ok,
        format!(
            "zeta 1: worst |rd - af| / rd = {:.2}% (limit 5%); zeta 1/4: smallest gap {margin:.2} x 2 stderr over {points} points",
            100.0 * worst_gap
        ),
    )
}

fn determinism() -> Outcome {
    let mut mse = config("mse_reduced_feedback.json");
    mse.trials.matrices = 3;
    mse.trials.channels = 20;
    let mut sum = config("sumrate_zeta_quarter.json");
    sum.trials.matrices = 2;
    sum.trials.channels = 10;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        pool.install(|| (run_mse_sweep(&mse).expect("mse").csv(), run_sumrate_sweep(&sum).expect("sumrate").csv()))
    };
    let one = run(1);
    let mut ok = true;
    for threads in [2, 4, 7] {
        ok &= run(threads) == one;
    }
    outcome(ok, format!("mse and sum-rate CSV compared at 1, 2, 4 and 7 threads ({} + {} bytes)", one.0.len(), one.1.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("exponent, (beta_tr, beta_fb) = (40, 40)", exponent_full),
        ("exponent, (beta_tr, beta_fb) = (40, 10)", exponent_reduced),
        ("oracle equivalence", oracle_equivalence),
        ("monte carlo consistency", monte_carlo),
        ("ecsq rate accounting", ecsq_accounting),
        ("spreading power constraint", power_constraint),
        ("sum-rate ordering and proximity", sumrates),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {name}: {} [{:.1}s]", i + 1, o.detail, started.elapsed().as_secs_f64());
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
