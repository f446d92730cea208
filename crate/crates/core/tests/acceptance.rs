//! Acceptance run. Criteria execute one after another so the timing budgets
//! are not skewed by concurrent tests; each prints one PASS/FAIL line and the
//! test fails if any criterion does.

mod common;

use std::io::Write;

use common::brute_probe;
use common::checks;
use qtree::circuits::{kraus_reconstruction_error, verify_variant_equivalence};
use qtree::decoder::decode_bloch;
use qtree::estimator::{exact_expected_x, exact_z, exact_z_ensemble, root_frame_averaged_expected_x, run_protocol, ProtocolConfig};
use qtree::pool::{pool_run, pool_run_with, CurvePoint, Resampling};
use qtree::rng::{stream, Purpose};
use qtree::sampler::Backend;
use qtree::theory::{find_critical_point, scaling_fit};
use qtree::tree::build_instance;
use rand::Rng;
use std::time::{Duration, Instant};

const THETAS: [f64; 6] = [1.6, 1.8, 2.0, 2.2, 2.5, 2.8];
const THETA_C: f64 = 2.2142;

type Outcome = Result<String, String>;

fn critical_point() -> Outcome {
    let start = Instant::now();
    let r = find_critical_point(1.0, 10_000_000, 1e-3, 2024).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let msg = format!(
        "theta_c = {:.4} ± {:.4} ({} evaluations of 1e7 samples, {:.0} s)",
        r.theta_c,
        r.ci_halfwidth,
        r.evaluations,
        elapsed.as_secs_f64()
    );
    if (r.theta_c - THETA_C).abs() <= 0.01 && elapsed < Duration::from_secs(600) { Ok(msg) } else { Err(msg) }
}

fn curve_lookup(curve: &[CurvePoint], theta: f64, t: u32) -> CurvePoint {
    *curve.iter().find(|p| p.theta == theta && p.t == t).expect("curve point")
}

fn order_parameter_curves() -> Outcome {
    let curve = pool_run(&THETAS, 4, 100_000, 31).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    // Curve structure: Z_t falls with θ at fixed t and with t at fixed θ.
    for t in 1..=4 {
        for w in THETAS.windows(2) {
            let (a, b) = (curve_lookup(&curve, w[0], t), curve_lookup(&curve, w[1], t));
            if !(a.z_mean - b.z_mean > 3.0 * (a.se.hypot(b.se))) {
                problems.push(format!("Z_{t} not decreasing between {} and {}", w[0], w[1]));
            }
        }
    }
    for &theta in &THETAS {
        for t in 1..4 {
            let (a, b) = (curve_lookup(&curve, theta, t), curve_lookup(&curve, theta, t + 1));
            if !(a.z_mean > b.z_mean) {
                problems.push(format!("Z_t not decreasing in t at theta = {theta}"));
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (i, &theta) in THETAS.iter().enumerate() {
        for t in 1..=3 {
            let (m, se) = exact_z_ensemble(t, theta, 200, 500 + i as u64).map_err(|e| e.to_string())?;
            let p = curve_lookup(&curve, theta, t);
            let sigmas = (m - p.z_mean).abs() / se.hypot(p.se);
            worst = worst.max(sigmas);
            if sigmas > 4.0 {
                problems.push(format!("theta = {theta}, t = {t}: exact {m:.5} ± {se:.5} vs pool {:.5} ± {:.5}", p.z_mean, p.se));
            }
        }
    }
    let z4: Vec<String> = THETAS.iter().map(|&th| format!("{:.4}", curve_lookup(&curve, th, 4).z_mean)).collect();
    let msg = format!("Z_4 = [{}], exact cross-check worst {worst:.2} sigma", z4.join(", "));
    if problems.is_empty() { Ok(msg) } else { Err(format!("{msg}; {}", problems.join("; "))) }
}

fn estimator_unbiasedness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut plain = Vec::new();
    for (i, &theta) in [1.8, 2.2, 2.8].iter().enumerate() {
        let mut plain_sum = 0.0;
        let mut z_sum = 0.0;
        for k in 0..50u64 {
            let inst = build_instance(2, theta, 9000 + 100 * i as u64 + k).map_err(|e| e.to_string())?;
            let z = exact_z(&inst).map_err(|e| e.to_string())?;
            let framed = root_frame_averaged_expected_x(&inst).map_err(|e| e.to_string())?;
            worst = worst.max((framed - z).abs());
            plain_sum += exact_expected_x(&inst).map_err(|e| e.to_string())?;
            z_sum += z;
        }
        plain.push(format!("theta {theta}: E[X|U] {:.4} vs Z {:.4}", plain_sum / 50.0, z_sum / 50.0));
    }
    let msg = format!("max |E[X] − Z| = {worst:.1e} over 150 instances ({})", plain.join(", "));
    if worst <= 1e-9 { Ok(msg) } else { Err(msg) }
}

fn end_to_end_protocol() -> Outcome {
    let start = Instant::now();
    let reference = pool_run(&THETAS, 4, 1_000_000, 41).map_err(|e| e.to_string())?;
    let mut hits = 0;
    let mut rows = Vec::new();
    for (i, &theta) in THETAS.iter().enumerate() {
        let cfg = ProtocolConfig {
            t: 4,
            theta,
            n_circuits: 834,
            n_shots: 8,
            seed: 100 + i as u64,
            backend: Backend::Statevector,
            max_depth: 4,
        };
        let est = run_protocol(&cfg).map_err(|e| e.to_string())?;
        let r = est[3];
        let z = curve_lookup(&reference, theta, 4).z_mean;
        let ok = (r.z_hat - z).abs() <= 1.96 * r.se;
        hits += ok as usize;
        rows.push(format!("{theta}: {:.4}±{:.4} vs {z:.4}{}", r.z_hat, r.se, if ok { "" } else { " (miss)" }));
    }
    let elapsed = start.elapsed();
    let msg = format!("{hits}/6 within 1.96 SE in {:.0} s [{}]", elapsed.as_secs_f64(), rows.join(", "));
    if hits >= 5 && elapsed < Duration::from_secs(300) { Ok(msg) } else { Err(msg) }
}

fn decoder_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in 0..100u64 {
        let mut rng = stream(case, Purpose::Test, &[50]);
        let theta = rng.random_range(std::f64::consts::FRAC_PI_2..std::f64::consts::PI);
        let inst = build_instance(3, theta, 60_000 + case).map_err(|e| e.to_string())?;
        let m_w: Vec<u8> = (0..inst.record_len() - 1).map(|_| rng.random_range(0..2u8)).collect();
        let got = match decode_bloch(&inst, &m_w) {
            Ok(d) => d,
            Err(e) => return Err(format!("case {case}: {e}")),
        };
        let want = brute_probe(&inst, &m_w);
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((got.rho.matrix().0[i][j] - want[i][j]).norm());
            }
        }
    }
    let msg = format!("100 cases at t = 3, max entry deviation {worst:.1e}");
    if worst <= 1e-10 { Ok(msg) } else { Err(msg) }
}

fn circuit_equivalence() -> Outcome {
    let mut rng = stream(70, Purpose::Test, &[]);
    let (mut infid, mut phase, mut recon): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..10 {
        let theta = std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_PI_2 * i as f64 / 9.0;
        let r = verify_variant_equivalence(theta, 100, &mut rng).map_err(|e| e.to_string())?;
        infid = infid.max(r.max_infidelity);
        phase = phase.max(r.max_phase_error);
        recon = recon.max(kraus_reconstruction_error(theta).map_err(|e| e.to_string())?);
    }
    let msg = format!("infidelity {infid:.1e}, phase error {phase:.1e}, Kraus reconstruction {recon:.1e}");
    if infid < 1e-12 && phase < 1e-12 && recon < 1e-12 { Ok(msg) } else { Err(msg) }
}

fn critical_scaling() -> Outcome {
    let start = Instant::now();
    let mut max_se: f64 = 0.0;
    let curve = pool_run_with(&[THETA_C], 800, 1_000_000, 77, Resampling::WithReplacement, |p| max_se = max_se.max(p.se))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let series: Vec<(f64, f64)> = curve.iter().filter(|p| p.t >= 50).map(|p| (p.t as f64, p.z_typ.ln())).collect();
    let fit = scaling_fit(&series).map_err(|e| e.to_string())?;
    let msg = format!(
        "exponent {:.4} ± {:.4} over t = 50..800, max SE {max_se:.2e}, {:.0} s",
        fit.slope,
        fit.slope_stderr,
        elapsed.as_secs_f64()
    );
    if (0.23..=0.43).contains(&fit.slope) && max_se < 1.04e-4 && elapsed < Duration::from_secs(3600) { Ok(msg) } else { Err(msg) }
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let results = [
        ("Kraus completeness", checks::kraus_completeness()),
        ("Haar moments", checks::haar_moments(1_000_000)),
        ("density matrices", checks::density_matrix_validity(2000)),
        ("absorption invariance", checks::absorption_invariance(300)),
        ("truncation prefix", checks::truncation_prefix()),
        ("determinism", checks::worker_determinism()),
    ];
    let elapsed = start.elapsed();
    let failed: Vec<String> = results.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    let msg = format!("{} suites in {:.1} s", results.len(), elapsed.as_secs_f64());
    if failed.is_empty() && elapsed < Duration::from_secs(120) { Ok(msg) } else { Err(format!("{msg}; {}", failed.join("; "))) }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("critical point", critical_point),
        ("order-parameter curves", order_parameter_curves),
        ("estimator unbiasedness", estimator_unbiasedness),
        ("end-to-end protocol", end_to_end_protocol),
        ("decoder oracle", decoder_oracle),
        ("circuit equivalence", circuit_equivalence),
        ("critical scaling", critical_scaling),
        ("property suites", property_suites),
    ];
    // `QTREE_ACCEPTANCE=2,5` runs a subset; the default is all of them.
    let only: Option<Vec<usize>> =
        std::env::var("QTREE_ACCEPTANCE").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failures = 0;
    let mut printed = false;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let line = match run() {
            Ok(msg) => format!("PASS criterion {} ({name}): {msg}", i + 1),
            Err(msg) => {
                failures += 1;
                format!("FAIL criterion {} ({name}): {msg}", i + 1)
            }
        };
        // Written to the handle directly so the line shows without --nocapture.
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{}{line}", if printed { "" } else { "\n" });
        printed = true;
        let _ = out.flush();
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
