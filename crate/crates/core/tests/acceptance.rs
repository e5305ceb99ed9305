//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when the
//! check passes. The process exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use threephoton_core::analytic::{
    alpha_from_r, cc_genuine, from_db, optimal_r, ratio_r, snr_from_ccg, snr_of_r,
};
use threephoton_core::fidelity::{
    beats_classical, counts_at_snr, fidelity_from_snr, is_secure, mc_uncertainty,
};
use threephoton_core::fitting::{
    fit_ccg_vs_attenuation, fit_ccg_vs_pump, fit_snr_vs_ccg, fit_snr_vs_r, load_dataset,
    snr_db_from_ccg, AttenuatedMode, Exponent, FIDELITY_TABLE, PUMP_SERIES,
};
use threephoton_core::fock::{simulate_configuration, threefold_coincidence_prob};
use threephoton_core::optimize::minimize_scan;
use threephoton_core::protocol::{apply_attenuation, run_three_step};
use threephoton_core::{
    AttenuationSetting, Complex64, Engine, McConfig, ShutterConfig, SourceParams,
};

type Check = std::result::Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn ensure(ok: bool, msg: String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> std::result::Result<(), String> {
    ensure(
        elapsed < budget,
        format!(
            "took {:.3} s, budget {:.3} s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
    )
}

fn criterion_1() -> Check {
    let t0 = Instant::now();
    let kappa = c(0.1);
    let (r_opt, _) = optimal_r(kappa, 1.0, 2).map_err(|e| e.to_string())?;
    ensure((r_opt - 1.0).abs() <= 1e-6, format!("N=2 R_opt = {r_opt}"))?;
    let mut worst = 0.0f64;
    for i in 0..=400 {
        let r = 10f64.powf(-2.0 + 4.0 * i as f64 / 400.0);
        let a = snr_of_r(r, kappa, 1.0, 2).map_err(|e| e.to_string())?;
        let b = snr_of_r(1.0 / r, kappa, 1.0, 2).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    ensure(
        worst <= 1e-10,
        format!("max |snr(R) - snr(1/R)| = {worst:e}"),
    )?;
    let (r3, _) = optimal_r(kappa, 1.0, 3).map_err(|e| e.to_string())?;
    ensure(r3 < 1.0, format!("N=3 R_opt = {r3} not below 1"))?;
    within_budget(t0.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "N=2 R_opt = {r_opt:.9}, max symmetry gap {worst:.1e}, N=3 R_opt = {r3:.4}"
    ))
}

fn criterion_2() -> Check {
    let kappa = 0.1;
    let target = 2.0 * 2f64.sqrt() / kappa;
    let at_one = snr_of_r(1.0, c(kappa), 1.0, 2).map_err(|e| e.to_string())?;

    let (t1, t2) = (0.3, 0.3);
    let alpha = alpha_from_r(1.0, c(kappa), t2, 2).map_err(|e| e.to_string())?;
    let p = SourceParams::real(kappa, alpha, t1, t2).with_n_terms(2);
    let composed = snr_from_ccg(cc_genuine(&p), t1, t2).map_err(|e| e.to_string())?;

    let first = (at_one - target).abs() <= 1e-10 * target;
    let second = (composed - target).abs() <= 1e-9 * target;
    let detail = format!(
        "snr(R=1, N=2) = {at_one:.10} vs 2√2/|κ| = {target:.10}; snr_from_ccg(cc_genuine) = {composed:.10}"
    );
    ensure(first && second, detail.clone())?;
    Ok(detail)
}

fn criterion_3() -> Check {
    let t0 = Instant::now();
    let d = load_dataset("snr_vs_r").map_err(|e| e.to_string())?;
    let fit = |n| fit_snr_vs_r(&d, n).map_err(|e| e.to_string());
    let (f2, f3, f4) = (fit(2)?, fit(3)?, fit(4)?);
    let elapsed = t0.elapsed();
    ensure(
        f3.reduced_chi2 < f2.reduced_chi2,
        format!(
            "reduced chi2 N=3 {} >= N=2 {}",
            f3.reduced_chi2, f2.reduced_chi2
        ),
    )?;
    // "Worst" in the signed sense: where N=2 overestimates the measured SNR most.
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| f2.residuals[a].total_cmp(&f2.residuals[b]));
    let mut worst3 = order[..3].to_vec();
    worst3.sort_unstable();
    let n = d.len();
    ensure(
        worst3 == vec![n - 3, n - 2, n - 1],
        format!("N=2 most negative residuals at indices {worst3:?}"),
    )?;
    let gain = (f3.chi2 - f4.chi2) / f3.chi2;
    ensure(
        gain < 0.10,
        format!("N=4 improves chi2 by {:.1}%", 100.0 * gain),
    )?;
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "reduced chi2 N=2 {:.2}, N=3 {:.2}; N=4 gain {:.1}%; worst N=2 residuals at R = {:?}",
        f2.reduced_chi2,
        f3.reduced_chi2,
        100.0 * gain,
        worst3.iter().map(|&i| d.points[i].x).collect::<Vec<_>>()
    ))
}

fn criterion_4() -> Check {
    let t0 = Instant::now();
    let d = load_dataset("snr_vs_ccg").map_err(|e| e.to_string())?;
    let fit = fit_snr_vs_ccg(&d).map_err(|e| e.to_string())?;
    let cc = fit.params["c"];
    let covered = d
        .points
        .iter()
        .filter(|p| (snr_db_from_ccg(cc, p.x) - p.y).abs() <= p.y_err)
        .count();
    ensure(covered >= 4, format!("only {covered}/5 points covered"))?;
    let pump = load_dataset("ccg_vs_pump").map_err(|e| e.to_string())?;
    let free = fit_ccg_vs_pump(&pump, Exponent::Free).map_err(|e| e.to_string())?;
    let k = free.params["exponent"];
    ensure((1.2..=1.6).contains(&k), format!("pump slope {k}"))?;

    // independent check: ordinary least squares on the raw table
    let xs: Vec<f64> = PUMP_SERIES.iter().map(|r| r[4].ln()).collect();
    let ys: Vec<f64> = PUMP_SERIES.iter().map(|r| r[2].ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 5.0, ys.iter().sum::<f64>() / 5.0);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let ols = sxy / sxx;
    ensure(
        (ols - 1.41).abs() < 0.02,
        format!("raw regression slope {ols}"),
    )?;
    within_budget(t0.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "C = {cc:.1}, {covered}/5 points within error bars; pump slope {k:.3} (unweighted {ols:.3})"
    ))
}

fn criterion_5() -> Check {
    let t0 = Instant::now();
    let a1 = fit_ccg_vs_attenuation(
        &load_dataset("ccg_vs_a1").map_err(|e| e.to_string())?,
        AttenuatedMode::Idler,
    )
    .map_err(|e| e.to_string())?;
    let a2 = fit_ccg_vs_attenuation(
        &load_dataset("ccg_vs_a2").map_err(|e| e.to_string())?,
        AttenuatedMode::Signal,
    )
    .map_err(|e| e.to_string())?;
    let (k1, k2) = (a1.params["free_exponent"], a2.params["free_exponent"]);
    ensure((k1 + 1.0).abs() <= 0.3, format!("idler slope {k1}"))?;
    ensure((k2 + 2.0).abs() <= 0.5, format!("signal slope {k2}"))?;
    within_budget(t0.elapsed(), Duration::from_secs(1))?;
    Ok(format!("idler slope {k1:.3}, signal slope {k2:.3}"))
}

fn criterion_6() -> Check {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    for (row, pump) in FIDELITY_TABLE.iter().zip(PUMP_SERIES.iter()) {
        let snr = from_db(row.snr_db);
        let f = fidelity_from_snr(snr);
        ensure(
            (f - row.fidelity).abs() <= 0.02,
            format!("F({} dB) = {f:.4} vs {}", row.snr_db, row.fidelity),
        )?;
        let counts = counts_at_snr(pump[2], snr, 0.35).map_err(|e| e.to_string())?;
        let est = mc_uncertainty(&counts, McConfig::new(10_000, 20_240_601))
            .map_err(|e| e.to_string())?;
        ensure(
            est.interval_low <= row.high && row.low <= est.interval_high,
            format!(
                "MC [{:.3}, {:.3}] misses [{}, {}] at {} dB",
                est.interval_low, est.interval_high, row.low, row.high, row.snr_db
            ),
        )?;
        parts.push(format!("{f:.3}"));
    }
    for (crossing, check, name) in [
        (0.5, beats_classical as fn(f64) -> bool, "2/3"),
        (2.0, is_secure as fn(f64) -> bool, "5/6"),
    ] {
        let below = fidelity_from_snr(crossing - 1e-9);
        let above = fidelity_from_snr(crossing + 1e-9);
        ensure(
            !check(below) && check(above),
            format!("threshold {name} not crossed at SNR = {crossing}"),
        )?;
    }
    let elapsed = t0.elapsed();
    within_budget(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "F = [{}]; MC intervals overlap all 5; thresholds at SNR 0.5 and 2 ({:.2} s)",
        parts.join(", "),
        elapsed.as_secs_f64()
    ))
}

fn oracle_rates(kappa: f64, alpha: f64) -> Result<(f64, f64, f64), String> {
    let p = SourceParams::real(kappa, alpha, 0.3, 0.3);
    let r = run_three_step(&p, Engine::Oracle).map_err(|e| e.to_string())?;
    Ok((r.cc_g, r.cc_s, r.cc_f))
}

fn criterion_7() -> Check {
    let mut worst = 0.0f64;
    for &k in &[0.02, 0.05] {
        for &a in &[0.02, 0.05] {
            let (g, s, f) = oracle_rates(k, a)?;
            let (gk, sk, fk) = oracle_rates(2.0 * k, a)?;
            let (ga, _, fa) = oracle_rates(k, 2.0 * a)?;
            for (name, ratio, expect) in [
                ("CC_g(2κ)", gk / g, 4.0),
                ("CC_s(2κ)", sk / s, 16.0),
                ("CC_f(2κ)", fk / f, 4.0),
                ("CC_g(2α)", ga / g, 4.0),
                ("CC_f(2α)", fa / f, 16.0),
            ] {
                let dev = (ratio / expect - 1.0).abs();
                worst = worst.max(dev);
                ensure(
                    dev <= 0.02,
                    format!("{name}/rate at κ={k}, α={a}: {ratio:.4} vs {expect}"),
                )?;
            }
        }
    }

    // Oracle SNR against its own R, scanning |α| at fixed κ.
    let kappa = 0.05;
    let probe = |ln_alpha: f64| -> (f64, f64) {
        match oracle_rates(kappa, ln_alpha.exp()) {
            Ok((g, s, f)) => (g / (s + f), f / s),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let m = minimize_scan(
        |x| -probe(x).0,
        (0.002f64).ln(),
        (0.3f64).ln(),
        41,
        1e-8,
        200,
    );
    let (_, r_peak) = probe(m.x);
    ensure(
        (r_peak - 1.0).abs() <= 0.10,
        format!("oracle SNR peaks at R = {r_peak}"),
    )?;

    let p = SourceParams::real(0.05, 0.05, 0.3, 0.3);
    let t0 = Instant::now();
    for cfg in [
        ShutterConfig::BOTH_OPEN,
        ShutterConfig::LASER_BLOCKED,
        ShutterConfig::SIGNAL_BLOCKED,
    ] {
        let d = simulate_configuration(&p, cfg).map_err(|e| e.to_string())?;
        std::hint::black_box(threefold_coincidence_prob(&d));
    }
    let elapsed = t0.elapsed();
    within_budget(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "exponent ratios within {:.2}%; oracle SNR peak at R = {r_peak:.4}; cutoff-4 tables in {:.1} ms",
        100.0 * worst,
        1e3 * elapsed.as_secs_f64()
    ))
}

fn criterion_8() -> Check {
    let mut checked = 0;
    for &(k, a, t1, t2, n) in &[
        (0.1, 0.08, 0.3, 0.3, 3u32),
        (0.05, 0.2, 0.5, 0.9, 2),
        (0.2, 0.01, 1.0, 0.1, 5),
        (0.013, 0.37, 0.77, 0.41, 4),
    ] {
        let p = SourceParams::real(k, a, t1, t2).with_n_terms(n);
        let r = run_three_step(&p, Engine::Analytic).map_err(|e| e.to_string())?;
        ensure(
            r.cc_a == r.cc_g + r.cc_s + r.cc_f,
            format!("cc_a {} != sum {}", r.cc_a, r.cc_g + r.cc_s + r.cc_f),
        )?;
        checked += 1;
    }

    let p = SourceParams::real(0.1, 0.07, 0.6, 0.6).with_n_terms(2);
    let base_r = ratio_r(&p).map_err(|e| e.to_string())?;
    let base_g = cc_genuine(&p);
    for a in [1.4, 2.0, 2.7, 4.0] {
        let q = apply_attenuation(
            &p,
            AttenuationSetting::idler(a).map_err(|e| e.to_string())?,
            true,
        )
        .map_err(|e| e.to_string())?;
        let rr = ratio_r(&q).map_err(|e| e.to_string())?;
        ensure(
            (rr / base_r - 1.0).abs() <= 1e-8,
            format!("A1={a}: R {rr} vs {base_r}"),
        )?;
        let g = cc_genuine(&q) * a;
        ensure(
            (g / base_g - 1.0).abs() <= 1e-12,
            format!("A1={a}: CC_g·A1 = {g} vs {base_g}"),
        )?;

        let q = apply_attenuation(
            &p,
            AttenuationSetting::signal(a).map_err(|e| e.to_string())?,
            true,
        )
        .map_err(|e| e.to_string())?;
        let rr = ratio_r(&q).map_err(|e| e.to_string())?;
        ensure(
            (rr / base_r - 1.0).abs() <= 1e-8,
            format!("A2={a}: R {rr} vs {base_r}"),
        )?;
        let g = cc_genuine(&q) * a * a;
        ensure(
            (g / base_g - 1.0).abs() <= 1e-12,
            format!("A2={a}: CC_g·A2² = {g} vs {base_g}"),
        )?;
    }
    Ok(format!(
        "CC_a = CC_g + CC_s + CC_f bit-exact in {checked} cases; hold-R attenuation keeps R and scales CC_g by 1/A1, 1/A2²"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (1, "SNR-vs-R shape", criterion_1),
        (2, "closed-form identities", criterion_2),
        (3, "SNR-vs-R fit ordering", criterion_3),
        (4, "SNR-vs-CC_g coverage and pump slope", criterion_4),
        (5, "attenuation laws", criterion_5),
        (6, "fidelity reproduction", criterion_6),
        (7, "oracle vs analytic", criterion_7),
        (8, "protocol identities", criterion_8),
    ];
    // keep panics from the library quiet; they are reported as failures
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(msg) => println!("[PASS] criterion {n}: {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {n}: {name}: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
