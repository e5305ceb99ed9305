use proptest::prelude::*;
use threephoton_core::analytic::{cc_genuine, ratio_r, snr, snr_of_r};
use threephoton_core::fidelity::{fidelity_from_snr, mc_uncertainty};
use threephoton_core::fock::{
    apply_loss, route_noninterfering_splitter, simulate_configuration, threefold_coincidence_prob,
    NumberDistribution,
};
use threephoton_core::protocol::{apply_attenuation, run_three_step, run_three_step_sampled};
use threephoton_core::{
    Acquisition, AttenuationSetting, CoincidenceRates, Complex64, Engine, McConfig, ShutterConfig,
    SourceParams,
};

fn distribution() -> impl Strategy<Value = NumberDistribution> {
    prop::collection::vec(0.0f64..1.0, 2..7).prop_filter_map("empty", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-3).then(|| NumberDistribution::new(w.iter().map(|x| x / s).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_composes(d in distribution(), ta in 0.0f64..=1.0, tb in 0.0f64..=1.0) {
        let two = apply_loss(&apply_loss(&d, ta).unwrap(), tb).unwrap();
        let one = apply_loss(&d, ta * tb).unwrap();
        for (x, y) in two.probs.iter().zip(one.probs.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn loss_conserves_probability(d in distribution(), t in 0.0f64..=1.0) {
        prop_assert!((apply_loss(&d, t).unwrap().total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn splitter_is_symmetric(a in distribution(), b in distribution()) {
        let out = route_noninterfering_splitter(&a, &b);
        let n = out.probs.nrows();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((out.prob(i, j) - out.prob(j, i)).abs() <= 1e-15);
            }
        }
        prop_assert!((out.probs.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pipeline_conserves_probability(
        k in 0.0f64..0.3, a in 0.0f64..0.5, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, cutoff in 2usize..7,
    ) {
        let p = SourceParams::real(k, a, t1, t2).with_cutoff(cutoff);
        for cfg in [ShutterConfig::BOTH_OPEN, ShutterConfig::LASER_BLOCKED, ShutterConfig::SIGNAL_BLOCKED] {
            let d = simulate_configuration(&p, cfg).unwrap();
            prop_assert!((d.total() - 1.0).abs() <= 1e-12);
            let sw = d.swap_outputs();
            prop_assert!((threefold_coincidence_prob(&sw) - threefold_coincidence_prob(&d)).abs() <= 1e-15);
        }
    }

    #[test]
    fn snr_is_symmetric_in_r_for_n2(log_r in -2.0f64..2.0, k in 0.01f64..0.3, t2 in 0.05f64..=1.0) {
        let r = 10f64.powf(log_r);
        let kappa = Complex64::new(k, 0.0);
        let a = snr_of_r(r, kappa, t2, 2).unwrap();
        let b = snr_of_r(1.0 / r, kappa, t2, 2).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn snr_independent_of_t1(k in 0.01f64..0.3, a in 0.01f64..0.5, t1 in 0.05f64..=1.0, t2 in 0.05f64..=1.0, n in 2u32..=5) {
        let p = SourceParams::real(k, a, 1.0, t2).with_n_terms(n);
        let q = SourceParams { t1, ..p };
        let (x, y) = (snr(&p).unwrap(), snr(&q).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x);
    }

    #[test]
    fn phases_do_not_matter(k in 0.01f64..0.3, a in 0.01f64..0.5, pk in 0.0f64..6.3, pa in 0.0f64..6.3) {
        let p = SourceParams::real(k, a, 0.4, 0.6);
        let q = SourceParams::new(Complex64::from_polar(k, pk), Complex64::from_polar(a, pa), 0.4, 0.6);
        let (x, y) = (snr(&p).unwrap(), snr(&q).unwrap());
        prop_assert!((x - y).abs() <= 1e-12 * x);
    }

    #[test]
    fn analytic_three_step_sums_exactly(k in 0.0f64..0.3, a in 0.0f64..0.5, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, n in 2u32..=5) {
        let r = run_three_step(&SourceParams::real(k, a, t1, t2).with_n_terms(n), Engine::Analytic).unwrap();
        prop_assert_eq!(r.cc_a, r.cc_g + r.cc_s + r.cc_f);
    }

    #[test]
    fn hold_r_attenuation(k in 0.02f64..0.3, a in 0.01f64..0.5, a1 in 1.0f64..10.0, a2 in 1.0f64..10.0, n in 2u32..=5) {
        let p = SourceParams::real(k, a, 0.7, 0.7).with_n_terms(n);
        let q = apply_attenuation(&p, AttenuationSetting::new(a1, a2).unwrap(), true).unwrap();
        let (r0, r1) = (ratio_r(&p).unwrap(), ratio_r(&q).unwrap());
        prop_assert!((r1 / r0 - 1.0).abs() <= 1e-8);
        prop_assert!(cc_genuine(&q) <= cc_genuine(&p) * (1.0 + 1e-12));
    }

    #[test]
    fn fidelity_is_bounded_and_monotone(s in 0.0f64..1e6, ds in 1e-6f64..10.0) {
        let f = fidelity_from_snr(s);
        prop_assert!((0.5..1.0).contains(&f));
        prop_assert!(fidelity_from_snr(s + ds) > f);
    }
}

#[test]
fn sampled_runs_are_reproducible() {
    let p = SourceParams::real(0.1, 0.08, 0.3, 0.3).with_scale(1.0);
    let acq = Acquisition::default();
    let a = run_three_step_sampled(&p, Engine::Analytic, acq, 7).unwrap();
    let b = run_three_step_sampled(&p, Engine::Analytic, acq, 7).unwrap();
    assert_eq!(a, b);
    let c = run_three_step_sampled(&p, Engine::Analytic, acq, 8).unwrap();
    assert_ne!(a, c);
}

#[test]
fn monte_carlo_is_reproducible() {
    let counts = CoincidenceRates::new(20.0, 2.0, 1.0);
    let a = mc_uncertainty(&counts, McConfig::new(2000, 11)).unwrap();
    let b = mc_uncertainty(&counts, McConfig::new(2000, 11)).unwrap();
    assert_eq!(a, b);
    assert!(a.interval_low <= a.mean && a.mean <= a.interval_high);
}
