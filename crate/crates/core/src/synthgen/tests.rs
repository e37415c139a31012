use super::*;

fn spec(kind: SynthKind, n: usize, seed: u64) -> SynthSpec {
    SynthSpec::new(kind, n, seed)
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn arm_outcomes(ds: &PanelDataset, t: usize, arm: u8) -> Vec<f64> {
    let obs = ds.observed();
    obs.arm_indices(arm).into_iter().map(|i| ds.outcome_unchecked(i, t)).collect()
}

#[test]
fn generation_is_deterministic_and_thread_independent() {
    let s = spec(SynthKind::Stabilized1, 3000, 11);
    let (a, _) = generate(&s).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let (b, _) = pool.install(|| generate(&s).unwrap());
    assert_eq!(a.units(), b.units());
    let (c, _) = generate(&spec(SynthKind::Stabilized1, 3000, 12)).unwrap();
    assert_ne!(a.units(), c.units());
}

#[test]
fn arms_are_balanced() {
    let (ds, truth) = generate(&spec(SynthKind::Nonlinear, 500, 1)).unwrap();
    assert_eq!(ds.arm_counts(), (500, 500));
    assert_eq!(ds.d_surrogates(), 2);
    assert_eq!(truth.tau.len(), 10);
}

#[test]
fn stabilized1_truth_rises_and_levels_off() {
    let (_, truth) = generate(&spec(SynthKind::Stabilized1, 10, 4)).unwrap();
    let tau = &truth.tau;
    assert_eq!(tau[0], 0.0);
    for t in 1..tau.len() {
        assert!(tau[t] > tau[t - 1]);
        if t > 1 {
            assert!(tau[t] - tau[t - 1] < tau[t - 1] - tau[t - 2]);
        }
    }
    let p = &truth.params;
    let limit: f64 = p.weights.iter().zip(&p.mu).map(|(w, m)| w * m).sum();
    assert!((tau[9] - limit).abs() < 0.15 * limit);
}

#[test]
fn stabilized2_truth_is_shift_minus_decay_pattern() {
    let s = spec(SynthKind::Stabilized2, 10, 4);
    let (_, truth) = generate(&s).unwrap();
    let p = &truth.params;
    for t in 1..=10 {
        let decay: f64 = (0..4).map(|d| p.weights[d] * p.mu[d] * (1.0 - p.decay[d].powi(t as i32 - 1))).sum();
        assert!((truth.tau[t - 1] - (2.0 - decay)).abs() < 1e-12);
    }
}

#[test]
fn monte_carlo_truth_agrees_with_closed_forms() {
    for (k, kind) in [
        SynthKind::Stabilized1,
        SynthKind::Stabilized2,
        SynthKind::ComparabilityViolation,
        SynthKind::Nonlinear,
        SynthKind::NoEffect,
        SynthKind::DiscreteMarkov,
    ]
    .into_iter()
    .enumerate()
    {
        let mut s = spec(kind, 10, 100 + k as u64);
        s.gamma = 2.0;
        s.theta = 0.5;
        if kind == SynthKind::Nonlinear {
            // keep e^{S} moments moderate
            s.mu = Some(vec![1.0, 0.5]);
            s.sigma = Some(vec![1.0, 0.5]);
        }
        let analytic = generate(&s).unwrap().1.tau;
        let mc = truth(&s, 200_000).unwrap();
        let se = mc.mc_se.as_ref().unwrap();
        for t in 0..10 {
            let z = (mc.tau[t] - analytic[t]) / se[t].max(1e-12);
            assert!(z.abs() < 4.5 || (mc.tau[t] - analytic[t]).abs() < 1e-9, "{kind:?} t={} z={z}", t + 1);
        }
    }
}

#[test]
fn nonlinear_limit_is_the_algebraic_form() {
    let mut s = spec(SynthKind::Nonlinear, 10, 8);
    s.theta = 2.0;
    s.t_total = 60;
    s.mu = Some(vec![1.5, 0.4]);
    s.sigma = Some(vec![0.7, 0.3]);
    let (_, truth) = generate(&s).unwrap();
    let expected = 1.5 + 2.0 * ((0.4f64 + 0.09 / 2.0).exp() - 1.0);
    assert!((truth.tau[59] - expected).abs() < 1e-4);
}

#[test]
fn decay_kinds_share_the_first_outcome_law() {
    for kind in [SynthKind::Stabilized1, SynthKind::ComparabilityViolation, SynthKind::Nonlinear] {
        let (ds, _) = generate(&spec(kind, 4000, 21)).unwrap();
        let d = ks(arm_outcomes(&ds, 1, 0), arm_outcomes(&ds, 1, 1));
        // 0.1% critical value for n = m = 4000
        assert!(d < 1.95 * (2.0f64 / 4000.0).sqrt(), "{kind:?}: {d}");
    }
}

#[test]
fn null_arms_have_zero_truth_and_one_law() {
    let mut s = spec(SynthKind::Stabilized1, 4000, 5);
    s.null_arms = true;
    let (ds, truth) = generate(&s).unwrap();
    assert!(truth.tau.iter().all(|&v| v == 0.0));
    for t in [1, 5, 10] {
        let d = ks(arm_outcomes(&ds, t, 0), arm_outcomes(&ds, t, 1));
        assert!(d < 1.95 * (2.0f64 / 4000.0).sqrt());
    }
}

#[test]
fn gamma_scales_only_the_second_outcome() {
    let mut s = spec(SynthKind::ComparabilityViolation, 10, 6);
    let base = generate(&s).unwrap().1.tau;
    s.gamma = 3.0;
    let shocked = generate(&s).unwrap().1.tau;
    for t in 0..10 {
        if t == 1 {
            assert_ne!(base[t], shocked[t]);
        } else {
            assert_eq!(base[t], shocked[t]);
        }
    }
}

#[test]
fn no_effect_truth_alternates() {
    let (_, truth) = generate(&spec(SynthKind::NoEffect, 10, 0)).unwrap();
    assert_eq!(truth.tau[0], 1.0 / 8.0);
    assert_eq!(truth.tau[1], -1.0 / 27.0);
    assert_eq!(truth.tau[2], 1.0 / 64.0);
}

#[test]
fn observational_periods_follow_the_outcome_map() {
    let mut s = spec(SynthKind::Stabilized1, 50, 3);
    s.observational_periods = 4;
    let (ds, truth) = generate(&s).unwrap();
    assert_eq!(ds.pre_periods(), 4);
    let p = &truth.params;
    let obs = ds.observed();
    for i in 0..ds.n_units() {
        for t in -3..=0i64 {
            let prev = obs.s_row_at(i, t - 1);
            let f = -prev.iter().zip(&p.weights).map(|(a, b)| a * b).sum::<f64>();
            assert!((obs.y_at(i, t) - f).abs() < 1e-12);
        }
    }
}

#[test]
fn markov_states_stay_in_range() {
    let mut s = spec(SynthKind::DiscreteMarkov, 200, 9);
    s.observational_periods = 2;
    let (ds, _) = generate(&s).unwrap();
    for u in ds.units() {
        assert!(u.surrogates.iter().chain(&u.pre_surrogates).all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
    }
}

#[test]
fn invalid_specs_rejected() {
    let mut s = spec(SynthKind::Stabilized1, 10, 0);
    s.mu = Some(vec![1.0]);
    assert!(matches!(generate(&s), Err(Error::Config(_))));
    let mut s = spec(SynthKind::Stabilized1, 0, 0);
    assert!(generate(&s).is_err());
    s.n_per_arm = 5;
    s.t_experimental = 11;
    assert!(generate(&s).is_err());
}
