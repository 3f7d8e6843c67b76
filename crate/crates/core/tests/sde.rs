use std::f64::consts::PI;

use ground_steer::catalog::{build_problem, Drift, ProblemSpec};
use ground_steer::control::ControlSignal;
use ground_steer::sde::*;
use ground_steer::sim::{integrate_bilinear, SimOptions};
use ground_steer::spectral::State;
use ground_steer::Error;
use proptest::prelude::*;

fn run(
    law: &InitialLaw,
    n: usize,
    seed: u64,
    p: &ControlSignal,
    drift: Drift,
    regime: Regime,
    dt: f64,
    t: f64,
    threads: usize,
) -> ParticleEnsemble {
    let ens = ParticleEnsemble::sample(law, n, seed).unwrap();
    simulate_ensemble(&ens, p, DriftExtension::new(drift), regime, dt, t, threads).unwrap()
}

#[test]
fn uniform_law_is_invariant_without_drift() {
    let e = run(
        &InitialLaw::Uniform,
        50_000,
        3,
        &ControlSignal::zero(0.0, 0.5),
        Drift::Zero,
        Regime::PartialReflect,
        1e-3,
        0.5,
        1,
    );
    let h = estimate_density(&e, 20, Regime::PartialReflect).unwrap();
    let l1 = h.l1_distance(&[1.0; 20]);
    assert!(l1 < 0.05, "{l1}");
    assert!((h.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn absorbed_mass_decays_at_the_first_dirichlet_rate() {
    // Survival from the uniform law: sum over odd k of 8/(k pi)^2 e^{-(k pi)^2 t}.
    let p = ControlSignal::zero(0.0, 1.0);
    let law = InitialLaw::Uniform;
    let ens = ParticleEnsemble::sample(&law, 50_000, 9).unwrap();
    let drift = DriftExtension::new(Drift::Zero);
    let a = simulate_ensemble(&ens, &p, drift, Regime::Absorb, 1e-4, 0.2, 1).unwrap();
    let b = simulate_ensemble(&a, &p, drift, Regime::Absorb, 1e-4, 0.1, 1).unwrap();
    let (sa, sb) = (a.alive_count() as f64, b.alive_count() as f64);
    let rate = (sa / sb).ln() / 0.1;
    assert!((rate - PI * PI).abs() < 0.08 * PI * PI, "rate {rate}");
    let exact = 8.0 / (PI * PI) * (-PI * PI * 0.2).exp();
    let surv = sa / 50_000.0;
    assert!((surv - exact).abs() < 0.15 * exact, "{surv} vs {exact}");
    let h = estimate_density(&b, 10, Regime::Absorb).unwrap();
    assert!((h.mass() - sb / 50_000.0).abs() < 1e-12);
}

#[test]
fn galerkin_mass_balance_matches_boundary_flux() {
    let spec = ProblemSpec::fp_neumann(Drift::Power(3), 12);
    let eig = build_problem(&spec).unwrap();
    let basis = eig.basis().unwrap();
    let row0: Vec<f64> = (0..12).map(|m| eig.operator()[(0, m)]).collect();
    let coeffs: Vec<f64> = (0..12)
        .map(|k| if k == 0 { 1.0 } else { 0.3 / (k * k) as f64 })
        .collect();
    for p in [-1.5, 0.7, 2.0] {
        let (rate, flux) = mass_balance(&spec, basis, &row0, &coeffs, p);
        assert!(
            (rate - flux).abs() < 1e-9 * (1.0 + flux.abs()),
            "p={p}: {rate} vs {flux}"
        );
        assert!(flux.abs() > 1e-3);
    }
}

#[test]
fn seeded_runs_are_bit_identical_across_thread_counts() {
    let p = ControlSignal::from_fn(0.0, 0.2, 9, |t| (10.0 * t).sin());
    let law = InitialLaw::default_cosine();
    let a = run(
        &law,
        4_000,
        77,
        &p,
        Drift::Power(3),
        Regime::PartialReflect,
        1e-3,
        0.2,
        1,
    );
    let b = run(
        &law,
        4_000,
        77,
        &p,
        Drift::Power(3),
        Regime::PartialReflect,
        1e-3,
        0.2,
        3,
    );
    let c = run(
        &law,
        4_000,
        77,
        &p,
        Drift::Power(3),
        Regime::PartialReflect,
        1e-3,
        0.2,
        1,
    );
    assert!(a
        .positions
        .iter()
        .zip(&b.positions)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a
        .positions
        .iter()
        .zip(&c.positions)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    let d = run(
        &law,
        4_000,
        78,
        &p,
        Drift::Power(3),
        Regime::PartialReflect,
        1e-3,
        0.2,
        1,
    );
    assert!(a.positions != d.positions);
}

#[test]
fn cosine_law_sampling() {
    let a = 0.5;
    let ens = ParticleEnsemble::sample(&InitialLaw::Cosine { a }, 100_000, 5).unwrap();
    let h = estimate_density(&ens, 20, Regime::PartialReflect).unwrap();
    // exact bin averages of 1 + a sqrt2 cos(pi x)
    let exact: Vec<f64> = (0..20)
        .map(|i| {
            let (x0, x1) = (i as f64 / 20.0, (i + 1) as f64 / 20.0);
            1.0 + a * 2f64.sqrt() * ((PI * x1).sin() - (PI * x0).sin()) / (PI * (x1 - x0))
        })
        .collect();
    assert!(h.l1_distance(&exact) < 0.03);
    assert!((cosine_density(0.0) - (1.0 + 0.5 * 2f64.sqrt())).abs() < 1e-15);
}

#[test]
fn free_dynamics_match_galerkin_density() {
    let spec = ProblemSpec::fp_neumann(Drift::Power(3), 16);
    let eig = build_problem(&spec).unwrap();
    let law = InitialLaw::default_cosine();
    let t = 0.1;
    let p = ControlSignal::zero(0.0, t);
    let e = run(
        &law,
        40_000,
        21,
        &p,
        Drift::Power(3),
        Regime::PartialReflect,
        1e-3,
        t,
        1,
    );
    let h = estimate_density(&e, 20, Regime::PartialReflect).unwrap();
    let c0 = State::from_slice(&law.cosine_coefficients(16).unwrap());
    let rec = integrate_bilinear(&c0, &p, &eig, 0.0, t, &SimOptions::default()).unwrap();
    let g = galerkin_bin_density(
        eig.basis().unwrap(),
        rec.final_state().coeffs.as_slice(),
        20,
    );
    assert!(h.l1_distance(&g) < 0.05);
}

#[test]
fn oversized_steps_are_rejected() {
    let ens = ParticleEnsemble::sample(&InitialLaw::Uniform, 2_000, 1).unwrap();
    let r = simulate_ensemble(
        &ens,
        &ControlSignal::zero(0.0, 2.0),
        DriftExtension::new(Drift::Zero),
        Regime::PartialReflect,
        0.5,
        2.0,
        1,
    );
    assert!(matches!(r, Err(Error::StepSize { .. })));
}

#[test]
fn apriori_sup_estimates() {
    let p = ControlSignal::constant(0.0, 1.0, 1.0);
    let rep = check_apriori_bounds(
        &InitialLaw::Normal { mean: 0.0, sd: 1.0 },
        4_000,
        13,
        &p,
        DriftExtension::new(Drift::Sine(1.0)),
        1e-3,
        &[0.05, 0.1, 0.2, 0.4],
        1,
    )
    .unwrap();
    assert!(rep.monotone);
    // bounded drift: E sup |X - X0|^2 ~ t for small t
    assert!((rep.incr_slope - 1.0).abs() < 0.25, "{}", rep.incr_slope);
    for (s, t) in rep.sup_sq.iter().zip(&rep.times) {
        // E sup |X|^2 <= 3 (E|X0|^2 + t^2 + 2 * 4 t) with |mu| <= 1, sigma^2 = 2
        assert!(*s <= 3.0 * (rep.second_moment_x0 + t * t + 8.0 * t));
    }
}

#[test]
fn picard_converges_superlinearly() {
    let dt = 1e-3;
    let path = brownian_path(1000, dt, 17);
    let p = ControlSignal::constant(0.0, 1.0, 1.0);
    let rep = picard_iterate_path(
        &path,
        dt,
        0.3,
        &p,
        DriftExtension::unbounded(Drift::Sine(1.0)),
        8,
    )
    .unwrap();
    let d = &rep.distances;
    assert!(d[4] / d[3] < d[3] / d[2] && d[3] / d[2] < 1.0, "{d:?}");
    // (R t)^{m+1} / (m+1)! with R = sup |mu'| = 1, t = 1
    let mut fact = 1.0;
    for (m, dm) in d.iter().enumerate().skip(1) {
        fact *= (m + 1) as f64;
        assert!(
            *dm <= d[0] / fact * (m + 1) as f64 * 1.0001 || *dm < 1e-14,
            "m={m}"
        );
    }
    assert!(!rep.diverged);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn folding_keeps_particles_inside(seed in 0u64..1000, c in -3.0f64..3.0) {
        let p = ControlSignal::constant(0.0, 0.05, c);
        let e = run(&InitialLaw::Uniform, 500, seed, &p, Drift::Power(2), Regime::PartialReflect, 1e-3, 0.05, 1);
        prop_assert!(e.positions.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert_eq!(e.alive_count(), 500);
    }

    #[test]
    fn absorption_only_removes(seed in 0u64..1000) {
        let p = ControlSignal::zero(0.0, 0.05);
        let e = run(&InitialLaw::Uniform, 500, seed, &p, Drift::Zero, Regime::Absorb, 1e-3, 0.05, 1);
        prop_assert_eq!(e.alive_count() as u64 + e.absorptions, 500);
        for (x, a) in e.positions.iter().zip(&e.alive) {
            prop_assert!(!*a || (0.0..=1.0).contains(x));
        }
    }
}
