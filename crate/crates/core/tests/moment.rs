use ground_steer::catalog::{build_problem, Drift, ProblemSpec};
use ground_steer::control::ControlSignal;
use ground_steer::moment::*;
use ground_steer::quadrature::gauss_legendre;
use ground_steer::spectral::{EigenSystem, State};
use ground_steer::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dirichlet(k: usize) -> EigenSystem {
    build_problem(&ProblemSpec::fp_dirichlet(Drift::Power(1), k)).unwrap()
}

fn shifted_dirichlet(k: usize) -> EigenSystem {
    dirichlet(k).ground_shifted().unwrap()
}

/// `y_k(T) = e^{-l T} y0_k - b_k int_0^T e^{-l (T - s)} p(s) ds`, with a
/// 16-point Gauss rule on every linear piece of `p`.
fn duhamel_final(p: &ControlSignal, y0: &State, eig: &EigenSystem, t: f64) -> Vec<f64> {
    let (x, w) = gauss_legendre(16);
    let b = eig.ground_coupling();
    (0..eig.len())
        .map(|k| {
            let l = eig.eigenvalue(k) - eig.ground_eigenvalue();
            let mut acc = 0.0;
            for seg in p.segments() {
                let (a, c) = (seg.t0.max(0.0), seg.t1.min(t));
                if c <= a {
                    continue;
                }
                let h = 0.5 * (c - a);
                for (xi, wi) in x.iter().zip(&w) {
                    let s = a + h * (xi + 1.0);
                    acc += h * wi * (-l * (t - s)).exp() * seg.at(s);
                }
            }
            (-l * t).exp() * y0.coeffs[k] - b[k] * acc
        })
        .collect()
}

fn scalar_system(lambdas: Vec<f64>, ground_row: &[f64]) -> EigenSystem {
    let k = lambdas.len();
    let mut b = DMatrix::zeros(k, k);
    for (j, v) in ground_row.iter().enumerate() {
        b[(0, j)] = *v;
    }
    EigenSystem::new(lambdas, b).unwrap()
}

#[test]
fn targets_from_couplings() {
    let eig = dirichlet(6);
    let p = assemble_moment_problem(&State::unit(6, 1), &eig, 1.0).unwrap();
    let i = p.active.iter().position(|&k| k == 1).unwrap();
    assert!((p.targets[i] - 0.75).abs() < 1e-12);
    let z = assemble_moment_problem(&State::zeros(6), &eig, 1.0).unwrap();
    assert!(z.targets.iter().all(|t| *t == 0.0));
}

#[test]
fn two_constraint_gram_system() {
    let eig = scalar_system(vec![0.0, 1.0], &[1.0, 1.0]);
    // The reversed kernel: with lambda = 0 as the ground, the problem is
    // int e^{lambda s} p = y0/b for lambda in {0, 1}.
    let y0 = State::from_slice(&[1.0, 1.0]);
    let prob = assemble_moment_problem(&y0, &eig, 1.0).unwrap();
    let opts = MomentOptions {
        uniform_intervals: 800,
        ..Default::default()
    };
    let sol = solve_min_norm(&prob, &opts).unwrap();
    // Cramer on [[1, e-1], [e-1, (e^2-1)/2]] c = (1, 1)
    let e = std::f64::consts::E;
    let (g11, g12, g22) = (1.0, e - 1.0, (e * e - 1.0) / 2.0);
    let det = g11 * g22 - g12 * g12;
    let c0 = (g22 - g12) / det;
    let c1 = (g11 - g12) / det;
    let norm = (c0 + c1).sqrt();
    assert!(
        (sol.norm - norm).abs() < 1e-5 * norm,
        "{} vs {norm}",
        sol.norm
    );
    for (t, v) in sol.control.samples() {
        let want = c0 + c1 * t.exp();
        assert!(
            (v - want).abs() < 1e-3 * (1.0 + want.abs()),
            "t={t}: {v} vs {want}"
        );
    }
}

#[test]
fn random_nulls_verified_by_direct_integration() {
    let eig = shifted_dirichlet(12);
    let t = 0.5;
    let opts = MomentOptions::default();
    for y0 in random_unit_states(12, 20, 7) {
        let prob = assemble_moment_problem(&y0, &eig, t).unwrap();
        let sol = solve_min_norm(&prob, &opts).unwrap();
        let rep = verify_linear_null(&sol.control, &y0, &eig, t).unwrap();
        assert!(rep.relative_residual <= 1e-6);
        let yt = duhamel_final(&sol.control, &y0, &eig, t);
        let r = yt.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r <= 1e-6, "oracle residual {r}");
    }
}

#[test]
fn least_norm_first_order_optimality() {
    let eig = shifted_dirichlet(10);
    let y0 = random_unit_states(10, 1, 3).remove(0);
    let sol = solve_min_norm(
        &assemble_moment_problem(&y0, &eig, 0.6).unwrap(),
        &MomentOptions::default(),
    )
    .unwrap();
    let n = sol.dimension();
    for (i, dir) in random_unit_states(n, 16, 11).into_iter().enumerate() {
        let d = dir.coeffs.as_slice();
        for eps in [1e-3, -1e-3] {
            let g = sol.perturbation_gain(d, eps);
            assert!(g >= -1e-12 * sol.norm * sol.norm, "direction {i}: {g}");
        }
    }
}

#[test]
fn nested_grid_refinement_never_increases_the_norm() {
    let eig = shifted_dirichlet(8);
    let y0 = random_unit_states(8, 1, 5).remove(0);
    let prob = assemble_moment_problem(&y0, &eig, 0.5).unwrap();
    let mut last = f64::INFINITY;
    for q in [50, 100, 200, 400] {
        let opts = MomentOptions {
            uniform_intervals: q,
            ..Default::default()
        };
        let sol = solve_min_norm(&prob, &opts).unwrap();
        assert!(
            sol.norm <= last * (1.0 + 1e-10),
            "q={q}: {} > {last}",
            sol.norm
        );
        last = sol.norm;
    }
}

#[test]
fn time_shift_keeps_the_norm() {
    let eig = shifted_dirichlet(8);
    let y0 = random_unit_states(8, 1, 9).remove(0);
    let sol = solve_min_norm(
        &assemble_moment_problem(&y0, &eig, 0.4).unwrap(),
        &MomentOptions::default(),
    )
    .unwrap();
    let moved = sol.control.shifted(1.7);
    assert!((moved.l2_norm() - sol.norm).abs() < 1e-12 * sol.norm);
    assert!((moved.start() - 1.7).abs() < 1e-15);
}

#[test]
fn cost_is_unit_for_a_single_constant_mode() {
    let eig = scalar_system(vec![0.0], &[1.0]);
    let s = estimate_control_cost(&eig, 1.0, 8, 1, &MomentOptions::default()).unwrap();
    assert!((s.n_emp - 1.0).abs() < 1e-12);
}

#[test]
fn cost_law_on_dirichlet() {
    let eig = shifted_dirichlet(8);
    let horizons: Vec<f64> = (2..=10).map(|i| i as f64 / 10.0).collect();
    let curve = estimate_cost_curve(&eig, &horizons, 20, 1, &MomentOptions::default()).unwrap();
    assert!(curve.failures.is_empty());
    let fit = curve.fit.unwrap();
    assert!(fit.nu_hat > 0.0 && fit.r_squared > 0.9, "{fit:?}");
    for w in curve.samples.windows(2) {
        assert!(w[1].n_emp <= w[0].n_emp * (1.0 + 1e-9));
    }
}

#[test]
fn fewer_trials_rejected() {
    let eig = shifted_dirichlet(4);
    assert!(matches!(
        estimate_control_cost(&eig, 1.0, 4, 1, &MomentOptions::default()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn constraint_cap_reports_dropped_modes() {
    let eig = shifted_dirichlet(12);
    let y0 = random_unit_states(12, 1, 2).remove(0);
    let prob = assemble_with_cap(&y0, &eig, 0.5, Some(6)).unwrap();
    assert_eq!(prob.len(), 6);
    let sol = solve_min_norm(&prob, &MomentOptions::default()).unwrap();
    // The kept modes are nulled exactly.
    let kept = nalgebra::DVector::from_iterator(6, prob.active.iter().map(|&k| y0.coeffs[k]));
    let rep = propagate_linear(
        &kept,
        &prob.lambdas,
        &prob.couplings,
        &sol.control,
        0.0,
        0.5,
    );
    assert!(rep.amax() < 1e-8);
    // The uncontrolled tail shows up in the all-mode residual.
    assert!(sol.residual > 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn control_is_linear_in_the_data(seed in 0u64..1000, scale in -5.0f64..5.0) {
        let eig = shifted_dirichlet(8);
        let y0 = random_unit_states(8, 1, seed).remove(0);
        let opts = MomentOptions::default();
        let a = solve_min_norm(&assemble_moment_problem(&y0, &eig, 0.7).unwrap(), &opts).unwrap();
        let ys = State::new(&y0.coeffs * scale);
        let b = solve_min_norm(&assemble_moment_problem(&ys, &eig, 0.7).unwrap(), &opts).unwrap();
        for (x, y) in a.control.values().iter().zip(b.control.values()) {
            prop_assert!((scale * x - y).abs() <= 1e-9 * (1.0 + a.norm * scale.abs()));
        }
    }

    #[test]
    fn free_decay_is_exact(k in 0usize..8, t in 0.05f64..2.0) {
        let eig = shifted_dirichlet(8);
        let y0 = State::unit(8, k);
        let rep = verify_linear_null(&ControlSignal::zero(0.0, t), &y0, &eig, t).unwrap();
        let want = (-eig.eigenvalue(k) * t).exp();
        prop_assert!((rep.final_state[k] - want).abs() <= 1e-14 * want.max(1e-300));
    }

    #[test]
    fn solved_controls_null_random_data(seed in 0u64..1000, t in 0.3f64..1.2) {
        let eig = shifted_dirichlet(8);
        let y0 = random_unit_states(8, 1, seed).remove(0);
        let sol = solve_min_norm(&assemble_moment_problem(&y0, &eig, t).unwrap(), &MomentOptions::default()).unwrap();
        let yt = duhamel_final(&sol.control, &y0, &eig, t);
        prop_assert!(yt.iter().all(|v| v.abs() < 1e-7));
    }
}
