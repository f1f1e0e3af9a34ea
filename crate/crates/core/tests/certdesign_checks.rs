use dwellswitch::certdesign::{
    affine_existence, audit, corollary1_design, design, existence_check, gc_design_t0, largest_feasible_eps_shift,
    lm_solve_affine, lm_solve_linear, log_grid, tune_alpha, CertificateSet, Law, MetzlerFamily, MetzlerMatrix,
    Objective, TuneProblem, ROW_SUM_TOL,
};
use dwellswitch::matops::{expm, forced_integral, gram_integral};
use dwellswitch::sysmodel::{example_congestion, example_unstable_pair, Mode, SwitchedAffineSystem};
use dwellswitch::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const T: f64 = 0.1;

fn scalar_system(a: f64, b: f64, c: f64) -> SwitchedAffineSystem {
    SwitchedAffineSystem::new(
        vec![Mode {
            a: DMatrix::from_element(1, 1, a),
            b: DVector::from_element(1, b),
        }],
        DMatrix::from_element(1, 1, c),
    )
    .unwrap()
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}

#[test]
fn single_mode_reduces_to_a_scalar_lyapunov_equation() {
    for &(a, c, rho) in &[(-2.0, 1.0, 1e-3), (-0.5, 3.0, 0.25), (-10.0, 0.0, 1.0)] {
        let sys = scalar_system(a, 0.0, c);
        let certs = lm_solve_linear(&sys, &MetzlerMatrix::zeros(1), 1.0, rho).unwrap();
        let exact = (c * c + rho) / (-2.0 * a);
        assert!((certs.x[0][(0, 0)] - exact).abs() <= 1e-12 * exact.max(1.0));
    }
    // an unstable scalar mode has no positive solution
    let sys = scalar_system(1.0, 0.0, 1.0);
    assert!(matches!(
        lm_solve_linear(&sys, &MetzlerMatrix::zeros(1), 1.0, 1e-3),
        Err(Error::Infeasible { mode: 1, .. })
    ));
}

#[test]
fn existence_agrees_with_feasibility_on_the_alpha_grid() {
    let sys = example_unstable_pair(false);
    let modes = vec![sys.a(0).clone(), sys.a(1).clone()];
    let mut seen = (0, 0);
    for alpha in log_grid(1e-2, 1e3, 25) {
        let pi = MetzlerMatrix::uniform_pair(alpha).unwrap();
        let exists = existence_check(&modes, &pi, T).unwrap().hurwitz;
        let solved = lm_solve_linear(&sys, &pi, T, 1e-6).is_ok();
        assert_eq!(exists, solved, "alpha = {alpha}");
        if exists {
            seen.0 += 1;
        } else {
            seen.1 += 1;
        }
    }
    // the grid crosses the existence boundary
    assert!(seen.0 > 0 && seen.1 > 0, "{seen:?}");

    let report = existence_check(&modes, &MetzlerMatrix::uniform_pair(1e-6).unwrap(), T).unwrap();
    assert_eq!(report.j_dim, 8);
    assert!(!report.hurwitz);
}

#[test]
fn extended_operator_has_a_zero_eigenvalue() {
    let sys = example_unstable_pair(true);
    let rep = affine_existence(&sys, &MetzlerMatrix::uniform_pair(1000.0).unwrap(), T).unwrap();
    assert!(rep.linear.hurwitz);
    assert_eq!(rep.extended_dim, 18);
    assert!(rep.extended_abscissa.abs() < 1e-9);
}

#[test]
fn linear_system_through_the_affine_law_costs_at_most_rho() {
    let sys = example_unstable_pair(false);
    let pi = MetzlerMatrix::uniform_pair(1000.0).unwrap();
    for rho in [1e-6, 1e-2, 1.0] {
        let certs = lm_solve_affine(&sys, &pi, T, rho).unwrap();
        assert!(certs.epsilon <= rho + 1e-9, "epsilon {} at rho {rho}", certs.epsilon);
    }
}

/// Extended residual rebuilt here from the system and the stored `X_i`.
fn extended_residuals(sys: &SwitchedAffineSystem, certs: &CertificateSet) -> Vec<DMatrix<f64>> {
    let n = sys.n();
    let m = sys.mode_count();
    let a_ext: Vec<DMatrix<f64>> = (0..m)
        .map(|i| {
            let mut a = DMatrix::zeros(n + 1, n + 1);
            a.view_mut((0, 0), (n, n)).copy_from(sys.a(i));
            a.view_mut((0, n), (n, 1)).copy_from(sys.b(i));
            a
        })
        .collect();
    let mut c_ext = DMatrix::zeros(sys.outputs(), n + 1);
    c_ext.view_mut((0, 0), (sys.outputs(), n)).copy_from(sys.c());
    let q = c_ext.transpose() * &c_ext;
    let x_ext: Vec<DMatrix<f64>> = certs
        .x
        .iter()
        .map(|x| {
            let mut xt = DMatrix::zeros(n + 1, n + 1);
            xt.view_mut((0, 0), (n, n)).copy_from(x);
            xt[(n, n)] = 1.0;
            xt
        })
        .collect();
    let y: Vec<DMatrix<f64>> = (0..m)
        .map(|j| {
            let e = expm(&a_ext[j], certs.dwell).unwrap();
            e.transpose() * &x_ext[j] * &e + gram_integral(&a_ext[j], &q, certs.dwell).unwrap()
        })
        .collect();
    (0..m)
        .map(|i| {
            let mut r = a_ext[i].transpose() * &x_ext[i] + &x_ext[i] * &a_ext[i] + &q;
            for j in 0..m {
                if j != i {
                    r += (&y[j] - &x_ext[i]) * certs.pi.rate(i, j);
                }
            }
            (&r + r.transpose()) * 0.5
        })
        .collect()
}

#[test]
fn affine_slack_makes_every_extended_residual_negative() {
    let cases = [
        (example_unstable_pair(true), MetzlerMatrix::uniform_pair(13.34).unwrap(), T, 1.0),
        (example_unstable_pair(true), MetzlerMatrix::uniform_pair(1000.0).unwrap(), T, 1e-3),
        (example_congestion(1.0, 1.1).unwrap(), MetzlerMatrix::cyclic(1.957, 3).unwrap(), 2.1, 3.16),
    ];
    for (sys, pi, dwell, rho) in cases {
        let certs = lm_solve_affine(&sys, &pi, dwell, rho).unwrap();
        let ext = certs.extended.as_ref().unwrap();
        let n = sys.n();
        let mut selector = DMatrix::<f64>::zeros(n + 1, n + 1);
        selector[(n, n)] = 1.0;
        for (i, r) in extended_residuals(&sys, &certs).iter().enumerate() {
            assert_eq!(ext.x[i].view((0, 0), (n, n)), certs.x[i]);
            assert_eq!(ext.x[i][(n, n)], 1.0);
            // R - sĨ < 0 iff the upper-left block is negative definite and the
            // corner Schur complement is negative. The whole-matrix eigenvalue
            // moves by far less than s when the corner couples strongly.
            let ul = r.view((0, 0), (n, n)).into_owned();
            let v = r.view((0, n), (n, 1)).into_owned();
            assert!(max_eig(&ul) < 0.0, "mode {i}: upper-left block is not negative definite");
            let schur = r[(n, n)] - (v.transpose() * ul.lu().solve(&v).unwrap())[(0, 0)];
            let margin = 1e-9 * ext.epsilon_modes[i].abs().max(1.0);
            assert!(
                schur - (ext.epsilon_modes[i] + margin) < 0.0,
                "mode {i}: corner complement {schur:e} vs slack {:e}",
                ext.epsilon_modes[i]
            );
            assert!(ext.epsilon_modes[i] <= certs.epsilon);
            let certified = r - &selector * certs.epsilon;
            assert!(max_eig(&certified) <= -rho / 2.0, "mode {i}: {}", max_eig(&certified));
        }
        assert!(audit(&sys, &certs).unwrap().passes(rho));
    }
}

/// `b'P(τ)b` on a dense grid with `P` in closed form for a scalar mode.
fn dense_delta(a_hat: f64, b: f64, c: f64, x: f64, dwell: f64, eps: f64) -> f64 {
    let k = 10_000;
    (0..=k)
        .map(|s| {
            let tau = dwell * s as f64 / k as f64;
            let decay = (2.0 * a_hat * tau).exp();
            let gram = c * c * (decay - 1.0) / (2.0 * a_hat);
            b * b * (decay * x + gram)
        })
        .fold(f64::NEG_INFINITY, f64::max)
        / eps
}

#[test]
fn shifted_design_delta_matches_a_dense_grid() {
    for &(a, b, c, dwell, eps, rho) in &[
        (-2.0, 1.0, 1.0, 1.0, 1.0, 1e-3),
        (-2.0, 1.0, 3.0, 1.0, 1.0, 1e-3),
        (-1.0, 0.5, 2.0, 2.5, 0.5, 0.1),
    ] {
        let sys = scalar_system(a, b, c);
        let certs = corollary1_design(&sys, &MetzlerMatrix::zeros(1), dwell, eps, rho).unwrap();
        let a_hat = a + 0.5 * eps;
        let x = (c * c + rho) / (-2.0 * a_hat);
        assert!((certs.x[0][(0, 0)] - x).abs() <= 1e-12);
        let oracle = dense_delta(a_hat, b, c, x, dwell, eps);
        assert!(
            (certs.delta - oracle).abs() <= 1e-6 * oracle,
            "delta {} vs grid {oracle}",
            certs.delta
        );
    }
}

#[test]
fn interior_delta_peak_is_found() {
    // with a large output weight P(τ) rises from X towards the Gramian limit,
    // so the peak sits at the far end of the window; check a two-mode case too
    let sys = example_unstable_pair(true);
    let pi = MetzlerMatrix::uniform_pair(1000.0).unwrap();
    let certs = corollary1_design(&sys, &pi, T, 1.0, 1e-6).unwrap();
    let mut oracle: f64 = 0.0;
    for i in 0..2 {
        let a_hat = sys.a(i) + DMatrix::<f64>::identity(2, 2) * 0.5;
        for s in 0..=10_000 {
            let tau = T * s as f64 / 10_000.0;
            let e = expm(&a_hat, tau).unwrap();
            let p = e.transpose() * &certs.x[i] * &e + gram_integral(&a_hat, &sys.output_weight(), tau).unwrap();
            oracle = oracle.max(sys.b(i).dot(&(p * sys.b(i))));
        }
    }
    assert!((certs.delta - oracle).abs() <= 1e-6 * oracle, "{} vs {oracle}", certs.delta);
}

#[test]
fn shifted_design_fails_beyond_the_feasible_shift() {
    let sys = example_unstable_pair(true);
    let pi = MetzlerMatrix::uniform_pair(1000.0).unwrap();
    let rho = 1e-6;
    let eps = largest_feasible_eps_shift(&sys, &pi, T, rho, 1e-3).unwrap();
    assert!(eps > 0.0);
    assert!(corollary1_design(&sys, &pi, T, eps, rho).is_ok());
    for factor in [2.0, 10.0] {
        match corollary1_design(&sys, &pi, T, factor * eps, rho) {
            Err(Error::Infeasible { reason, .. }) => assert!(reason.contains("eps_shift")),
            Err(Error::ExistenceViolated(_)) => {}
            other => panic!("expected infeasibility at {factor} x eps, got {other:?}"),
        }
    }
    assert!(corollary1_design(&sys, &pi, T, 0.0, rho).is_err());
}

#[test]
fn zero_dwell_design() {
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
    let sys = SwitchedAffineSystem::linear(vec![a.clone(), a], DMatrix::identity(2, 2)).unwrap();
    let certs = gc_design_t0(&sys, 3.0, 1e-3).unwrap();
    assert!((&certs.x[0] - &certs.x[1]).amax() <= 1e-10 * certs.x[0].amax());
    assert_eq!(certs.dwell, 0.0);

    let pair = example_unstable_pair(false);
    assert!(matches!(gc_design_t0(&pair, 1e-9, 1e-3), Err(Error::Infeasible { .. })));
    let ok = gc_design_t0(&pair, 5.109, 1e-3).unwrap();
    assert!(audit(&pair, &ok).unwrap().passes(1e-3));
    assert!(matches!(
        gc_design_t0(&example_congestion(1.0, 1.1).unwrap(), 1.0, 1e-3),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn every_law_designs_and_audits_on_the_pair() {
    let sys = example_unstable_pair(true);
    let pi = MetzlerMatrix::uniform_pair(1000.0).unwrap();
    for law in Law::ALL {
        let pi = if law == Law::GcT0 {
            MetzlerMatrix::uniform_pair(5.109).unwrap()
        } else {
            pi.clone()
        };
        let certs = design(&sys, &pi, T, law, Some(1e-3), None).unwrap();
        assert_eq!(certs.law, law);
        let report = audit(&sys, &certs).unwrap();
        assert!(report.passes(1e-3), "{law}: {report:?}");
        let back = CertificateSet::from_json(&certs.to_json()).unwrap();
        assert_eq!(back, certs);
        assert_eq!(law.tag().parse::<Law>().unwrap(), law);
    }
}

#[test]
fn audit_rejects_tampered_certificates() {
    let sys = example_unstable_pair(false);
    let pi = MetzlerMatrix::uniform_pair(1000.0).unwrap();
    let mut certs = lm_solve_linear(&sys, &pi, T, 1e-3).unwrap();
    certs.x[0] *= 0.5;
    assert!(!audit(&sys, &certs).unwrap().passes(1e-3));
    let other = example_congestion(1.0, 1.1).unwrap();
    assert!(matches!(audit(&other, &certs), Err(Error::Mismatch(_))));
}

#[test]
fn tuning_returns_the_grid_minimum() {
    let sys = example_unstable_pair(false);
    let x0 = DVector::from_vec(vec![5.0, 10.0]);
    let mut problem = TuneProblem::new(&sys, MetzlerFamily::UniformPair, T, Law::Thm1Linear, x0.clone());
    problem.rho = Some(1e-6);
    let out = tune_alpha(&problem).unwrap();

    let mut best = (f64::NAN, f64::INFINITY);
    for &alpha in &problem.alphas {
        let pi = MetzlerMatrix::uniform_pair(alpha).unwrap();
        if let Ok(c) = lm_solve_linear(&sys, &pi, T, 1e-6) {
            let v = c.initial_bound(&x0).unwrap();
            if v < best.1 {
                best = (alpha, v);
            }
        }
    }
    assert_eq!(out.alpha, best.0);
    assert!((out.value - best.1).abs() <= 1e-12 * best.1);
    assert_eq!(out.evaluations.len(), problem.alphas.len());

    let aff = example_unstable_pair(true);
    let mut problem = TuneProblem::new(&aff, MetzlerFamily::UniformPair, T, Law::Thm2Affine, x0);
    problem.rho = Some(1.0);
    problem.objective = Objective::Epsilon;
    let out = tune_alpha(&problem).unwrap();
    let min = out
        .evaluations
        .iter()
        .filter_map(|e| e.1)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(out.value, min);
    assert_eq!(out.value, out.certs.epsilon);
}

#[test]
fn rate_matrix_validation() {
    assert!(MetzlerMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0])).is_err());
    assert!(MetzlerMatrix::new(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -0.5])).is_err());
    assert!(MetzlerMatrix::new(DMatrix::zeros(2, 3)).is_err());
    assert!(MetzlerMatrix::uniform_pair(0.0).is_err());
    assert!(MetzlerMatrix::cyclic(1.0, 1).is_err());
    assert!(MetzlerMatrix::from_lambda(&[0.5, 0.6], 1.0).is_err());
    let c = MetzlerMatrix::cyclic(2.0, 3).unwrap();
    // mode 3 hands over to mode 2, mode 1 to mode 3
    assert_eq!(c.rate(2, 1), 2.0);
    assert_eq!(c.rate(0, 2), 2.0);
    assert_eq!(c.mean_dwell(0), 0.5);
    assert!(MetzlerMatrix::zeros(1).mean_dwell(0).is_infinite());
}

fn lambda_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 2..6).prop_map(|v| {
        let s: f64 = v.iter().sum();
        let mut l: Vec<f64> = v.iter().map(|x| x / s).collect();
        // absorb rounding so the weights sum to one exactly enough
        let rest: f64 = l[1..].iter().sum();
        l[0] = 1.0 - rest;
        l
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn families_are_metzler_with_zero_row_sums(alpha in 1e-3f64..1e4, m in 2usize..7, lambda in lambda_strategy()) {
        for pi in [
            MetzlerMatrix::uniform_pair(alpha).unwrap(),
            MetzlerMatrix::cyclic(alpha, m).unwrap(),
            MetzlerMatrix::from_lambda(&lambda, alpha).unwrap(),
        ] {
            let (row, off) = pi.invariant_residuals();
            prop_assert!(row <= ROW_SUM_TOL * pi.entries().amax().max(1.0));
            prop_assert!(off >= 0.0);
        }
        let pi = MetzlerMatrix::from_lambda(&lambda, alpha).unwrap();
        let l = DVector::from_column_slice(&lambda);
        prop_assert!(pi.left_action(&l).amax() <= 1e-12 * alpha);
        let built = MetzlerFamily::FromLambda(lambda.clone()).build(alpha, lambda.len()).unwrap();
        prop_assert_eq!(built, pi);
        prop_assert!(MetzlerFamily::Cyclic.build(alpha, m).unwrap().size() == m);
    }
}

// Ỹ1 from the extended exponential against its block form
// [[E'XE, E'Xm], [m'XE, m'Xm + 1]] with E = e^{AT} and m the forced response.
#[test]
fn extended_forecast_matches_its_block_form() {
    let sys = example_unstable_pair(true);
    let certs = lm_solve_affine(&sys, &MetzlerMatrix::uniform_pair(13.34).unwrap(), T, 1.0).unwrap();
    let ext = certs.extended.as_ref().unwrap();
    for j in 0..2 {
        let e = expm(sys.a(j), T).unwrap();
        let m = forced_integral(sys.a(j), sys.b(j), T).unwrap();
        assert!((&ext.m[j] - &m).amax() <= 1e-14);
        let x = &certs.x[j];
        let mut block = DMatrix::zeros(3, 3);
        block.view_mut((0, 0), (2, 2)).copy_from(&(e.transpose() * x * &e));
        let corner = e.transpose() * x * &m;
        block.view_mut((0, 2), (2, 1)).copy_from(&corner);
        block.view_mut((2, 0), (1, 2)).copy_from(&corner.transpose());
        block[(2, 2)] = (m.transpose() * x * &m)[(0, 0)] + 1.0;
        let scale = block.amax();
        assert!((&ext.y1[j] - &block).amax() <= 1e-12 * scale, "mode {j}");
    }
}
