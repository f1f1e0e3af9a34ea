use dwellswitch::certdesign::{
    design, lm_solve_affine, lm_solve_linear, CertificateSet, ExtendedCertificates, Law, MetzlerMatrix,
};
use dwellswitch::matops::augment;
use dwellswitch::switchengine::{
    baseline_allerhand, detect_limit_cycle, init_sigma, propagate, read_switches, read_trajectory, should_switch,
    simulate, tail_cost_rate, verify_bound, write_switches, write_trajectory, EngineConfig, Sample, Sigma0,
    SwitchingPolicy, TrajectoryRecord,
};
use dwellswitch::sysmodel::{example_congestion, example_unstable_pair, lift, Mode, SwitchedAffineSystem};
use dwellswitch::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T: f64 = 0.1;

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    g.transpose() * &g + DMatrix::<f64>::identity(d, d) * 0.1
}

/// Affine certificates with arbitrary positive definite matrices; only the
/// comparison data matter for the decision rule.
fn random_certs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CertificateSet {
    let ext = |rng: &mut ChaCha8Rng| (0..m).map(|_| random_spd(rng, n + 1)).collect::<Vec<_>>();
    let x_ext = ext(rng);
    let y1_ext = ext(rng);
    let y2_ext = ext(rng);
    let lambda = vec![1.0 / m as f64; m];
    CertificateSet {
        law: Law::Thm2Affine,
        dwell: 1.0,
        pi: MetzlerMatrix::from_lambda(&lambda, 1.0).unwrap(),
        rho: 1.0,
        x: x_ext.iter().map(|x| x.view((0, 0), (n, n)).into_owned()).collect(),
        y1: (0..m).map(|_| DMatrix::identity(n, n)).collect(),
        y2: (0..m).map(|_| DMatrix::identity(n, n)).collect(),
        extended: Some(ExtendedCertificates {
            x: x_ext,
            y1: y1_ext,
            y2: y2_ext,
            m: vec![DVector::zeros(n); m],
            epsilon_modes: vec![0.0; m],
        }),
        epsilon: 1.0,
        eps_shift: 0.0,
        delta: 0.0,
    }
}

#[test]
fn switch_decision_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut switched = 0;
    for draw in 0..100 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(2..=4);
        let certs = random_certs(&mut rng, n, m);
        let x = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let xt = lift(&x);
        let active = rng.random_range(0..m);
        let ext = certs.extended.clone().unwrap();

        let rest = (xt.transpose() * &ext.x[active] * &xt)[(0, 0)];
        let mut oracle = None;
        let mut best = f64::INFINITY;
        let mut any_below = false;
        for j in (0..m).filter(|&j| j != active) {
            let v = (xt.transpose() * (&ext.y1[j] + &ext.y2[j]) * &xt)[(0, 0)];
            any_below |= v < rest;
            if v < best {
                best = v;
                oracle = Some(j);
            }
        }
        let oracle = if any_below { oracle } else { None };
        let policy = SwitchingPolicy::certified(certs).unwrap();
        assert_eq!(should_switch(&xt, active, &policy), oracle, "draw {draw}");
        switched += oracle.is_some() as usize;
    }
    assert!(switched > 10 && switched < 90, "{switched} switches out of 100");
}

#[test]
fn ties_go_to_the_smallest_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut certs = random_certs(&mut rng, 2, 3);
    let ext = certs.extended.as_mut().unwrap();
    let low = DMatrix::<f64>::identity(3, 3) * 0.5;
    for j in 1..3 {
        ext.y1[j] = low.clone();
        ext.y2[j] = DMatrix::zeros(3, 3);
    }
    ext.x[0] = DMatrix::identity(3, 3) * 10.0;
    let policy = SwitchingPolicy::certified(certs).unwrap();
    let xt = lift(&DVector::from_vec(vec![1.0, 1.0]));
    assert_eq!(should_switch(&xt, 0, &policy), Some(1));
    let open = SwitchingPolicy::periodic(vec![2, 0], 1.0).unwrap();
    assert_eq!(should_switch(&xt, 0, &open), None);
}

#[test]
fn initial_mode_minimizes_the_initial_value() {
    let sys = example_unstable_pair(false);
    let pi = MetzlerMatrix::uniform_pair(1000.0).unwrap();
    let certs = lm_solve_linear(&sys, &pi, T, 1e-6).unwrap();
    let policy = SwitchingPolicy::certified(certs.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let x0 = DVector::from_fn(2, |_, _| rng.random_range(-10.0..10.0));
        let values: Vec<f64> = (0..2)
            .map(|j| {
                let p = &certs.y1[j] + &certs.y2[j];
                (x0.transpose() * p * &x0)[(0, 0)]
            })
            .collect();
        let expected = if values[1] < values[0] { 1 } else { 0 };
        assert_eq!(init_sigma(&x0, &policy), expected);
    }
    assert_eq!(init_sigma(&DVector::zeros(2), &policy), 0);
    let open = SwitchingPolicy::periodic(vec![1, 0], 1.0).unwrap();
    assert_eq!(init_sigma(&DVector::zeros(2), &open), 1);
}

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

#[test]
fn propagate_is_the_exact_affine_flow() {
    let sys = scalar_system(-1.0, 1.0, 1.0);
    let out = propagate(&sys, 0, &lift(&DVector::zeros(1)), 1.0);
    assert!((out[0] - (1.0 - (-1f64).exp())).abs() < 1e-14);
    assert!((out[1] - 1.0).abs() < 1e-15);
    let pair = example_unstable_pair(true);
    let x = DVector::from_vec(vec![0.3, -0.7]);
    let two = propagate(&pair, 1, &propagate(&pair, 1, &lift(&x), 0.2), 0.3);
    let one = propagate(&pair, 1, &lift(&x), 0.5);
    assert!((two - one).amax() < 1e-12);
}

#[test]
fn single_mode_run_matches_the_closed_form() {
    let (a, b, c, x0) = (-0.8, 0.6, 1.5, 2.0);
    let sys = scalar_system(a, b, c);
    let certs = lm_solve_affine(&sys, &MetzlerMatrix::zeros(1), 0.5, 0.1).unwrap();
    let policy = SwitchingPolicy::certified(certs.clone()).unwrap();
    let cfg = EngineConfig::new(DVector::from_element(1, x0), 6.0);
    let rec = simulate(&sys, &policy, &cfg).unwrap();
    assert!(rec.switches.is_empty());
    assert!(rec.samples.iter().all(|s| s.sigma == 0));
    let xe = -b / a;
    for s in &rec.samples {
        let e = (a * s.t).exp();
        let x = xe + (x0 - xe) * e;
        // ∫ c²(xe + d e^{aτ})² dτ with d = x0 - xe
        let d = x0 - xe;
        let j = c * c * (xe * xe * s.t + 2.0 * xe * d * (e - 1.0) / a + d * d * (e * e - 1.0) / (2.0 * a));
        assert!((s.x[0] - x).abs() <= 1e-12 * (1.0 + x.abs()), "x at t = {}", s.t);
        assert!((s.j - j).abs() <= 1e-10 * (1.0 + j.abs()), "J at t = {}: {} vs {j}", s.t, s.j);
    }
    let report = verify_bound(&rec, &certs).unwrap();
    assert!(report.holds, "{report:?}");
}

/// Runs the closed loop and checks the structural invariants of the record.
fn check_invariants(sys: &SwitchedAffineSystem, certs: &CertificateSet, x0: DVector<f64>, t_end: f64) -> TrajectoryRecord {
    let policy = SwitchingPolicy::certified(certs.clone()).unwrap();
    let mut cfg = EngineConfig::new(x0, t_end);
    cfg.h_check = Some(certs.dwell / 20.0);
    let rec = simulate(sys, &policy, &cfg).unwrap();
    let h = cfg.h_check.unwrap();
    assert!(rec.lift_drift <= 1e-9, "lift drift {}", rec.lift_drift);

    let mut last = rec.samples[0].t;
    for e in &rec.switches {
        assert!(e.t - last >= certs.dwell - 1e-12, "dwell violated at t = {}", e.t);
        assert!(e.delta_v < 0.0, "switch at t = {} raised V by {}", e.t, e.delta_v);
        assert_ne!(e.from, e.to);
        last = e.t;
    }

    let slope = match certs.law {
        Law::Thm2Affine => certs.epsilon,
        _ => 0.0,
    };
    for w in rec.samples.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        assert!(q.t > p.t);
        // flows only: a switch resets V to the entry value
        if p.sigma != q.sigma || rec.switches.iter().any(|e| e.t > p.t && e.t <= q.t) {
            continue;
        }
        let growth = (q.v + q.j) - (p.v + p.j) - slope * (q.t - p.t);
        assert!(growth <= 1e-6 * (1.0 + p.v.abs()), "V + J grew by {growth:e} on [{}, {}]", p.t, q.t);
    }

    // cost increments against a fine trapezoid rule along the exact flow;
    // a sample carries the mode active from its time onward
    let cc = sys.output_weight();
    for w in rec.samples.windows(2).step_by(37).take(60) {
        let (p, q) = (&w[0], &w[1]);
        if rec.switches.iter().any(|e| e.t > p.t && e.t < q.t) {
            continue;
        }
        let zz = |xt: &DVector<f64>| {
            let x = xt.rows(0, sys.n()).into_owned();
            (x.transpose() * &cc * &x)[(0, 0)]
        };
        let trapezoid = |steps: usize| {
            let dt = (q.t - p.t) / steps as f64;
            let mut xt = lift(&p.x);
            let mut integral = 0.0;
            let mut prev = zz(&xt);
            for _ in 0..steps {
                xt = propagate(sys, p.sigma, &xt, dt);
                let cur = zz(&xt);
                integral += 0.5 * dt * (prev + cur);
                prev = cur;
            }
            integral
        };
        assert!((q.t - p.t) / 100.0 <= h / 100.0 + 1e-15);
        // one Richardson step removes the O(dt²) term, which near the
        // affine operating point is itself of order 1e-6 relative
        let oracle = (4.0 * trapezoid(200) - trapezoid(100)) / 3.0;
        let inc = q.j - p.j;
        // the running total carries an absolute rounding error of a few ulps
        let floor = 8.0 * f64::EPSILON * q.j.abs();
        assert!(
            (inc - oracle).abs() <= 1e-6 * inc.abs() + floor,
            "cost increment {inc:e} vs quadrature {oracle:e} at t = {}",
            p.t
        );
    }
    rec
}

#[test]
fn linear_law_invariants_and_bound() {
    let sys = example_unstable_pair(false);
    let certs = lm_solve_linear(&sys, &MetzlerMatrix::uniform_pair(1000.0).unwrap(), T, 1e-6).unwrap();
    let rec = check_invariants(&sys, &certs, DVector::from_vec(vec![5.0, 10.0]), 15.0);
    assert!(rec.switches.len() > 10);
    assert!(rec.final_state().unwrap().norm() < 1e-4);
    assert!(verify_bound(&rec, &certs).unwrap().holds);
}

#[test]
fn affine_law_invariants_and_bound() {
    let sys = example_unstable_pair(true);
    let certs = lm_solve_affine(&sys, &MetzlerMatrix::uniform_pair(13.34).unwrap(), T, 1.0).unwrap();
    let rec = check_invariants(&sys, &certs, DVector::from_vec(vec![5.0, 10.0]), 15.0);
    let report = verify_bound(&rec, &certs).unwrap();
    assert!(report.holds, "{report:?}");
    assert_eq!(report.slope, certs.epsilon);
    let rate = tail_cost_rate(&rec, 7.5).unwrap();
    assert!(rate <= certs.epsilon + 1e-4);
}

#[test]
fn shifted_and_zero_dwell_laws_keep_their_bounds() {
    let sys = example_unstable_pair(true);
    let pi = MetzlerMatrix::uniform_pair(1000.0).unwrap();
    let certs = design(&sys, &pi, T, Law::Corollary1, Some(1e-6), None).unwrap();
    let policy = SwitchingPolicy::certified(certs.clone()).unwrap();
    let rec = simulate(&sys, &policy, &EngineConfig::new(DVector::from_vec(vec![5.0, 10.0]), 15.0)).unwrap();
    assert!(verify_bound(&rec, &certs).unwrap().holds);

    let lin = example_unstable_pair(false);
    let certs = design(&lin, &MetzlerMatrix::uniform_pair(5.109).unwrap(), 0.0, Law::GcT0, Some(1e-3), None).unwrap();
    let policy = SwitchingPolicy::certified(certs.clone()).unwrap();
    let rec = simulate(&lin, &policy, &EngineConfig::new(DVector::from_vec(vec![5.0, 10.0]), 15.0)).unwrap();
    assert!(verify_bound(&rec, &certs).unwrap().holds);
    assert!(rec.final_state().unwrap().norm() < 1e-1);
}

#[test]
fn congestion_run_settles_into_the_cycle() {
    let sys = example_congestion(1.0, 1.1).unwrap();
    let certs = lm_solve_affine(&sys, &MetzlerMatrix::cyclic(1.957, 3).unwrap(), 2.1, 3.16).unwrap();
    let rec = check_invariants(&sys, &certs, DVector::from_vec(vec![10.0, 10.0, 10.0]), 200.0);
    let cycle = detect_limit_cycle(&rec, 100.0, 1e-6).expect("a periodic switch pattern");
    let mut pattern = cycle.pattern.clone();
    let start = pattern.iter().position(|&k| k == 2).unwrap();
    pattern.rotate_left(start);
    assert_eq!(pattern, vec![2, 1, 0]);
    assert!(cycle.max_return_distance < 1e-4);
}

#[test]
fn baseline_law_stabilizes_the_pair() {
    let sys = example_unstable_pair(false);
    let policy = baseline_allerhand(&sys, &MetzlerMatrix::uniform_pair(1000.0).unwrap(), T, 1e-6).unwrap();
    let rec = simulate(&sys, &policy, &EngineConfig::new(DVector::from_vec(vec![5.0, 10.0]), 15.0)).unwrap();
    assert!(rec.final_state().unwrap().norm() < 1e-3);
    assert!(verify_bound(&rec, policy.certificates().unwrap()).is_err());
    assert!(baseline_allerhand(&example_unstable_pair(true), &MetzlerMatrix::uniform_pair(1.0).unwrap(), T, 1e-6).is_err());
}

#[test]
fn single_mode_never_switches_and_open_loop_follows_its_sequence() {
    let sys = scalar_system(-1.0, 0.0, 1.0);
    let certs = lm_solve_linear(&sys, &MetzlerMatrix::zeros(1), 0.3, 1e-3).unwrap();
    let rec = simulate(
        &sys,
        &SwitchingPolicy::certified(certs).unwrap(),
        &EngineConfig::new(DVector::from_element(1, 1.0), 10.0),
    )
    .unwrap();
    assert!(rec.switches.is_empty());

    let pair = example_unstable_pair(false);
    let open = SwitchingPolicy::periodic(vec![0, 1], 0.05).unwrap();
    let mut cfg = EngineConfig::new(DVector::from_vec(vec![1.0, 1.0]), 1.0);
    cfg.sigma0 = Sigma0::Fixed(1);
    let rec = simulate(&pair, &open, &cfg).unwrap();
    assert_eq!(rec.samples[0].sigma, 1);
    assert!(rec.samples.iter().all(|s| s.v.is_nan()));
    assert_eq!(rec.switches.len(), 19);
    for (k, e) in rec.switches.iter().enumerate() {
        assert!((e.t - 0.05 * (k + 1) as f64).abs() < 1e-12);
        assert_eq!(e.to, k % 2);
    }
}

#[test]
fn divergence_and_config_errors() {
    let sys = scalar_system(5.0, 0.0, 1.0);
    let open = SwitchingPolicy::periodic(vec![0], 1.0).unwrap();
    let res = simulate(&sys, &open, &EngineConfig::new(DVector::from_element(1, 1.0), 10.0));
    assert!(matches!(res, Err(Error::Divergence { .. })));

    let pair = example_unstable_pair(false);
    let certs = lm_solve_linear(&pair, &MetzlerMatrix::uniform_pair(1000.0).unwrap(), T, 1e-6).unwrap();
    let policy = SwitchingPolicy::certified(certs).unwrap();
    let mut cfg = EngineConfig::new(DVector::from_vec(vec![1.0, 1.0]), 1.0);
    cfg.h_check = Some(T);
    assert!(matches!(simulate(&pair, &policy, &cfg), Err(Error::Invalid(_))));
    let mut cfg = EngineConfig::new(DVector::from_vec(vec![1.0, 1.0]), 1.0);
    cfg.sigma0 = Sigma0::Fixed(2);
    assert!(simulate(&pair, &policy, &cfg).is_err());
    let cfg = EngineConfig::new(DVector::from_vec(vec![1.0, 1.0, 1.0]), 1.0);
    assert!(matches!(simulate(&pair, &policy, &cfg), Err(Error::Dimension(_))));
    let other = example_congestion(1.0, 1.1).unwrap();
    let cfg = EngineConfig::new(DVector::from_vec(vec![1.0, 1.0, 1.0]), 1.0);
    assert!(matches!(simulate(&other, &policy, &cfg), Err(Error::Mismatch(_))));
}

#[test]
fn degenerate_records() {
    let sys = example_unstable_pair(false);
    let certs = lm_solve_linear(&sys, &MetzlerMatrix::uniform_pair(1000.0).unwrap(), T, 1e-6).unwrap();
    let empty = TrajectoryRecord::default();
    let report = verify_bound(&empty, &certs).unwrap();
    assert!(report.holds);
    assert_eq!(report.max_violation, f64::NEG_INFINITY);
    assert!(tail_cost_rate(&empty, 0.0).is_none());
    assert!(detect_limit_cycle(&empty, 1.0, 1e-6).is_none());

    let constant = TrajectoryRecord {
        samples: (0..100)
            .map(|k| Sample {
                t: k as f64 * 0.1,
                x: DVector::from_vec(vec![1.0, 2.0]),
                sigma: 0,
                v: 1.0,
                j: 0.0,
            })
            .collect(),
        switches: vec![],
        lift_drift: 0.0,
    };
    assert!(detect_limit_cycle(&constant, 5.0, 1e-6).is_none());
    assert_eq!(tail_cost_rate(&constant, 5.0), Some(0.0));
}

#[test]
fn csv_round_trip() {
    let sys = example_unstable_pair(true);
    let certs = lm_solve_affine(&sys, &MetzlerMatrix::uniform_pair(13.34).unwrap(), T, 1.0).unwrap();
    let policy = SwitchingPolicy::certified(certs).unwrap();
    let rec = simulate(&sys, &policy, &EngineConfig::new(DVector::from_vec(vec![5.0, 10.0]), 2.0)).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&rec, &mut buf).unwrap();
    let back = read_trajectory(buf.as_slice()).unwrap();
    assert_eq!(back.samples, rec.samples);
    let mut buf = Vec::new();
    write_switches(&rec.switches, &mut buf).unwrap();
    assert_eq!(read_switches(buf.as_slice()).unwrap(), rec.switches);
    assert!(read_trajectory("t,x1,sigma\n0,1\n".as_bytes()).is_err());
    // extended form used by the engine matches the helper
    assert_eq!(augment(sys.a(0), sys.b(0)), sys.extend().modes[0]);
}
