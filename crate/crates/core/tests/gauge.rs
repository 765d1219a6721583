use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use secantlab_core::asymptotics::{secant_trace, secant_trace_with};
use secantlab_core::flow::{integrate, FlowSpec, Parameterization};
use secantlab_core::gauge::lattice::*;
use secantlab_core::gauge::quat::Quat;
use secantlab_core::gauge::toy::*;
use secantlab_core::linalg::{dot, norm, sub};
use secantlab_core::AnalyticField;

const DIMS: [usize; 4] = [2, 2, 2, 2];

fn toy_flow(action: &GroupAction, start: Vec<f64>) -> secantlab_core::flow::Trajectory {
    let mut s = FlowSpec::new(action.field().clone(), start);
    s.parameterization = Parameterization::Time;
    s.grad_floor = 1e-6;
    s.rel_tol = 1e-12;
    integrate(&s).unwrap()
}

#[test]
fn toy_field_is_invariant() {
    let act = so2_toy().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(act.invariance_deviation(1000, 2.0, &mut rng).unwrap() < 1e-12);
}

#[test]
fn toy_gauge_fix_is_orthogonal() {
    let act = so2_toy().unwrap();
    let x = [1.0, 0.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let rho = rng.gen_range(0.7..1.3);
        let y = [rho * a.cos(), rho * a.sin(), rng.gen_range(-0.3..0.3)];
        let fix = gauge_fix_point(&act, &x, &y, &GaugeFixOptions::default()).unwrap();
        assert!(fix.residual < 1e-10);
        let rho_x = act.rho(&x);
        for j in 0..act.algebra_dim() {
            assert!(dot(&rho_x.column(j), &sub(&fix.fixed, &x)).abs() < 1e-10);
        }
        assert!((norm(&fix.fixed) - norm(&y)).abs() < 1e-12);
    }
}

#[test]
fn toy_gauge_fix_outside_basin_fails() {
    let act = so2_toy().unwrap();
    let r = gauge_fix_point(&act, &[1.0, 0.0, 0.0], &[-5.0, 0.0, 0.0], &GaugeFixOptions::default());
    assert!(r.is_err());
}

#[test]
fn gauge_fixed_secant_matches_quotient_and_ignores_wobble() {
    let act = so2_toy().unwrap();
    let a: f64 = 0.7;
    let traj = toy_flow(&act, vec![1.3 * a.cos(), 1.3 * a.sin(), 0.2]);
    let x = [1.0, 0.0, 0.0];
    let opts = GaugeFixOptions::default();
    let fixed = gauge_fixed_secant(&act, &traj, &x, &opts).unwrap();

    let quotient: Vec<Vec<f64>> = traj.samples.iter().map(|s| so2_quotient(&s.u)).collect();
    let qt = secant_trace_with(&quotient, dot).unwrap();
    for (p, q) in fixed.trace.points.iter().zip(&qt.points) {
        assert!((p[0] - q[0]).abs() < 1e-6 && p[1].abs() < 1e-6 && (p[2] - q[1]).abs() < 1e-6);
    }
    assert!((fixed.trace.total_length() - qt.total_length()).abs() < 1e-6);

    let wobbled: Vec<Vec<f64>> = traj
        .samples
        .iter()
        .map(|s| act.act(&[0.3 * (7.0 * s.s).sin()], &s.u))
        .collect();
    let w = gauge_fixed_secant_points(&act, &wobbled, &x, &opts).unwrap();
    for (p, q) in w.trace.points.iter().zip(&fixed.trace.points) {
        assert!(norm(&sub(p, q)) < 1e-8);
    }
}

#[test]
fn radial_invariant_field_needs_no_fixing() {
    let f = AnalyticField::parse("(x1^2 + x2^2 + x3^2)^2", 3).unwrap();
    let act = GroupAction::new(vec![plane_rotation(3, 0, 1)], f).unwrap();
    let mut s = FlowSpec::new(act.field().clone(), vec![0.3, 0.4, 0.5]);
    s.grad_floor = 1e-300;
    let traj = integrate(&s).unwrap();
    let fixed = gauge_fixed_secant(&act, &traj, &[0.0; 3], &GaugeFixOptions::default()).unwrap();
    let plain = secant_trace(&traj).unwrap();
    assert_eq!(fixed.trace.points, plain.points);
}

#[test]
fn wilson_action_is_gauge_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = LatticeGauge::random_near_identity(&DIMS, 0.8, &mut rng).unwrap();
    let s0 = cfg.wilson_action();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = random_gauge(cfg.sites(), &mut rng);
        worst = worst.max((cfg.gauge_transform(&g).unwrap().wilson_action() - s0).abs());
    }
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn action_is_nonnegative_and_links_stay_unit() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = LatticeGauge::random_near_identity(&DIMS, 0.3, &mut rng).unwrap();
    let opts = LatticeFlowOptions {
        dt: 0.05,
        steps: 400,
        record_every: 20,
        ..Default::default()
    };
    let flow = lattice_flow(&cfg, &opts).unwrap();
    assert_eq!(flow.action_increases, 0);
    let a = flow.actions();
    assert!(a.windows(2).all(|w| w[1] < w[0]));
    assert!(a.iter().all(|s| *s >= 0.0));
    assert!(flow.frames.iter().all(|f| f.config.max_unit_deviation() < 1e-12));
}

#[test]
fn heun_flow_satisfies_dissipation_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = LatticeGauge::random_near_identity(&DIMS, 0.2, &mut rng).unwrap();
    let opts = LatticeFlowOptions {
        dt: 1e-3,
        steps: 500,
        ..Default::default()
    };
    let flow = lattice_flow(&cfg, &opts).unwrap();
    assert!(flow.max_dissipation_defect_trapezoid < 1e-3);
    // The explicit Euler step is only first-order consistent.
    let euler = lattice_flow(
        &cfg,
        &LatticeFlowOptions {
            scheme: LatticeScheme::Euler,
            ..opts
        },
    )
    .unwrap();
    assert!(euler.max_dissipation_defect > flow.max_dissipation_defect_trapezoid);
}

#[test]
fn gauge_fix_does_not_increase_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let reference = LatticeGauge::random_near_identity(&DIMS, 0.3, &mut rng).unwrap();
    for _ in 0..5 {
        let links: Vec<Quat> = reference
            .links()
            .iter()
            .map(|v| Quat::random_near_identity(0.2, &mut rng).mul(v))
            .collect();
        let cfg = LatticeGauge::from_links(&DIMS, links).unwrap();
        let (_, info) = lattice_gauge_fix(&cfg, &reference, &LatticeGaugeFixOptions::default()).unwrap();
        assert!(info.distance_after <= info.distance_before);
        assert!(info.residual < 1e-10);
    }
    let (fixed, info) = lattice_gauge_fix(&reference, &reference, &LatticeGaugeFixOptions::default()).unwrap();
    assert!(info.residual < 1e-15);
    assert!(info.gauge.iter().all(|g| *g == Quat::IDENTITY));
    assert!(fixed.distance(&reference).unwrap() < 1e-15);
}

#[test]
fn scaled_perturbation_has_constant_secant() {
    let reference = LatticeGauge::identity(&DIMS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a0: Vec<[f64; 3]> = (0..reference.links().len())
        .map(|_| [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)])
        .collect();
    let configs: Vec<LatticeGauge> = (0..30)
        .map(|k| {
            let t = (-0.5 * k as f64).exp();
            let links = a0.iter().map(|v| Quat::exp([t * v[0], t * v[1], t * v[2]])).collect();
            LatticeGauge::from_links(&DIMS, links).unwrap()
        })
        .collect();
    let sec = discrete_h1_secant(&configs, &reference, false, &LatticeGaugeFixOptions::default()).unwrap();
    assert!(sec.trace.total_length() < 1e-12, "{}", sec.trace.total_length());
}

#[test]
fn flipped_link_log_fails() {
    let reference = LatticeGauge::identity(&DIMS).unwrap();
    let mut cfg = reference.clone();
    cfg.set_link(0, 0, Quat::new(-1.0, 0.0, 0.0, 0.0));
    let r = discrete_h1_secant(&[cfg.clone(), cfg], &reference, false, &LatticeGaugeFixOptions::default());
    assert!(r.is_err());
}

proptest! {
    #[test]
    fn h1_norm_scales(lambda in -10.0f64..10.0, seed in 0u64..1000) {
        let lat = LatticeGauge::identity(&DIMS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..3 * lat.links().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let la: Vec<f64> = a.iter().map(|v| lambda * v).collect();
        let n = h1_norm(&lat, &a);
        prop_assert!(n > 0.0);
        prop_assert!((h1_norm(&lat, &la) - lambda.abs() * n).abs() <= 1e-12 * n.max(1.0) * lambda.abs().max(1.0));
    }

    #[test]
    fn gauge_transform_preserves_action(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = LatticeGauge::random_near_identity(&[2, 3, 2], 1.0, &mut rng).unwrap();
        let g = random_gauge(cfg.sites(), &mut rng);
        let moved = cfg.gauge_transform(&g).unwrap();
        prop_assert!((moved.wilson_action() - cfg.wilson_action()).abs() < 1e-12);
    }

    #[test]
    fn quaternion_exp_log_roundtrip(x in -1.5f64..1.5, y in -1.5f64..1.5, z in -1.5f64..1.5) {
        let l = Quat::exp([x, y, z]).log(1e-12).unwrap();
        prop_assert!((l[0] - x).abs() < 1e-12 && (l[1] - y).abs() < 1e-12 && (l[2] - z).abs() < 1e-12);
    }
}
