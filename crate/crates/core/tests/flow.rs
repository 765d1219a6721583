use secantlab_core::asymptotics::secant_trace;
use secantlab_core::flow::*;
use secantlab_core::linalg::{norm, sub};
use secantlab_core::AnalyticField;

fn spec(src: &str, start: &[f64]) -> FlowSpec {
    let mut s = FlowSpec::new(AnalyticField::parse(src, 2).unwrap(), start.to_vec());
    s.grad_floor = 1e-300;
    s
}

#[test]
fn unit_speed_and_monotone_energy() {
    for (src, start) in [
        ("x1^2 + x2^2", [0.6, 0.8]),
        ("x1^2 + 4*x2^2", [1.0, 1.0]),
        ("(x1^2 + x2^2)^2", [0.6, 0.8]),
        ("x1^4 + x2^4", [0.9, 0.3]),
    ] {
        let t = integrate(&spec(src, &start)).unwrap();
        assert!(t.converged(), "{src}: {:?}", t.stop_reason);
        assert!(t.max_speed_error < 1e-9, "{src}: {:e}", t.max_speed_error);
        assert_eq!(t.energy_increases, 0, "{src}");
        let v = t.values();
        assert!(v.windows(2).all(|w| w[1] <= w[0]), "{src}");
    }
}

#[test]
fn stiff_degenerate_fields_with_rosenbrock() {
    for (src, start) in [("x1^4 + x2^2", [0.8, 0.6]), ("x1^2 + x2^4", [0.6, 0.8])] {
        let mut s = spec(src, &start);
        s.method = Method::Rosenbrock;
        s.rel_tol = 1e-8;
        let t = integrate(&s).unwrap();
        assert_eq!(t.stop_reason, StopReason::RFloor, "{src}");
        assert_eq!(t.energy_increases, 0, "{src}");
    }
}

/// The anisotropic quadratic against a run with a ten times tighter
/// tolerance.
#[test]
fn self_convergence() {
    let mut coarse = spec("x1^2 + 4*x2^2", &[1.0, 1.0]);
    coarse.rel_tol = 1e-9;
    let mut fine = coarse.clone();
    fine.rel_tol = 1e-10;
    let a = integrate(&coarse).unwrap();
    let b = integrate(&fine).unwrap();
    let la = secant_trace(&a).unwrap().total_length();
    let lb = secant_trace(&b).unwrap().total_length();
    assert!((la - lb).abs() < 1e-6, "{la} vs {lb}");
    // Both stop at r_floor; compare directions there.
    let da: Vec<f64> = a.last().u.iter().map(|x| x / a.last().r()).collect();
    let db: Vec<f64> = b.last().u.iter().map(|x| x / b.last().r()).collect();
    assert!(norm(&sub(&da, &db)) < 1e-6);
    // Arclength to r_floor differs by the tolerance only.
    let sa = a.last().s - (a.samples[0].r() - a.last().r());
    let sb = b.last().s - (b.samples[0].r() - b.last().r());
    assert!((sa - sb).abs() < 10.0 * coarse.rel_tol * 10.0, "{sa} vs {sb}");
}

#[test]
fn sigma_accumulates_chords() {
    let t = integrate(&spec("x1^2 + x2^2", &[0.6, 0.8])).unwrap();
    assert_eq!(t.sigma.len(), t.samples.len());
    assert!(t.sigma.windows(2).all(|w| w[1] >= w[0]));
    // Straight radial path: σ equals the distance travelled.
    let travelled = t.samples[0].r() - t.last().r();
    assert!((t.sigma.last().unwrap() - travelled).abs() < 1e-9);
}

#[test]
fn time_mode_decays_exponentially() {
    let mut s = spec("x1^2 + x2^2", &[0.6, 0.8]);
    s.parameterization = Parameterization::Time;
    s.grad_floor = 1e-8;
    let t = integrate(&s).unwrap();
    assert_eq!(t.stop_reason, StopReason::GradFloor);
    for smp in &t.samples {
        // u(t) = e^{−2t} u₀
        let expect = (-2.0 * smp.s).exp();
        assert!((smp.r() - expect).abs() < 1e-7 * expect.max(1e-3), "{} {}", smp.r(), expect);
    }
}

#[test]
fn invalid_spec_is_rejected() {
    let mut s = spec("x1^2 + x2^2", &[0.6, 0.8]);
    s.rel_tol = -1.0;
    assert!(integrate(&s).is_err());
    let s = spec("x1^2 + x2^2", &[0.0, 0.0]);
    assert!(integrate(&s).is_err());
}
