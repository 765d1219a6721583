use secantlab_core::asymptotics::*;
use secantlab_core::flow::*;
use secantlab_core::AnalyticField;

fn run(src: &str, start: &[f64]) -> Trajectory {
    let mut s = FlowSpec::new(AnalyticField::parse(src, 2).unwrap(), start.to_vec());
    s.grad_floor = 1e-300;
    integrate(&s).unwrap()
}

#[test]
fn quartic_radial_field_has_three_quarter_exponent() {
    let t = run("(x1^2 + x2^2)^2", &[0.6, 0.8]);
    let loj = estimate_loj_exponent(&t).unwrap();
    assert!((loj.rho_hat - 0.75).abs() < 0.02, "{}", loj.rho_hat);
    let ch = estimate_char_exponent(&t, &WepsParams::default()).unwrap();
    assert_eq!(ch.rational, (4, 1));
    let rep = exponent_report(&t, &WepsParams::default()).unwrap();
    assert!(rep.l_hat <= 1.0 / (1.0 - rep.rho_hat) + 0.05);
}

#[test]
fn cone_energy_floor_is_positive() {
    let p = WepsParams::default();
    for (src, start, rho) in [
        ("x1^2 + 4*x2^2", [1.0, 1.0], 0.5),
        ("x1^4 + x2^4", [0.9, 0.3], 0.75),
    ] {
        let t = run(src, &start);
        let c = cone_energy_floor(&t, rho, &p).unwrap();
        assert!(c > 0.0, "{src}: {c}");
    }
}

#[test]
fn e_decreases_outside_lower_components() {
    let p = WepsParams::default();
    let t = run("x1^4 + x2^4", &[0.9, 0.3]);
    let m = monitor_e(&t, 4.0, &p, &[4.0], 1e-2).unwrap();
    assert_eq!(m.decrease_violations, 0);
    assert_eq!(m.sign_mismatches, 0);
    assert_eq!(m.monotone_violations, 0);
}

#[test]
fn selection_finds_one_component() {
    let p = WepsParams::default();
    let t = run("x1^2 + 4*x2^2", &[1.0, 1.0]);
    let sel = exponent_selection(&t, &p, &[2.0, 4.0], 1e-2).unwrap();
    assert_eq!(sel.candidates, 1);
    assert_eq!(sel.selected, Some(2.0));
    assert!(sel.e_min > 0.0 && sel.e_max.is_finite());
}

#[test]
fn tail_decays_on_nondegenerate_field() {
    let t = run("x1^2 + 4*x2^2", &[1.0, 1.0]);
    let sec = secant_trace(&t).unwrap();
    assert!(sec.tail_decays(3, 0.9, 1e-12), "{:?}", sec.tail_lengths);
    assert!(sec.cauchy_gap < 1e-3);
}

#[test]
fn decade_indexing() {
    assert_eq!(decade_of(1.0, 1.0), 0);
    assert_eq!(decade_of(9.99, 1.0), 0);
    assert_eq!(decade_of(10.0, 1.0), 1);
    assert_eq!(decade_of(250.0, 1.0), 2);
}
