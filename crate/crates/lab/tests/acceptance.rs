//! Acceptance suite: the twelve required properties, checked on the
//! built-in catalog at their stated tolerances. Runs without the libtest
//! harness; each check prints one `criterion N ... PASS|FAIL` line followed
//! by its evidence, and any failure makes the target exit non-zero.

use std::panic;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use secantlab::config::{Config, FlowOverrides, Kind, Meta, Scenario, WepsOverrides};
use secantlab::report::{AnalysisResult, RunReport, ScenarioReport, Status};
use secantlab::{catalog_config, run, RunOptions};

struct CatalogRun {
    report: RunReport,
    seconds: f64,
}

fn catalog_run() -> &'static CatalogRun {
    static RUN: OnceLock<CatalogRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t0 = Instant::now();
        let report = run(&catalog_config(), &RunOptions::default()).expect("catalog run");
        CatalogRun {
            report,
            seconds: t0.elapsed().as_secs_f64(),
        }
    })
}

fn flow_scenarios() -> Vec<&'static ScenarioReport> {
    catalog_run()
        .report
        .scenarios
        .iter()
        .filter(|s| s.kind == Kind::Flow)
        .collect()
}

fn scenario(name: &str) -> &'static ScenarioReport {
    catalog_run().report.scenario(name).unwrap_or_else(|| panic!("no scenario {name}"))
}

fn meta(name: &str) -> Meta {
    catalog_config()
        .scenarios
        .into_iter()
        .find(|s| s.name == name)
        .map(|s| s.meta)
        .unwrap()
}

fn analysis<'a>(sc: &'a ScenarioReport, name: &str) -> &'a AnalysisResult {
    sc.analysis(name)
        .unwrap_or_else(|| panic!("{} has no {name} analysis", sc.name))
}

fn m(a: &AnalysisResult, key: &str) -> f64 {
    a.metrics
        .get(key)
        .unwrap_or_else(|| panic!("{} lacks metric {key}: {:?}", a.name, a.note))
        .0
}

/// Collects per-scenario verdicts and prints the criterion line.
struct Verdict {
    n: u32,
    title: &'static str,
    lines: Vec<(bool, String)>,
}

impl Verdict {
    fn new(n: u32, title: &'static str) -> Self {
        Verdict {
            n,
            title,
            lines: vec![],
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.lines.push((ok, line));
    }

    fn finish(self) {
        let ok = !self.lines.is_empty() && self.lines.iter().all(|l| l.0);
        println!("criterion {:>2} {:<34} {}", self.n, self.title, if ok { "PASS" } else { "FAIL" });
        for (good, line) in &self.lines {
            println!("    [{}] {line}", if *good { "ok" } else { "XX" });
        }
        assert!(ok, "criterion {} ({}) failed", self.n, self.title);
    }
}

fn c01_secant_has_finite_length() {
    let mut v = Verdict::new(1, "secant finite length");
    for sc in flow_scenarios() {
        let a = analysis(sc, "secant");
        let tails: Vec<f64> = (0..3).map(|j| m(a, &format!("tail_{j}"))).collect();
        let decays = (0..2).all(|j| tails[j] <= 1e-12 || tails[j] < 0.9 * tails[j + 1]);
        let gap = m(a, "cauchy_gap");
        v.check(
            decays && gap < 1e-3,
            format!("{:<20} tails {:.3e} {:.3e} {:.3e}  cauchy_gap {gap:.3e}", sc.name, tails[0], tails[1], tails[2]),
        );
    }
    v.finish();
}

fn c02_euler_identity_is_exact() {
    let mut v = Verdict::new(2, "Euler exactness");
    for sc in flow_scenarios() {
        let Some(deg) = meta(&sc.name).degree else { continue };
        let a = analysis(sc, "euler");
        let dev = m(a, "max_deviation");
        v.check(
            dev < 1e-10 && m(a, "samples") > 0.0,
            format!("{:<20} d = {deg}  max |rE_r/E - d| = {dev:.3e}", sc.name),
        );
    }
    v.finish();
}

fn c03_lojasiewicz_exponent_matches_closed_form() {
    let mut v = Verdict::new(3, "Lojasiewicz exponent");
    // ‖ℰ′‖ = d r^{d-1} = d ℰ^{(d-1)/d} for ℰ = r^d.
    for (name, d, tol) in [("quadratic", 2.0, 0.01), ("quartic_radial", 4.0, 0.02)] {
        let rho = (d - 1.0) / d;
        let got = m(analysis(scenario(name), "lojasiewicz"), "rho_hat");
        v.check((got - rho).abs() <= tol, format!("{name:<20} rho_hat {got:.5} vs {rho} ± {tol}"));
    }
    v.finish();
}

fn c04_exponent_bound_holds() {
    let mut v = Verdict::new(4, "exponent bound");
    for sc in flow_scenarios() {
        let a = analysis(sc, "exponent_bound");
        let (l, rho) = (m(a, "l_hat"), m(a, "rho_hat"));
        let bound = 1.0 / (1.0 - rho);
        v.check(l <= bound + 0.05, format!("{:<20} l_hat {l:.5} <= {bound:.5} + 0.05", sc.name));
    }
    let a = analysis(scenario("quartic_radial"), "exponent_bound");
    let (l, rho) = (m(a, "l_hat"), m(a, "rho_hat"));
    let bound = 1.0 / (1.0 - rho);
    let rel = (l - bound).abs() / bound;
    v.check(
        rel <= 0.02 && (bound - 4.0).abs() <= 0.08,
        format!("quartic_radial equality: l_hat {l:.5}, bound {bound:.5}, gap {rel:.2e}"),
    );
    v.finish();
}

fn transition_scenario(name: String, start: [f64; 2], rel_tol: f64, r_floor: Option<f64>) -> Scenario {
    Scenario {
        name,
        kind: Kind::Flow,
        field: Some("x1^2 + x2^4".into()),
        start: Some(start.to_vec()),
        x_inf: None,
        lattice: None,
        flow: FlowOverrides {
            grad_floor: Some(1e-300),
            method: Some("rosenbrock".into()),
            rel_tol: Some(rel_tol),
            abs_tol: Some(0.0),
            r_floor,
            ..FlowOverrides::default()
        },
        weps: WepsOverrides::default(),
        meta: Meta {
            l: Some(4.0),
            exponents: vec![2.0, 4.0],
            ..Meta::default()
        },
        analyses: vec!["char_exponent".into()],
        advisory: vec![],
        seed: None,
    }
}

fn c05_characteristic_exponent_from_generic_starts() {
    let mut v = Verdict::new(5, "characteristic exponent selection");
    // Starts off both axes, all around the circle.
    let mut scenarios: Vec<Scenario> = (0..8)
        .map(|k| {
            let a = 0.3 + 0.77 * k as f64;
            transition_scenario(format!("start_{k}"), [0.9 * a.cos(), 0.9 * a.sin()], 1e-8, None)
        })
        .collect();
    // Oracle: much tighter tolerance and two more decades.
    scenarios.push(transition_scenario("oracle".into(), [0.6, 0.8], 1e-12, Some(1e-8)));
    let rep = run(&Config { seed: 0, scenarios }, &RunOptions::default()).unwrap();
    let oracle = m(analysis(rep.scenario("oracle").unwrap(), "char_exponent"), "l_hat");
    v.check((oracle - 4.0).abs() <= 0.05, format!("oracle run l_hat {oracle:.6}"));
    for sc in rep.scenarios.iter().filter(|s| s.name != "oracle") {
        let a = analysis(sc, "char_exponent");
        let l = m(a, "l_hat");
        let selected = a.status == Status::Pass;
        v.check(
            (l - 4.0).abs() <= 0.05 && (l - oracle).abs() <= 0.05 && selected,
            format!(
                "{:<10} l_hat {l:.6}  W_4 in all {} decades below 1e-2: {selected} {}",
                sc.name,
                m(a, "selection_decades"),
                a.note.as_deref().unwrap_or("")
            ),
        );
    }
    v.finish();
}

fn c06_e_monitor_is_monotone_with_positive_limit() {
    let mut v = Verdict::new(6, "E-monitor");
    for sc in flow_scenarios() {
        let a = analysis(sc, "e_monitor");
        let (viol, a0, fl) = (m(a, "monotone_violations"), m(a, "a0_hat"), m(a, "a0_fluctuation"));
        v.check(
            viol == 0.0 && a0 > 0.0 && fl < 1e-3,
            format!("{:<20} violations {viol}  a0 {a0:.6}  fluctuation {fl:.2e}", sc.name),
        );
    }
    // x1² + 4x2² leaves along the x1 axis, where ℰ/r² = 1.
    let a0 = m(analysis(scenario("anisotropic"), "e_monitor"), "a0_hat");
    v.check((a0 - 1.0).abs() <= 0.01, format!("anisotropic a0 {a0:.6} vs 1 ± 0.01"));
    v.finish();
}

fn c07_sigma_over_r_tends_to_one() {
    let mut v = Verdict::new(7, "sigma/r -> 1");
    for sc in flow_scenarios() {
        let a = analysis(sc, "sigma_ratio");
        let dev = m(a, "max_deviation");
        let r_max = m(a, "r_max");
        if meta(&sc.name).quadratic {
            v.check(
                r_max <= 1e-3 && dev < 0.01,
                format!("{:<20} quadratic   |sigma/r - 1| {dev:.2e} for r <= {r_max:.0e}", sc.name),
            );
        } else {
            let r_end = sc.flow.as_ref().unwrap().final_r.0;
            v.check(
                r_max <= 10.0 * r_end * (1.0 + 1e-12) && dev < 0.05,
                format!("{:<20} degenerate  |sigma/r - 1| {dev:.2e} over the final decade", sc.name),
            );
        }
    }
    v.finish();
}

fn c08_reduction_is_compatible() {
    let mut v = Verdict::new(8, "reduction compatibility");
    for name in ["degenerate_kernel", "cubic_coupling"] {
        let a = analysis(scenario(name), "reduction");
        let (p1, p2, nd) = (m(a, "value_order"), m(a, "radial_order"), m(a, "norm_distortion_order"));
        v.check(
            p1 >= 2.9 && p2 >= 1.9 && nd >= 2.9,
            format!("{name:<20} p1 {p1:.3}  p2 {p2:.3}  norm distortion {nd:.3}"),
        );
    }
    v.finish();
}

fn c09_bochnak_lojasiewicz_constant() {
    let mut v = Verdict::new(9, "Bochnak-Lojasiewicz");
    for sc in flow_scenarios() {
        let a = analysis(sc, "bochnak");
        match meta(&sc.name).degree {
            Some(d) => {
                let c = m(a, "c_bl");
                v.check(c >= d - 0.05, format!("{:<20} c_bl {c:.5} >= {d} - 0.05", sc.name));
            }
            None => {
                let c = m(a, "c_bl_tail");
                v.check(c > 0.5, format!("{:<20} final two decades c_bl {c:.5} > 0.5", sc.name));
            }
        }
    }
    v.finish();
}

fn c10_gauge_toy() {
    let mut v = Verdict::new(10, "gauge toy");
    let a = analysis(scenario("so2_toy"), "gauge_fix");
    let (res, wob, inv) = (m(a, "max_residual"), m(a, "wobble_difference"), m(a, "invariance_deviation"));
    v.check(res < 1e-10, format!("gauge-fix residual {res:.2e}"));
    v.check(wob < 1e-8, format!("wobbled vs unwobbled secant {wob:.2e}"));
    v.check(inv < 1e-12, format!("invariance deviation {inv:.2e}"));
    v.finish();
}

fn c11_lattice_flow() {
    let mut v = Verdict::new(11, "SU(2) lattice flow");
    let sc = scenario("su2_lattice");
    let a = analysis(sc, "lattice_flow");
    v.check(
        sc.seed == 42 && m(a, "dissipation_action_increases") == 0.0 && m(a, "tail_action_increases") == 0.0,
        format!(
            "seed {} action strictly decreasing: {:.4} -> {:.3e}",
            sc.seed,
            m(a, "action_start"),
            m(a, "action_end")
        ),
    );
    let defect = m(a, "dissipation_defect");
    v.check(defect < 1e-3, format!("dissipation identity at dt = 1e-3: relative defect {defect:.2e}"));
    let inv = m(a, "gauge_invariance");
    v.check(inv < 1e-12, format!("gauge invariance of the action {inv:.2e}"));
    let decades = m(a, "secant_decades") as usize;
    let tails: Vec<f64> = (0..decades.min(3)).map(|j| m(a, &format!("tail_{j}"))).collect();
    v.check(
        decades >= 3 && tails.windows(2).all(|w| w[0] < w[1]) && a.status == Status::Pass,
        format!(
            "gauge-fixed H1 secant tails {} over {decades} decades",
            tails.iter().map(|t| format!("{t:.3e}")).collect::<Vec<_>>().join(" ")
        ),
    );
    let secs = sc.wall_clock_ms as f64 / 1e3;
    v.check(secs < 300.0, format!("runtime {secs:.1} s"));
    v.finish();
}

/// `min ‖ℰ′‖/ℰ^ρ` on the unit circle; homogeneity makes it the global
/// constant.
fn sampled_loj_constant(grad: impl Fn(f64, f64) -> (f64, f64, f64), rho: f64) -> f64 {
    (0..200_000)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 200_000.0;
            let (e, gx, gy) = grad(t.cos(), t.sin());
            gx.hypot(gy) / e.powf(rho)
        })
        .fold(f64::INFINITY, f64::min)
}

fn c12_remaining_length_bound() {
    let mut v = Verdict::new(12, "trajectory length bound");
    let c2 = sampled_loj_constant(|x, y| (x * x + y * y, 2.0 * x, 2.0 * y), 0.5);
    let c4 = sampled_loj_constant(
        |x, y| {
            let s = x * x + y * y;
            (s * s, 4.0 * x * s, 4.0 * y * s)
        },
        0.75,
    );
    v.check(
        (c2 - meta("quadratic").loj_c.unwrap()).abs() < 1e-9 && (c4 - meta("quartic_radial").loj_c.unwrap()).abs() < 1e-9,
        format!("catalog constants match sampled oracles: c = {c2:.6}, {c4:.6}"),
    );
    let s = m(analysis(scenario("quadratic"), "length_bound"), "worst_slack");
    v.check((0.0..1e-6).contains(&s), format!("quadratic       worst slack {s:.3e} in [0, 1e-6)"));
    let s = m(analysis(scenario("quartic_radial"), "length_bound"), "worst_slack");
    v.check(s >= 0.0, format!("quartic_radial  worst slack {s:.3e} >= 0"));
    v.finish();
}

fn catalog_run_summary() {
    let run = catalog_run();
    println!("catalog: {:.1} s", run.seconds);
    print!("{}", run.report.render());
    assert_eq!(run.report.summary.scenario_errors, 0);
    assert!(run.report.scenarios.iter().all(|s| s.analyses.len()
        == catalog_config().scenarios.iter().find(|c| c.name == s.name).unwrap().analyses.len()));
}

const CHECKS: &[(&str, fn())] = &[
    ("c01_secant_has_finite_length", c01_secant_has_finite_length),
    ("c02_euler_identity_is_exact", c02_euler_identity_is_exact),
    ("c03_lojasiewicz_exponent_matches_closed_form", c03_lojasiewicz_exponent_matches_closed_form),
    ("c04_exponent_bound_holds", c04_exponent_bound_holds),
    ("c05_characteristic_exponent_from_generic_starts", c05_characteristic_exponent_from_generic_starts),
    ("c06_e_monitor_is_monotone_with_positive_limit", c06_e_monitor_is_monotone_with_positive_limit),
    ("c07_sigma_over_r_tends_to_one", c07_sigma_over_r_tends_to_one),
    ("c08_reduction_is_compatible", c08_reduction_is_compatible),
    ("c09_bochnak_lojasiewicz_constant", c09_bochnak_lojasiewicz_constant),
    ("c10_gauge_toy", c10_gauge_toy),
    ("c11_lattice_flow", c11_lattice_flow),
    ("c12_remaining_length_bound", c12_remaining_length_bound),
    ("catalog_run_summary", catalog_run_summary),
];

// Own harness, so every verdict line is printed, passing or not.
// Positional arguments filter by substring; flags are ignored.
fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = vec![];
    let mut ran = 0;
    for (name, check) in CHECKS {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        if panic::catch_unwind(check).is_err() {
            failed.push(*name);
        }
    }
    println!("\nacceptance: {} run, {} passed, {} failed", ran, ran - failed.len(), failed.len());
    for name in &failed {
        println!("    FAILED {name}");
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
