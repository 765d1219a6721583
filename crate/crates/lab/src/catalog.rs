//! Built-in scenarios.

use crate::config::{Config, FlowOverrides, Kind, LatticeSpec, Meta, Scenario, WepsOverrides};

pub const LATTICE_SEED: u64 = 42;

const FLOW_ANALYSES: &[&str] = &[
    "secant",
    "lojasiewicz",
    "exponent_bound",
    "char_exponent",
    "e_monitor",
    "sigma_ratio",
    "bochnak",
];

fn flow(name: &str, field: &str, start: &[f64], meta: Meta, extra: &[&str]) -> Scenario {
    let mut analyses: Vec<String> = FLOW_ANALYSES.iter().map(|s| s.to_string()).collect();
    analyses.extend(extra.iter().map(|s| s.to_string()));
    Scenario {
        name: name.into(),
        kind: Kind::Flow,
        field: Some(field.into()),
        start: Some(start.to_vec()),
        x_inf: None,
        lattice: None,
        flow: FlowOverrides {
            grad_floor: Some(1e-300),
            ..FlowOverrides::default()
        },
        weps: WepsOverrides::default(),
        meta,
        analyses,
        advisory: vec![],
        seed: None,
    }
}

fn stiff(mut sc: Scenario) -> Scenario {
    sc.flow.method = Some("rosenbrock".into());
    sc.flow.rel_tol = Some(1e-8);
    sc
}

fn homogeneous(degree: f64, rho: f64, c: f64, a0: f64) -> Meta {
    Meta {
        degree: Some(degree),
        rho: Some(rho),
        rho_tol: Some(if degree == 2.0 { 0.01 } else { 0.02 }),
        loj_c: Some(c),
        l: Some(degree),
        a0: Some(a0),
        quadratic: degree == 2.0,
        ..Meta::default()
    }
}

/// The catalog scenarios, in a fixed order.
pub fn catalog() -> Vec<Scenario> {
    let mut quadratic = homogeneous(2.0, 0.5, 2.0, 1.0);
    quadratic.length_exact = true;
    quadratic.bound_equality = true;
    let mut quartic = homogeneous(4.0, 0.75, 4.0, 1.0);
    quartic.bound_equality = true;
    // Flat direction along x1 with a quadratic normal direction.
    let degenerate = Meta {
        rho: Some(0.75),
        rho_tol: Some(0.02),
        l: Some(4.0),
        exponents: vec![2.0, 4.0],
        a0: Some(1.0),
        ..Meta::default()
    };
    vec![
        flow("quadratic", "x1^2 + x2^2", &[0.6, 0.8], quadratic, &["euler", "length_bound"]),
        flow(
            "anisotropic",
            "x1^2 + 4*x2^2",
            &[1.0, 1.0],
            homogeneous(2.0, 0.5, 2.0, 1.0),
            &["euler", "length_bound"],
        ),
        flow("quartic_radial", "(x1^2 + x2^2)^2", &[0.6, 0.8], quartic, &["euler", "length_bound"]),
        stiff(flow("degenerate_kernel", "x1^4 + x2^2", &[0.8, 0.6], degenerate.clone(), &["reduction"])),
        stiff(flow("exponent_transition", "x1^2 + x2^4", &[0.5, 0.85], degenerate.clone(), &[])),
        // The flow aligns with the diagonal, where ℰ/r⁴ = 1/2 and ‖ℰ′‖/ℰ^¾ is
        // smallest.
        flow(
            "quartic_axes",
            "x1^4 + x2^4",
            &[0.9, 0.3],
            homogeneous(4.0, 0.75, 4.0 * 2.0f64.powf(-0.25), 0.5),
            &["euler", "length_bound"],
        ),
        // Angular part 1 + cos⁴θ, minimal on the x2 axis.
        flow(
            "quartic_nonradial",
            "(x1^2 + x2^2)^2 + x1^4",
            &[0.6, 0.8],
            homogeneous(4.0, 0.75, 4.0, 1.0),
            &["euler", "length_bound"],
        ),
        stiff(flow("cubic_coupling", "x1^4 + x2^2 + x2^3", &[0.8, 0.3], degenerate, &["reduction"])),
        Scenario {
            name: "so2_toy".into(),
            kind: Kind::GaugeToy,
            field: None,
            start: None,
            x_inf: None,
            lattice: None,
            flow: FlowOverrides::default(),
            weps: WepsOverrides::default(),
            meta: Meta::default(),
            analyses: vec!["gauge_fix".into()],
            advisory: vec![],
            seed: Some(7),
        },
        Scenario {
            name: "su2_lattice".into(),
            kind: Kind::Lattice,
            field: None,
            start: None,
            x_inf: None,
            lattice: Some(LatticeSpec::default()),
            flow: FlowOverrides::default(),
            weps: WepsOverrides::default(),
            meta: Meta::default(),
            analyses: vec!["lattice_flow".into()],
            advisory: vec![],
            seed: Some(LATTICE_SEED),
        },
    ]
}

pub fn catalog_config() -> Config {
    Config {
        seed: 0,
        scenarios: catalog(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_validates() {
        let cfg = catalog_config();
        assert!(cfg.scenarios.len() >= 9);
        cfg.validate().unwrap();
        let text = cfg.to_json();
        assert_eq!(Config::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn homogeneous_scenarios_declare_degree() {
        for sc in catalog() {
            if sc.analyses.iter().any(|a| a == "euler") {
                assert!(sc.meta.degree.is_some(), "{}", sc.name);
            }
        }
    }

    #[test]
    fn lattice_declares_dims_and_seed() {
        let sc = catalog().into_iter().find(|s| s.kind == Kind::Lattice).unwrap();
        assert_eq!(sc.lattice.unwrap().dims, vec![2, 2, 2, 2]);
        assert_eq!(sc.seed, Some(LATTICE_SEED));
    }

    #[test]
    fn quartic_axes_constants_match_circle_samples() {
        // On the unit circle: min of ‖ℰ′‖/ℰ^¾ and the value at the diagonal,
        // where the flow comes in.
        let meta = catalog().into_iter().find(|s| s.name == "quartic_axes").unwrap().meta;
        let c = (0..=200_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::FRAC_PI_2 / 200_000.0;
                let (x, y) = (t.cos(), t.sin());
                4.0 * (x.powi(6) + y.powi(6)).sqrt() / (x.powi(4) + y.powi(4)).powf(0.75)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((c - meta.loj_c.unwrap()).abs() < 1e-9, "{c}");
        let d = std::f64::consts::FRAC_1_SQRT_2;
        assert!((2.0 * d.powi(4) - meta.a0.unwrap()).abs() < 1e-12);
    }
}
