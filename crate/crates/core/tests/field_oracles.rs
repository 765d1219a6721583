use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use secantlab_core::field::radial_angular;
use secantlab_core::linalg::{dot, norm};
use secantlab_core::AnalyticField;

const FIELDS: &[&str] = &[
    "x1^2 + x2^2",
    "x1^2 + 4*x2^2",
    "(x1^2 + x2^2)^2",
    "x1^4 + x2^2",
    "x1^2 + x2^4",
    "x1^4 + x2^4",
    "(x1^2 + x2^2)^2 + x1^4",
    "x1^4 + x2^2 + x2^3",
    "x1^4 + (x2 - x1^2)^2",
    "exp(x1) - 1 - x1 + sin(x2)^2",
];

const HOMOGENEOUS: &[(&str, f64)] = &[
    ("x1^2 + x2^2", 2.0),
    ("x1^2 + 4*x2^2", 2.0),
    ("(x1^2 + x2^2)^2", 4.0),
    ("x1^4 + x2^4", 4.0),
    ("(x1^2 + x2^2)^2 + x1^4", 4.0),
    ("x1^2*x2 - x2^3/3", 3.0),
];

fn fd_gradient(f: &AnalyticField, u: &[f64]) -> Vec<f64> {
    let h = 1e-5 * (1.0 + norm(u));
    (0..u.len())
        .map(|i| {
            let mut p = u.to_vec();
            let mut m = u.to_vec();
            p[i] += h;
            m[i] -= h;
            (f.value(&p).unwrap() - f.value(&m).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(1.0)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for src in FIELDS {
        let f = AnalyticField::parse(src, 2).unwrap();
        for _ in 0..100 {
            let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = f.gradient(&u).unwrap();
            let err = rel_err(&fd_gradient(&f, &u), &g);
            assert!(err < 1e-6, "{src} at {u:?}: {err:e}");
        }
    }
}

#[test]
fn hessian_matches_differences_of_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for src in FIELDS {
        let f = AnalyticField::parse(src, 2).unwrap();
        for _ in 0..100 {
            let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let jet = f.eval_jet2(&u).unwrap();
            let h = 1e-5 * (1.0 + norm(&u));
            for j in 0..2 {
                let mut p = u.clone();
                let mut m = u.clone();
                p[j] += h;
                m[j] -= h;
                let gp = f.gradient(&p).unwrap();
                let gm = f.gradient(&m).unwrap();
                let col: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                let exact: Vec<f64> = (0..2).map(|i| jet.hess(i, j)).collect();
                let err = rel_err(&col, &exact);
                assert!(err < 1e-6, "{src} column {j} at {u:?}: {err:e}");
            }
            assert_eq!(jet.hess(0, 1), jet.hess(1, 0));
        }
    }
}

proptest! {
    #[test]
    fn euler_identity_on_homogeneous_fields(x in -2.0f64..2.0, y in -2.0f64..2.0, k in 0usize..6) {
        prop_assume!(x.abs() + y.abs() > 1e-3);
        let (src, d) = HOMOGENEOUS[k];
        let f = AnalyticField::parse(src, 2).unwrap();
        let u = [x, y];
        let jet = f.eval_jet2(&u).unwrap();
        let rs = radial_angular(&jet.gradient, &u).unwrap();
        let lhs = rs.r * rs.e_r - d * jet.value;
        prop_assert!(lhs.abs() < 1e-10 * (1.0 + jet.value.abs()), "{} {:e}", src, lhs);
    }

    #[test]
    fn radial_split_is_orthogonal(x in -2.0f64..2.0, y in -2.0f64..2.0, k in 0usize..10) {
        prop_assume!(x.abs() + y.abs() > 1e-3);
        let f = AnalyticField::parse(FIELDS[k], 2).unwrap();
        let u = [x, y];
        let g = f.gradient(&u).unwrap();
        let rs = radial_angular(&g, &u).unwrap();
        let total = dot(&g, &g);
        let parts = rs.e_r * rs.e_r + dot(&rs.e_theta, &rs.e_theta);
        prop_assert!((total - parts).abs() <= 1e-12 * total.max(f64::MIN_POSITIVE));
        prop_assert!(dot(&rs.e_theta, &u).abs() <= 1e-12 * norm(&g) * norm(&u) + 1e-300);
    }
}

#[test]
fn origin_has_no_radial_split() {
    assert!(radial_angular(&[1.0, 0.0], &[0.0, 0.0]).is_err());
}
