//! Finite-dimensional group-invariant fields and Newton gauge fixing.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::asymptotics::{secant_trace_with, SecantTrace};
use crate::error::{Error, Result};
use crate::field::AnalyticField;
use crate::flow::Trajectory;
use crate::linalg::{dot, expm, norm, solve, sub, sym_eigen, Mat};

/// A compact group acting linearly on ℝⁿ through `exp(Σ c_a J_a)`.
#[derive(Debug, Clone)]
pub struct GroupAction {
    generators: Vec<Mat>,
    field: AnalyticField,
}

/// Generator of rotations in the `(i, j)` coordinate plane of ℝⁿ.
pub fn plane_rotation(n: usize, i: usize, j: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    m[(i, j)] = -1.0;
    m[(j, i)] = 1.0;
    m
}

impl GroupAction {
    pub fn new(generators: Vec<Mat>, field: AnalyticField) -> Result<Self> {
        let n = field.dim();
        if generators.is_empty() {
            return Err(Error::InvalidParameter("at least one generator required".into()));
        }
        for g in &generators {
            if g.rows != n || g.cols != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: g.rows,
                });
            }
            for a in 0..n {
                for b in 0..n {
                    if g[(a, b)] + g[(b, a)] != 0.0 {
                        return Err(Error::InvalidParameter("generators must be antisymmetric".into()));
                    }
                }
            }
        }
        Ok(GroupAction { generators, field })
    }

    pub fn field(&self) -> &AnalyticField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn algebra_dim(&self) -> usize {
        self.generators.len()
    }

    /// `Σ c_a J_a`
    pub fn algebra_matrix(&self, coeffs: &[f64]) -> Mat {
        let n = self.dim();
        let mut m = Mat::zeros(n, n);
        for (c, g) in coeffs.iter().zip(&self.generators) {
            m = m.add(&g.scaled(*c));
        }
        m
    }

    /// `exp(Σ c_a J_a)`
    pub fn group_element(&self, coeffs: &[f64]) -> Mat {
        expm(&self.algebra_matrix(coeffs))
    }

    pub fn act(&self, coeffs: &[f64], y: &[f64]) -> Vec<f64> {
        self.group_element(coeffs).matvec(y)
    }

    /// Infinitesimal action: the `n × m` matrix with columns `J_a x`.
    pub fn rho(&self, x: &[f64]) -> Mat {
        let cols: Vec<Vec<f64>> = self.generators.iter().map(|g| g.matvec(x)).collect();
        Mat::from_columns(self.dim(), &cols)
    }

    /// Largest `|ℰ(exp(tJ_a)u) − ℰ(u)|` over random `u` in the ball of
    /// `radius`, `t ∈ [−π, π]` and generators `a`.
    pub fn invariance_deviation<R: Rng + ?Sized>(&self, trials: usize, radius: f64, rng: &mut R) -> Result<f64> {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let u: Vec<f64> = (0..n).map(|_| radius * rng.gen_range(-1.0..1.0)).collect();
            let a = rng.gen_range(0..self.generators.len());
            let t = rng.gen_range(-core::f64::consts::PI..core::f64::consts::PI);
            let mut coeffs = vec![0.0; self.generators.len()];
            coeffs[a] = t;
            let moved = self.act(&coeffs, &u);
            worst = worst.max((self.field.value(&moved)? - self.field.value(&u)?).abs());
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GaugeFixOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest admissible `‖y − x‖`.
    pub basin_radius: f64,
}

impl Default for GaugeFixOptions {
    fn default() -> Self {
        GaugeFixOptions {
            tol: 1e-13,
            max_iter: 60,
            basin_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaugeFixResult {
    /// Algebra element `𝔤` in generator coordinates; the group element is
    /// `g = exp(−𝔤)`.
    pub algebra: Vec<f64>,
    /// `‖ρ_xᵀ(g·y − x)‖`
    pub residual: f64,
    pub iterations: usize,
    /// `g·y`
    pub fixed: Vec<f64>,
}

/// Solves `ρ_xᵀ(e^{−𝔤}·y − x) = 0` for `𝔤 ∈ (ker ρ_x)^⊥` by damped Newton.
pub fn gauge_fix_point(action: &GroupAction, x: &[f64], y: &[f64], opts: &GaugeFixOptions) -> Result<GaugeFixResult> {
    let n = action.dim();
    let m = action.algebra_dim();
    if x.len() != n || y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x.len().min(y.len()),
        });
    }
    let dist = norm(&sub(y, x));
    if dist > opts.basin_radius {
        return Err(Error::OutsideBasin {
            norm: dist,
            radius: opts.basin_radius,
        });
    }
    let rho = action.rho(x);
    // Basis of (ker ρ_x)^⊥ from the eigenvectors of ρᵀρ.
    let gram = rho.transpose().matmul(&rho);
    let eig = sym_eigen(&gram)?;
    let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let basis: Vec<Vec<f64>> = (0..m)
        .filter(|&k| top > 0.0 && eig.values[k].abs() > 1e-12 * top)
        .map(|k| eig.vectors.column(k))
        .collect();
    if basis.is_empty() {
        return Ok(GaugeFixResult {
            algebra: vec![0.0; m],
            residual: 0.0,
            iterations: 0,
            fixed: y.to_vec(),
        });
    }
    let k = basis.len();
    let algebra_of = |c: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0; m];
        for (ci, b) in c.iter().zip(&basis) {
            for (aj, bj) in a.iter_mut().zip(b) {
                *aj += ci * bj;
            }
        }
        a
    };
    let fixed_of = |c: &[f64]| {
        let a: Vec<f64> = algebra_of(c).iter().map(|v| -v).collect();
        action.act(&a, y)
    };
    let full_residual = |z: &[f64]| norm(&rho.tmatvec(&sub(z, x)));
    let reduced = |z: &[f64]| -> Vec<f64> {
        let full = rho.tmatvec(&sub(z, x));
        basis.iter().map(|b| dot(b, &full)).collect()
    };

    let mut c = vec![0.0; k];
    let mut z = fixed_of(&c);
    let mut f = reduced(&z);
    let mut fnorm = norm(&f);
    // Once below tolerance, a few more steps bring the residual down to
    // rounding, which matters when `y` is very close to `x`.
    let mut polish = 0;
    let mut iterations = opts.max_iter;
    for iter in 0..opts.max_iter {
        if full_residual(&z) < opts.tol {
            polish += 1;
        }
        if polish > 3 {
            return Ok(GaugeFixResult {
                algebra: algebra_of(&c),
                residual: full_residual(&z),
                iterations: iter,
                fixed: z,
            });
        }
        // d/dc_j (e^{−𝔤} y) ≈ −(Σ_a B_aj J_a) z (left-trivialized).
        let mut jac = Mat::zeros(k, k);
        for (j, bj) in basis.iter().enumerate() {
            let dz: Vec<f64> = action.algebra_matrix(bj).matvec(&z).iter().map(|v| -v).collect();
            let col = rho.tmatvec(&dz);
            for (i, bi) in basis.iter().enumerate() {
                jac[(i, j)] = dot(bi, &col);
            }
        }
        let step = solve(&jac, &f).map_err(|_| Error::GaugeNoConvergence {
            iterations: iter,
            residual: full_residual(&z),
        });
        let step = match step {
            Ok(step) => step,
            Err(_) if polish > 0 => {
                iterations = iter;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = c.iter().zip(&step).map(|(ci, si)| ci - t * si).collect();
            let zc = fixed_of(&cand);
            let fc = reduced(&zc);
            let nc = norm(&fc);
            if nc < fnorm || (t < 1e-6 && polish == 0) {
                c = cand;
                z = zc;
                f = fc;
                fnorm = nc;
                break;
            }
            if t < 1e-6 {
                // Polishing stalled at rounding.
                polish = 4;
                break;
            }
            t *= 0.5;
        }
    }
    let residual = full_residual(&z);
    if residual < opts.tol {
        return Ok(GaugeFixResult {
            algebra: algebra_of(&c),
            residual,
            iterations,
            fixed: z,
        });
    }
    Err(Error::GaugeNoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct GaugeFixedSecant {
    pub trace: SecantTrace,
    pub fixes: Vec<GaugeFixResult>,
    /// `‖g_{i+1} g_i^{−1} − I‖_F` between consecutive samples.
    pub continuity: Vec<f64>,
}

/// Gauge-fixes every sample relative to `x_inf` and traces the secant of
/// `g·u − x_inf`.
pub fn gauge_fixed_secant(
    action: &GroupAction,
    traj: &Trajectory,
    x_inf: &[f64],
    opts: &GaugeFixOptions,
) -> Result<GaugeFixedSecant> {
    let points: Vec<Vec<f64>> = traj.samples.iter().map(|s| s.u.clone()).collect();
    gauge_fixed_secant_points(action, &points, x_inf, opts)
}

pub fn gauge_fixed_secant_points(
    action: &GroupAction,
    points: &[Vec<f64>],
    x_inf: &[f64],
    opts: &GaugeFixOptions,
) -> Result<GaugeFixedSecant> {
    let mut fixes = Vec::with_capacity(points.len());
    for (index, u) in points.iter().enumerate() {
        let fix = gauge_fix_point(action, x_inf, u, opts).map_err(|e| Error::GaugeFixFailed {
            index,
            reason: e.to_string(),
        })?;
        fixes.push(fix);
    }
    let disp: Vec<Vec<f64>> = fixes.iter().map(|f| sub(&f.fixed, x_inf)).collect();
    let trace = secant_trace_with(&disp, dot)?;
    let n = action.dim();
    let continuity = fixes
        .windows(2)
        .map(|w| {
            let g1 = action.group_element(&w[1].algebra.iter().map(|v| -v).collect::<Vec<_>>());
            let g0_inv = action.group_element(&w[0].algebra);
            let d = g1.matmul(&g0_inv).add(&Mat::identity(n).scaled(-1.0));
            d.frobenius()
        })
        .collect();
    Ok(GaugeFixedSecant {
        trace,
        fixes,
        continuity,
    })
}

/// Field of the SO(2) toy on ℝ³: with `w = u₁² + u₂² − 1`,
/// `ℰ = w² + u₃² + u₃ w`, invariant under rotations of the `(u₁, u₂)` plane
/// and minimal on the unit circle of that plane.
pub const SO2_TOY_FIELD: &str = "(x1^2 + x2^2 - 1)^2 + x3^2 + x3*(x1^2 + x2^2 - 1)";

pub fn so2_toy() -> Result<GroupAction> {
    let field = AnalyticField::parse(SO2_TOY_FIELD, 3)?;
    GroupAction::new(vec![plane_rotation(3, 0, 1)], field)
}

/// Orbit-space coordinates `(√(u₁² + u₂²) − 1, u₃)` of the SO(2) toy.
pub fn so2_quotient(u: &[f64]) -> Vec<f64> {
    vec![(u[0] * u[0] + u[1] * u[1]).sqrt() - 1.0, u[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_2d() -> GroupAction {
        let f = AnalyticField::parse("(x1^2 + x2^2)^2", 2).unwrap();
        GroupAction::new(vec![plane_rotation(2, 0, 1)], f).unwrap()
    }

    #[test]
    fn undoes_a_rotation() {
        let act = rotation_2d();
        let (theta, delta) = (0.4f64, 0.05);
        let y = [(1.0 + delta) * theta.cos(), (1.0 + delta) * theta.sin()];
        let fix = gauge_fix_point(&act, &[1.0, 0.0], &y, &GaugeFixOptions::default()).unwrap();
        assert!(fix.residual < 1e-12);
        assert!((fix.algebra[0] - theta).abs() < 1e-12);
        assert!((fix.fixed[0] - 1.0 - delta).abs() < 1e-12 && fix.fixed[1].abs() < 1e-12);
    }

    #[test]
    fn identity_and_origin_are_trivial() {
        let act = rotation_2d();
        let fix = gauge_fix_point(&act, &[1.0, 0.0], &[1.0, 0.0], &GaugeFixOptions::default()).unwrap();
        assert_eq!((fix.algebra[0], fix.residual), (0.0, 0.0));
        let fix = gauge_fix_point(&act, &[0.0, 0.0], &[0.3, 0.1], &GaugeFixOptions::default()).unwrap();
        assert_eq!((fix.algebra[0], fix.residual), (0.0, 0.0));
    }

    #[test]
    fn generators_must_be_antisymmetric() {
        let f = AnalyticField::parse("x1^2", 2).unwrap();
        assert!(GroupAction::new(vec![Mat::identity(2)], f).is_err());
    }
}
