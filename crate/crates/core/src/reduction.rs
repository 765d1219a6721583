//! Kernel splitting of the Hessian at a critical point and the reduction of
//! the field to a finite-dimensional model.
//!
//! With `P` the orthogonal projection onto `V₀ = ker ℰ″(0)` and `V₁` its
//! complement, the manifold `S = {u : (I − P) ℰ′(u) = 0}` is parameterised by
//! the `V₀` coordinates. `Q` moves a point onto `S` along `V₁`. The reduced
//! function on `ℝ^{k+2}` is
//!
//! ```text
//! f(x, y¹, y²) = ℰ(Q(x)) + a [(y¹)² − (y²)²]
//! ```
//!
//! and `φ(u) = (x, y¹, y²)` keeps the `V₀` coordinates of `u`, with `y¹, y² ≥ 0`
//! chosen so that `|(y¹, y²)| = ‖u − Qu‖` and the quadratic term reproduces
//! `½⟨ℰ″(Qu)(u − Qu), u − Qu⟩`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{radial_angular, AnalyticField, RadialSplit};
use crate::fit::{power_law_fit, LineFit};
use crate::linalg::{axpy, dot, norm, solve, sub, sym_eigen, Mat};

/// Symmetric eigendecomposition of `ℰ″(0)` split into kernel and complement.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// Sorted by ascending magnitude.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: Mat,
    pub kernel_dim: usize,
    /// Basis of `V₀`.
    pub kernel_basis: Vec<Vec<f64>>,
    /// Basis of `V₁`.
    pub complement_basis: Vec<Vec<f64>>,
    /// Orthogonal projection onto `V₀`.
    pub projector: Mat,
    pub kernel_tol: f64,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V₀` coordinates of `u`.
    pub fn kernel_coords(&self, u: &[f64]) -> Vec<f64> {
        self.kernel_basis.iter().map(|b| dot(b, u)).collect()
    }

    /// `V₁` coordinates of `u`.
    pub fn complement_coords(&self, u: &[f64]) -> Vec<f64> {
        self.complement_basis.iter().map(|b| dot(b, u)).collect()
    }

    /// `Σ x_i b_i` over the kernel basis.
    pub fn from_kernel_coords(&self, x: &[f64]) -> Vec<f64> {
        combine(&self.kernel_basis, x, self.dim())
    }

    pub fn complement_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[self.kernel_dim..]
    }
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (b, c) in basis.iter().zip(coeffs) {
        for (o, bi) in out.iter_mut().zip(b) {
            *o += c * bi;
        }
    }
    out
}

/// Gradient norm at the origin above which the origin is not treated as critical.
pub const CRITICAL_TOL: f64 = 1e-10;

/// Default relative kernel cutoff: `|λ| ≤ 1e-8 · max|λ|` counts as zero.
pub const DEFAULT_RELATIVE_KERNEL_TOL: f64 = 1e-8;

/// Splits `ℝⁿ = V₀ ⊕ V₁` using the Hessian at the origin. `kernel_tol`
/// defaults to `1e-8 · max|λ|`.
pub fn spectral_split(field: &AnalyticField, kernel_tol: Option<f64>) -> Result<SpectralSplit> {
    let n = field.dim();
    let origin = vec![0.0; n];
    let jet = field.eval_jet2(&origin)?;
    let grad_norm = jet.grad_norm();
    if !(grad_norm < CRITICAL_TOL) {
        return Err(Error::NotCritical { grad_norm });
    }
    let hessian = Mat::from_rows(n, n, jet.hessian);
    let eig = sym_eigen(&hessian)?;
    let max_abs = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = kernel_tol.unwrap_or(DEFAULT_RELATIVE_KERNEL_TOL * max_abs);
    let kernel_dim = eig.values.iter().filter(|v| v.abs() <= tol).count();
    let kernel_basis: Vec<Vec<f64>> = (0..kernel_dim).map(|k| eig.vectors.column(k)).collect();
    let complement_basis: Vec<Vec<f64>> = (kernel_dim..n).map(|k| eig.vectors.column(k)).collect();
    let mut projector = Mat::zeros(n, n);
    for b in &kernel_basis {
        for i in 0..n {
            for j in 0..n {
                projector[(i, j)] += b[i] * b[j];
            }
        }
    }
    Ok(SpectralSplit {
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        kernel_dim,
        kernel_basis,
        complement_basis,
        projector,
        kernel_tol: tol,
    })
}

/// Controls for the Newton solve behind `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Points farther than this from the origin are rejected.
    pub basin_radius: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            tol: 1e-12,
            max_iter: 50,
            basin_radius: 0.5,
        }
    }
}

/// Projects `point` onto `S` by damped Newton on its `V₁` coordinates.
pub fn project_q(
    field: &AnalyticField,
    split: &SpectralSplit,
    point: &[f64],
    opts: &ProjectionOptions,
) -> Result<Vec<f64>> {
    project_q_from(field, split, point, &split.complement_coords(point), opts)
}

fn project_q_from(
    field: &AnalyticField,
    split: &SpectralSplit,
    point: &[f64],
    initial: &[f64],
    opts: &ProjectionOptions,
) -> Result<Vec<f64>> {
    let n = split.dim();
    if point.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: point.len(),
        });
    }
    let r = norm(point);
    if r > opts.basin_radius {
        return Err(Error::OutsideBasin {
            norm: r,
            radius: opts.basin_radius,
        });
    }
    let m = split.complement_basis.len();
    let base = split.from_kernel_coords(&split.kernel_coords(point));
    if m == 0 {
        return Ok(point.to_vec());
    }
    let assemble = |w: &[f64]| -> Vec<f64> {
        let mut u = base.clone();
        for (b, c) in split.complement_basis.iter().zip(w) {
            for (ui, bi) in u.iter_mut().zip(b) {
                *ui += c * bi;
            }
        }
        u
    };
    let residual_at = |w: &[f64]| -> Result<(Vec<f64>, Mat)> {
        let jet = field.eval_jet2(&assemble(w))?;
        let res: Vec<f64> = split.complement_basis.iter().map(|b| dot(b, &jet.gradient)).collect();
        let h = Mat::from_rows(n, n, jet.hessian);
        let mut jac = Mat::zeros(m, m);
        for (i, bi) in split.complement_basis.iter().enumerate() {
            let hb = h.matvec(bi);
            for (j, bj) in split.complement_basis.iter().enumerate() {
                jac[(i, j)] = dot(bj, &hb);
            }
        }
        Ok((res, jac))
    };

    let mut w = initial.to_vec();
    let (mut res, mut jac) = residual_at(&w)?;
    let mut res_norm = norm(&res);
    for iter in 0..opts.max_iter {
        if res_norm == 0.0 {
            return Ok(assemble(&w));
        }
        let step = solve(&jac, &res).map_err(|_| Error::NewtonDiverged {
            iterations: iter,
            residual: res_norm,
            last: assemble(&w),
        })?;
        let mut alpha = 1.0;
        let (next_w, next_res, next_jac, next_norm) = loop {
            let cand = axpy(&w, -alpha, &step);
            let (r2, j2) = residual_at(&cand)?;
            let n2 = norm(&r2);
            if n2 < res_norm || alpha < 1e-4 {
                break (cand, r2, j2, n2);
            }
            alpha *= 0.5;
        };
        let step_norm = alpha * norm(&step);
        let stalled = next_norm >= res_norm;
        w = next_w;
        res = next_res;
        jac = next_jac;
        res_norm = next_norm;
        let settled = step_norm <= 1e-14 * norm(&w).max(f64::MIN_POSITIVE) || stalled;
        if res_norm <= opts.tol && settled {
            return Ok(assemble(&w));
        }
    }
    if res_norm <= opts.tol {
        return Ok(assemble(&w));
    }
    Err(Error::NewtonDiverged {
        iterations: opts.max_iter,
        residual: res_norm,
        last: assemble(&w),
    })
}

/// The finite-dimensional model `f` attached to a field and its splitting.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    /// `dim S`
    pub k: usize,
    /// Spectral radius of `ℰ″(0)` on `V₁`.
    pub a: f64,
    pub field: AnalyticField,
    pub split: SpectralSplit,
    pub projection: ProjectionOptions,
    /// Admissible relative excess of the quadratic form over `a‖u − Qu‖²`.
    pub curvature_tol: f64,
}

/// Builds the reduced model. Fails when the Hessian vanishes identically.
pub fn build_reduced(field: &AnalyticField, split: &SpectralSplit) -> Result<ReducedModel> {
    if split.kernel_dim == split.dim() {
        return Err(Error::Unsupported(
            "Hessian at the origin is zero; the complement V1 is trivial".into(),
        ));
    }
    let a = split
        .complement_eigenvalues()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ReducedModel {
        k: split.kernel_dim,
        a,
        field: field.clone(),
        split: split.clone(),
        projection: ProjectionOptions::default(),
        curvature_tol: 0.05,
    })
}

/// `φ(u)` together with the intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiImage {
    /// `(x¹..x^k, y¹, y²)`
    pub bar: Vec<f64>,
    pub qu: Vec<f64>,
    /// `‖u − Qu‖`
    pub normal_norm: f64,
    /// `½⟨ℰ″(Qu)(u − Qu), u − Qu⟩`
    pub form: f64,
}

impl ReducedModel {
    pub fn with_projection(mut self, projection: ProjectionOptions) -> Self {
        self.projection = projection;
        self
    }

    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        project_q(&self.field, &self.split, u, &self.projection)
    }

    /// `ℰ|_S` in kernel coordinates.
    pub fn restricted_value(&self, x: &[f64]) -> Result<f64> {
        let q = self.point_on_s(x)?;
        self.field.value(&q)
    }

    fn point_on_s(&self, x: &[f64]) -> Result<Vec<f64>> {
        let base = self.split.from_kernel_coords(x);
        let zeros = vec![0.0; self.split.complement_basis.len()];
        project_q_from(&self.field, &self.split, &base, &zeros, &self.projection)
    }

    /// Gradient of `ℰ|_S` in kernel coordinates: `V₀ᵀ ℰ′(Q(x))`, since the
    /// `V₁` part of the gradient vanishes on `S`.
    pub fn restricted_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.point_on_s(x)?;
        let g = self.field.gradient(&q)?;
        Ok(self.split.kernel_coords(&g))
    }

    /// `f(x, y¹, y²)`
    pub fn f_value(&self, bar: &[f64]) -> Result<f64> {
        self.check_bar(bar)?;
        let (x, y) = bar.split_at(self.k);
        Ok(self.restricted_value(x)? + self.a * (y[0] * y[0] - y[1] * y[1]))
    }

    pub fn f_gradient(&self, bar: &[f64]) -> Result<Vec<f64>> {
        self.check_bar(bar)?;
        let (x, y) = bar.split_at(self.k);
        let mut g = if self.k > 0 {
            self.restricted_gradient(x)?
        } else {
            Vec::new()
        };
        g.push(2.0 * self.a * y[0]);
        g.push(-2.0 * self.a * y[1]);
        Ok(g)
    }

    /// Radial split of `f′` at `ū`.
    pub fn f_radial(&self, bar: &[f64]) -> Result<RadialSplit> {
        radial_angular(&self.f_gradient(bar)?, bar)
    }

    fn check_bar(&self, bar: &[f64]) -> Result<()> {
        if bar.len() != self.k + 2 {
            return Err(Error::Dimension {
                expected: self.k + 2,
                got: bar.len(),
            });
        }
        Ok(())
    }

    /// `φ(u)` with diagnostics.
    pub fn phi(&self, point: &[f64]) -> Result<PhiImage> {
        let qu = self.project(point)?;
        let normal = sub(point, &qu);
        let m = norm(&normal);
        let mut bar = self.split.kernel_coords(point);
        if m == 0.0 {
            bar.extend([0.0, 0.0]);
            return Ok(PhiImage {
                bar,
                qu,
                normal_norm: 0.0,
                form: 0.0,
            });
        }
        let jet = self.field.eval_jet2(&qu)?;
        let n = self.split.dim();
        let h = Mat::from_rows(n, n, jet.hessian);
        let form = 0.5 * dot(&normal, &h.matvec(&normal));
        let ratio = form / (self.a * m * m);
        if !ratio.is_finite() || ratio.abs() > 1.0 + self.curvature_tol {
            return Err(Error::CurvatureExceeded { ratio });
        }
        let t = ratio.clamp(-1.0, 1.0);
        let y1 = m * ((1.0 + t) / 2.0).sqrt();
        let y2 = m * ((1.0 - t) / 2.0).sqrt();
        bar.extend([y1, y2]);
        Ok(PhiImage {
            bar,
            qu,
            normal_norm: m,
            form,
        })
    }
}

/// `φ(u) ∈ ℝ^{k+2}`.
pub fn phi_map(model: &ReducedModel, point: &[f64]) -> Result<Vec<f64>> {
    Ok(model.phi(point)?.bar)
}

/// Decay order of a residual, or an exact match at rounding level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderFit {
    /// Every residual is at the level of floating-point rounding.
    Exact,
    Fitted(LineFit),
}

impl OrderFit {
    /// Fitted order, `+∞` for an exact match.
    pub fn order(&self) -> f64 {
        match self {
            OrderFit::Exact => f64::INFINITY,
            OrderFit::Fitted(f) => f.slope,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, OrderFit::Exact)
    }
}

/// Fits the decay order of `residual` against `scale`. `floor[i]` is the
/// rounding level below which `residual[i]` counts as zero.
pub fn fit_order(scale: &[f64], residual: &[f64], floor: &[f64]) -> Result<OrderFit> {
    let mut distinct: Vec<f64> = scale.iter().copied().filter(|s| *s > 0.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if distinct.len() < 4 {
        return Err(Error::InsufficientData(alloc::format!(
            "{} distinct scales, need at least 4",
            distinct.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = scale
        .iter()
        .zip(residual)
        .zip(floor)
        .filter(|((s, r), f)| **s > 0.0 && r.abs() > **f)
        .map(|((s, r), _)| (*s, r.abs()))
        .unzip();
    if xs.is_empty() {
        return Ok(OrderFit::Exact);
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientData(alloc::format!(
            "{} residuals above rounding level, need at least 4",
            xs.len()
        )));
    }
    Ok(OrderFit::Fitted(power_law_fit(&xs, &ys)?))
}

/// Orders of `|f(φu) − ℰ(u)|` and `|f_r̄(φu) − ℰ_r(u)|` against `‖u − Qu‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatReport {
    pub value_order: OrderFit,
    pub radial_order: OrderFit,
    pub normal_norms: Vec<f64>,
    pub value_residuals: Vec<f64>,
    pub radial_residuals: Vec<f64>,
}

pub fn compat_check(model: &ReducedModel, points: &[Vec<f64>]) -> Result<CompatReport> {
    let mut normal_norms = Vec::new();
    let mut value_residuals = Vec::new();
    let mut radial_residuals = Vec::new();
    let mut value_floor = Vec::new();
    let mut radial_floor = Vec::new();
    for u in points {
        let img = model.phi(u)?;
        if img.normal_norm == 0.0 || norm(u) == 0.0 {
            continue;
        }
        let jet = model.field.eval_jet2(u)?;
        let radial = radial_angular(&jet.gradient, u)?;
        let f = model.f_value(&img.bar)?;
        let f_rad = model.f_radial(&img.bar)?;
        normal_norms.push(img.normal_norm);
        value_residuals.push(f - jet.value);
        radial_residuals.push(f_rad.e_r - radial.e_r);
        value_floor.push(1e-13 * (f.abs() + jet.value.abs()) + f64::MIN_POSITIVE);
        radial_floor.push(1e-12 * (f_rad.e_r.abs() + radial.e_r.abs()) + f64::MIN_POSITIVE);
    }
    let value_order = fit_order(&normal_norms, &value_residuals, &value_floor)?;
    let radial_order = fit_order(&normal_norms, &radial_residuals, &radial_floor)?;
    Ok(CompatReport {
        value_order,
        radial_order,
        normal_norms,
        value_residuals,
        radial_residuals,
    })
}

/// Order of `|‖φ(u)‖² − ‖u‖²|` against `‖u‖`.
pub fn norm_distortion(model: &ReducedModel, points: &[Vec<f64>]) -> Result<OrderFit> {
    let mut scale = Vec::new();
    let mut residual = Vec::new();
    let mut floor = Vec::new();
    for u in points {
        let bar = phi_map(model, u)?;
        let r2 = dot(u, u);
        scale.push(r2.sqrt());
        residual.push(dot(&bar, &bar) - r2);
        floor.push(1e-14 * r2 + f64::MIN_POSITIVE);
    }
    fit_order(&scale, &residual, &floor)
}

/// Empirical constant in `‖ℰ′(u)‖ ≥ c ‖u − Qu‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundReport {
    /// Minimum of `‖ℰ′(u)‖ / ‖u − Qu‖` over the sample.
    pub c: f64,
    /// Smallest nonzero `|λ|` of `ℰ″(0)`.
    pub lambda_min: f64,
    pub samples: usize,
}

pub fn gradient_lower_bound(model: &ReducedModel, points: &[Vec<f64>]) -> Result<LowerBoundReport> {
    let mut c = f64::INFINITY;
    let mut samples = 0;
    for u in points {
        let qu = model.project(u)?;
        let m = norm(&sub(u, &qu));
        if m == 0.0 {
            continue;
        }
        let g = model.field.gradient(u)?;
        c = c.min(norm(&g) / m);
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::InsufficientData("no point off S".into()));
    }
    let lambda_min = model
        .split
        .complement_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    Ok(LowerBoundReport {
        c,
        lambda_min,
        samples,
    })
}

/// Transfer of the cone condition `ε‖ℰ_θ‖ ≤ |ℰ_r|` to the reduced model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeTransferReport {
    /// Points of the sample lying in `W^ε`.
    pub in_cone: usize,
    /// Smallest `c` with `(ε/c)‖f_θ(ū)‖ ≤ |f_r̄(ū)|` on those points.
    pub required_c: f64,
}

pub fn cone_transfer(
    model: &ReducedModel,
    points: &[Vec<f64>],
    epsilon: f64,
) -> Result<ConeTransferReport> {
    let mut in_cone = 0;
    let mut required_c = 0.0f64;
    for u in points {
        let jet = model.field.eval_jet2(u)?;
        if jet.value == 0.0 || norm(u) == 0.0 {
            continue;
        }
        let rs = radial_angular(&jet.gradient, u)?;
        if epsilon * rs.e_theta_norm() > rs.e_r.abs() {
            continue;
        }
        let img = model.phi(u)?;
        if norm(&img.bar) == 0.0 {
            continue;
        }
        let fr = model.f_radial(&img.bar)?;
        in_cone += 1;
        let needed = if fr.e_r == 0.0 {
            f64::INFINITY
        } else {
            epsilon * fr.e_theta_norm() / fr.e_r.abs()
        };
        required_c = required_c.max(needed);
    }
    Ok(ConeTransferReport {
        in_cone,
        required_c,
    })
}
