//! Periodic SU(2) lattice gauge fields, the Wilson action and its gradient
//! flow.
//!
//! Sites are numbered lexicographically with the first coordinate most
//! significant; link `(x, μ)` lives at index `x·ndim + μ` and points from
//! `x` to `x + μ̂`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::quat::Quat;
use crate::asymptotics::{secant_trace_with, SecantTrace};
use crate::error::{Error, Result};
use crate::linalg::{norm, sym_eigen, Mat};

type Alg = [f64; 3];

fn alg_dot(a: &Alg, b: &Alg) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn alg_scale(a: &Alg, c: f64) -> Alg {
    [c * a[0], c * a[1], c * a[2]]
}

/// `1 − w`, evaluated as `|v|²/(1 + w)` near the identity to avoid
/// cancellation.
fn plaquette_deficit(q: &Quat) -> f64 {
    if q.w > 0.0 {
        let v = q.vector();
        alg_dot(&v, &v) / (1.0 + q.w)
    } else {
        1.0 - q.w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGauge {
    dims: Vec<usize>,
    links: Vec<Quat>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.len() < 2 {
        return Err(Error::InvalidParameter("lattice needs at least two directions".into()));
    }
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidParameter("every lattice extent must be at least 2".into()));
    }
    Ok(dims.iter().product())
}

impl LatticeGauge {
    pub fn identity(dims: &[usize]) -> Result<Self> {
        let sites = check_dims(dims)?;
        Ok(LatticeGauge {
            dims: dims.to_vec(),
            links: vec![Quat::IDENTITY; sites * dims.len()],
        })
    }

    /// Builds a configuration from links, renormalizing those off unit norm
    /// by more than rounding. Links further than `1e-6` from unit norm are
    /// rejected.
    pub fn from_links(dims: &[usize], links: Vec<Quat>) -> Result<Self> {
        let sites = check_dims(dims)?;
        if links.len() != sites * dims.len() {
            return Err(Error::Dimension {
                expected: sites * dims.len(),
                got: links.len(),
            });
        }
        for q in &links {
            let n = q.norm();
            if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParameter("link is not a unit quaternion".into()));
            }
        }
        Ok(LatticeGauge {
            dims: dims.to_vec(),
            links: links
                .into_iter()
                .map(|q| if (q.norm() - 1.0).abs() <= 4.0 * f64::EPSILON { q } else { q.normalized() })
                .collect(),
        })
    }

    /// Every link `exp(v)` with `v` uniform in the ball of `radius`.
    pub fn random_near_identity<R: Rng + ?Sized>(dims: &[usize], radius: f64, rng: &mut R) -> Result<Self> {
        let sites = check_dims(dims)?;
        let links = (0..sites * dims.len())
            .map(|_| Quat::random_near_identity(radius, rng))
            .collect();
        Ok(LatticeGauge {
            dims: dims.to_vec(),
            links,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn sites(&self) -> usize {
        self.links.len() / self.dims.len()
    }

    pub fn links(&self) -> &[Quat] {
        &self.links
    }

    pub fn link_index(&self, site: usize, mu: usize) -> usize {
        site * self.ndim() + mu
    }

    pub fn link(&self, site: usize, mu: usize) -> Quat {
        self.links[self.link_index(site, mu)]
    }

    pub fn set_link(&mut self, site: usize, mu: usize, q: Quat) {
        let i = self.link_index(site, mu);
        self.links[i] = q;
    }

    /// Site one step from `site` along `±μ̂`, periodically wrapped.
    pub fn neighbor(&self, site: usize, mu: usize, forward: bool) -> usize {
        let stride: usize = self.dims[mu + 1..].iter().product();
        let l = self.dims[mu];
        let c = (site / stride) % l;
        let nc = if forward { (c + 1) % l } else { (c + l - 1) % l };
        site - c * stride + nc * stride
    }

    /// `U_μ(x) U_ν(x+μ) U_μ(x+ν)⁻¹ U_ν(x)⁻¹`
    pub fn plaquette(&self, site: usize, mu: usize, nu: usize) -> Quat {
        let xm = self.neighbor(site, mu, true);
        let xn = self.neighbor(site, nu, true);
        self.link(site, mu)
            .mul(&self.link(xm, nu))
            .mul(&self.link(xn, mu).conj())
            .mul(&self.link(site, nu).conj())
    }

    /// `Σ_{x, μ<ν} (1 − ½ Re tr U_p)`
    pub fn wilson_action(&self) -> f64 {
        let d = self.ndim();
        let mut s = 0.0;
        for x in 0..self.sites() {
            for mu in 0..d {
                for nu in mu + 1..d {
                    s += plaquette_deficit(&self.plaquette(x, mu, nu));
                }
            }
        }
        s
    }

    /// Sum of the `2(d−1)` staples `A` of link `(x, μ)`, oriented so that
    /// each adjoining plaquette is conjugate to `U_μ(x)·A`.
    pub fn staple_sum(&self, site: usize, mu: usize) -> Quat {
        let mut acc = Quat::new(0.0, 0.0, 0.0, 0.0);
        let xm = self.neighbor(site, mu, true);
        for nu in 0..self.ndim() {
            if nu == mu {
                continue;
            }
            let xn = self.neighbor(site, nu, true);
            let upper = self
                .link(xm, nu)
                .mul(&self.link(xn, mu).conj())
                .mul(&self.link(site, nu).conj());
            let xb = self.neighbor(site, nu, false);
            let xmb = self.neighbor(xm, nu, false);
            let lower = self
                .link(xmb, nu)
                .conj()
                .mul(&self.link(xb, mu).conj())
                .mul(&self.link(xb, nu));
            acc = acc.add(&upper).add(&lower);
        }
        acc
    }

    /// Algebra-valued gradient of the action for the left perturbation
    /// `U ↦ exp(εv)U`, one entry per link.
    pub fn gradient(&self) -> Vec<Alg> {
        let d = self.ndim();
        (0..self.links.len())
            .map(|i| {
                let (x, mu) = (i / d, i % d);
                self.links[i].mul(&self.staple_sum(x, mu)).vector()
            })
            .collect()
    }

    /// `U_μ(x) ↦ g_x U_μ(x) g_{x+μ}⁻¹`
    pub fn gauge_transform(&self, gauge: &[Quat]) -> Result<Self> {
        if gauge.len() != self.sites() {
            return Err(Error::Dimension {
                expected: self.sites(),
                got: gauge.len(),
            });
        }
        let d = self.ndim();
        let links = (0..self.links.len())
            .map(|i| {
                let (x, mu) = (i / d, i % d);
                let y = self.neighbor(x, mu, true);
                gauge[x].mul(&self.links[i]).mul(&gauge[y].conj()).normalized()
            })
            .collect();
        Ok(LatticeGauge {
            dims: self.dims.clone(),
            links,
        })
    }

    /// `U ← exp(−dt·grad)·U`, renormalized.
    fn stepped(&self, grad: &[Alg], dt: f64) -> LatticeGauge {
        let links = self
            .links
            .iter()
            .zip(grad)
            .map(|(u, g)| Quat::exp(alg_scale(g, -dt)).mul(u).normalized())
            .collect();
        LatticeGauge {
            dims: self.dims.clone(),
            links,
        }
    }

    pub fn max_unit_deviation(&self) -> f64 {
        self.links.iter().fold(0.0, |m, q| m.max((q.norm() - 1.0).abs()))
    }

    /// Per-link `log(U V⁻¹)`.
    pub fn difference(&self, reference: &LatticeGauge, log_tol: f64) -> Result<Vec<Alg>> {
        self.same_shape(reference)?;
        self.links
            .iter()
            .zip(&reference.links)
            .map(|(u, v)| u.mul(&v.conj()).log(log_tol))
            .collect()
    }

    /// `(Σ_links |log(U V⁻¹)|²)^{1/2}`
    pub fn distance(&self, reference: &LatticeGauge) -> Result<f64> {
        let a = self.difference(reference, 0.0)?;
        Ok(a.iter().map(|v| alg_dot(v, v)).sum::<f64>().sqrt())
    }

    fn same_shape(&self, other: &LatticeGauge) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension {
                expected: self.links.len(),
                got: other.links.len(),
            });
        }
        Ok(())
    }
}

pub fn random_gauge<R: Rng + ?Sized>(sites: usize, rng: &mut R) -> Vec<Quat> {
    (0..sites).map(|_| Quat::random(rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeScheme {
    /// `U ← exp(−dt·G(U))·U`
    Euler,
    /// Predictor `U* = exp(−dt·G(U))·U`, then
    /// `U ← exp(−dt·½(G(U) + G(U*)))·U`.
    Heun,
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeFlowOptions {
    pub dt: f64,
    pub scheme: LatticeScheme,
    pub steps: usize,
    /// Keep every `record_every`-th configuration (the start and the final
    /// one are always kept).
    pub record_every: usize,
    pub dt_floor: f64,
    /// Stop once `‖grad‖²` drops below this.
    pub grad_floor: f64,
    /// Dissipation defects are measured only on steps with `|ΔS|` above
    /// this; smaller differences are dominated by rounding.
    pub defect_floor: f64,
}

impl Default for LatticeFlowOptions {
    fn default() -> Self {
        LatticeFlowOptions {
            dt: 1e-3,
            scheme: LatticeScheme::Heun,
            steps: 1000,
            record_every: 10,
            dt_floor: 1e-12,
            grad_floor: 0.0,
            defect_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LatticeFrame {
    pub t: f64,
    pub action: f64,
    /// `‖grad S‖²`
    pub grad_sq: f64,
    pub config: LatticeGauge,
}

#[derive(Debug, Clone)]
pub struct LatticeFlow {
    pub frames: Vec<LatticeFrame>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Accepted steps with `ΔS > 0`; zero by construction.
    pub action_increases: usize,
    /// Largest `|ΔS/Δt + ‖grad‖²| / ‖grad‖²` with the gradient at the start
    /// of the step.
    pub max_dissipation_defect: f64,
    /// Same with `‖grad‖²` averaged over both ends of the step.
    pub max_dissipation_defect_trapezoid: f64,
    pub final_dt: f64,
    /// Stopped because the action no longer decreased beyond rounding.
    pub stalled: bool,
}

impl LatticeFlow {
    pub fn last(&self) -> &LatticeFrame {
        self.frames.last().unwrap()
    }

    pub fn actions(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.action).collect()
    }
}

fn grad_sq(g: &[Alg]) -> f64 {
    g.iter().map(|v| alg_dot(v, v)).sum()
}

/// Explicit Riemannian gradient descent `U ← exp(−dt·grad)·U` on every link
/// at once. A step that raises the action is rejected and `dt` halved.
pub fn lattice_flow(start: &LatticeGauge, opts: &LatticeFlowOptions) -> Result<LatticeFlow> {
    if !(opts.dt > 0.0) || !(opts.dt_floor > 0.0) || opts.record_every == 0 {
        return Err(Error::InvalidParameter("dt, dt_floor and record_every must be positive".into()));
    }
    let mut cfg = start.clone();
    let mut s = cfg.wilson_action();
    let mut grad = cfg.gradient();
    let mut gsq = grad_sq(&grad);
    let mut t = 0.0;
    let mut dt = opts.dt;
    let mut frames = vec![LatticeFrame {
        t,
        action: s,
        grad_sq: gsq,
        config: cfg.clone(),
    }];
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let (mut defect, mut defect_trap) = (0.0f64, 0.0f64);
    let mut recorded_last = true;
    let mut stalled = false;
    let plaquettes = (start.sites() * start.ndim() * (start.ndim() - 1) / 2) as f64;
    let rounding = 16.0 * f64::EPSILON * plaquettes;
    while accepted < opts.steps && gsq > opts.grad_floor {
        let mut next = cfg.stepped(&grad, dt);
        if opts.scheme == LatticeScheme::Heun {
            let pred = next.gradient();
            let avg: Vec<Alg> = grad
                .iter()
                .zip(&pred)
                .map(|(a, b)| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])])
                .collect();
            next = cfg.stepped(&avg, dt);
        }
        let s_next = next.wilson_action();
        if s_next > s && s_next - s <= rounding {
            // The action has reached rounding level.
            stalled = true;
            break;
        }
        if s_next > s {
            rejected += 1;
            dt *= 0.5;
            if dt < opts.dt_floor {
                return Err(Error::StepUnderflow { dt_floor: opts.dt_floor });
            }
            continue;
        }
        let grad_next = next.gradient();
        let gsq_next = grad_sq(&grad_next);
        let ds = s_next - s;
        if ds.abs() > opts.defect_floor && gsq > 0.0 {
            let rate = ds / dt;
            defect = defect.max((rate + gsq).abs() / gsq);
            let avg = 0.5 * (gsq + gsq_next);
            defect_trap = defect_trap.max((rate + avg).abs() / avg);
        }
        cfg = next;
        s = s_next;
        grad = grad_next;
        gsq = gsq_next;
        t += dt;
        accepted += 1;
        recorded_last = accepted % opts.record_every == 0;
        if recorded_last {
            frames.push(LatticeFrame {
                t,
                action: s,
                grad_sq: gsq,
                config: cfg.clone(),
            });
        }
    }
    if !recorded_last {
        frames.push(LatticeFrame {
            t,
            action: s,
            grad_sq: gsq,
            config: cfg,
        });
    }
    Ok(LatticeFlow {
        frames,
        accepted_steps: accepted,
        rejected_steps: rejected,
        action_increases: 0,
        max_dissipation_defect: defect,
        max_dissipation_defect_trapezoid: defect_trap,
        final_dt: dt,
        stalled,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeGaugeFixOptions {
    /// Converged once the residual is below `tol·(distance) + abs_tol`.
    pub tol: f64,
    pub abs_tol: f64,
    /// Iterations cap, counting relaxation sweeps and Newton steps.
    pub max_sweeps: usize,
    /// Gauss–Seidel sweeps before switching to Newton.
    pub relax_sweeps: usize,
    /// Largest admissible `|log(U V⁻¹)|` on any single link before fixing.
    pub max_link_distance: f64,
    pub log_tol: f64,
}

impl Default for LatticeGaugeFixOptions {
    fn default() -> Self {
        LatticeGaugeFixOptions {
            tol: 1e-10,
            abs_tol: 1e-13,
            max_sweeps: 200,
            relax_sweeps: 10,
            max_link_distance: 2.0,
            log_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LatticeGaugeFix {
    /// `log g_x` per site.
    pub algebra: Vec<Alg>,
    pub gauge: Vec<Quat>,
    /// `(Σ_x |∂F/∂g_x|²)^{1/2}` of `F = Σ_links |log(g_x U g_{x+μ}⁻¹ V⁻¹)|²`.
    pub residual: f64,
    pub sweeps: usize,
    pub distance_before: f64,
    pub distance_after: f64,
}

struct FixState<'a> {
    cfg: &'a LatticeGauge,
    reference: &'a LatticeGauge,
    gauge: Vec<Quat>,
    log_tol: f64,
}

impl FixState<'_> {
    fn transformed(&self, site: usize, mu: usize, gx: &Quat) -> Quat {
        let y = self.cfg.neighbor(site, mu, true);
        gx.mul(&self.cfg.link(site, mu)).mul(&self.gauge[y].conj())
    }

    /// `log(g_x U g_{x+μ}⁻¹ V⁻¹)`
    fn link_log(&self, site: usize, mu: usize) -> Result<Alg> {
        self.transformed(site, mu, &self.gauge[site])
            .mul(&self.reference.link(site, mu).conj())
            .log(self.log_tol)
    }

    fn functional(&self) -> Result<f64> {
        let mut f = 0.0;
        for x in 0..self.cfg.sites() {
            for mu in 0..self.cfg.ndim() {
                let l = self.link_log(x, mu)?;
                f += alg_dot(&l, &l);
            }
        }
        Ok(f)
    }

    /// Terms of `F` on the `2d` links touching `site`, with `g_x = gx`.
    fn local(&self, site: usize, gx: &Quat) -> Result<f64> {
        let mut f = 0.0;
        for mu in 0..self.cfg.ndim() {
            let fwd = self
                .transformed(site, mu, gx)
                .mul(&self.reference.link(site, mu).conj())
                .log(self.log_tol)?;
            let b = self.cfg.neighbor(site, mu, false);
            let bwd = self.gauge[b]
                .mul(&self.cfg.link(b, mu))
                .mul(&gx.conj())
                .mul(&self.reference.link(b, mu).conj())
                .log(self.log_tol)?;
            f += alg_dot(&fwd, &fwd) + alg_dot(&bwd, &bwd);
        }
        Ok(f)
    }

    /// Derivative of `F` for `g_x ↦ exp(εv) g_x`.
    fn site_gradient(&self, site: usize) -> Result<Alg> {
        let mut g = [0.0; 3];
        for mu in 0..self.cfg.ndim() {
            let lf = self.link_log(site, mu)?;
            let b = self.cfg.neighbor(site, mu, false);
            let p = self.gauge[b].mul(&self.cfg.link(b, mu)).mul(&self.gauge[site].conj());
            let lb = self.link_log(b, mu)?;
            let back = p.conj().adjoint(lb);
            for k in 0..3 {
                g[k] += 2.0 * lf[k] - 2.0 * back[k];
            }
        }
        Ok(g)
    }

    fn residual(&self) -> Result<f64> {
        let mut r = 0.0;
        for x in 0..self.cfg.sites() {
            let g = self.site_gradient(x)?;
            r += alg_dot(&g, &g);
        }
        Ok(r.sqrt())
    }

    /// One sweep of local maximization of `Σ ½ Re tr(g_x U g_{x+μ}⁻¹ V⁻¹)`.
    fn trace_sweep(&mut self) {
        for x in 0..self.cfg.sites() {
            let mut k = Quat::new(0.0, 0.0, 0.0, 0.0);
            for mu in 0..self.cfg.ndim() {
                let y = self.cfg.neighbor(x, mu, true);
                let m = self
                    .cfg
                    .link(x, mu)
                    .mul(&self.gauge[y].conj())
                    .mul(&self.reference.link(x, mu).conj());
                k = k.add(&m.conj());
                let b = self.cfg.neighbor(x, mu, false);
                let n = self
                    .reference
                    .link(b, mu)
                    .conj()
                    .mul(&self.gauge[b])
                    .mul(&self.cfg.link(b, mu));
                k = k.add(&n);
            }
            let nk = k.norm();
            if nk > 0.0 {
                self.gauge[x] = k.scale(1.0 / nk);
            }
        }
    }

    /// Gauss–Seidel sweep of damped Newton steps on each site.
    fn relax_sweep(&mut self) -> Result<()> {
        let curvature = 4.0 * self.cfg.ndim() as f64;
        for x in 0..self.cfg.sites() {
            let g = self.site_gradient(x)?;
            if alg_dot(&g, &g) == 0.0 {
                continue;
            }
            let f0 = self.local(x, &self.gauge[x])?;
            let mut t = 1.0 / curvature;
            for _ in 0..30 {
                let cand = Quat::exp(alg_scale(&g, -t)).mul(&self.gauge[x]).normalized();
                match self.local(x, &cand) {
                    Ok(f) if f < f0 => {
                        self.gauge[x] = cand;
                        break;
                    }
                    _ => t *= 0.5,
                }
            }
        }
        Ok(())
    }

    fn full_gradient(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(3 * self.gauge.len());
        for x in 0..self.gauge.len() {
            out.extend_from_slice(&self.site_gradient(x)?);
        }
        Ok(out)
    }

    /// Newton step on all sites at once, with the Hessian from central
    /// differences of the gradient and inverted on its positive eigenspace
    /// (constant gauge rotations can be exact symmetries). Returns the new
    /// functional value, or `None` if no decrease was found.
    fn newton_step(&mut self, f: f64) -> Result<Option<f64>> {
        let n = 3 * self.gauge.len();
        let grad = self.full_gradient()?;
        let h = 1e-5;
        let mut hess = Mat::zeros(n, n);
        for j in 0..n {
            let (x, k) = (j / 3, j % 3);
            let saved = self.gauge[x];
            let mut v = [0.0; 3];
            v[k] = h;
            self.gauge[x] = Quat::exp(v).mul(&saved);
            let gp = self.full_gradient();
            self.gauge[x] = Quat::exp(alg_scale(&v, -1.0)).mul(&saved);
            let gm = self.full_gradient();
            self.gauge[x] = saved;
            let (gp, gm) = (gp?, gm?);
            for i in 0..n {
                hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let hess = hess.add(&hess.transpose()).scaled(0.5);
        let eig = sym_eigen(&hess)?;
        let top = eig.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut step = vec![0.0; n];
        for (k, &lam) in eig.values.iter().enumerate() {
            if lam > 1e-9 * top {
                let v = eig.vectors.column(k);
                let c = v.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() / lam;
                for (s, vi) in step.iter_mut().zip(&v) {
                    *s -= c * vi;
                }
            }
        }
        let saved = self.gauge.clone();
        let res0 = norm(&grad);
        // Close to the minimizer the decrease of F drops below its rounding,
        // so a full step is also accepted when it shrinks the gradient.
        for x in 0..saved.len() {
            let d = [step[3 * x], step[3 * x + 1], step[3 * x + 2]];
            self.gauge[x] = Quat::exp(d).mul(&saved[x]).normalized();
        }
        if let (Ok(f_new), Ok(g_new)) = (self.functional(), self.full_gradient()) {
            if f_new <= f * (1.0 + 1e-12) && norm(&g_new) < 0.5 * res0 {
                return Ok(Some(f_new.min(f)));
            }
        }
        let mut t = 1.0;
        for _ in 0..40 {
            for x in 0..saved.len() {
                let d = [t * step[3 * x], t * step[3 * x + 1], t * step[3 * x + 2]];
                self.gauge[x] = Quat::exp(d).mul(&saved[x]).normalized();
            }
            if let Ok(f_new) = self.functional() {
                if f_new < f {
                    return Ok(Some(f_new));
                }
            }
            t *= 0.5;
        }
        self.gauge = saved;
        Ok(None)
    }
}

/// Minimizes `Σ_links |log(g_x U g_{x+μ}⁻¹ V⁻¹)|²` over per-site gauge
/// transformations `g`, returning `g·U` and the gauge.
pub fn lattice_gauge_fix(
    cfg: &LatticeGauge,
    reference: &LatticeGauge,
    opts: &LatticeGaugeFixOptions,
) -> Result<(LatticeGauge, LatticeGaugeFix)> {
    lattice_gauge_fix_from(cfg, reference, &vec![Quat::IDENTITY; cfg.sites()], opts)
}

/// As [`lattice_gauge_fix`], starting from the gauge `initial`.
pub fn lattice_gauge_fix_from(
    cfg: &LatticeGauge,
    reference: &LatticeGauge,
    initial: &[Quat],
    opts: &LatticeGaugeFixOptions,
) -> Result<(LatticeGauge, LatticeGaugeFix)> {
    cfg.same_shape(reference)?;
    if initial.len() != cfg.sites() {
        return Err(Error::Dimension {
            expected: cfg.sites(),
            got: initial.len(),
        });
    }
    let diff = cfg.difference(reference, 0.0)?;
    let worst = diff.iter().map(|v| alg_dot(v, v).sqrt()).fold(0.0, f64::max);
    if worst > opts.max_link_distance {
        return Err(Error::OutsideBasin {
            norm: worst,
            radius: opts.max_link_distance,
        });
    }
    let distance_before = diff.iter().map(|v| alg_dot(v, v)).sum::<f64>().sqrt();
    let mut st = FixState {
        cfg,
        reference,
        gauge: initial.to_vec(),
        log_tol: opts.log_tol,
    };
    let mut f = st.functional()?;
    // Trace maximization is cheap and lands close to the minimizer.
    for _ in 0..20 {
        let saved = st.gauge.clone();
        st.trace_sweep();
        match st.functional() {
            Ok(fn_) if fn_ < f => f = fn_,
            _ => {
                st.gauge = saved;
                break;
            }
        }
    }
    let mut sweeps = 0;
    let mut residual = st.residual()?;
    while residual > opts.tol * f.sqrt() + opts.abs_tol {
        if sweeps >= opts.max_sweeps {
            return Err(Error::GaugeNoConvergence {
                iterations: sweeps,
                residual,
            });
        }
        let f_new = if sweeps < opts.relax_sweeps {
            st.relax_sweep()?;
            Some(st.functional()?).filter(|v| *v < f)
        } else {
            st.newton_step(f)?
        };
        sweeps += 1;
        residual = st.residual()?;
        match f_new {
            Some(v) => f = v,
            // No further decrease is representable.
            None if sweeps > opts.relax_sweeps => break,
            None => sweeps = opts.relax_sweeps,
        }
    }
    if residual > opts.tol * f.sqrt() + opts.abs_tol {
        return Err(Error::GaugeNoConvergence {
            iterations: sweeps,
            residual,
        });
    }
    let fixed = cfg.gauge_transform(&st.gauge)?;
    let algebra = st
        .gauge
        .iter()
        .map(|g| g.log(0.0).unwrap_or([core::f64::consts::PI, 0.0, 0.0]))
        .collect();
    let distance_after = fixed.distance(reference)?;
    Ok((
        fixed,
        LatticeGaugeFix {
            algebra,
            gauge: st.gauge,
            residual,
            sweeps,
            distance_before,
            distance_after,
        },
    ))
}

/// Discrete H¹ inner product of link fields `a`, `b` (three reals per link,
/// flattened): `Σ a·b + Σ_{x,μ} Σ_{ν≠μ} Σ_± (a_μ(x±ν) − a_μ(x))·(b_μ(x±ν) − b_μ(x))`.
pub fn h1_inner(lattice: &LatticeGauge, a: &[f64], b: &[f64]) -> f64 {
    let d = lattice.ndim();
    let at = |v: &[f64], x: usize, mu: usize, k: usize| v[3 * (x * d + mu) + k];
    let mut s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    for x in 0..lattice.sites() {
        for mu in 0..d {
            for nu in 0..d {
                if nu == mu {
                    continue;
                }
                for fwd in [true, false] {
                    let y = lattice.neighbor(x, nu, fwd);
                    for k in 0..3 {
                        s += (at(a, y, mu, k) - at(a, x, mu, k)) * (at(b, y, mu, k) - at(b, x, mu, k));
                    }
                }
            }
        }
    }
    s
}

pub fn h1_norm(lattice: &LatticeGauge, a: &[f64]) -> f64 {
    h1_inner(lattice, a, a).max(0.0).sqrt()
}

fn flatten(a: &[Alg]) -> Vec<f64> {
    a.iter().flat_map(|v| v.iter().copied()).collect()
}

#[derive(Debug, Clone)]
pub struct LatticeSecant {
    pub trace: SecantTrace,
    /// Gauge-fix residuals per configuration (empty when unfixed).
    pub residuals: Vec<f64>,
    /// `max_x |g_{i+1}(x) g_i(x)⁻¹ − 1|` between consecutive configurations.
    pub continuity: Vec<f64>,
}

/// Secant of `a = log(U V⁻¹)` in the discrete H¹ inner product, optionally
/// gauge-fixing every configuration to the reference first.
pub fn discrete_h1_secant(
    configs: &[LatticeGauge],
    reference: &LatticeGauge,
    fix: bool,
    opts: &LatticeGaugeFixOptions,
) -> Result<LatticeSecant> {
    let mut disp = Vec::with_capacity(configs.len());
    let mut residuals = Vec::new();
    let mut gauges: Vec<Vec<Quat>> = Vec::new();
    for (index, cfg) in configs.iter().enumerate() {
        let u = if fix {
            let init = gauges.last().cloned().unwrap_or_else(|| vec![Quat::IDENTITY; cfg.sites()]);
            let (fixed, info) = lattice_gauge_fix_from(cfg, reference, &init, opts).map_err(|e| Error::GaugeFixFailed {
                index,
                reason: e.to_string(),
            })?;
            residuals.push(info.residual);
            gauges.push(info.gauge);
            fixed
        } else {
            cfg.clone()
        };
        disp.push(flatten(&u.difference(reference, opts.log_tol)?));
    }
    let trace = secant_trace_with(&disp, |a, b| h1_inner(reference, a, b))?;
    let continuity = gauges
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(g1, g0)| g1.mul(&g0.conj()).add(&Quat::new(-1.0, 0.0, 0.0, 0.0)).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(LatticeSecant {
        trace,
        residuals,
        continuity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_flipped_link_costs_twelve() {
        let mut cfg = LatticeGauge::identity(&[2, 2, 2, 2]).unwrap();
        assert_eq!(cfg.wilson_action(), 0.0);
        cfg.set_link(5, 2, Quat::new(-1.0, 0.0, 0.0, 0.0));
        assert_eq!(cfg.wilson_action(), 12.0);
    }

    #[test]
    fn neighbors_wrap() {
        let cfg = LatticeGauge::identity(&[3, 2]).unwrap();
        // site = 2·c0 + c1
        assert_eq!(cfg.neighbor(4, 0, true), 0);
        assert_eq!(cfg.neighbor(0, 0, false), 4);
        assert_eq!(cfg.neighbor(1, 1, true), 0);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = LatticeGauge::random_near_identity(&[2, 3, 2], 0.4, &mut rng).unwrap();
        let grad = cfg.gradient();
        let h = 1e-6;
        for &i in &[0usize, 7, 17] {
            for k in 0..3 {
                let mut v = [0.0; 3];
                v[k] = h;
                let mut p = cfg.clone();
                p.links[i] = Quat::exp(v).mul(&p.links[i]);
                let mut m = cfg.clone();
                m.links[i] = Quat::exp(alg_scale(&v, -1.0)).mul(&m.links[i]);
                let fd = (p.wilson_action() - m.wilson_action()) / (2.0 * h);
                assert!((fd - grad[i][k]).abs() < 1e-8, "{fd} vs {}", grad[i][k]);
            }
        }
    }

    #[test]
    fn identity_is_stationary() {
        let cfg = LatticeGauge::identity(&[2, 2, 2, 2]).unwrap();
        let flow = lattice_flow(&cfg, &LatticeFlowOptions::default()).unwrap();
        assert!(flow.frames.iter().all(|f| f.config == cfg));
    }

    #[test]
    fn gauge_fix_recovers_orbit_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reference = LatticeGauge::random_near_identity(&[2, 2, 2, 2], 0.3, &mut rng).unwrap();
        let gauge: Vec<Quat> = (0..reference.sites())
            .map(|_| Quat::random_near_identity(0.3, &mut rng))
            .collect();
        let moved = reference.gauge_transform(&gauge).unwrap();
        let (fixed, info) = lattice_gauge_fix(&moved, &reference, &LatticeGaugeFixOptions::default()).unwrap();
        assert!(info.distance_after < 1e-8, "{}", info.distance_after);
        assert!(fixed.distance(&reference).unwrap() < 1e-8);
    }

    #[test]
    fn h1_single_link_counts_neighbors() {
        let cfg = LatticeGauge::identity(&[2, 2, 2, 2]).unwrap();
        let mut a = vec![0.0; 3 * cfg.links().len()];
        a[3 * cfg.link_index(6, 1)] = 0.5;
        // link term plus 12 adjacent differences, each 0.25
        assert!((h1_inner(&cfg, &a, &a) - 13.0 * 0.25).abs() < 1e-15);
    }
}
