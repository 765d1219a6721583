//! Negative gradient flow integrators.
//!
//! The default parameterization is by arclength, `du/ds = −ℰ′/‖ℰ′‖`, so the
//! flow has unit speed and `s` is the length travelled. A time mode
//! `du/dt = −ℰ′` is available for group-invariant fields whose limit is not
//! the origin.
//!
//! Two embedded integrators are provided: the Dormand–Prince 5(4) pair with
//! PI step control, and a linearly implicit Rosenbrock 2(3) pair for fields
//! whose Hessian has very different scales along the path (for instance
//! `x⁴ + y²`, where the unit-speed field has a Jacobian of norm `~ 1/‖ℰ′‖`).

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{radial_split, AnalyticField, RadialSplit};
use crate::jet::Jet2;
use crate::linalg::{axpy, norm, solve, sub, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DormandPrince,
    Rosenbrock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Arclength,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradFloor,
    RFloor,
    MaxSteps,
    Stalled,
    /// The parameter limit `s_max` was reached.
    SMax,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradFloor => "grad_floor",
            StopReason::RFloor => "r_floor",
            StopReason::MaxSteps => "max_steps",
            StopReason::Stalled => "stalled",
            StopReason::SMax => "s_max",
        }
    }

    pub fn converged(self) -> bool {
        matches!(self, StopReason::GradFloor | StopReason::RFloor)
    }
}

#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub field: AnalyticField,
    pub start: Vec<f64>,
    pub grad_floor: f64,
    pub r_floor: f64,
    pub max_steps: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub method: Method,
    pub parameterization: Parameterization,
    /// A new sample is recorded once `r` (or `‖ℰ′‖` in time mode) has shrunk
    /// by this factor since the previous one.
    pub record_ratio: f64,
    /// Arclength steps are capped at `step_cap · ‖u‖`.
    pub step_cap: f64,
    pub s_max: Option<f64>,
}

impl FlowSpec {
    pub fn new(field: AnalyticField, start: Vec<f64>) -> Self {
        FlowSpec {
            field,
            start,
            grad_floor: 1e-12,
            r_floor: 1e-6,
            max_steps: 2_000_000,
            rel_tol: 1e-9,
            abs_tol: 1e-15,
            method: Method::DormandPrince,
            parameterization: Parameterization::Arclength,
            record_ratio: 0.95,
            step_cap: 0.05,
            s_max: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.start.len() != self.field.dim() {
            return Err(Error::Dimension {
                expected: self.field.dim(),
                got: self.start.len(),
            });
        }
        if !(self.grad_floor > 0.0) || !(self.r_floor > 0.0) {
            return bad("grad_floor and r_floor must be positive");
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-3) {
            return bad("rel_tol must lie in (0, 1e-3]");
        }
        if !(self.abs_tol >= 0.0) {
            return bad("abs_tol must be non-negative");
        }
        if !(self.record_ratio > 0.0 && self.record_ratio < 1.0) {
            return bad("record_ratio must lie in (0, 1)");
        }
        if !(self.step_cap > 0.0) {
            return bad("step_cap must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Arclength (or time in time mode).
    pub s: f64,
    pub u: Vec<f64>,
    pub jet: Jet2,
    /// `None` only if the sample sits exactly at the origin.
    pub radial: Option<RadialSplit>,
}

impl Sample {
    pub fn r(&self) -> f64 {
        norm(&self.u)
    }

    pub fn value(&self) -> f64 {
        self.jet.value
    }

    pub fn grad_norm(&self) -> f64 {
        self.jet.grad_norm()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Cumulative chord length (summed over accepted steps) at each sample.
    pub sigma: Vec<f64>,
    pub stop_reason: StopReason,
    pub parameterization: Parameterization,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|‖du/ds‖ − 1|` over accepted steps (arclength mode).
    pub max_speed_error: f64,
    /// Largest relative defect of `Δℰ = −∫‖ℰ′‖ ds` over accepted steps
    /// (arclength mode).
    pub max_dissipation_defect: f64,
    /// Accepted steps on which ℰ did not decrease beyond rounding.
    pub energy_increases: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.samples.iter().map(Sample::r).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(Sample::value).collect()
    }

    pub fn converged(&self) -> bool {
        self.stop_reason.converged()
    }
}

struct Rhs<'a> {
    field: &'a AnalyticField,
    mode: Parameterization,
}

impl Rhs<'_> {
    fn eval(&self, u: &[f64]) -> Result<Vec<f64>> {
        let g = self.field.gradient(u)?;
        Ok(self.direction_of(&g))
    }

    fn direction_of(&self, g: &[f64]) -> Vec<f64> {
        match self.mode {
            Parameterization::Time => g.iter().map(|x| -x).collect(),
            Parameterization::Arclength => {
                let gn = norm(g);
                if gn == 0.0 {
                    return g.to_vec();
                }
                g.iter().map(|x| -x / gn).collect()
            }
        }
    }

    fn jacobian(&self, jet: &Jet2) -> Mat {
        let n = jet.dim();
        let h = Mat::from_rows(n, n, jet.hessian.clone());
        match self.mode {
            Parameterization::Time => h.scaled(-1.0),
            Parameterization::Arclength => {
                let gn = jet.grad_norm();
                if gn == 0.0 {
                    return Mat::zeros(n, n);
                }
                let ghat: Vec<f64> = jet.gradient.iter().map(|g| g / gn).collect();
                let mut proj = Mat::identity(n);
                for i in 0..n {
                    for j in 0..n {
                        proj[(i, j)] -= ghat[i] * ghat[j];
                    }
                }
                proj.matmul(&h).scaled(-1.0 / gn)
            }
        }
    }
}

// Dormand–Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order weights.
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

struct StepResult {
    u: Vec<f64>,
    err: Vec<f64>,
}

fn dopri_step(rhs: &Rhs, u: &[f64], f0: &[f64], h: f64) -> Result<StepResult> {
    let n = u.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f0.to_vec());
    for (stage, row) in DP_A.iter().enumerate().skip(1) {
        let mut y = u.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = row[j];
            if a != 0.0 {
                for i in 0..n {
                    y[i] += h * a * kj[i];
                }
            }
        }
        if stage == 6 {
            // FSAL: the last stage is evaluated at the new point.
            let f = rhs.eval(&y)?;
            k.push(f);
            let mut err = alloc::vec![0.0; n];
            for (e, kj) in DP_E.iter().zip(&k) {
                for i in 0..n {
                    err[i] += h * e * kj[i];
                }
            }
            return Ok(StepResult { u: y, err });
        }
        k.push(rhs.eval(&y)?);
    }
    unreachable!()
}

fn rosenbrock_step(rhs: &Rhs, u: &[f64], f0: &[f64], jac: &Mat, h: f64) -> Result<StepResult> {
    let n = u.len();
    let d = 1.0 / (2.0 + core::f64::consts::SQRT_2);
    let e32 = 6.0 + core::f64::consts::SQRT_2;
    let w = Mat::identity(n).add(&jac.scaled(-h * d));
    let k1 = solve(&w, f0)?;
    let f1 = rhs.eval(&axpy(u, 0.5 * h, &k1))?;
    let k2 = axpy(&k1, 1.0, &solve(&w, &sub(&f1, &k1))?);
    let unew = axpy(u, h, &k2);
    let f2 = rhs.eval(&unew)?;
    let rhs3: Vec<f64> = (0..n)
        .map(|i| f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0[i]))
        .collect();
    let k3 = solve(&w, &rhs3)?;
    let err = (0..n).map(|i| h / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i])).collect();
    Ok(StepResult { u: unew, err })
}

/// Integrates the flow described by `spec`.
pub fn integrate(spec: &FlowSpec) -> Result<Trajectory> {
    spec.validate()?;
    let rhs = Rhs {
        field: &spec.field,
        mode: spec.parameterization,
    };
    let arclength = spec.parameterization == Parameterization::Arclength;
    let mut u = spec.start.clone();
    let mut jet = spec.field.eval_jet2(&u)?;
    let g0 = jet.grad_norm();
    if g0 <= spec.grad_floor {
        return Err(Error::CriticalStart { grad_norm: g0 });
    }
    let make_sample = |s: f64, u: &[f64], jet: &Jet2| Sample {
        s,
        u: u.to_vec(),
        jet: jet.clone(),
        radial: radial_split(jet, u).ok(),
    };

    let mut s = 0.0;
    let mut sigma = 0.0;
    let mut samples = alloc::vec![make_sample(0.0, &u, &jet)];
    let mut sigmas = alloc::vec![0.0];
    let mut r = norm(&u);
    let mut last_r = r;
    let mut last_g = g0;
    let mut f = rhs.direction_of(&jet.gradient);

    let (order, beta) = match spec.method {
        Method::DormandPrince => (5.0, 0.4 / 5.0),
        Method::Rosenbrock => (3.0, 0.0),
    };
    let mut h = if arclength {
        (1e-3 * r).max(1e-12)
    } else {
        1e-3 / (1.0 + g0)
    };
    let mut err_prev: f64 = 1.0;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut max_speed_error: f64 = 0.0;
    let mut max_dissipation_defect: f64 = 0.0;
    let mut energy_increases = 0usize;

    let stop = loop {
        if accepted + rejected >= spec.max_steps {
            break StopReason::MaxSteps;
        }
        if arclength {
            h = h.min(spec.step_cap * r);
        }
        if let Some(smax) = spec.s_max {
            if s >= smax {
                break StopReason::SMax;
            }
            h = h.min(smax - s);
        }
        if !(h > 1e-15 * (s.abs() + r).max(1e-300)) {
            break StopReason::Stalled;
        }
        let step = match spec.method {
            Method::DormandPrince => dopri_step(&rhs, &u, &f, h),
            Method::Rosenbrock => rosenbrock_step(&rhs, &u, &f, &rhs.jacobian(&jet), h),
        };
        let step = match step {
            Ok(st) => st,
            Err(Error::Domain { .. }) | Err(Error::Singular) => {
                rejected += 1;
                h *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let scale = spec.abs_tol + spec.rel_tol * norm(&u).max(norm(&step.u));
        let err = if scale > 0.0 { norm(&step.err) / scale } else { f64::INFINITY };
        if !(err <= 1.0) || step.u.iter().any(|x| !x.is_finite()) {
            rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-1.0 / order)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            continue;
        }
        let new_jet = match spec.field.eval_jet2(&step.u) {
            Ok(j) => j,
            Err(_) => {
                rejected += 1;
                h *= 0.25;
                continue;
            }
        };
        accepted += 1;
        let chord = norm(&sub(&step.u, &u));
        let gn_old = jet.grad_norm();
        let gn_new = new_jet.grad_norm();
        if arclength {
            let speed = norm(&f);
            max_speed_error = max_speed_error.max((speed - 1.0).abs());
            // Hermite quadrature of ∫‖ℰ′‖ ds using d‖ℰ′‖/ds = −ĝᵀHĝ.
            let de = new_jet.value - jet.value;
            let slope = |j: &Jet2| {
                let gn = j.grad_norm();
                let n = j.dim();
                let mut q = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        q += j.gradient[a] * j.hess(a, b) * j.gradient[b];
                    }
                }
                -q / (gn * gn)
            };
            let predicted = -(0.5 * h * (gn_old + gn_new) + h * h / 12.0 * (slope(&jet) - slope(&new_jet)));
            let defect = (de - predicted).abs() / (h * gn_old.max(gn_new));
            max_dissipation_defect = max_dissipation_defect.max(defect);
        }
        let budget = 8.0 * f64::EPSILON * jet.value.abs().max(new_jet.value.abs());
        if new_jet.value > jet.value + budget {
            energy_increases += 1;
        }
        s += h;
        sigma += chord;
        u = step.u;
        jet = new_jet;
        r = norm(&u);
        f = rhs.direction_of(&jet.gradient);

        let grad_stop = gn_new <= spec.grad_floor;
        let r_stop = arclength && r <= spec.r_floor;
        let smax_stop = spec.s_max.is_some_and(|m| s >= m);
        let thin = if arclength {
            r <= spec.record_ratio * last_r
        } else {
            gn_new <= spec.record_ratio * last_g || r <= spec.record_ratio * last_r
        };
        if thin || grad_stop || r_stop || smax_stop {
            samples.push(make_sample(s, &u, &jet));
            sigmas.push(sigma);
            last_r = r;
            last_g = gn_new;
        }
        if grad_stop {
            break StopReason::GradFloor;
        }
        if r_stop {
            break StopReason::RFloor;
        }
        if smax_stop {
            break StopReason::SMax;
        }

        let err_c = err.max(1e-10);
        let mut fac = 0.9 * err_c.powf(-(1.0 / order - beta * 0.75)) * err_prev.powf(beta);
        if beta == 0.0 {
            fac = 0.9 * err_c.powf(-1.0 / order);
        }
        h *= fac.clamp(0.2, 5.0);
        err_prev = err_c;
    };

    if samples.len() == 1 || samples.last().map(|x| x.s) != Some(s) {
        samples.push(make_sample(s, &u, &jet));
        sigmas.push(sigma);
    }
    Ok(Trajectory {
        samples,
        sigma: sigmas,
        stop_reason: stop,
        parameterization: spec.parameterization,
        accepted_steps: accepted,
        rejected_steps: rejected,
        max_speed_error,
        max_dissipation_defect,
        energy_increases,
    })
}

/// Per-sample comparison of the remaining length with the Lojasiewicz bound
/// `|ℰ|^{1−ρ} / (c (1−ρ))`, where `c` is the constant in `‖ℰ′‖ ≥ c|ℰ|^ρ`.
#[derive(Debug, Clone)]
pub struct RemainingLengthReport {
    pub remaining: Vec<f64>,
    pub bound: Vec<f64>,
    /// `1 − remaining/bound` per sample; non-negative where the bound holds.
    pub slack: Vec<f64>,
    pub worst_slack: f64,
}

pub fn remaining_length_check(traj: &Trajectory, rho: f64, c: f64) -> Result<RemainingLengthReport> {
    if !traj.converged() {
        return Err(Error::NotConverged);
    }
    if !(0.5..1.0).contains(&rho) {
        return Err(Error::InvalidParameter("rho must lie in [1/2, 1)".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter("c must be positive".into()));
    }
    let total = *traj.sigma.last().unwrap();
    let mut remaining = Vec::with_capacity(traj.len());
    let mut bound = Vec::with_capacity(traj.len());
    let mut slack = Vec::with_capacity(traj.len());
    let mut worst = f64::INFINITY;
    for (smp, sig) in traj.samples.iter().zip(&traj.sigma) {
        let rem = total - sig;
        let b = smp.value().abs().powf(1.0 - rho) / (c * (1.0 - rho));
        let sl = if b > 0.0 { 1.0 - rem / b } else if rem == 0.0 { 0.0 } else { f64::NEG_INFINITY };
        worst = worst.min(sl);
        remaining.push(rem);
        bound.push(b);
        slack.push(sl);
    }
    Ok(RemainingLengthReport {
        remaining,
        bound,
        slack,
        worst_slack: worst,
    })
}
