//! Asymptotic analyzers over converged trajectories.
//!
//! Decades are always counted relative to the final radius `r_end`: decade
//! `j` holds the samples with `r ∈ [r_end·10^j, r_end·10^{j+1})`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{radial_angular, AnalyticField};
use crate::fit::{aitken, line_fit, lower_envelope_fit, mean, nearest_rational, LineFit};
use crate::flow::{Sample, Trajectory};
use crate::linalg::{dot, norm, solve, sub, Mat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WepsParams {
    pub epsilon: f64,
    pub delta: f64,
    pub omega: f64,
    pub alpha: f64,
}

impl Default for WepsParams {
    fn default() -> Self {
        WepsParams {
            epsilon: 0.1,
            delta: 0.1,
            omega: 0.05,
            alpha: 0.05,
        }
    }
}

impl WepsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.delta > 0.0 && self.omega > 0.0 && self.alpha > 0.0) {
            return Err(Error::InvalidParameter("cone parameters must be positive".into()));
        }
        if !(self.alpha < 2.0 * self.omega) {
            return Err(Error::InvalidParameter("alpha must be below 2*omega".into()));
        }
        Ok(())
    }
}

/// Decade of `r` relative to `r_end` (0 for the final decade).
pub fn decade_of(r: f64, r_end: f64) -> i32 {
    if r <= r_end {
        0
    } else {
        (r / r_end).log10().floor() as i32
    }
}

fn final_r(traj: &Trajectory) -> Result<f64> {
    let r = traj.last().r();
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::SampleAtOrigin {
            index: traj.len() - 1,
        })
    }
}

/// `r ℰ_r / ℰ`, undefined where ℰ = 0 or at the origin.
pub fn euler_ratio(smp: &Sample) -> Option<f64> {
    let rad = smp.radial.as_ref()?;
    let e = smp.value();
    if e == 0.0 {
        None
    } else {
        Some(rad.r * rad.e_r / e)
    }
}

pub fn in_weps(smp: &Sample, epsilon: f64) -> bool {
    match &smp.radial {
        Some(rad) => smp.value() != 0.0 && epsilon * rad.e_theta_norm() <= rad.e_r.abs(),
        None => false,
    }
}

/// Cone membership of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label {
    pub weps: bool,
    /// Index into the exponent list of the component `W^ε_{l_i}`, if any.
    pub component: Option<usize>,
    /// `r^{−ω}‖ℰ_θ‖ ≤ |ℰ_r|`.
    pub refined: bool,
}

impl Label {
    pub fn name(&self) -> &'static str {
        match (self.weps, self.component, self.refined) {
            (false, _, _) => "outside",
            (true, None, _) => "weps",
            (true, Some(_), false) => "weps_l",
            (true, Some(_), true) => "w_omega_l",
        }
    }
}

pub fn weps_membership(traj: &Trajectory, params: &WepsParams, exponents: &[f64]) -> Vec<Label> {
    traj.samples
        .iter()
        .map(|smp| {
            let weps = in_weps(smp, params.epsilon);
            if !weps {
                return Label {
                    weps: false,
                    component: None,
                    refined: false,
                };
            }
            let rad = smp.radial.as_ref().unwrap();
            let ratio = rad.r * rad.e_r / smp.value();
            let window = rad.r.powf(params.delta);
            let component = exponents
                .iter()
                .enumerate()
                .filter(|(_, l)| (ratio - **l).abs() <= window)
                .min_by(|a, b| {
                    (ratio - a.1)
                        .abs()
                        .partial_cmp(&(ratio - b.1).abs())
                        .unwrap_or(core::cmp::Ordering::Equal)
                })
                .map(|(i, _)| i);
            let refined = rad.r.powf(-params.omega) * rad.e_theta_norm() <= rad.e_r.abs();
            Label {
                weps,
                component,
                refined,
            }
        })
        .collect()
}

/// Fraction of samples per decade (index = decade) labelled with the given
/// component.
pub fn component_fraction_per_decade(traj: &Trajectory, labels: &[Label], component: usize) -> Result<Vec<f64>> {
    let r_end = final_r(traj)?;
    let mut hits: Vec<(usize, usize)> = Vec::new();
    for (smp, lab) in traj.samples.iter().zip(labels) {
        let d = decade_of(smp.r(), r_end) as usize;
        if hits.len() <= d {
            hits.resize(d + 1, (0, 0));
        }
        hits[d].1 += 1;
        if lab.component == Some(component) {
            hits[d].0 += 1;
        }
    }
    Ok(hits
        .into_iter()
        .map(|(h, n)| if n == 0 { 0.0 } else { h as f64 / n as f64 })
        .collect())
}

#[derive(Debug, Clone)]
pub struct CharExponent {
    /// `(r, rℰ_r/ℰ)` on the W^ε samples.
    pub series: Vec<(f64, f64)>,
    pub l_hat: f64,
    pub rational: (i64, u32),
    pub rational_error: f64,
    /// Set when the extrapolated limit is more than 0.02 from every `p/q`
    /// with `q ≤ 12`.
    pub off_rational: bool,
}

fn nearest_by_log_r(series: &[(f64, f64)], target: f64) -> f64 {
    series
        .iter()
        .min_by(|a, b| {
            (a.0.ln() - target.ln())
                .abs()
                .partial_cmp(&(b.0.ln() - target.ln()).abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        })
        .map(|p| p.1)
        .unwrap()
}

pub fn estimate_char_exponent(traj: &Trajectory, params: &WepsParams) -> Result<CharExponent> {
    let series: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| in_weps(s, params.epsilon))
        .filter_map(|s| euler_ratio(s).map(|q| (s.r(), q)))
        .collect();
    let span = match (
        series.iter().map(|p| p.0).fold(f64::NAN, f64::max),
        series.iter().map(|p| p.0).fold(f64::NAN, f64::min),
    ) {
        (hi, lo) if hi > 0.0 && lo > 0.0 => (hi / lo).log10(),
        _ => 0.0,
    };
    if series.len() < 3 || span < 2.0 {
        return Err(Error::InsufficientData(
            "fewer than two decades of cone samples".into(),
        ));
    }
    let r_min = series.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let q0 = nearest_by_log_r(&series, 100.0 * r_min);
    let q1 = nearest_by_log_r(&series, 10.0 * r_min);
    let q2 = nearest_by_log_r(&series, r_min);
    let l_hat = aitken(q0, q1, q2);
    let (p, q, err) = nearest_rational(l_hat, 12);
    Ok(CharExponent {
        series,
        l_hat,
        rational: (p, q),
        rational_error: err,
        off_rational: err > 0.02,
    })
}

#[derive(Debug, Clone)]
pub struct LojExponent {
    pub rho_raw: f64,
    pub rho_hat: f64,
    pub clipped: bool,
    /// `exp(intercept)` of the log–log fit.
    pub c_hat: f64,
    /// `min ‖ℰ′‖/ℰ^ρ̂` over every sample with ℰ > 0.
    pub c_lower: f64,
    pub fit: LineFit,
}

/// Largest `ρ` admitted by the clip to `[1/2, 1)`.
const RHO_MAX: f64 = 1.0 - 1e-9;

pub fn estimate_loj_exponent(traj: &Trajectory) -> Result<LojExponent> {
    let r_end = final_r(traj)?;
    let pos: Vec<&Sample> = traj.samples.iter().filter(|s| s.value() > 0.0).collect();
    let r_max = pos.iter().map(|s| s.r()).fold(0.0, f64::max);
    if pos.len() < 3 || r_max < 100.0 * r_end {
        return Err(Error::InsufficientData(
            "fewer than two decades with positive energy".into(),
        ));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pos
        .iter()
        .filter(|s| s.r() <= 100.0 * r_end && s.grad_norm() > 0.0)
        .map(|s| (s.value().ln(), s.grad_norm().ln()))
        .unzip();
    let fit = line_fit(&lx, &ly)?;
    let rho_hat = fit.slope.clamp(0.5, RHO_MAX);
    let c_lower = pos
        .iter()
        .map(|s| s.grad_norm() / s.value().powf(rho_hat))
        .fold(f64::INFINITY, f64::min);
    Ok(LojExponent {
        rho_raw: fit.slope,
        rho_hat,
        clipped: rho_hat != fit.slope,
        c_hat: fit.intercept.exp(),
        c_lower,
        fit,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Bochnak {
    /// `min r‖ℰ′‖/|ℰ|` over all samples with ℰ ≠ 0.
    pub c_bl: f64,
    /// The same minimum over the final two decades.
    pub c_bl_tail: f64,
}

pub fn bochnak_check(traj: &Trajectory) -> Result<Bochnak> {
    let r_end = final_r(traj)?;
    let vals: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.value() != 0.0)
        .map(|s| (s.r(), s.r() * s.grad_norm() / s.value().abs()))
        .collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData("no samples with nonzero energy".into()));
    }
    let c_bl = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let c_bl_tail = vals
        .iter()
        .filter(|v| v.0 < 100.0 * r_end)
        .map(|v| v.1)
        .fold(f64::INFINITY, f64::min);
    Ok(Bochnak { c_bl, c_bl_tail })
}

#[derive(Debug, Clone)]
pub struct SecantTrace {
    /// Unit secant directions.
    pub points: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Great-circle increment between consecutive directions.
    pub increments: Vec<f64>,
    /// Cumulative great-circle length at each point.
    pub spherical_length: Vec<f64>,
    pub chord_length: f64,
    /// Length accumulated per decade; index 0 is the final decade.
    pub tail_lengths: Vec<f64>,
    /// Largest pairwise distance between directions with `r ≤ 10·r_end`.
    pub cauchy_gap: f64,
}

impl SecantTrace {
    pub fn total_length(&self) -> f64 {
        *self.spherical_length.last().unwrap_or(&0.0)
    }

    /// Successive decade ratios `tail[j]/tail[j+1]` for the final `decades`
    /// decades. `None` where both lengths vanish.
    pub fn tail_ratios(&self, decades: usize) -> Vec<Option<f64>> {
        (0..decades.saturating_sub(1))
            .map(|j| {
                let a = self.tail_lengths.get(j).copied().unwrap_or(0.0);
                let b = self.tail_lengths.get(j + 1).copied().unwrap_or(0.0);
                if b > 0.0 {
                    Some(a / b)
                } else if a == 0.0 {
                    None
                } else {
                    Some(f64::INFINITY)
                }
            })
            .collect()
    }

    /// Each of the final `decades` decades is shorter than `ratio` times the
    /// one before it, or below `vanish`.
    pub fn tail_decays(&self, decades: usize, ratio: f64, vanish: f64) -> bool {
        if self.tail_lengths.len() < decades {
            return false;
        }
        (0..decades - 1).all(|j| {
            let a = self.tail_lengths[j];
            a <= vanish || a < ratio * self.tail_lengths[j + 1]
        })
    }
}

/// Secant trace of displacements `p_i` (from the limit point) in the inner
/// product `inner`.
pub fn secant_trace_with<F>(displacements: &[Vec<f64>], inner: F) -> Result<SecantTrace>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if displacements.len() < 2 {
        return Err(Error::InsufficientData("secant needs two samples".into()));
    }
    let mut radii = Vec::with_capacity(displacements.len());
    let mut points = Vec::with_capacity(displacements.len());
    for (index, p) in displacements.iter().enumerate() {
        let r = inner(p, p).max(0.0).sqrt();
        if !(r > 0.0) {
            return Err(Error::SampleAtOrigin { index });
        }
        radii.push(r);
        points.push(p.iter().map(|x| x / r).collect::<Vec<f64>>());
    }
    let dist = |a: &[f64], b: &[f64]| {
        let d = sub(a, b);
        inner(&d, &d).max(0.0).sqrt()
    };
    let r_end = *radii.last().unwrap();
    let mut increments = Vec::with_capacity(points.len() - 1);
    let mut spherical_length = vec![0.0];
    let mut chord_length = 0.0;
    let mut tail_lengths: Vec<f64> = Vec::new();
    for i in 0..points.len() - 1 {
        let chord = dist(&points[i], &points[i + 1]);
        // 2·asin(c/2) equals the clamped arccos of the inner product and
        // stays accurate for tiny angles.
        let theta = 2.0 * (0.5 * chord).min(1.0).asin();
        increments.push(theta);
        chord_length += chord;
        spherical_length.push(spherical_length[i] + theta);
        let d = decade_of(radii[i + 1], r_end).max(0) as usize;
        if tail_lengths.len() <= d {
            tail_lengths.resize(d + 1, 0.0);
        }
        tail_lengths[d] += theta;
    }
    let last: Vec<usize> = (0..points.len()).filter(|&i| radii[i] <= 10.0 * r_end).collect();
    let mut cauchy_gap: f64 = 0.0;
    for (a, &i) in last.iter().enumerate() {
        for &j in &last[a + 1..] {
            cauchy_gap = cauchy_gap.max(dist(&points[i], &points[j]));
        }
    }
    Ok(SecantTrace {
        points,
        radii,
        increments,
        spherical_length,
        chord_length,
        tail_lengths,
        cauchy_gap,
    })
}

/// Euclidean secant trace of a trajectory converging to the origin.
pub fn secant_trace(traj: &Trajectory) -> Result<SecantTrace> {
    let pts: Vec<Vec<f64>> = traj.samples.iter().map(|s| s.u.clone()).collect();
    secant_trace_with(&pts, dot)
}

#[derive(Debug, Clone)]
pub struct SigmaRatio {
    /// `(r, σ/r)`, where σ is the length remaining to the final sample plus
    /// the straight closure `r_end` to the origin.
    pub series: Vec<(f64, f64)>,
    pub final_decade_mean: f64,
}

impl SigmaRatio {
    /// Largest `|σ/r − 1|` over samples with `r ≤ r_max`.
    pub fn max_deviation_below(&self, r_max: f64) -> Option<f64> {
        self.series
            .iter()
            .filter(|p| p.0 <= r_max)
            .map(|p| (p.1 - 1.0).abs())
            .fold(None, |m, d| Some(m.map_or(d, |m: f64| m.max(d))))
    }
}

pub fn sigma_ratio(traj: &Trajectory) -> Result<SigmaRatio> {
    if !traj.converged() {
        return Err(Error::NotConverged);
    }
    let r_end = final_r(traj)?;
    let total = *traj.sigma.last().unwrap();
    let series: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .zip(&traj.sigma)
        .map(|(s, sig)| (s.r(), (total - sig + r_end) / s.r()))
        .collect();
    let tail: Vec<f64> = series.iter().filter(|p| p.0 <= 10.0 * r_end).map(|p| p.1).collect();
    Ok(SigmaRatio {
        final_decade_mean: mean(&tail).unwrap_or(1.0),
        series,
    })
}

#[derive(Debug, Clone)]
pub struct EMonitor {
    pub l: f64,
    pub r: Vec<f64>,
    /// `E = ℰ/r^l`.
    pub e: Vec<f64>,
    /// `g = E + r^α`.
    pub g: Vec<f64>,
    /// Closed-form `dE/ds` along the unit-speed flow.
    pub de_ds: Vec<f64>,
    /// `|1 − lℰ/(rℰ_r)|`.
    pub w_ratio: Vec<f64>,
    pub a0_hat: f64,
    /// `max |E − a0|/a0` over the final decade.
    pub a0_fluctuation: f64,
    /// Increases of `g` beyond the rounding budget with `r ≤ r_max`.
    pub monotone_violations: usize,
    /// Increases of `g` before the asymptotic region.
    pub early_increases: usize,
    /// Refined-cone samples with `w_ratio > r^{2ω}/2`.
    pub w_violations: usize,
    /// Samples where the closed-form `dE/ds` disagrees in sign with the
    /// measured difference of E (both beyond rounding).
    pub sign_mismatches: usize,
    /// Samples outside the refined cone and outside every lower component
    /// where `dE/ds ≥ 0`.
    pub decrease_violations: usize,
    /// Slope of `log E` against `log r` over the final decade; strongly
    /// negative when `l` exceeds the true exponent.
    pub tail_slope: f64,
    pub divergent: bool,
}

/// `r_max` bounds the asymptotic region in which `g` must decrease; the
/// monotonicity claim says nothing about the start of a trajectory.
pub fn monitor_e(
    traj: &Trajectory,
    l: f64,
    params: &WepsParams,
    exponents: &[f64],
    r_max: f64,
) -> Result<EMonitor> {
    if !(l > 0.0) {
        return Err(Error::InvalidParameter("l must be positive".into()));
    }
    if traj.samples.len() < 2 {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let r_end = final_r(traj)?;
    let labels = weps_membership(traj, params, exponents);
    let n = traj.len();
    let mut out = EMonitor {
        l,
        r: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        de_ds: Vec::with_capacity(n),
        w_ratio: Vec::with_capacity(n),
        a0_hat: 0.0,
        a0_fluctuation: 0.0,
        monotone_violations: 0,
        early_increases: 0,
        w_violations: 0,
        sign_mismatches: 0,
        decrease_violations: 0,
        tail_slope: 0.0,
        divergent: false,
    };
    for (i, smp) in traj.samples.iter().enumerate() {
        let rad = smp.radial.as_ref().ok_or(Error::SampleAtOrigin { index: i })?;
        let r = rad.r;
        let v = smp.value();
        let gn = smp.grad_norm();
        let e = v / r.powf(l);
        out.r.push(r);
        out.e.push(e);
        out.g.push(e + r.powf(params.alpha));
        let d = -gn / r.powf(l) + l * v * rad.e_r / (r.powf(l + 1.0) * gn);
        out.de_ds.push(d);
        let w = if rad.e_r != 0.0 {
            (1.0 - l * v / (r * rad.e_r)).abs()
        } else {
            f64::INFINITY
        };
        out.w_ratio.push(w);
        if labels[i].refined && labels[i].component.is_some() && w > 0.5 * r.powf(2.0 * params.omega) {
            out.w_violations += 1;
        }
        let lower_component = labels[i]
            .component
            .is_some_and(|c| exponents[c] < l - 1e-9);
        if !labels[i].refined && !lower_component && !(d < 0.0) {
            // Exact zeros arise only when E is constant along the flow.
            if d > 1e-12 * gn / r.powf(l) {
                out.decrease_violations += 1;
            }
        }
    }
    for i in 0..n - 1 {
        let budget = 1e-12 * out.g[i].abs();
        if out.g[i + 1] > out.g[i] + budget {
            if out.r[i] <= r_max {
                out.monotone_violations += 1;
            } else {
                out.early_increases += 1;
            }
        }
        let de = out.e[i + 1] - out.e[i];
        let both = 0.5 * (out.de_ds[i] + out.de_ds[i + 1]);
        let noise = 1e-10 * out.e[i].abs().max(out.e[i + 1].abs());
        if de.abs() > noise && both.abs() > 1e-10 * out.e[i].abs() && de.signum() != both.signum() {
            out.sign_mismatches += 1;
        }
    }
    let tail: Vec<usize> = (0..n).filter(|&i| out.r[i] <= 10.0 * r_end).collect();
    let tail_e: Vec<f64> = tail.iter().map(|&i| out.e[i]).collect();
    out.a0_hat = mean(&tail_e).unwrap_or(f64::NAN);
    out.a0_fluctuation = tail_e
        .iter()
        .map(|e| ((e - out.a0_hat) / out.a0_hat).abs())
        .fold(0.0, f64::max);
    let (lx, ly): (Vec<f64>, Vec<f64>) = tail
        .iter()
        .filter(|&&i| out.e[i] > 0.0)
        .map(|&i| (out.r[i].ln(), out.e[i].ln()))
        .unzip();
    out.tail_slope = line_fit(&lx, &ly).map(|f| f.slope).unwrap_or(0.0);
    out.divergent = out.tail_slope < -0.05 || !out.a0_hat.is_finite();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CriticalValue {
    /// `(r, ‖ℰ_θ‖/|ℰ_r|)`.
    pub ratio: Vec<(f64, f64)>,
    /// Slope of log ratio against log r over the final two decades; positive
    /// when the ratio decays as r → 0. Infinite when the ratio vanishes.
    pub decay_slope: f64,
    pub decaying: bool,
    pub a0: f64,
}

const RATIO_FLOOR: f64 = 1e-12;

pub fn asymptotic_critical_value(traj: &Trajectory, l: f64) -> Result<CriticalValue> {
    if !traj.converged() {
        return Err(Error::NotConverged);
    }
    let r_end = final_r(traj)?;
    let mut ratio = Vec::new();
    for (i, s) in traj.samples.iter().enumerate() {
        let rad = s.radial.as_ref().ok_or(Error::SampleAtOrigin { index: i })?;
        let q = if rad.e_r != 0.0 {
            rad.e_theta_norm() / rad.e_r.abs()
        } else {
            f64::INFINITY
        };
        ratio.push((rad.r, q));
    }
    let tail: Vec<(f64, f64)> = ratio.iter().copied().filter(|p| p.0 <= 100.0 * r_end).collect();
    // Ratios at rounding level carry no slope information.
    let nonzero: Vec<(f64, f64)> = tail
        .iter()
        .copied()
        .filter(|p| p.1 > RATIO_FLOOR && p.1.is_finite())
        .collect();
    let vanished = tail.last().is_some_and(|p| p.1 <= RATIO_FLOOR);
    let decay_slope = if nonzero.len() < 3 {
        if vanished {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        let (lx, ly): (Vec<f64>, Vec<f64>) = nonzero.iter().map(|p| (p.0.ln(), p.1.ln())).unzip();
        line_fit(&lx, &ly).map(|f| f.slope).unwrap_or(0.0)
    };
    let tail_e: Vec<f64> = traj
        .samples
        .iter()
        .filter(|s| s.r() <= 10.0 * r_end)
        .map(|s| s.value() / s.r().powf(l))
        .collect();
    Ok(CriticalValue {
        ratio,
        decay_slope,
        decaying: vanished || decay_slope > 0.0,
        a0: mean(&tail_e).unwrap_or(f64::NAN),
    })
}

/// Uniform samples from the punctured ball of the given radius.
pub fn sample_ball<R: Rng + ?Sized>(dim: usize, radius: f64, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2 = dot(&p, &p);
        if n2 <= 1.0 && n2 > 0.0 {
            out.push(p.iter().map(|x| x * radius).collect());
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Prop53Report {
    pub restricted: usize,
    /// Every restricted sample has `E = a` to rounding.
    pub degenerate_exact: bool,
    pub rho_a: Option<f64>,
    pub c: Option<f64>,
    pub violation: bool,
}

/// Fits `r‖E′‖ ≥ c|E − a|^{ρ_a}` for `E = ℰ/r^l` on the cloud points with
/// `|E_r| ≤ r^η‖E′‖` and `|E − a| ≤ window`.
pub fn prop53_probe(
    field: &AnalyticField,
    l: f64,
    a: f64,
    eta: f64,
    window: f64,
    cloud: &[Vec<f64>],
) -> Result<Prop53Report> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut restricted = 0usize;
    let mut exact = 0usize;
    for u in cloud {
        let r = norm(u);
        if r == 0.0 {
            continue;
        }
        let jet = field.eval_jet2(u)?;
        let rl = r.powf(l);
        let e = jet.value / rl;
        let grad_e: Vec<f64> = jet
            .gradient
            .iter()
            .zip(u)
            .map(|(g, x)| g / rl - l * jet.value * x / (rl * r * r))
            .collect();
        let split = radial_angular(&grad_e, u)?;
        let ge = norm(&grad_e);
        if split.e_r.abs() <= r.powf(eta) * ge && (e - a).abs() <= window {
            restricted += 1;
            let gap = (e - a).abs();
            if gap <= 1e-13 * a.abs().max(1.0) {
                exact += 1;
            } else if r * ge > 0.0 {
                xs.push(gap.ln());
                ys.push((r * ge).ln());
            }
        }
    }
    if restricted == 0 {
        return Err(Error::InsufficientData("restricted cloud is empty".into()));
    }
    if exact == restricted {
        return Ok(Prop53Report {
            restricted,
            degenerate_exact: true,
            rho_a: None,
            c: None,
            violation: false,
        });
    }
    let fit = lower_envelope_fit(&xs, &ys, 10, 0.05)?;
    Ok(Prop53Report {
        restricted,
        degenerate_exact: false,
        rho_a: Some(fit.slope),
        c: Some(fit.intercept.exp()),
        violation: !(fit.slope < 1.0),
    })
}

#[derive(Debug, Clone)]
pub struct PuiseuxFit {
    pub identically_zero: bool,
    pub l: f64,
    pub a_l: f64,
    /// Largest relative gap between `ℰ_r` and `l a_l r^{l−1}` over the three
    /// smallest radii.
    pub radial_consistency: f64,
}

/// `γ(t) = Σ_k coeffs[k] t^{k+1}`.
pub fn eval_curve(coeffs: &[Vec<f64>], t: f64) -> Vec<f64> {
    let n = coeffs.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    let mut tk = t;
    for c in coeffs {
        for (o, ci) in out.iter_mut().zip(c) {
            *o += ci * tk;
        }
        tk *= t;
    }
    out
}

fn curve_param_for_radius(coeffs: &[Vec<f64>], r: f64) -> Result<f64> {
    let mut hi = r.max(1e-300);
    let mut grow = 0;
    while norm(&eval_curve(coeffs, hi)) < r {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::InvalidParameter("curve does not reach the radius".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm(&eval_curve(coeffs, mid)) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn puiseux_fit(field: &AnalyticField, coeffs: &[Vec<f64>], r_samples: &[f64]) -> Result<PuiseuxFit> {
    if coeffs.is_empty() || coeffs[0].len() != field.dim() {
        return Err(Error::Dimension {
            expected: field.dim(),
            got: coeffs.first().map_or(0, Vec::len),
        });
    }
    let mut rs = Vec::new();
    let mut vals = Vec::new();
    let mut radial = Vec::new();
    for &r in r_samples {
        let t = curve_param_for_radius(coeffs, r)?;
        let p = eval_curve(coeffs, t);
        let jet = field.eval_jet2(&p)?;
        let rr = norm(&p);
        rs.push(rr);
        vals.push(jet.value);
        radial.push(radial_angular(&jet.gradient, &p)?.e_r);
    }
    let scale = rs.iter().fold(0.0f64, |m, r| m.max(*r));
    if vals.iter().all(|v| v.abs() <= 1e-14 * scale.max(1e-300)) {
        return Ok(PuiseuxFit {
            identically_zero: true,
            l: f64::NAN,
            a_l: 0.0,
            radial_consistency: 0.0,
        });
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = rs
        .iter()
        .zip(&vals)
        .filter(|(_, v)| **v != 0.0)
        .map(|(r, v)| (r.ln(), v.abs().ln()))
        .unzip();
    let fit = line_fit(&lx, &ly)?;
    let sign = vals.iter().find(|v| **v != 0.0).map_or(1.0, |v| v.signum());
    let l = fit.slope;
    let a_l = sign * fit.intercept.exp();
    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&i, &j| rs[i].partial_cmp(&rs[j]).unwrap_or(core::cmp::Ordering::Equal));
    let radial_consistency = order
        .iter()
        .take(3)
        .map(|&i| {
            let model = l * a_l * rs[i].powf(l - 1.0);
            ((radial[i] - model) / model).abs()
        })
        .fold(0.0, f64::max);
    Ok(PuiseuxFit {
        identically_zero: false,
        l,
        a_l,
        radial_consistency,
    })
}

/// Newton iteration on `ℰ′ = 0` from `u`; returns the critical point found.
pub fn polish_critical(field: &AnalyticField, u: &[f64]) -> Result<Vec<f64>> {
    let n = u.len();
    let mut p = u.to_vec();
    for _ in 0..2000 {
        let jet = field.eval_jet2(&p)?;
        if jet.grad_norm() == 0.0 {
            return Ok(p);
        }
        let h = Mat::from_rows(n, n, jet.hessian.clone());
        let step = match solve(&h, &jet.gradient) {
            Ok(s) => s,
            Err(_) => {
                return Err(Error::NewtonDiverged {
                    iterations: 0,
                    residual: jet.grad_norm(),
                    last: p,
                })
            }
        };
        p = sub(&p, &step);
        let moved = norm(&sub(&p, u));
        if norm(&step) <= 1e-13 * moved.max(f64::MIN_POSITIVE) {
            return Ok(p);
        }
        if !p.iter().all(|x| x.is_finite()) || moved > 10.0 * (1.0 + norm(u)) {
            break;
        }
    }
    Err(Error::NewtonDiverged {
        iterations: 2000,
        residual: field.gradient(&p).map(|g| norm(&g)).unwrap_or(f64::NAN),
        last: p,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalDistance {
    /// `min |ℰ|^{1/α}/d(u, S₀)` over the cone samples checked.
    pub c: f64,
    pub checked: usize,
    pub off_cone: usize,
    pub polish_failures: usize,
}

pub fn critical_distance_check(
    field: &AnalyticField,
    traj: &Trajectory,
    alpha: f64,
    params: &WepsParams,
) -> Result<CriticalDistance> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter("alpha must be positive".into()));
    }
    let mut c = f64::INFINITY;
    let mut checked = 0;
    let mut off_cone = 0;
    let mut polish_failures = 0;
    for s in &traj.samples {
        if !in_weps(s, params.epsilon) {
            off_cone += 1;
            continue;
        }
        let p = match polish_critical(field, &s.u) {
            Ok(p) => p,
            Err(_) => {
                polish_failures += 1;
                continue;
            }
        };
        let d = norm(&sub(&s.u, &p));
        if d == 0.0 {
            continue;
        }
        checked += 1;
        c = c.min(s.value().abs().powf(1.0 / alpha) / d);
    }
    if checked == 0 {
        return Err(Error::InsufficientData("no cone samples to check".into()));
    }
    Ok(CriticalDistance {
        c,
        checked,
        off_cone,
        polish_failures,
    })
}

/// `min |ℰ|/r^{1/(1−ρ)}` over the cone samples: the constant of the
/// lower bound on ℰ inside W^ε.
pub fn cone_energy_floor(traj: &Trajectory, rho: f64, params: &WepsParams) -> Result<f64> {
    let exponent = 1.0 / (1.0 - rho);
    let c = traj
        .samples
        .iter()
        .filter(|s| in_weps(s, params.epsilon))
        .map(|s| s.value().abs() / s.r().powf(exponent))
        .fold(f64::INFINITY, f64::min);
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::InsufficientData("no cone samples".into()))
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    /// The exponent whose component meets every decade below `r_star`.
    pub selected: Option<f64>,
    /// Number of decades examined.
    pub decades: usize,
    /// Components meeting every decade (exactly one is expected).
    pub candidates: usize,
    /// Bounds of `ℰ/r^l` over the selected component's samples.
    pub e_min: f64,
    pub e_max: f64,
}

/// For decades of absolute radius below `r_star`, finds the exponents whose
/// cone component has samples in every such decade.
pub fn exponent_selection(
    traj: &Trajectory,
    params: &WepsParams,
    exponents: &[f64],
    r_star: f64,
) -> Result<Selection> {
    let labels = weps_membership(traj, params, exponents);
    let r_end = final_r(traj)?;
    let top = (r_star.log10()).floor() as i32;
    let bottom = r_end.log10().floor() as i32;
    if top <= bottom {
        return Err(Error::InsufficientData("no decade below r_star".into()));
    }
    let decades: Vec<i32> = (bottom..top).collect();
    let mut hits = vec![vec![false; decades.len()]; exponents.len()];
    for (s, lab) in traj.samples.iter().zip(&labels) {
        let k = s.r().log10().floor() as i32;
        if let (Some(c), Some(d)) = (lab.component, decades.iter().position(|&x| x == k)) {
            hits[c][d] = true;
        }
    }
    let winners: Vec<usize> = (0..exponents.len()).filter(|&c| hits[c].iter().all(|h| *h)).collect();
    let selected = if winners.len() == 1 { Some(exponents[winners[0]]) } else { None };
    let (mut e_min, mut e_max) = (f64::INFINITY, f64::NEG_INFINITY);
    if let Some(l) = selected {
        for (s, lab) in traj.samples.iter().zip(&labels) {
            if lab.component == Some(winners[0]) && s.r() < r_star {
                let e = s.value() / s.r().powf(l);
                e_min = e_min.min(e);
                e_max = e_max.max(e);
            }
        }
    }
    Ok(Selection {
        selected,
        decades: decades.len(),
        candidates: winners.len(),
        e_min,
        e_max,
    })
}

/// Summary of the exponent measurements of one trajectory.
#[derive(Debug, Clone)]
pub struct ExponentReport {
    pub rho_hat: f64,
    pub c_hat: f64,
    pub l_hat: f64,
    pub l_candidates: Vec<f64>,
    pub c_bl: f64,
    /// `(1 − ρ̂)⁻¹ − l̂`.
    pub bound_slack: f64,
}

pub fn exponent_report(traj: &Trajectory, params: &WepsParams) -> Result<ExponentReport> {
    let loj = estimate_loj_exponent(traj)?;
    let ch = estimate_char_exponent(traj, params)?;
    let bl = bochnak_check(traj)?;
    let l_snap = ch.rational.0 as f64 / ch.rational.1 as f64;
    Ok(ExponentReport {
        rho_hat: loj.rho_hat,
        c_hat: loj.c_hat,
        l_hat: ch.l_hat,
        l_candidates: if ch.off_rational { vec![ch.l_hat] } else { vec![l_snap] },
        c_bl: bl.c_bl,
        bound_slack: 1.0 / (1.0 - loj.rho_hat) - ch.l_hat,
    })
}

impl core::fmt::Display for Label {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, FlowSpec};

    fn run(src: &str, start: [f64; 2]) -> Trajectory {
        let mut spec = FlowSpec::new(AnalyticField::parse(src, 2).unwrap(), start.to_vec());
        spec.grad_floor = 1e-300;
        integrate(&spec).unwrap()
    }

    #[test]
    fn radial_field_has_trivial_secant() {
        let t = run("x1^2 + x2^2", [0.6, 0.8]);
        let sec = secant_trace(&t).unwrap();
        assert!(sec.total_length() < 1e-12);
        assert!(sec.tail_decays(3, 0.9, 1e-12));
        let p = WepsParams::default();
        assert!(weps_membership(&t, &p, &[2.0]).iter().all(|l| l.component == Some(0)));
        let b = bochnak_check(&t).unwrap();
        assert!((b.c_bl - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lojasiewicz_exponent_of_quadratic() {
        let t = run("x1^2 + x2^2", [0.6, 0.8]);
        let loj = estimate_loj_exponent(&t).unwrap();
        assert!((loj.rho_hat - 0.5).abs() < 0.01);
        assert!((loj.c_hat - 2.0).abs() < 1e-6);
    }

    #[test]
    fn increment_is_stable_for_antipodes() {
        let s = secant_trace_with(&[vec![1.0, 0.0], vec![-1.0, 1e-300]], dot).unwrap();
        assert!((s.total_length() - core::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn secant_rejects_origin() {
        assert!(matches!(
            secant_trace_with(&[vec![1.0, 0.0], vec![0.0, 0.0]], dot),
            Err(Error::SampleAtOrigin { index: 1 })
        ));
    }

    #[test]
    fn puiseux_examples() {
        let rs: Vec<f64> = (1..8).map(|k| 10f64.powi(-k)).collect();
        let f = AnalyticField::parse("x1^2 + x2^2", 2).unwrap();
        let p = puiseux_fit(&f, &[vec![1.0, 0.0]], &rs).unwrap();
        assert!((p.l - 2.0).abs() < 1e-9 && (p.a_l - 1.0).abs() < 1e-8);
        let z = AnalyticField::parse("x2 - x1^2", 2).unwrap();
        assert!(puiseux_fit(&z, &[vec![1.0, 0.0], vec![0.0, 1.0]], &rs).unwrap().identically_zero);
        let g = AnalyticField::parse("x1^2 + x2^4", 2).unwrap();
        let p = puiseux_fit(&g, &[vec![1.0, 0.0], vec![0.0, 1.0]], &rs).unwrap();
        assert!((p.l - 2.0).abs() < 1e-3 && (p.a_l - 1.0).abs() < 1e-2);
    }

    #[test]
    fn critical_distance_of_quartic() {
        let f = AnalyticField::parse("(x1^2 + x2^2)^2", 2).unwrap();
        let t = run("(x1^2 + x2^2)^2", [0.6, 0.8]);
        let c = critical_distance_check(&f, &t, 4.0, &WepsParams::default()).unwrap();
        assert!((c.c - 1.0).abs() < 1e-6, "{}", c.c);
    }

    #[test]
    fn params_validate_alpha() {
        let mut p = WepsParams::default();
        assert!(p.validate().is_ok());
        p.alpha = 0.2;
        assert!(p.validate().is_err());
    }
}
