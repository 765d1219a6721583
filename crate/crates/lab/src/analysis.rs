//! Analyzers: each turns a scenario's computed data into a pass/fail result
//! with the measured quantities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secantlab_core::asymptotics::{
    bochnak_check, estimate_char_exponent, estimate_loj_exponent, euler_ratio, exponent_report, exponent_selection,
    monitor_e, secant_trace, secant_trace_with, sigma_ratio, EMonitor, ExponentReport, SecantTrace, WepsParams,
};
use secantlab_core::flow::{remaining_length_check, Trajectory};
use secantlab_core::gauge::lattice::{
    discrete_h1_secant, lattice_flow, random_gauge, LatticeFlow, LatticeFlowOptions, LatticeGauge,
    LatticeGaugeFixOptions, LatticeScheme,
};
use secantlab_core::gauge::toy::{gauge_fixed_secant, gauge_fixed_secant_points, so2_quotient, GaugeFixOptions, GroupAction};
use secantlab_core::linalg::{dot, norm, sub};
use secantlab_core::reduction::{build_reduced, compat_check, norm_distortion, spectral_split};
use secantlab_core::{AnalyticField, Result};

use crate::config::{LatticeSpec, Meta};
use crate::report::AnalysisResult;

/// Tolerances of the required properties.
pub mod tol {
    pub const SECANT_DECADES: usize = 3;
    pub const SECANT_RATIO: f64 = 0.9;
    pub const SECANT_VANISH: f64 = 1e-12;
    pub const CAUCHY_GAP: f64 = 1e-3;
    pub const EULER: f64 = 1e-10;
    pub const RHO: f64 = 0.01;
    pub const BOUND_MARGIN: f64 = 0.05;
    pub const BOUND_EQUALITY: f64 = 0.02;
    pub const CHAR_EXPONENT: f64 = 0.05;
    pub const SELECTION_R: f64 = 1e-2;
    pub const A0_FLUCTUATION: f64 = 1e-3;
    pub const A0: f64 = 0.01;
    /// `g = E + r^α` must decrease below this radius.
    pub const MONITOR_R_MAX: f64 = 1e-2;
    pub const SIGMA_R_QUADRATIC: f64 = 1e-3;
    pub const SIGMA_QUADRATIC: f64 = 0.01;
    pub const SIGMA_DEGENERATE: f64 = 0.05;
    pub const COMPAT_VALUE: f64 = 2.9;
    pub const COMPAT_RADIAL: f64 = 1.9;
    pub const NORM_DISTORTION: f64 = 2.9;
    pub const BOCHNAK_DEGREE: f64 = 0.05;
    pub const BOCHNAK_TAIL: f64 = 0.5;
    pub const LENGTH_EXACT: f64 = 1e-6;
    pub const GAUGE_RESIDUAL: f64 = 1e-10;
    pub const WOBBLE: f64 = 1e-8;
    pub const INVARIANCE: f64 = 1e-12;
    pub const DISSIPATION: f64 = 1e-3;
    pub const LATTICE_INVARIANCE: f64 = 1e-12;
}

/// Everything flow analyzers read, computed once per scenario.
pub struct FlowData<'a> {
    pub field: &'a AnalyticField,
    pub traj: &'a Trajectory,
    pub meta: &'a Meta,
    pub params: WepsParams,
    pub exponents: Option<&'a ExponentReport>,
}

impl FlowData<'_> {
    /// The exponent used to normalize E: the declared one, else the
    /// measured candidate.
    fn l(&self) -> Option<f64> {
        self.meta
            .l
            .or_else(|| self.exponents.and_then(|e| e.l_candidates.first().copied()))
    }

    fn cone_exponents(&self, l: f64) -> Vec<f64> {
        if self.meta.exponents.is_empty() {
            vec![l]
        } else {
            self.meta.exponents.clone()
        }
    }
}

pub fn run_flow_analysis(name: &str, required: bool, d: &FlowData<'_>) -> AnalysisResult {
    let res = AnalysisResult::new(name, required);
    let out = match name {
        "secant" => secant(res, d),
        "euler" => euler(res, d),
        "lojasiewicz" => lojasiewicz(res, d),
        "exponent_bound" => exponent_bound(res, d),
        "char_exponent" => char_exponent(res, d),
        "e_monitor" => e_monitor(res, d),
        "sigma_ratio" => sigma(res, d),
        "reduction" => reduction(res, d),
        "bochnak" => bochnak(res, d),
        "length_bound" => length_bound(res, d),
        other => Ok(res.fail(format!("`{other}` does not apply to flow scenarios"))),
    };
    out.unwrap_or_else(|e| AnalysisResult::new(name, required).fail(e.to_string()))
}

fn secant(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let st = secant_trace(d.traj)?;
    secant_metrics(&mut res, &st);
    res.check(st.tail_decays(tol::SECANT_DECADES, tol::SECANT_RATIO, tol::SECANT_VANISH), || {
        format!("tail lengths {:?} do not decay", &st.tail_lengths[..st.tail_lengths.len().min(4)])
    });
    res.check(st.cauchy_gap < tol::CAUCHY_GAP, || format!("cauchy gap {:e}", st.cauchy_gap));
    Ok(res)
}

fn secant_metrics(res: &mut AnalysisResult, st: &SecantTrace) {
    res.metric("total_length", st.total_length())
        .metric("chord_length", st.chord_length)
        .metric("cauchy_gap", st.cauchy_gap);
    for (j, l) in st.tail_lengths.iter().take(tol::SECANT_DECADES).enumerate() {
        res.metric(&format!("tail_{j}"), *l);
    }
    let worst = st
        .tail_ratios(tol::SECANT_DECADES)
        .into_iter()
        .flatten()
        .fold(0.0, f64::max);
    res.metric("worst_tail_ratio", worst);
}

fn euler(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let Some(deg) = d.meta.degree else {
        return Ok(res.skip("field is not declared homogeneous"));
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for smp in &d.traj.samples {
        if let Some(q) = euler_ratio(smp) {
            worst = worst.max((q - deg).abs());
            checked += 1;
        }
    }
    res.metric("max_deviation", worst).metric("samples", checked as f64);
    res.check(checked > 0, || "no sample with nonzero energy".into());
    res.check(worst < tol::EULER, || format!("|rE_r/E - {deg}| reaches {worst:e}"));
    Ok(res)
}

fn lojasiewicz(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let loj = estimate_loj_exponent(d.traj)?;
    res.metric("rho_hat", loj.rho_hat)
        .metric("rho_raw", loj.rho_raw)
        .metric("c_hat", loj.c_hat)
        .metric("c_lower", loj.c_lower);
    let Some(rho) = d.meta.rho else {
        return Ok(res.skip("no reference exponent declared"));
    };
    let t = d.meta.rho_tol.unwrap_or(tol::RHO);
    res.metric("rho_expected", rho);
    res.check((loj.rho_hat - rho).abs() <= t, || {
        format!("rho_hat {:.4} outside {rho} ± {t}", loj.rho_hat)
    });
    Ok(res)
}

fn exponent_bound(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let rep = match d.exponents {
        Some(r) => r.clone(),
        None => exponent_report(d.traj, &d.params)?,
    };
    let bound = 1.0 / (1.0 - rep.rho_hat);
    res.metric("l_hat", rep.l_hat)
        .metric("rho_hat", rep.rho_hat)
        .metric("bound", bound)
        .metric("bound_slack", rep.bound_slack);
    res.check(rep.l_hat <= bound + tol::BOUND_MARGIN, || {
        format!("l_hat {:.4} exceeds (1 - rho_hat)^-1 = {bound:.4}", rep.l_hat)
    });
    if d.meta.bound_equality {
        let rel = (rep.l_hat - bound).abs() / bound;
        res.metric("equality_error", rel);
        res.check(rel <= tol::BOUND_EQUALITY, || format!("bound not attained: relative gap {rel:.4}"));
    }
    Ok(res)
}

fn char_exponent(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let ch = estimate_char_exponent(d.traj, &d.params)?;
    res.metric("l_hat", ch.l_hat)
        .metric("rational", ch.rational.0 as f64 / ch.rational.1 as f64)
        .metric("rational_error", ch.rational_error);
    let Some(l) = d.meta.l else {
        res.check(!ch.off_rational, || format!("l_hat {:.4} is not near a small rational", ch.l_hat));
        return Ok(res);
    };
    res.check((ch.l_hat - l).abs() <= tol::CHAR_EXPONENT, || {
        format!("l_hat {:.4} outside {l} ± {}", ch.l_hat, tol::CHAR_EXPONENT)
    });
    let sel = exponent_selection(d.traj, &d.params, &d.cone_exponents(l), tol::SELECTION_R)?;
    res.metric("selection_decades", sel.decades as f64)
        .metric("selection_candidates", sel.candidates as f64);
    res.check(sel.selected == Some(l), || {
        format!(
            "cone component of exponent {l} not present in every decade below r = {} ({} candidates)",
            tol::SELECTION_R,
            sel.candidates
        )
    });
    Ok(res)
}

pub fn e_monitor_of(d: &FlowData<'_>) -> Option<Result<EMonitor>> {
    let l = d.l()?;
    Some(monitor_e(d.traj, l, &d.params, &d.cone_exponents(l), tol::MONITOR_R_MAX))
}

fn e_monitor(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let Some(m) = e_monitor_of(d) else {
        return Ok(res.skip("no characteristic exponent available"));
    };
    let m = m?;
    res.metric("l", m.l)
        .metric("a0_hat", m.a0_hat)
        .metric("a0_fluctuation", m.a0_fluctuation)
        .metric("monotone_violations", m.monotone_violations as f64)
        .metric("early_increases", m.early_increases as f64);
    res.check(m.monotone_violations == 0, || {
        format!("g increases {} times below r = {}", m.monotone_violations, tol::MONITOR_R_MAX)
    });
    res.check(m.a0_hat > 0.0, || format!("a0_hat {:e} is not positive", m.a0_hat));
    res.check(m.a0_fluctuation < tol::A0_FLUCTUATION, || {
        format!("E fluctuates by {:e} over the final decade", m.a0_fluctuation)
    });
    if let Some(a0) = d.meta.a0 {
        res.metric("a0_expected", a0);
        res.check((m.a0_hat - a0).abs() <= tol::A0, || format!("a0_hat {:.5} outside {a0} ± {}", m.a0_hat, tol::A0));
    }
    Ok(res)
}

fn sigma(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let sr = sigma_ratio(d.traj)?;
    res.metric("final_decade_mean", sr.final_decade_mean);
    let (r_max, limit) = if d.meta.quadratic {
        (tol::SIGMA_R_QUADRATIC, tol::SIGMA_QUADRATIC)
    } else {
        (10.0 * d.traj.last().r(), tol::SIGMA_DEGENERATE)
    };
    let dev = sr.max_deviation_below(r_max);
    res.metric("r_max", r_max).metric("max_deviation", dev.unwrap_or(f64::NAN));
    match dev {
        None => res.check(false, || format!("no sample below r = {r_max:e}")),
        Some(v) => res.check(v < limit, || format!("|sigma/r - 1| reaches {v:.4} below r = {r_max:e}")),
    };
    Ok(res)
}

/// Radial shrink sequences `0.2·2^{-k}·dir`.
pub fn shrink_sequence(dir: &[f64], len: usize) -> Vec<Vec<f64>> {
    let n = norm(dir);
    (0..len)
        .map(|k| {
            let t = 0.2 * 0.5f64.powi(k as i32) / n;
            dir.iter().map(|x| t * x).collect()
        })
        .collect()
}

fn reduction(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let split = spectral_split(d.field, None)?;
    res.metric("kernel_dim", split.kernel_dim as f64);
    if split.kernel_dim == 0 {
        return Ok(res.skip("Hessian is nondegenerate"));
    }
    if split.kernel_dim == split.dim() {
        return Ok(res.skip("Hessian vanishes"));
    }
    let model = build_reduced(d.field, &split)?;
    let n = d.field.dim();
    let mut dirs: Vec<Vec<f64>> = vec![d.traj.samples[0].u.clone()];
    for k in 0..n {
        let mut v = vec![0.3; n];
        v[k] = 1.0;
        if k % 2 == 1 {
            v[0] = -0.3;
        }
        dirs.push(v);
    }
    let (mut p1, mut p2, mut nd) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for dir in &dirs {
        let seq = shrink_sequence(dir, 12);
        let c = compat_check(&model, &seq)?;
        p1 = p1.min(c.value_order.order());
        p2 = p2.min(c.radial_order.order());
        nd = nd.min(norm_distortion(&model, &seq)?.order());
    }
    res.metric("value_order", p1).metric("radial_order", p2).metric("norm_distortion_order", nd);
    res.check(p1 >= tol::COMPAT_VALUE, || format!("value order {p1:.3}"));
    res.check(p2 >= tol::COMPAT_RADIAL, || format!("radial order {p2:.3}"));
    res.check(nd >= tol::NORM_DISTORTION, || format!("norm distortion order {nd:.3}"));
    Ok(res)
}

fn bochnak(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let b = bochnak_check(d.traj)?;
    res.metric("c_bl", b.c_bl).metric("c_bl_tail", b.c_bl_tail);
    match d.meta.degree {
        Some(deg) => res.check(b.c_bl >= deg - tol::BOCHNAK_DEGREE, || {
            format!("c_bl {:.4} below degree {deg}", b.c_bl)
        }),
        None => res.check(b.c_bl_tail > tol::BOCHNAK_TAIL, || format!("tail c_bl {:.4}", b.c_bl_tail)),
    };
    Ok(res)
}

fn length_bound(mut res: AnalysisResult, d: &FlowData<'_>) -> Result<AnalysisResult> {
    let (Some(rho), Some(c)) = (d.meta.rho, d.meta.loj_c) else {
        return Ok(res.skip("no Lojasiewicz exponent and constant declared"));
    };
    let rep = remaining_length_check(d.traj, rho, c)?;
    res.metric("worst_slack", rep.worst_slack);
    res.check(rep.worst_slack >= 0.0, || format!("remaining length exceeds the bound (slack {:e})", rep.worst_slack));
    if d.meta.length_exact {
        res.check(rep.worst_slack < tol::LENGTH_EXACT, || {
            format!("bound should be attained but slack is {:e}", rep.worst_slack)
        });
    }
    Ok(res)
}

/// Data of a gauge toy scenario.
pub struct ToyData<'a> {
    pub action: &'a GroupAction,
    pub traj: &'a Trajectory,
    pub x_inf: &'a [f64],
    pub seed: u64,
}

pub const WOBBLE_AMPLITUDE: f64 = 0.3;
pub const WOBBLE_FREQUENCY: f64 = 7.0;
const INVARIANCE_TRIALS: usize = 1000;
const INVARIANCE_RADIUS: f64 = 2.0;

pub fn run_toy_analysis(name: &str, required: bool, d: &ToyData<'_>) -> AnalysisResult {
    let res = AnalysisResult::new(name, required);
    let out = match name {
        "gauge_fix" => gauge_fix(res, d),
        other => Ok(res.fail(format!("`{other}` does not apply to gauge_toy scenarios"))),
    };
    out.unwrap_or_else(|e| AnalysisResult::new(name, required).fail(e.to_string()))
}

fn gauge_fix(mut res: AnalysisResult, d: &ToyData<'_>) -> Result<AnalysisResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let inv = d.action.invariance_deviation(INVARIANCE_TRIALS, INVARIANCE_RADIUS, &mut rng)?;
    let opts = GaugeFixOptions::default();
    let fixed = gauge_fixed_secant(d.action, d.traj, d.x_inf, &opts)?;
    let residual = fixed.fixes.iter().map(|f| f.residual).fold(0.0, f64::max);
    let continuity = fixed.continuity.iter().copied().fold(0.0, f64::max);

    // The same trajectory moved along its orbit by a time-dependent rotation.
    let m = d.action.algebra_dim();
    let wobbled: Vec<Vec<f64>> = d
        .traj
        .samples
        .iter()
        .map(|s| {
            let mut a = vec![0.0; m];
            if m > 0 {
                a[0] = WOBBLE_AMPLITUDE * (WOBBLE_FREQUENCY * s.s).sin();
            }
            d.action.act(&a, &s.u)
        })
        .collect();
    let w = gauge_fixed_secant_points(d.action, &wobbled, d.x_inf, &opts)?;
    let wobble = w
        .trace
        .points
        .iter()
        .zip(&fixed.trace.points)
        .map(|(p, q)| norm(&sub(p, q)))
        .fold(0.0, f64::max);
    let wobble_length = (w.trace.total_length() - fixed.trace.total_length()).abs();

    secant_metrics(&mut res, &fixed.trace);
    res.metric("invariance_deviation", inv)
        .metric("max_residual", residual)
        .metric("max_continuity", continuity)
        .metric("wobble_difference", wobble)
        .metric("wobble_length_difference", wobble_length);
    if d.action.dim() == 3 && d.action.algebra_dim() == 1 {
        let quotient: Vec<Vec<f64>> = d.traj.samples.iter().map(|s| so2_quotient(&s.u)).collect();
        let qt = secant_trace_with(&quotient, dot)?;
        res.metric("quotient_length_difference", (qt.total_length() - fixed.trace.total_length()).abs());
    }
    res.check(inv < tol::INVARIANCE, || format!("invariance deviation {inv:e}"));
    res.check(residual < tol::GAUGE_RESIDUAL, || format!("gauge-fix residual {residual:e}"));
    res.check(wobble < tol::WOBBLE, || format!("wobbled secant differs by {wobble:e}"));
    Ok(res)
}

/// Output of a lattice scenario beyond its analysis.
pub struct LatticeRun {
    pub start: LatticeGauge,
    pub dissipation: LatticeFlow,
    pub tail: LatticeFlow,
}

pub fn lattice_start(spec: &LatticeSpec, seed: u64) -> Result<LatticeGauge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LatticeGauge::random_near_identity(&spec.dims, spec.radius, &mut rng)
}

pub fn run_lattice(spec: &LatticeSpec, seed: u64) -> Result<LatticeRun> {
    let start = lattice_start(spec, seed)?;
    let dissipation = lattice_flow(
        &start,
        &LatticeFlowOptions {
            dt: spec.dissipation_dt,
            steps: spec.dissipation_steps,
            scheme: LatticeScheme::Heun,
            ..LatticeFlowOptions::default()
        },
    )?;
    let tail = lattice_flow(
        &start,
        &LatticeFlowOptions {
            dt: spec.dt,
            steps: spec.steps,
            record_every: spec.record_every,
            scheme: LatticeScheme::Heun,
            ..LatticeFlowOptions::default()
        },
    )?;
    Ok(LatticeRun {
        start,
        dissipation,
        tail,
    })
}

pub fn run_lattice_analysis(name: &str, required: bool, spec: &LatticeSpec, seed: u64, run: &LatticeRun) -> AnalysisResult {
    let res = AnalysisResult::new(name, required);
    let out = match name {
        "lattice_flow" => lattice_checks(res, spec, seed, run),
        other => Ok(res.fail(format!("`{other}` does not apply to lattice scenarios"))),
    };
    out.unwrap_or_else(|e| AnalysisResult::new(name, required).fail(e.to_string()))
}

fn strictly_decreasing(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| !(w[1] < w[0])).count()
}

fn lattice_checks(mut res: AnalysisResult, spec: &LatticeSpec, seed: u64, run: &LatticeRun) -> Result<AnalysisResult> {
    // Gauge invariance uses its own stream so that it does not depend on the
    // number of links drawn for the start.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let s0 = run.start.wilson_action();
    let mut invariance: f64 = 0.0;
    for _ in 0..spec.gauge_trials {
        let g = random_gauge(run.start.sites(), &mut rng);
        invariance = invariance.max((run.start.gauge_transform(&g)?.wilson_action() - s0).abs());
    }

    let dis = &run.dissipation;
    let tail = &run.tail;
    let dis_increases = strictly_decreasing(&dis.actions());
    let tail_increases = strictly_decreasing(&tail.actions());

    // The final configuration stands in for the limit; only frames well
    // before it enter the secant.
    let reference = &tail.last().config;
    let t_end = tail.last().t;
    let configs: Vec<LatticeGauge> = tail
        .frames
        .iter()
        .filter(|f| f.t <= 0.5 * t_end)
        .map(|f| f.config.clone())
        .collect();
    let sec = discrete_h1_secant(&configs, reference, true, &LatticeGaugeFixOptions::default())?;
    let tl = &sec.trace.tail_lengths;
    let decades_decreasing = tl.windows(2).all(|w| w[0] < w[1]);
    let residual = sec.residuals.iter().copied().fold(0.0, f64::max);

    res.metric("action_start", s0)
        .metric("action_end", tail.last().action)
        .metric("gauge_invariance", invariance)
        .metric("dissipation_defect", dis.max_dissipation_defect_trapezoid)
        .metric("dissipation_defect_endpoint", dis.max_dissipation_defect)
        .metric("dissipation_action_increases", dis_increases as f64)
        .metric("tail_action_increases", tail_increases as f64)
        .metric("tail_steps", tail.accepted_steps as f64)
        .metric("tail_t_end", t_end)
        .metric("stalled", tail.stalled as u8 as f64)
        .metric("secant_frames", configs.len() as f64)
        .metric("secant_length", sec.trace.total_length())
        .metric("secant_decades", tl.len() as f64)
        .metric("max_fix_residual", residual)
        .metric("max_continuity", sec.continuity.iter().copied().fold(0.0, f64::max));
    for (j, l) in tl.iter().take(tol::SECANT_DECADES).enumerate() {
        res.metric(&format!("tail_{j}"), *l);
    }
    res.check(dis_increases == 0 && dis.action_increases == 0, || {
        format!("action not strictly decreasing at dt = {}", spec.dissipation_dt)
    });
    res.check(tail_increases == 0 && tail.action_increases == 0, || {
        format!("action not strictly decreasing at dt = {}", spec.dt)
    });
    res.check(dis.max_dissipation_defect_trapezoid < tol::DISSIPATION, || {
        format!("dissipation defect {:e}", dis.max_dissipation_defect_trapezoid)
    });
    res.check(invariance < tol::LATTICE_INVARIANCE, || format!("gauge invariance {invariance:e}"));
    res.check(tl.len() >= 2 && decades_decreasing, || format!("secant tail lengths {tl:?} not decreasing"));
    Ok(res)
}
