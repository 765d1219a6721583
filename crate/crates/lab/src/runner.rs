//! Scenario execution.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use secantlab_core::asymptotics::{exponent_report, secant_trace};
use secantlab_core::flow::{integrate, FlowSpec, Parameterization, Trajectory};
use secantlab_core::gauge::toy::so2_toy;

use crate::analysis::{
    e_monitor_of, run_flow_analysis, run_lattice, run_lattice_analysis, run_toy_analysis, FlowData, ToyData,
};
use crate::config::{Config, Kind, Scenario};
use crate::export::{write_lattice_flow, write_trajectory};
use crate::latfile::write_lattice;
use crate::report::{
    AnalysisResult, EMonitorSummary, ExponentSummary, FlowSummary, Num, RunReport, ScenarioReport, SecantSummary,
    REPORT_FILE,
};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SECANTLAB_WORKERS";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; falls back to `SECANTLAB_WORKERS`, then to the number
    /// of CPUs.
    pub workers: Option<usize>,
    /// Replaces the configuration's run seed. Scenarios with their own seed
    /// keep it.
    pub seed: Option<u64>,
    /// Where CSV trajectories, lattice files and `report.json` go.
    pub out_dir: Option<PathBuf>,
}

pub fn default_workers() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every scenario and, with an output directory, writes the report
/// and per-scenario files. Scenario failures are recorded in the report;
/// only IO and thread-pool errors are returned.
pub fn run(cfg: &Config, opts: &RunOptions) -> anyhow::Result<RunReport> {
    let t0 = Instant::now();
    let seed = opts.seed.unwrap_or(cfg.seed);
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.workers.or_else(default_workers) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let out_dir = opts.out_dir.as_deref();
    let scenarios: Vec<ScenarioReport> = pool.install(|| {
        cfg.scenarios
            .par_iter()
            .map(|sc| run_scenario(sc, sc.effective_seed(seed), out_dir))
            .collect()
    });
    let report = RunReport::new(seed, scenarios, t0.elapsed().as_millis() as u64);
    if let Some(dir) = out_dir {
        std::fs::write(dir.join(REPORT_FILE), report.to_json())?;
    }
    Ok(report)
}

/// Runs one scenario. Errors end up in the report.
pub fn run_scenario(sc: &Scenario, seed: u64, out_dir: Option<&Path>) -> ScenarioReport {
    let t0 = Instant::now();
    let mut rep = ScenarioReport {
        name: sc.name.clone(),
        kind: sc.kind,
        seed,
        error: None,
        flow: None,
        exponents: None,
        secant: None,
        e_monitor: None,
        analyses: vec![],
        artifacts: vec![],
        wall_clock_ms: 0,
    };
    let outcome = match sc.kind {
        Kind::Flow => flow_scenario(sc, &mut rep, out_dir),
        Kind::GaugeToy => toy_scenario(sc, seed, &mut rep, out_dir),
        Kind::Lattice => lattice_scenario(sc, seed, &mut rep, out_dir),
    };
    if let Err(e) = outcome {
        let msg = format!("{e:#}");
        rep.analyses = sc
            .analyses
            .iter()
            .map(|a| AnalysisResult::new(a, sc.is_required(a)).fail(format!("scenario failed: {msg}")))
            .collect();
        rep.error = Some(msg);
    }
    rep.wall_clock_ms = t0.elapsed().as_millis() as u64;
    rep
}

fn flow_summary(traj: &Trajectory) -> FlowSummary {
    let last = traj.last();
    FlowSummary {
        stop_reason: traj.stop_reason.as_str().to_string(),
        samples: traj.len(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        length: Num(*traj.sigma.last().unwrap_or(&0.0)),
        final_r: Num(last.r()),
        final_value: Num(last.value()),
        final_grad_norm: Num(last.grad_norm()),
        max_speed_error: Num(traj.max_speed_error),
        max_dissipation_defect: Num(traj.max_dissipation_defect),
    }
}

fn secant_summary(traj: &Trajectory) -> Option<SecantSummary> {
    let st = secant_trace(traj).ok()?;
    Some(SecantSummary {
        total_length: Num(st.total_length()),
        chord_length: Num(st.chord_length),
        cauchy_gap: Num(st.cauchy_gap),
        tail_lengths: st.tail_lengths.iter().map(|&x| Num(x)).collect(),
    })
}

fn csv_artifact(
    rep: &mut ScenarioReport,
    out_dir: Option<&Path>,
    file: String,
    write: impl FnOnce(BufWriter<File>) -> csv::Result<()>,
) -> anyhow::Result<()> {
    if let Some(dir) = out_dir {
        write(BufWriter::new(File::create(dir.join(&file))?))?;
        rep.artifacts.push(file);
    }
    Ok(())
}

fn flow_scenario(sc: &Scenario, rep: &mut ScenarioReport, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let spec = sc.flow_spec()?;
    let traj = integrate(&spec)?;
    rep.flow = Some(flow_summary(&traj));
    rep.secant = secant_summary(&traj);
    let params = sc.weps.apply();
    let exps = exponent_report(&traj, &params).ok();
    rep.exponents = exps.as_ref().map(|e| ExponentSummary {
        rho_hat: Num(e.rho_hat),
        c_hat: Num(e.c_hat),
        l_hat: Num(e.l_hat),
        l_candidates: e.l_candidates.iter().map(|&x| Num(x)).collect(),
        c_bl: Num(e.c_bl),
        bound_slack: Num(e.bound_slack),
    });
    let data = FlowData {
        field: &spec.field,
        traj: &traj,
        meta: &sc.meta,
        params,
        exponents: exps.as_ref(),
    };
    if let Some(Ok(m)) = e_monitor_of(&data) {
        rep.e_monitor = Some(EMonitorSummary {
            l: Num(m.l),
            a0_hat: Num(m.a0_hat),
            a0_fluctuation: Num(m.a0_fluctuation),
            monotone_violations: m.monotone_violations,
            early_increases: m.early_increases,
            w_violations: m.w_violations,
            sign_mismatches: m.sign_mismatches,
            decrease_violations: m.decrease_violations,
            tail_slope: Num(m.tail_slope),
            divergent: m.divergent,
        });
    }
    rep.analyses = sc
        .analyses
        .iter()
        .map(|a| run_flow_analysis(a, sc.is_required(a), &data))
        .collect();
    csv_artifact(rep, out_dir, format!("{}.csv", sc.name), |w| write_trajectory(&traj, w))
}

/// Default toy start: radius 1.3 at angle 0.7 in the rotated plane.
pub fn toy_start() -> Vec<f64> {
    vec![1.3 * 0.7f64.cos(), 1.3 * 0.7f64.sin(), 0.2]
}

pub const TOY_LIMIT: [f64; 3] = [1.0, 0.0, 0.0];

/// Flow settings of the toy: time parameterization, stopped once the
/// gradient is small enough for gauge fixing to be well conditioned.
pub fn toy_flow_spec(sc: &Scenario) -> anyhow::Result<FlowSpec> {
    let action = so2_toy()?;
    let start = sc.start.clone().unwrap_or_else(toy_start);
    let mut spec = FlowSpec::new(action.field().clone(), start);
    spec.parameterization = Parameterization::Time;
    spec.grad_floor = 1e-6;
    spec.rel_tol = 1e-12;
    sc.flow.apply(&mut spec)?;
    spec.validate()?;
    Ok(spec)
}

fn toy_scenario(sc: &Scenario, seed: u64, rep: &mut ScenarioReport, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let action = so2_toy()?;
    let spec = toy_flow_spec(sc)?;
    let traj = integrate(&spec)?;
    rep.flow = Some(flow_summary(&traj));
    let x_inf = sc.x_inf.clone().unwrap_or_else(|| TOY_LIMIT.to_vec());
    let data = ToyData {
        action: &action,
        traj: &traj,
        x_inf: &x_inf,
        seed,
    };
    rep.analyses = sc
        .analyses
        .iter()
        .map(|a| run_toy_analysis(a, sc.is_required(a), &data))
        .collect();
    csv_artifact(rep, out_dir, format!("{}.csv", sc.name), |w| write_trajectory(&traj, w))
}

fn lattice_scenario(sc: &Scenario, seed: u64, rep: &mut ScenarioReport, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let spec = sc.lattice.clone().unwrap_or_default();
    let run = run_lattice(&spec, seed)?;
    rep.analyses = sc
        .analyses
        .iter()
        .map(|a| run_lattice_analysis(a, sc.is_required(a), &spec, seed, &run))
        .collect();
    csv_artifact(rep, out_dir, format!("{}.csv", sc.name), |w| write_lattice_flow(&run.tail, w))?;
    if let Some(dir) = out_dir {
        for (suffix, cfg) in [("start", &run.start), ("final", &run.tail.last().config)] {
            let file = format!("{}.{suffix}.su2l", sc.name);
            write_lattice(cfg, BufWriter::new(File::create(dir.join(&file))?))?;
            rep.artifacts.push(file);
        }
    }
    Ok(())
}
