//! CSV export of trajectories.
//!
//! Column order is fixed: `s, sigma, r, E_value, grad_norm, e_r,
//! e_theta_norm, u1, …, un`. `e_r` and `e_theta_norm` are empty for samples
//! at the origin.

use std::io::{Read, Write};

use secantlab_core::flow::Trajectory;
use secantlab_core::gauge::lattice::LatticeFlow;

pub const FLOW_COLUMNS: &[&str] = &["s", "sigma", "r", "E_value", "grad_norm", "e_r", "e_theta_norm"];
pub const LATTICE_COLUMNS: &[&str] = &["t", "action", "grad_sq"];

fn num(v: f64) -> String {
    // `{}` on f64 is the shortest representation that parses back exactly.
    format!("{v}")
}

pub fn flow_header(dim: usize) -> Vec<String> {
    FLOW_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain((1..=dim).map(|i| format!("u{i}")))
        .collect()
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> csv::Result<()> {
    let dim = traj.samples.first().map_or(0, |s| s.u.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(flow_header(dim))?;
    for (smp, sig) in traj.samples.iter().zip(&traj.sigma) {
        let (er, et) = match &smp.radial {
            Some(rad) => (num(rad.e_r), num(rad.e_theta_norm())),
            None => (String::new(), String::new()),
        };
        let mut rec = vec![num(smp.s), num(*sig), num(smp.r()), num(smp.value()), num(smp.grad_norm()), er, et];
        rec.extend(smp.u.iter().map(|x| num(*x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lattice_flow<W: Write>(flow: &LatticeFlow, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LATTICE_COLUMNS)?;
    for f in &flow.frames {
        w.write_record([num(f.t), num(f.action), num(f.grad_sq)])?;
    }
    w.flush()?;
    Ok(())
}

/// A trajectory read back from CSV: the header and one row per sample, with
/// empty cells as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_table<R: Read>(input: R) -> anyhow::Result<Table> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| if c.is_empty() { Ok(f64::NAN) } else { c.parse::<f64>() })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}
