//! Regression helpers shared by the asymptotic analyzers.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
    /// Standard error of the slope (0 when exactly determined).
    pub slope_stderr: f64,
    pub points: usize,
}

impl LineFit {
    /// Half-width of an approximate 95% confidence interval on the slope.
    pub fn slope_ci95(&self) -> f64 {
        1.96 * self.slope_stderr
    }
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::DegenerateRegression("length mismatch".into()));
    }
    if n < 2 {
        return Err(Error::DegenerateRegression("fewer than two points".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let spread = xs.iter().fold(0.0f64, |m, x| m.max((x - mx).abs()));
    if !(sxx > 0.0) || spread <= 1e-12 * (1.0 + mx.abs()) {
        return Err(Error::DegenerateRegression("abscissae do not vary".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    if !slope.is_finite() || !intercept.is_finite() {
        return Err(Error::DegenerateRegression("non-finite fit".into()));
    }
    let slope_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss_res / nf).sqrt(),
        slope_stderr,
        points: n,
    })
}

/// Fits `log |y| = log c + p log x` over the pairs with `x > 0` and `y ≠ 0`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y != 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .unzip();
    line_fit(&lx, &ly)
}

/// Linear-interpolated quantile of `values` at `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    Some(v[lo] * (1.0 - w) + v[hi] * w)
}

/// Lower-envelope regression: bins the abscissa into `bins` equal-width bins,
/// takes the `q`-quantile of the ordinates in each non-empty bin and fits a
/// line through the bin centres.
pub fn lower_envelope_fit(xs: &[f64], ys: &[f64], bins: usize, q: f64) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::InsufficientData("empty envelope sample".into()));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateRegression("abscissae do not vary".into()));
    }
    let width = (hi - lo) / bins as f64;
    let mut buckets: Vec<Vec<f64>> = (0..bins).map(|_| Vec::new()).collect();
    let mut centres: Vec<Vec<f64>> = (0..bins).map(|_| Vec::new()).collect();
    for (&x, &y) in xs.iter().zip(ys) {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        buckets[b].push(y);
        centres[b].push(x);
    }
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for (ys_b, xs_b) in buckets.iter().zip(&centres) {
        if ys_b.len() >= 3 {
            bx.push(xs_b.iter().sum::<f64>() / xs_b.len() as f64);
            by.push(quantile(ys_b, q).unwrap());
        }
    }
    if bx.len() < 3 {
        return Err(Error::InsufficientData("fewer than three populated envelope bins".into()));
    }
    line_fit(&bx, &by)
}

/// Aitken Δ² extrapolation of the limit of `q0, q1, q2` (terms of a sequence
/// converging geometrically). Falls back to `q2` when the differences do not
/// contract.
pub fn aitken(q0: f64, q1: f64, q2: f64) -> f64 {
    let d1 = q1 - q0;
    let d2 = q2 - q1;
    let denom = d2 - d1;
    if denom == 0.0 || d1 == 0.0 {
        return q2;
    }
    let ratio = d2 / d1;
    if !(ratio.abs() < 0.9) {
        return q2;
    }
    let est = q2 - d2 * d2 / denom;
    if est.is_finite() && (est - q2).abs() <= 10.0 * d2.abs() {
        est
    } else {
        q2
    }
}

/// Nearest rational `p/q` with `1 ≤ q ≤ max_den`, returned as
/// `(p, q, |x − p/q|)`. Ties prefer the smaller denominator.
pub fn nearest_rational(x: f64, max_den: u32) -> (i64, u32, f64) {
    let mut best = (x.round() as i64, 1u32, (x - x.round()).abs());
    for q in 2..=max_den {
        let p = (x * q as f64).round();
        let err = (x - p / q as f64).abs();
        if err < best.2 - 1e-15 {
            best = (p as i64, q, err);
        }
    }
    best
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}
