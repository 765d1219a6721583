//! Analytic scalar fields on ℝⁿ and the radial/angular split of the gradient.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func};
use crate::jet::Jet2;
use crate::linalg::{dot, norm};

/// An analytic scalar function of `dim` variables given by an expression tree.
///
/// Evaluation is a pure function of the input point, so identical inputs give
/// bit-identical outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticField {
    expr: Expr,
    dim: usize,
    source: String,
}

impl AnalyticField {
    /// Parses `src` as a field on ℝ^`dim`. Variables beyond `dim` are rejected.
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        let expr = Expr::parse(src)?;
        if dim == 0 {
            return Err(Error::InvalidParameter("field dimension must be positive".into()));
        }
        if expr.arity() > dim {
            return Err(Error::Dimension {
                expected: dim,
                got: expr.arity(),
            });
        }
        Ok(AnalyticField {
            expr,
            dim,
            source: src.to_string(),
        })
    }

    /// Parses `src` using the highest referenced variable as the dimension.
    pub fn parse_auto(src: &str) -> Result<Self> {
        let expr = Expr::parse(src)?;
        let dim = expr.arity().max(1);
        Ok(AnalyticField {
            expr,
            dim,
            source: src.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn check_dim(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Value only.
    pub fn value(&self, point: &[f64]) -> Result<f64> {
        self.check_dim(point)?;
        eval_value(&self.expr, point)
    }

    /// Value, gradient and symmetrized Hessian at `point`.
    pub fn eval_jet2(&self, point: &[f64]) -> Result<Jet2> {
        self.check_dim(point)?;
        let mut jet = eval_jet(&self.expr, point)?;
        jet.symmetrize();
        Ok(jet)
    }

    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_jet2(point)?.gradient)
    }
}

fn domain(e: &Expr) -> Error {
    Error::Domain {
        subexpr: e.to_string(),
    }
}

fn eval_value(e: &Expr, x: &[f64]) -> Result<f64> {
    let v = match e {
        Expr::Const(c) => *c,
        Expr::Var(i) => x[*i],
        Expr::Neg(a) => -eval_value(a, x)?,
        Expr::Add(a, b) => eval_value(a, x)? + eval_value(b, x)?,
        Expr::Sub(a, b) => eval_value(a, x)? - eval_value(b, x)?,
        Expr::Mul(a, b) => eval_value(a, x)? * eval_value(b, x)?,
        Expr::Div(a, b) => eval_value(a, x)? / eval_value(b, x)?,
        Expr::Pow(a, k) => eval_value(a, x)?.powi(*k as i32),
        Expr::Call(f, a) => {
            let v = eval_value(a, x)?;
            match f {
                Func::Exp => v.exp(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(e))
    }
}

fn eval_jet(e: &Expr, x: &[f64]) -> Result<Jet2> {
    let n = x.len();
    let j = match e {
        Expr::Const(c) => Jet2::constant(*c, n),
        Expr::Var(i) => Jet2::variable(x[*i], *i, n),
        Expr::Neg(a) => eval_jet(a, x)?.neg(),
        Expr::Add(a, b) => eval_jet(a, x)?.add(&eval_jet(b, x)?),
        Expr::Sub(a, b) => eval_jet(a, x)?.sub(&eval_jet(b, x)?),
        Expr::Mul(a, b) => eval_jet(a, x)?.mul(&eval_jet(b, x)?),
        Expr::Div(a, b) => {
            let d = eval_value(b, x)?;
            if d == 0.0 {
                return Err(domain(e));
            }
            eval_jet(a, x)?.scale(1.0 / d)
        }
        Expr::Pow(a, k) => eval_jet(a, x)?.powi(*k),
        Expr::Call(f, a) => {
            let inner = eval_jet(a, x)?;
            match f {
                Func::Exp => inner.exp(),
                Func::Sin => inner.sin(),
                Func::Cos => inner.cos(),
            }
        }
    };
    if j.is_finite() {
        Ok(j)
    } else {
        Err(domain(e))
    }
}

/// Radial and angular parts of a gradient at a point `u ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSplit {
    /// ⟨ℰ′, û⟩
    pub e_r: f64,
    /// ℰ′ − e_r û
    pub e_theta: Vec<f64>,
    /// ‖u‖
    pub r: f64,
}

impl RadialSplit {
    pub fn e_theta_norm(&self) -> f64 {
        norm(&self.e_theta)
    }
}

/// Splits `gradient` at `point` into its radial component along û and the
/// orthogonal remainder.
pub fn radial_angular(gradient: &[f64], point: &[f64]) -> Result<RadialSplit> {
    if gradient.len() != point.len() {
        return Err(Error::Dimension {
            expected: point.len(),
            got: gradient.len(),
        });
    }
    let r = norm(point);
    if r == 0.0 {
        return Err(Error::ZeroPoint);
    }
    let e_r = dot(gradient, point) / r;
    let e_theta = gradient
        .iter()
        .zip(point)
        .map(|(g, u)| g - e_r * u / r)
        .collect();
    Ok(RadialSplit { e_r, e_theta, r })
}

/// [`radial_angular`] applied to a jet.
pub fn radial_split(jet: &Jet2, point: &[f64]) -> Result<RadialSplit> {
    radial_angular(&jet.gradient, point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn jet_of_sum_of_squares() {
        let f = AnalyticField::parse("x1^2 + x2^2", 2).unwrap();
        let j = f.eval_jet2(&[3.0, 4.0]).unwrap();
        assert_eq!(j.value, 25.0);
        assert_eq!(j.gradient, vec![6.0, 8.0]);
        assert_eq!(j.hessian, vec![2.0, 0.0, 0.0, 2.0]);
        let z = f.eval_jet2(&[0.0, 0.0]).unwrap();
        assert_eq!(z.value, 0.0);
        assert_eq!(z.gradient, vec![0.0, 0.0]);
    }

    #[test]
    fn jet_of_x2y() {
        let f = AnalyticField::parse("x1^2*x2", 2).unwrap();
        let j = f.eval_jet2(&[1.0, 1.0]).unwrap();
        assert_eq!(j.value, 1.0);
        assert_eq!(j.gradient, vec![2.0, 1.0]);
        assert_eq!(j.hessian, vec![2.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn radial_split_examples() {
        let s = radial_angular(&[6.0, 8.0], &[3.0, 4.0]).unwrap();
        assert_eq!(s.e_r, 10.0);
        assert!(s.e_theta_norm() < 1e-15);

        let s = radial_angular(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((s.e_r - 3.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((s.e_theta[0] - 0.5).abs() < 1e-15);
        assert!((s.e_theta[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_point_is_rejected() {
        assert_eq!(radial_angular(&[1.0, 0.0], &[0.0, 0.0]), Err(Error::ZeroPoint));
    }

    #[test]
    fn overflow_names_subexpression() {
        let f = AnalyticField::parse("exp(x1)", 1).unwrap();
        match f.eval_jet2(&[1000.0]) {
            Err(Error::Domain { subexpr }) => assert_eq!(subexpr, "exp(x1)"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_checks() {
        assert!(AnalyticField::parse("x3", 2).is_err());
        let f = AnalyticField::parse("x1", 2).unwrap();
        assert!(f.eval_jet2(&[1.0]).is_err());
        assert_eq!(AnalyticField::parse_auto("x1 + x4").unwrap().dim(), 4);
    }
}
