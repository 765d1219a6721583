//! Forward-mode second-order jets.
//!
//! A [`Jet2`] carries a value together with its full gradient and Hessian
//! with respect to `n` seed variables. Arithmetic propagates both orders by
//! the chain rule, so evaluating an expression tree on seeded jets yields
//! derivatives that are exact up to floating-point rounding.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Value, gradient and (row-major, symmetric) Hessian of a scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// `n * n` entries, row-major.
    pub hessian: Vec<f64>,
}

impl Jet2 {
    pub fn constant(value: f64, n: usize) -> Self {
        Jet2 {
            value,
            gradient: vec![0.0; n],
            hessian: vec![0.0; n * n],
        }
    }

    /// The `i`-th coordinate function evaluated at `value`.
    pub fn variable(value: f64, i: usize, n: usize) -> Self {
        let mut j = Self::constant(value, n);
        j.gradient[i] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    /// Replaces the Hessian by `(H + Hᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.hessian[i * n + j] + self.hessian[j * n + i]);
                self.hessian[i * n + j] = avg;
                self.hessian[j * n + i] = avg;
            }
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value + o.value,
            gradient: zip_with(&self.gradient, &o.gradient, |a, b| a + b),
            hessian: zip_with(&self.hessian, &o.hessian, |a, b| a + b),
        }
    }

    pub fn sub(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            value: self.value - o.value,
            gradient: zip_with(&self.gradient, &o.gradient, |a, b| a - b),
            hessian: zip_with(&self.hessian, &o.hessian, |a, b| a - b),
        }
    }

    pub fn neg(&self) -> Jet2 {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            value: c * self.value,
            gradient: self.gradient.iter().map(|g| c * g).collect(),
            hessian: self.hessian.iter().map(|h| c * h).collect(),
        }
    }

    pub fn mul(&self, o: &Jet2) -> Jet2 {
        let n = self.dim();
        let (a, b) = (self.value, o.value);
        let gradient = zip_with(&self.gradient, &o.gradient, |ga, gb| a * gb + b * ga);
        let mut hessian = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                hessian.push(
                    a * o.hessian[k]
                        + b * self.hessian[k]
                        + self.gradient[i] * o.gradient[j]
                        + o.gradient[i] * self.gradient[j],
                );
            }
        }
        Jet2 {
            value: a * b,
            gradient,
            hessian,
        }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.dim();
        let gradient = self.gradient.iter().map(|g| f1 * g).collect();
        let mut hessian = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                hessian.push(f1 * self.hessian[i * n + j] + f2 * self.gradient[i] * self.gradient[j]);
            }
        }
        Jet2 {
            value: f0,
            gradient,
            hessian,
        }
    }

    pub fn powi(&self, k: u32) -> Jet2 {
        let v = self.value;
        match k {
            0 => Jet2::constant(1.0, self.dim()),
            1 => self.clone(),
            _ => {
                let k_f = k as f64;
                let f0 = v.powi(k as i32);
                let f1 = k_f * v.powi(k as i32 - 1);
                let f2 = k_f * (k_f - 1.0) * v.powi(k as i32 - 2);
                self.chain(f0, f1, f2)
            }
        }
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn sin(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet2 {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|g| g.is_finite())
            && self.hessian.iter().all(|h| h.is_finite())
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
