//! Unit quaternions as SU(2) elements.
//!
//! `q = w + x i + y j + z k` corresponds to `w·1 + i(xσ₁ + yσ₂ + zσ₃)`, so
//! `½ Re tr U = w`. Algebra elements are 3-vectors `v` with
//! `exp(v) = cos|v| + sin|v| v̂`.

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Four-vector inner product; equals `scalar(self · other⁻¹)` for unit
    /// quaternions.
    pub fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    pub fn conj(&self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn scale(&self, c: f64) -> Quat {
        Quat::new(c * self.w, c * self.x, c * self.y, c * self.z)
    }

    pub fn add(&self, o: &Quat) -> Quat {
        Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn normalized(&self) -> Quat {
        self.scale(1.0 / self.norm())
    }

    /// Rotates the 3-vector `v` by the adjoint action `q v q⁻¹`.
    pub fn adjoint(&self, v: [f64; 3]) -> [f64; 3] {
        self.mul(&Quat::new(0.0, v[0], v[1], v[2]))
            .mul(&self.conj())
            .vector()
    }

    pub fn exp(v: [f64; 3]) -> Quat {
        let t = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if t == 0.0 {
            return Quat::IDENTITY;
        }
        let s = t.sin() / t;
        Quat::new(t.cos(), s * v[0], s * v[1], s * v[2])
    }

    /// Principal logarithm of a unit quaternion. Fails within `tol` of `−1`,
    /// where the branch is undefined.
    pub fn log(&self, tol: f64) -> Result<[f64; 3]> {
        if self.w <= -1.0 + tol {
            return Err(Error::LogBranch { scalar: self.w });
        }
        let v = self.vector();
        let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if s == 0.0 {
            return Ok([0.0; 3]);
        }
        let f = s.atan2(self.w) / s;
        Ok([f * v[0], f * v[1], f * v[2]])
    }

    /// Uniformly distributed unit quaternion.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Quat {
        loop {
            let q = Quat::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = q.norm();
            if n > 1e-3 && n <= 1.0 {
                return q.scale(1.0 / n);
            }
        }
    }

    /// `exp(v)` with `v` uniform in the ball of the given radius.
    pub fn random_near_identity<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Quat {
        loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            if v[0] * v[0] + v[1] * v[1] + v[2] * v[2] <= 1.0 {
                return Quat::exp([radius * v[0], radius * v[1], radius * v[2]]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_log_roundtrip() {
        let v = [0.3, -0.2, 0.5];
        let l = Quat::exp(v).log(1e-12).unwrap();
        for i in 0..3 {
            assert!((l[i] - v[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn log_branch_fails_at_minus_one() {
        assert!(Quat::new(-1.0, 0.0, 0.0, 0.0).log(1e-12).is_err());
    }

    #[test]
    fn ij_is_k() {
        let i = Quat::new(0.0, 1.0, 0.0, 0.0);
        let j = Quat::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(i.mul(&j), Quat::new(0.0, 0.0, 0.0, 1.0));
    }
}
