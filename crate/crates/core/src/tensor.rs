//! Small fixed-size vector and tensor types.
//!
//! Every field carries two components regardless of the spatial dimension of
//! the grid: a material point (dim 0) and a 1D strip still hold planar
//! magnetization and 2x2 strain tensors.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2(pub [f64; 2]);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Vec2 {
    pub const ZERO: Vec2 = Vec2([0.0, 0.0]);

    pub fn new(x: f64, y: f64) -> Self {
        Vec2([x, y])
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1]
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn outer(self, o: Vec2) -> Mat2 {
        Mat2([
            [self.0[0] * o.0[0], self.0[0] * o.0[1]],
            [self.0[1] * o.0[0], self.0[1] * o.0[1]],
        ])
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn scaled_identity(a: f64) -> Self {
        Mat2::diag(a, a)
    }

    /// Skew matrix `[[0, -w], [w, 0]]` of an in-plane rotation rate `w`.
    pub fn rotation_rate(w: f64) -> Self {
        Mat2([[0.0, -w], [w, 0.0]])
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2([[c, -s], [s, c]])
    }

    pub fn transpose(self) -> Self {
        let a = self.0;
        Mat2([[a[0][0], a[1][0]], [a[0][1], a[1][1]]])
    }

    pub fn trace(self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn sym(self) -> Self {
        (self + self.transpose()) * 0.5
    }

    pub fn skw(self) -> Self {
        (self - self.transpose()) * 0.5
    }

    /// Full contraction `A : B`.
    pub fn ddot(self, o: Mat2) -> f64 {
        let (a, b) = (self.0, o.0);
        a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
    }

    pub fn norm_sq(self) -> f64 {
        self.ddot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn matmul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(c)
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        let a = self.0;
        Vec2([
            a[0][0] * v.0[0] + a[0][1] * v.0[1],
            a[1][0] * v.0[0] + a[1][1] * v.0[1],
        ])
    }

    pub fn inverse(self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let a = self.0;
        Some(Mat2([[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]))
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn asymmetry(self) -> f64 {
        (self.0[0][1] - self.0[1][0]).abs()
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

macro_rules! impl_linear {
    ($t:ty, $n:expr, $flat:ident, $from:ident) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                let (a, b) = (self.$flat(), o.$flat());
                let mut c = [0.0; $n];
                for i in 0..$n {
                    c[i] = a[i] + b[i];
                }
                <$t>::$from(c)
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                let (a, b) = (self.$flat(), o.$flat());
                let mut c = [0.0; $n];
                for i in 0..$n {
                    c[i] = a[i] - b[i];
                }
                <$t>::$from(c)
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t {
                let a = self.$flat();
                let mut c = [0.0; $n];
                for i in 0..$n {
                    c[i] = a[i] * s;
                }
                <$t>::$from(c)
            }
        }
        impl Mul<$t> for f64 {
            type Output = $t;
            fn mul(self, v: $t) -> $t {
                v * self
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                self * -1.0
            }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, o: $t) {
                *self = *self + o;
            }
        }
        impl SubAssign for $t {
            fn sub_assign(&mut self, o: $t) {
                *self = *self - o;
            }
        }
    };
}

impl Vec2 {
    fn flat(self) -> [f64; 2] {
        self.0
    }
    fn from_flat(a: [f64; 2]) -> Self {
        Vec2(a)
    }
}

impl Mat2 {
    fn flat(self) -> [f64; 4] {
        let a = self.0;
        [a[0][0], a[0][1], a[1][0], a[1][1]]
    }
    fn from_flat(a: [f64; 4]) -> Self {
        Mat2([[a[0], a[1]], [a[2], a[3]]])
    }
}

impl_linear!(Vec2, 2, flat, from_flat);
impl_linear!(Mat2, 4, flat, from_flat);

impl Index<usize> for Vec2 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec2 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Third-order tensor `T[a]` = derivative of a 2x2 tensor along axis `a`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Grad3(pub [Mat2; 2]);

impl Grad3 {
    pub const ZERO: Grad3 = Grad3([Mat2::ZERO, Mat2::ZERO]);

    pub fn norm_sq(&self) -> f64 {
        self.0[0].norm_sq() + self.0[1].norm_sq()
    }

    pub fn ddd(&self, o: &Grad3) -> f64 {
        self.0[0].ddot(o.0[0]) + self.0[1].ddot(o.0[1])
    }

    pub fn scale(&self, s: f64) -> Grad3 {
        Grad3([self.0[0] * s, self.0[1] * s])
    }
}

/// Sum of squares of the components of a vector field, weighted by `w`.
pub fn weighted_norm_sq(v: &[Vec2], w: f64) -> f64 {
    v.iter().map(|x| x.norm_sq()).sum::<f64>() * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_skw_split_reassembles() {
        let a = Mat2::new(1.0, 2.0, -3.0, 4.0);
        let s = a.sym();
        let w = a.skw();
        assert_eq!(s + w, a);
        assert_eq!(s.asymmetry(), 0.0);
        assert_eq!(w.trace(), 0.0);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Mat2::new(2.0, 1.0, 0.5, 3.0);
        let b = a.inverse().unwrap().matmul(a);
        assert!((b - Mat2::IDENTITY).max_abs() < 1e-15);
        assert!(Mat2::ZERO.inverse().is_none());
    }

    #[test]
    fn rotation_is_orthogonal() {
        let q = Mat2::rotation(0.7);
        let e = q.matmul(q.transpose()) - Mat2::IDENTITY;
        assert!(e.max_abs() < 1e-15);
    }
}
