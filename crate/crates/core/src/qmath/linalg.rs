//! Fixed-size dense complex matrices.
//!
//! Row-major storage. Two-qubit operators use the convention that the first
//! tensor factor is the most significant index bit: `|a b> -> 2a + b`.

use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Sub};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat2 {
    pub const fn zeros() -> Self {
        Mat2([[ZERO; 2]; 2])
    }

    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Mat2([
            [C64::new(m[0][0], 0.0), C64::new(m[0][1], 0.0)],
            [C64::new(m[1][0], 0.0), C64::new(m[1][1], 0.0)],
        ])
    }

    pub fn diag(d0: f64, d1: f64) -> Self {
        Mat2::from_real([[d0, 0.0], [0.0, d1]])
    }

    pub fn pauli_x() -> Self {
        Mat2::from_real([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn pauli_y() -> Self {
        Mat2([[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), ZERO]])
    }

    pub fn pauli_z() -> Self {
        Mat2::diag(1.0, -1.0)
    }

    /// `|v><v|` for an unnormalized vector.
    pub fn outer(v: [C64; 2]) -> Self {
        let mut m = Mat2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let a = &self.0;
        Mat2([[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]])
    }

    pub fn transpose(&self) -> Self {
        let a = &self.0;
        Mat2([[a[0][0], a[1][0]], [a[0][1], a[1][1]]])
    }

    pub fn conj(&self) -> Self {
        let a = &self.0;
        Mat2([[a[0][0].conj(), a[0][1].conj()], [a[1][0].conj(), a[1][1].conj()]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// `self * rho * self^dagger`.
    pub fn conjugate(&self, rho: &Mat2) -> Mat2 {
        *self * *rho * self.adjoint()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn kron(&self, other: &Mat2) -> Mat4 {
        let mut m = Mat4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m.0[2 * i + k][2 * j + l] = self.0[i][j] * other.0[k][l];
                    }
                }
            }
        }
        m
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut m = self;
        for (x, y) in m.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *x += y;
        }
        m
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut m = self;
        for (x, y) in m.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *x -= y;
        }
        m
    }
}

impl Mat4 {
    pub const fn zeros() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            m.0[i][i] = ONE;
        }
        m
    }

    /// CNOT with the first (most significant) qubit as control.
    pub fn cnot() -> Self {
        let mut m = Mat4::zeros();
        m.0[0][0] = ONE;
        m.0[1][1] = ONE;
        m.0[2][3] = ONE;
        m.0[3][2] = ONE;
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn apply(&self, v: [C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|j| self.0[i][j] * v[j]).sum();
        }
        out
    }

    pub fn conjugate(&self, rho: &Mat4) -> Mat4 {
        *self * *rho * self.adjoint()
    }

    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `<m|_2 self |m>_2`: the 2x2 block on the first qubit with the second
    /// qubit projected onto computational state `m`.
    pub fn project_second(&self, m: usize) -> Mat2 {
        let mut out = Mat2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                out.0[a][b] = self.0[2 * a + m][2 * b + m];
            }
        }
        out
    }

    /// Partial trace over the second qubit.
    pub fn trace_second(&self) -> Mat2 {
        self.project_second(0) + self.project_second(1)
    }

    /// Partial trace over the first qubit.
    pub fn trace_first(&self) -> Mat2 {
        let mut out = Mat2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                out.0[a][b] = self.0[a][b] + self.0[2 + a][2 + b];
            }
        }
        out
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}
