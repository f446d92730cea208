//! Qubit-scale linear algebra: Haar sampling, Kraus pairs, entangling
//! unitaries and density-matrix spectra.

mod linalg;

pub use linalg::{Mat2, Mat4, ONE, ZERO};
pub use num_complex::Complex64 as C64;

use crate::error::{domain, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

/// Inputs this close outside `[π/2, π]` are clamped onto the interval.
pub const THETA_SLACK: f64 = 1e-4;

const UNITARY_TOL: f64 = 1e-12;
const RHO_TOL: f64 = 1e-12;

/// Validates a measurement strength, clamping values within [`THETA_SLACK`]
/// of the interval ends.
pub fn check_theta(theta: f64) -> Result<f64> {
    if !theta.is_finite() || theta < FRAC_PI_2 - THETA_SLACK || theta > PI + THETA_SLACK {
        return Err(domain(format!("theta = {theta} outside [pi/2, pi]")));
    }
    Ok(theta.clamp(FRAC_PI_2, PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(Mat2);

impl Unitary2 {
    pub fn new(m: Mat2) -> Result<Self> {
        let err = (m.adjoint() * m).max_abs_diff(&Mat2::identity());
        if err.is_nan() || err > UNITARY_TOL {
            return Err(domain(format!("matrix is not unitary (deviation {err:e})")));
        }
        Ok(Unitary2(m))
    }

    pub fn identity() -> Self {
        Unitary2(Mat2::identity())
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Unitary2(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Unitary2(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Unitary2(self.0.conj())
    }

    /// Image of computational basis state `k`.
    pub fn apply_col(&self, k: usize) -> [C64; 2] {
        [self.0 .0[0][k], self.0 .0[1][k]]
    }

    pub fn compose(&self, other: &Unitary2) -> Self {
        Unitary2(self.0 * other.0)
    }

    /// Row-major `(re00, im00, re01, im01, re10, im10, re11, im11)`.
    pub fn to_row_major(&self) -> [f64; 8] {
        let a = &self.0 .0;
        [
            a[0][0].re, a[0][0].im, a[0][1].re, a[0][1].im,
            a[1][0].re, a[1][0].im, a[1][1].re, a[1][1].im,
        ]
    }

    pub fn from_row_major(v: &[f64; 8]) -> Result<Self> {
        Unitary2::new(Mat2([
            [C64::new(v[0], v[1]), C64::new(v[2], v[3])],
            [C64::new(v[4], v[5]), C64::new(v[6], v[7])],
        ]))
    }
}

/// The four single-qubit gates of one tree node: `u1`, `u2` act before the
/// CNOT (on the input and fresh qubit), `u3`, `u4` after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGates {
    pub u1: Unitary2,
    pub u2: Unitary2,
    pub u3: Unitary2,
    pub u4: Unitary2,
}

impl NodeGates {
    pub fn identity() -> Self {
        let i = Unitary2::identity();
        NodeGates { u1: i, u2: i, u3: i, u4: i }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        NodeGates {
            u1: haar_unitary(rng),
            u2: haar_unitary(rng),
            u3: haar_unitary(rng),
            u4: haar_unitary(rng),
        }
    }

    pub fn as_array(&self) -> [Unitary2; 4] {
        [self.u1, self.u2, self.u3, self.u4]
    }
}

/// Weak-measurement Kraus operators `K_m = sin(θ/2) I + (cos(θ/2) − sin(θ/2)) |m><m|`.
///
/// Both are real and diagonal; `k0 = diag(cos, sin)`, `k1 = diag(sin, cos)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausPair {
    pub theta: f64,
    pub k0: [f64; 2],
    pub k1: [f64; 2],
}

impl KrausPair {
    pub fn diag(&self, m: u8) -> [f64; 2] {
        if m == 0 { self.k0 } else { self.k1 }
    }

    pub fn op(&self, m: u8) -> Mat2 {
        let d = self.diag(m);
        Mat2::diag(d[0], d[1])
    }

    /// `cos(θ/2)`, the weight on the outcome's own basis state.
    pub fn c(&self) -> f64 {
        self.k0[0]
    }

    /// `sin(θ/2)`.
    pub fn s(&self) -> f64 {
        self.k0[1]
    }

    pub fn is_projective(&self) -> bool {
        self.c() == 0.0
    }
}

pub fn kraus_pair(theta: f64) -> Result<KrausPair> {
    let theta = check_theta(theta)?;
    let (c, s) = if theta == PI {
        (0.0, 1.0)
    } else if theta == FRAC_PI_2 {
        (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
    } else {
        ((theta / 2.0).cos(), (theta / 2.0).sin())
    };
    Ok(KrausPair { theta, k0: [c, s], k1: [s, c] })
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * FRAC_1_SQRT_2
}

/// Haar-distributed 2×2 unitary from a complex Ginibre matrix.
///
/// Gram-Schmidt yields a QR factorization with a positive real diagonal in R,
/// which is the phase fix needed for exact Haar measure.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> Unitary2 {
    loop {
        let a = [complex_gaussian(rng), complex_gaussian(rng)];
        let b = [complex_gaussian(rng), complex_gaussian(rng)];
        let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        if na < 1e-150 {
            continue;
        }
        let q0 = [a[0] / na, a[1] / na];
        let proj = q0[0].conj() * b[0] + q0[1].conj() * b[1];
        let r = [b[0] - proj * q0[0], b[1] - proj * q0[1]];
        let nr = (r[0].norm_sqr() + r[1].norm_sqr()).sqrt();
        if nr < 1e-150 {
            continue;
        }
        let q1 = [r[0] / nr, r[1] / nr];
        return Unitary2(Mat2([[q0[0], q1[0]], [q0[1], q1[1]]]));
    }
}

/// Haar-random pure qubit state.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R) -> [C64; 2] {
    loop {
        let a = [complex_gaussian(rng), complex_gaussian(rng)];
        let n = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        if n > 1e-150 {
            return [a[0] / n, a[1] / n];
        }
    }
}

/// `(U3 ⊗ U4) · CNOT · (U1 ⊗ U2)`, CNOT controlled on the first qubit.
pub fn entangling_unitary(g: &NodeGates) -> Mat4 {
    g.u3.0.kron(&g.u4.0) * Mat4::cnot() * g.u1.0.kron(&g.u2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2(Mat2);

impl DensityMatrix2 {
    pub fn new(m: Mat2) -> Result<Self> {
        let herm = m.max_abs_diff(&m.adjoint());
        let tr = m.trace();
        if herm.is_nan() || herm > RHO_TOL {
            return Err(domain(format!("matrix is not Hermitian (deviation {herm:e})")));
        }
        if (tr - ONE).norm() > RHO_TOL {
            return Err(domain(format!("trace {} differs from 1", tr.re)));
        }
        let rho = DensityMatrix2(m);
        let n = rho.bloch_raw();
        if n.norm() > 1.0 + 2.0 * RHO_TOL {
            return Err(domain("matrix has a negative eigenvalue"));
        }
        Ok(rho)
    }

    /// Hermitizes and divides by the trace. Returns the state and the trace,
    /// or `None` if the trace is not positive.
    pub fn normalized(m: &Mat2) -> Option<(Self, f64)> {
        let h = (*m + m.adjoint()).scale_re(0.5);
        let tr = h.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return None;
        }
        let mut out = h.scale_re(1.0 / tr);
        out.0[0][0].im = 0.0;
        out.0[1][1].im = 0.0;
        Some((DensityMatrix2(out), tr))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix2(Mat2::diag(0.5, 0.5))
    }

    pub fn pure(v: [C64; 2]) -> Self {
        let n = v[0].norm_sqr() + v[1].norm_sqr();
        DensityMatrix2(Mat2::outer(v).scale_re(1.0 / n))
    }

    pub fn basis(m: u8) -> Self {
        if m == 0 { DensityMatrix2(Mat2::diag(1.0, 0.0)) } else { DensityMatrix2(Mat2::diag(0.0, 1.0)) }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    fn bloch_raw(&self) -> BlochVector {
        let a = &self.0 .0;
        BlochVector {
            nx: 2.0 * a[0][1].re,
            ny: -2.0 * a[0][1].im,
            nz: (a[0][0] - a[1][1]).re,
        }
    }

    /// Smaller eigenvalue.
    pub fn z(&self) -> f64 {
        eig2(self).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        (self.nx * self.nx + self.ny * self.ny + self.nz * self.nz).sqrt()
    }
}

/// Smaller eigenvalue and eigenbasis (larger-eigenvalue column first).
/// A degenerate spectrum returns the computational basis.
pub fn eig2(rho: &DensityMatrix2) -> (f64, Unitary2) {
    let n = rho.bloch_raw();
    let r = n.norm();
    let z = if r > 0.5 {
        let a = &rho.0 .0;
        let det = a[0][0].re * a[1][1].re - a[0][1].norm_sqr();
        det / ((1.0 + r) / 2.0)
    } else {
        (1.0 - r) / 2.0
    };
    let z = z.clamp(0.0, 0.5);
    if r < 1e-15 {
        return (z, Unitary2::identity());
    }
    let (x, y, w) = (n.nx / r, n.ny / r, n.nz / r);
    let v = if w >= 0.0 {
        let k = (2.0 * (1.0 + w)).sqrt();
        [C64::new((1.0 + w) / k, 0.0), C64::new(x / k, y / k)]
    } else {
        let k = (2.0 * (1.0 - w)).sqrt();
        [C64::new(x / k, -y / k), C64::new((1.0 - w) / k, 0.0)]
    };
    let u = Mat2([[v[0], -v[1].conj()], [v[1], v[0].conj()]]);
    (z, Unitary2(u))
}

pub fn bloch(rho: &DensityMatrix2) -> BlochVector {
    rho.bloch_raw()
}

/// `(I + n·σ) / 2`.
pub fn rho_from_bloch(n: &BlochVector) -> Result<DensityMatrix2> {
    if !(n.norm() <= 1.0 + RHO_TOL) {
        return Err(domain(format!("Bloch vector norm {} exceeds 1", n.norm())));
    }
    Ok(DensityMatrix2(Mat2([
        [C64::new((1.0 + n.nz) / 2.0, 0.0), C64::new(n.nx / 2.0, -n.ny / 2.0)],
        [C64::new(n.nx / 2.0, n.ny / 2.0), C64::new((1.0 - n.nz) / 2.0, 0.0)],
    ])))
}

/// Entropy in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix2) -> f64 {
    let z = rho.z();
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    -(xlnx(1.0 - z) + xlnx(z))
}
