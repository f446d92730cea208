//! Gate-level tree circuits with ancilla-based weak measurements, and their
//! OpenQASM 2.0 form.
//!
//! System qubits follow the sampler layout: the root is qubit 0 and node `k`
//! creates qubit `k+1`. Ancillas for the weak measurements occupy
//! `2^t .. 2^t + l` and are handed out round-robin, with a reset whenever an
//! ancilla is reused.

mod qasm;

pub use qasm::{export_qasm, parse_qasm, qasm_file_name};

use crate::error::{domain, Error, Result};
use crate::qmath::{kraus_pair, Mat2, Mat4, Unitary2, C64, ONE, ZERO};
use crate::sampler::input_qubit;
use crate::tree::TreeInstance;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `ry(θ)` on the ancilla, CNOT from the data qubit, measure.
    Standard,
    /// `|+>` ancilla, `rzz(π/2 − θ)`, `rx(π/2)` on the ancilla, measure.
    Native,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::Native => "native",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "native" => Ok(Variant::Native),
            _ => Err(domain(format!("unknown variant `{s}` (expected standard or native)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H,
    U3 { theta: f64, phi: f64, lambda: f64 },
    Rx(f64),
    Ry(f64),
    Rzz(f64),
    Cx,
    Reset,
    Measure,
}

impl Gate {
    pub fn arity(&self) -> usize {
        match self {
            Gate::Cx | Gate::Rzz(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    pub gate: Gate,
    pub qubits: Vec<usize>,
    /// Target classical bit of a measurement.
    pub clbit: Option<usize>,
}

/// Parameters echoed into exported headers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitMeta {
    pub t: u32,
    pub theta: f64,
    pub seed: u64,
    pub variant: Variant,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateCircuit {
    pub n_qubits: usize,
    pub ops: Vec<Op>,
    /// Record position of each classical bit; the identity by construction.
    pub clbit_order: Vec<usize>,
    pub meta: CircuitMeta,
}

impl GateCircuit {
    pub fn n_clbits(&self) -> usize {
        self.clbit_order.len()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.ops.iter().filter(|o| o.gate.arity() == 2).count()
    }

    pub fn measurement_count(&self) -> usize {
        self.ops.iter().filter(|o| o.gate == Gate::Measure).count()
    }
}

/// `u3` angles of a unitary, up to global phase.
pub fn u3_angles(u: &Unitary2) -> (f64, f64, f64) {
    let m = &u.matrix().0;
    let (c, s) = (m[0][0].norm(), m[1][0].norm());
    let theta = 2.0 * s.atan2(c);
    const TINY: f64 = 1e-14;
    if c > TINY {
        let g = m[0][0].arg();
        let phi = if s > TINY { m[1][0].arg() - g } else { 0.0 };
        let lambda = if s > TINY { (-m[0][1]).arg() - g } else { m[1][1].arg() - g - phi };
        (theta, phi, lambda)
    } else {
        let g = (-m[0][1]).arg();
        (theta, m[1][0].arg() - g, 0.0)
    }
}

pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = |a: f64| C64::from_polar(1.0, a);
    Mat2([[C64::new(c, 0.0), -e(lambda) * s], [e(phi) * s, e(phi + lambda) * c]])
}

pub fn rx(a: f64) -> Mat2 {
    let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
    Mat2([[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]])
}

pub fn ry(a: f64) -> Mat2 {
    let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
    Mat2::from_real([[c, -s], [s, c]])
}

pub fn hadamard() -> Mat2 {
    Mat2::from_real([[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
}

/// `exp(−i φ Z⊗Z / 2)`.
pub fn rzz(phi: f64) -> Mat4 {
    let mut m = Mat4::zeros();
    let (a, b) = (C64::from_polar(1.0, -phi / 2.0), C64::from_polar(1.0, phi / 2.0));
    m.0[0][0] = a;
    m.0[1][1] = b;
    m.0[2][2] = b;
    m.0[3][3] = a;
    m
}

/// `ZZ` angle of the native block.
pub fn native_phi(theta: f64) -> f64 {
    FRAC_PI_2 - theta
}

/// Pre-measurement unitary of a weak block on `(data, ancilla)`, data first,
/// including the ancilla preparation from `|0>`.
pub fn weak_block_unitary(theta: f64, variant: Variant) -> Mat4 {
    let i = Mat2::identity();
    match variant {
        Variant::Standard => Mat4::cnot() * i.kron(&ry(theta)),
        Variant::Native => i.kron(&rx(FRAC_PI_2)) * rzz(native_phi(theta)) * i.kron(&hadamard()),
    }
}

/// Operator `<m|_anc U |0>_anc` on the data qubit.
pub fn block_kraus(u: &Mat4, m: usize) -> Mat2 {
    let mut k = Mat2::zeros();
    for d_out in 0..2 {
        for d_in in 0..2 {
            k.0[d_out][d_in] = u.0[2 * d_out + m][2 * d_in];
        }
    }
    k
}

/// Global phase relating the two variants: native = phase × standard.
pub fn expected_variant_phase() -> C64 {
    C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// Largest `1 − |<ψ_std|ψ_nat>|²` over the trials.
    pub max_infidelity: f64,
    /// Overlap `<ψ_std|ψ_nat>` of the first trial.
    pub phase: C64,
    /// Largest distance of any trial's overlap from `(1−i)/√2`.
    pub max_phase_error: f64,
}

/// Compares both variants on random pure states of the data qubit entangled
/// with a reference qubit, the ancilla starting in `|0>`.
pub fn verify_variant_equivalence<R: Rng + ?Sized>(theta: f64, trials: usize, rng: &mut R) -> Result<EquivalenceReport> {
    if trials == 0 {
        return Err(domain("need at least one trial"));
    }
    let std_u = weak_block_unitary(theta, Variant::Standard);
    let nat_u = weak_block_unitary(theta, Variant::Native);
    let mut report = EquivalenceReport { max_infidelity: 0.0, phase: ZERO, max_phase_error: 0.0 };
    for trial in 0..trials {
        // Random (data, reference) state.
        let a = crate::qmath::haar_state(rng);
        let b = crate::qmath::haar_state(rng);
        let c = crate::qmath::haar_state(rng);
        let x = rng.random::<f64>();
        let mut dr = [ZERO; 4];
        for d in 0..2 {
            for r in 0..2 {
                dr[2 * d + r] = a[d] * b[r] * x.sqrt() + c[d] * c[1 - r].conj() * (1.0 - x).sqrt();
            }
        }
        let n: f64 = dr.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        dr.iter_mut().for_each(|z| *z /= n);
        let apply = |u: &Mat4| {
            // Layout (data, ancilla, reference).
            let mut out = [ZERO; 8];
            for r in 0..2 {
                let v = u.apply([dr[r], ZERO, dr[2 + r], ZERO]);
                for j in 0..4 {
                    out[2 * j + r] = v[j];
                }
            }
            out
        };
        let (s, t) = (apply(&std_u), apply(&nat_u));
        let overlap: C64 = s.iter().zip(&t).map(|(p, q)| p.conj() * q).sum();
        report.max_infidelity = report.max_infidelity.max(1.0 - overlap.norm_sqr());
        report.max_phase_error = report.max_phase_error.max((overlap - expected_variant_phase()).norm());
        if trial == 0 {
            report.phase = overlap;
        }
    }
    Ok(report)
}

struct Builder {
    ops: Vec<Op>,
    n_sys: usize,
    l: usize,
    next: usize,
    used: Vec<bool>,
}

impl Builder {
    fn push(&mut self, gate: Gate, qubits: &[usize]) {
        self.ops.push(Op { gate, qubits: qubits.to_vec(), clbit: None });
    }

    fn u3(&mut self, u: &Unitary2, q: usize) {
        let (theta, phi, lambda) = u3_angles(u);
        self.push(Gate::U3 { theta, phi, lambda }, &[q]);
    }

    fn measure(&mut self, q: usize, c: usize) {
        self.ops.push(Op { gate: Gate::Measure, qubits: vec![q], clbit: Some(c) });
    }

    fn weak(&mut self, theta: f64, variant: Variant, data: usize, clbit: usize) {
        let slot = self.next;
        self.next = (self.next + 1) % self.l;
        let a = self.n_sys + slot;
        if self.used[slot] {
            self.push(Gate::Reset, &[a]);
        }
        self.used[slot] = true;
        match variant {
            Variant::Standard => {
                self.push(Gate::Ry(theta), &[a]);
                self.push(Gate::Cx, &[data, a]);
            }
            Variant::Native => {
                self.push(Gate::H, &[a]);
                self.push(Gate::Rzz(native_phi(theta)), &[data, a]);
                self.push(Gate::Rx(FRAC_PI_2), &[a]);
            }
        }
        self.measure(a, clbit);
    }
}

/// Builds the gate-level circuit of an instance with `l` weak-measurement ancillas.
pub fn build_gate_circuit(instance: &TreeInstance, l: usize, variant: Variant) -> Result<GateCircuit> {
    if l < 1 {
        return Err(domain("need at least one ancilla"));
    }
    let n_sys = 1usize << instance.t;
    let mut b = Builder { ops: Vec::new(), n_sys, l, next: 0, used: vec![false; l] };
    b.push(Gate::H, &[0]);
    b.measure(0, 0);
    for (k, g) in instance.gates.iter().enumerate() {
        let (qa, qb) = (input_qubit(k) as usize, k + 1);
        b.u3(&g.u1, qa);
        b.u3(&g.u2, qb);
        b.push(Gate::Cx, &[qa, qb]);
        b.u3(&g.u3, qa);
        b.u3(&g.u4, qb);
        b.weak(instance.theta, variant, qa, 1 + 2 * k);
        b.weak(instance.theta, variant, qb, 2 + 2 * k);
    }
    Ok(GateCircuit {
        n_qubits: n_sys + l,
        ops: b.ops,
        clbit_order: (0..instance.record_len()).collect(),
        meta: CircuitMeta { t: instance.t, theta: instance.theta, seed: instance.seed, variant, l },
    })
}

/// Largest deviation of either variant's post-selected operators from the
/// Kraus pair, after removing the native block's global phase.
pub fn kraus_reconstruction_error(theta: f64) -> Result<f64> {
    let k = kraus_pair(theta)?;
    let mut worst: f64 = 0.0;
    for (variant, phase) in [(Variant::Standard, ONE), (Variant::Native, expected_variant_phase())] {
        let u = weak_block_unitary(theta, variant);
        for m in 0..2u8 {
            let got = block_kraus(&u, m as usize).scale(phase.conj());
            worst = worst.max(got.max_abs_diff(&k.op(m)));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::haar_unitary;
    use crate::rng::{stream, Purpose};
    use crate::tree::build_instance;
    use std::f64::consts::PI;

    #[test]
    fn u3_reproduces_matrix_up_to_phase() {
        let mut rng = stream(5, Purpose::Test, &[]);
        let mut cases: Vec<Unitary2> = (0..200).map(|_| haar_unitary(&mut rng)).collect();
        cases.push(Unitary2::identity());
        cases.push(Unitary2::new(Mat2::pauli_x()).unwrap());
        cases.push(Unitary2::new(Mat2::pauli_y()).unwrap());
        for u in cases {
            let (a, b, c) = u3_angles(&u);
            let v = u3_matrix(a, b, c);
            let overlap = (v.adjoint() * *u.matrix()).trace() / 2.0;
            assert!((overlap.norm() - 1.0).abs() < 1e-12);
            assert!(v.scale(overlap).max_abs_diff(u.matrix()) < 1e-12);
        }
    }

    #[test]
    fn block_limits() {
        let u = weak_block_unitary(PI, Variant::Standard);
        // Projective limit: the ancilla ends in the flipped data value.
        assert!(block_kraus(&u, 0).max_abs_diff(&Mat2::diag(0.0, 1.0)) < 1e-15);
        assert!(block_kraus(&u, 1).max_abs_diff(&Mat2::diag(1.0, 0.0)) < 1e-15);
        let n = weak_block_unitary(FRAC_PI_2, Variant::Native);
        let local = Mat2::identity().kron(&(rx(FRAC_PI_2) * hadamard()));
        assert!(n.max_abs_diff(&local) < 1e-15);
    }

    #[test]
    fn blocks_reproduce_kraus_pair() {
        for i in 0..10 {
            let theta = FRAC_PI_2 + (PI - FRAC_PI_2) * i as f64 / 9.0;
            assert!(kraus_reconstruction_error(theta).unwrap() < 1e-12);
        }
    }

    #[test]
    fn circuit_counts() {
        let inst = build_instance(4, 2.0, 3).unwrap();
        for variant in [Variant::Standard, Variant::Native] {
            let c = build_gate_circuit(&inst, 4, variant).unwrap();
            assert_eq!(c.n_qubits, 20);
            assert_eq!(c.two_qubit_gate_count(), 45);
            assert_eq!(c.n_clbits(), 31);
            assert_eq!(c.measurement_count(), 31);
            assert_eq!(c.ops[1].clbit, Some(0));
        }
        assert!(build_gate_circuit(&inst, 0, Variant::Native).is_err());
    }
}
