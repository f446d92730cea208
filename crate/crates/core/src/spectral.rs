//! Collapse-node map on qubit states held in spectral form.
//!
//! A mixed input `(1−Z)|a0><a0| + Z|a1><a1|` is carried as two weighted
//! vectors, so the node output is a sum of four rank-one terms. Its smaller
//! eigenvalue comes from a Cauchy-Binet determinant, which keeps relative
//! accuracy when `Z` is many orders of magnitude below one.

use crate::qmath::{KrausPair, Mat2, NodeGates, C64, ZERO};

/// Qubit state `(1−z)|v0><v0| + z|v1><v1|` with orthonormal `v0`, `v1`.
#[derive(Debug, Clone, Copy)]
pub struct Spectral {
    pub z: f64,
    pub v: [[C64; 2]; 2],
}

impl Spectral {
    /// Spectral form with the basis taken from the columns of `u`.
    pub fn from_basis(z: f64, u: &Mat2) -> Self {
        Spectral { z, v: [[u.0[0][0], u.0[1][0]], [u.0[0][1], u.0[1][1]]] }
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::outer(self.v[0]).scale_re(1.0 - self.z) + Mat2::outer(self.v[1]).scale_re(self.z)
    }
}

/// A weak-measured input after the post-CNOT gate: two weighted vectors
/// whose outer products sum to the unnormalized post-measurement state.
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    pub vecs: [[C64; 2]; 2],
    /// Born probability of the weak outcome.
    pub prob: f64,
}

/// Gates of a collapse node as they act on the time-reversed circuit.
/// The first-qubit gate after the projection is a unitary rotation of the
/// output and does not change its spectrum, so it is not stored.
#[derive(Debug, Clone, Copy)]
pub struct CollapseNode {
    pub kraus: KrausPair,
    /// Applied to the first input after its Kraus operator (`U3ᵀ`).
    pub left_gate: Mat2,
    /// Applied to the second input after its Kraus operator (`U4ᵀ`).
    pub right_gate: Mat2,
    /// Its transpose acts on the second qubit before projection (`U2`).
    pub proj_gate: Mat2,
}

impl CollapseNode {
    pub fn from_gates(kraus: KrausPair, g: &NodeGates) -> Self {
        CollapseNode {
            kraus,
            left_gate: g.u3.matrix().transpose(),
            right_gate: g.u4.matrix().transpose(),
            proj_gate: *g.u2.matrix(),
        }
    }

    pub fn weak_probability(&self, m: u8, s: &Spectral) -> f64 {
        let d = self.kraus.diag(m);
        let w = |v: &[C64; 2]| d[0] * d[0] * v[0].norm_sqr() + d[1] * d[1] * v[1].norm_sqr();
        (1.0 - s.z) * w(&s.v[0]) + s.z * w(&s.v[1])
    }

    fn branch(&self, m: u8, s: &Spectral, gate: &Mat2) -> Branch {
        let prob = self.weak_probability(m, s);
        if self.kraus.is_projective() {
            // The outcome leaves the qubit exactly in |1−m>.
            let e = if m == 0 { [ZERO, C64::new(prob.sqrt(), 0.0)] } else { [C64::new(prob.sqrt(), 0.0), ZERO] };
            return Branch { vecs: [gate.apply(e), [ZERO; 2]], prob };
        }
        let d = self.kraus.diag(m);
        let weights = [(1.0 - s.z).max(0.0).sqrt(), s.z.max(0.0).sqrt()];
        let mut vecs = [[ZERO; 2]; 2];
        for i in 0..2 {
            let k = [s.v[i][0] * (d[0] * weights[i]), s.v[i][1] * (d[1] * weights[i])];
            vecs[i] = gate.apply(k);
        }
        Branch { vecs, prob }
    }

    pub fn left(&self, m: u8, s: &Spectral) -> Branch {
        self.branch(m, s, &self.left_gate)
    }

    pub fn right(&self, m: u8, s: &Spectral) -> Branch {
        self.branch(m, s, &self.right_gate)
    }

    /// Unnormalized trace and smaller eigenvalue of the surviving qubit
    /// after projecting the second qubit onto `m_p`. The trace is the joint
    /// probability of `m_p` with both weak outcomes.
    pub fn output(&self, left: &Branch, right: &Branch, m_p: u8) -> (f64, f64) {
        let c = m_p as usize;
        let r = [self.proj_gate.0[0][c], self.proj_gate.0[1][c]];
        output_spectrum(left, right, r)
    }
}

/// Trace and smaller eigenvalue of `Σ_ij v_ij v_ij†`, where
/// `v_ij = (p_i0 (r·q_j), p_i1 (r·X q_j))` is the first-qubit image of
/// `CNOT (p_i ⊗ q_j)` contracted with `r` on the second qubit.
fn output_spectrum(left: &Branch, right: &Branch, r: [C64; 2]) -> (f64, f64) {
    let mut v = [[ZERO; 2]; 4];
    for j in 0..2 {
        let q = right.vecs[j];
        let alpha = r[0] * q[0] + r[1] * q[1];
        let beta = r[0] * q[1] + r[1] * q[0];
        for i in 0..2 {
            let p = left.vecs[i];
            v[2 * i + j] = [p[0] * alpha, p[1] * beta];
        }
    }
    let trace: f64 = v.iter().map(|x| x[0].norm_sqr() + x[1].norm_sqr()).sum();
    if !(trace > 0.0) {
        return (0.0, 0.0);
    }
    let mut det = 0.0;
    for k in 0..4 {
        for l in k + 1..4 {
            det += (v[k][0] * v[l][1] - v[k][1] * v[l][0]).norm_sqr();
        }
    }
    // (a − d)² + 4|b|² avoids the cancellation in tr² − 4 det near degeneracy.
    let (mut a, mut d, mut b) = (0.0, 0.0, ZERO);
    for x in &v {
        a += x[0].norm_sqr();
        d += x[1].norm_sqr();
        b += x[0] * x[1].conj();
    }
    let disc = (a - d) * (a - d) + 4.0 * b.norm_sqr();
    let lmax = 0.5 * (trace + disc.sqrt());
    let z = (det / lmax / trace).clamp(0.0, 0.5);
    (trace, z)
}
