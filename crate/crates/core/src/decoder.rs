//! Probe-state reconstruction through the collapse process.
//!
//! The tree is read from the leaves to the root with every node replaced by
//! the transpose of its entangling unitary. Leaves take `I/2`, each node
//! applies its two Kraus operators, the transposed unitary, and projects its
//! second qubit onto `|0>`. The root output equals the probe state
//! `(T†T)ᵀ / Tr[T†T]` of the expansion process.

use crate::error::{domain, Error, Result};
use crate::qmath::{bloch, entangling_unitary, BlochVector, DensityMatrix2, KrausPair, Mat2, Mat4, NodeGates};
use crate::tree::{MeasurementRecord, TreeInstance};

/// Projection norms below this mark a record of probability zero.
pub const UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeResult {
    pub rho: DensityMatrix2,
    pub n: BlochVector,
    pub z: f64,
    /// `ln P(M_w)`: log probability of the weak outcomes in the expansion process.
    pub log_weight: f64,
    /// Number of node maps evaluated.
    pub node_ops: usize,
}

/// One collapse node: returns the normalized surviving-qubit state and the
/// projection probability `p`. `2p` is the node's factor in `P(M_w)` when
/// both inputs are normalized.
pub fn collapse_node(
    kraus: &KrausPair,
    u_ent: &Mat4,
    left: &Mat2,
    right: &Mat2,
    (m_r, m_s): (u8, u8),
    m_p: u8,
) -> Option<(DensityMatrix2, f64)> {
    let kl = kraus.op(m_r);
    let kr = kraus.op(m_s);
    let inner = (kl * *left * kl).kron(&(kr * *right * kr));
    let w = u_ent.transpose();
    let out = (w * inner * w.adjoint()).project_second(m_p as usize);
    let p = out.trace().re;
    if !(p >= UNDERFLOW) {
        return None;
    }
    DensityMatrix2::normalized(&out).map(|(rho, _)| (rho, p))
}

fn decode_with(instance: &TreeInstance, m_w: &[u8], projections: Option<&[u8]>, gates: &[NodeGates]) -> Result<DecodeResult> {
    let n = instance.n_nodes();
    if m_w.len() != 2 * n {
        return Err(domain(format!("expected {} weak outcomes, got {}", 2 * n, m_w.len())));
    }
    if let Some(mp) = projections {
        if mp.len() != n {
            return Err(domain(format!("expected {n} projective outcomes, got {}", mp.len())));
        }
    }
    let kraus = instance.kraus();
    let mixed = *DensityMatrix2::maximally_mixed().matrix();
    let mut states: Vec<Mat2> = vec![mixed; n];
    let mut log_weight = 0.0;
    let mut node_ops = 0;
    for k in (0..n).rev() {
        let left = if 2 * k + 1 < n { states[2 * k + 1] } else { mixed };
        let right = if 2 * k + 2 < n { states[2 * k + 2] } else { mixed };
        let m_p = projections.map_or(0, |mp| mp[k]);
        let u = entangling_unitary(&gates[k]);
        let (rho, p) = collapse_node(&kraus, &u, &left, &right, (m_w[2 * k], m_w[2 * k + 1]), m_p).ok_or_else(|| {
            let kl = kraus.op(m_w[2 * k]);
            let kr = kraus.op(m_w[2 * k + 1]);
            let w = u.transpose();
            let norm = (w * (kl * left * kl).kron(&(kr * right * kr)) * w.adjoint()).project_second(m_p as usize).trace().re;
            Error::InconsistentRecord { node: k, norm }
        })?;
        node_ops += 1;
        log_weight += (2.0 * p).ln();
        states[k] = *rho.matrix();
    }
    let rho = DensityMatrix2::normalized(&states[0]).expect("root state normalized").0;
    let (z, _) = crate::qmath::eig2(&rho);
    Ok(DecodeResult { rho, n: bloch(&rho), z, log_weight, node_ops })
}

/// Decodes the probe state from the gates and the weak outcomes.
pub fn decode_bloch(instance: &TreeInstance, m_w: &[u8]) -> Result<DecodeResult> {
    decode_with(instance, m_w, None, &instance.gates)
}

/// Decodes a full record (its `m0` is ignored).
pub fn decode_record(instance: &TreeInstance, record: &MeasurementRecord) -> Result<DecodeResult> {
    decode_bloch(instance, record.weak())
}

/// Collapse process with explicit per-node projective outcomes `m_p`.
pub fn decode_with_projections(instance: &TreeInstance, m_p: &[u8], m_w: &[u8]) -> Result<DecodeResult> {
    decode_with(instance, m_w, Some(m_p), &instance.gates)
}

/// `sign(n_z)` with `sign(0) = +1`.
pub fn predict_sign(n: &BlochVector) -> i8 {
    if n.nz < 0.0 { -1 } else { 1 }
}

/// Gates with each node's projective outcome absorbed: `U2 → U2·X^{m_p}`.
pub fn absorb_projections(gates: &[NodeGates], m_p: &[u8]) -> Vec<NodeGates> {
    let x = crate::qmath::Unitary2::new(Mat2::pauli_x()).expect("X is unitary");
    gates
        .iter()
        .zip(m_p)
        .map(|(g, &m)| if m == 1 { NodeGates { u2: g.u2.compose(&x), ..*g } } else { *g })
        .collect()
}

/// Checks that projecting onto `m_p` equals projecting onto all zeros after
/// absorbing `m_p` into the gates, entrywise within 1e-12.
pub fn invariance_check(instance: &TreeInstance, m_p: &[u8], m_w: &[u8]) -> Result<bool> {
    let direct = decode_with_projections(instance, m_p, m_w)?;
    let absorbed = absorb_projections(&instance.gates, m_p);
    let zeros = vec![0u8; m_p.len()];
    let other = decode_with(instance, m_w, Some(&zeros), &absorbed)?;
    Ok(direct.rho.matrix().max_abs_diff(other.rho.matrix()) < 1e-12 && (direct.log_weight - other.log_weight).abs() < 1e-12)
}
