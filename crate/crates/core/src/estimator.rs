//! The sign-decoding estimator of the averaged order parameter, and exact
//! enumeration over records for small trees.
//!
//! Each shot contributes `X = 1/2 − (−1)^{m0} sign(n_z)`, where `n` is the
//! decoded Bloch vector. Averaging over gates and records, `E[X] = Z_t(θ)`.

use crate::decoder::{collapse_node, decode_bloch, predict_sign, DecodeResult};
use crate::error::{domain, Result};
use crate::qmath::{entangling_unitary, eig2, BlochVector, DensityMatrix2, Mat2, NodeGates, Unitary2, C64};
use crate::sampler::{record_distribution, record_probability, sample_shots, Backend};
use crate::stats::mean_std;
use crate::tree::{build_instance, truncate, InstanceSet, MeasurementRecord, RecordLine, TreeInstance};
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub z_hat: f64,
    pub se: f64,
    pub n_circuits: usize,
    pub n_shots: usize,
    pub t: u32,
    pub theta: f64,
}

/// `1/2 − (−1)^{m0} / sign(n_z)`; `−1/2` for a correct prediction, `3/2` otherwise.
pub fn x_statistic(m0: u8, n_z: f64) -> f64 {
    let s = predict_sign(&BlochVector { nx: 0.0, ny: 0.0, nz: n_z }) as f64;
    let parity = if m0 == 0 { 1.0 } else { -1.0 };
    0.5 - parity / s
}

/// Grand mean of per-circuit means, with the standard error of the circuit
/// means. `n_shots` reports the largest per-circuit shot count.
pub fn estimate_z(xs: &[Vec<f64>], t: u32, theta: f64) -> Result<EstimatorResult> {
    if xs.is_empty() || xs.iter().any(|c| c.is_empty()) {
        return Err(domain("estimator needs at least one circuit with at least one shot"));
    }
    let means: Vec<f64> = xs.iter().map(|c| mean_std(c).0).collect();
    let (z_hat, sd) = mean_std(&means);
    let n_circuits = means.len();
    Ok(EstimatorResult {
        z_hat,
        se: sd / (n_circuits as f64).sqrt(),
        n_circuits,
        n_shots: xs.iter().map(Vec::len).max().unwrap_or(0),
        t,
        theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub t: u32,
    pub theta: f64,
    pub n_circuits: u64,
    pub n_shots: u64,
    pub seed: u64,
    pub backend: Backend,
    /// Statevector depth cap.
    pub max_depth: u32,
}

/// X values for every depth `t' ≤ t`: `out[t'−1][shot]`.
fn shot_statistics(instance: &TreeInstance, records: &[MeasurementRecord]) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::with_capacity(records.len()); instance.t as usize];
    for rec in records {
        for tp in 1..=instance.t {
            let (inst, r) = truncate(instance, rec, tp)?;
            let d = decode_bloch(&inst, r.weak())?;
            out[tp as usize - 1].push(x_statistic(r.m0(), d.n.nz));
        }
    }
    Ok(out)
}

fn aggregate(per_circuit: Vec<Vec<Vec<f64>>>, t: u32, theta: f64) -> Result<Vec<EstimatorResult>> {
    (1..=t)
        .map(|tp| {
            let xs: Vec<Vec<f64>> = per_circuit.iter().map(|c| c[tp as usize - 1].clone()).collect();
            estimate_z(&xs, tp, theta)
        })
        .collect()
}

/// Simulated end-to-end protocol: builds circuits, samples shots, decodes and
/// aggregates. Returns one result per depth `t' = 1..=t`, obtained by
/// truncating the depth-`t` data. Runs on the current rayon pool; the output
/// does not depend on its size.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<Vec<EstimatorResult>> {
    if cfg.n_circuits == 0 || cfg.n_shots == 0 {
        return Err(domain("need at least one circuit and one shot"));
    }
    let set = InstanceSet::generate(cfg.t, cfg.theta, cfg.seed, cfg.n_circuits)?;
    let per_circuit = set
        .circuits
        .par_iter()
        .map(|c| {
            let recs = sample_shots(&c.instance, c.id, cfg.n_shots, cfg.seed, cfg.backend, cfg.max_depth)?;
            shot_statistics(&c.instance, &recs)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(per_circuit, cfg.t, set.theta)
}

/// Estimates from stored records. Records are grouped by circuit id in
/// ascending order; every referenced circuit must exist in `set`.
pub fn estimate_from_records(set: &InstanceSet, records: &[RecordLine]) -> Result<Vec<EstimatorResult>> {
    let mut groups: BTreeMap<u64, Vec<MeasurementRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.circuit_id).or_default().push(r.record.clone());
    }
    let groups: Vec<(u64, Vec<MeasurementRecord>)> = groups.into_iter().collect();
    let per_circuit = groups
        .par_iter()
        .map(|(id, recs)| {
            let inst = set.get(*id).ok_or_else(|| domain(format!("records reference unknown circuit {id}")))?;
            if let Some(bad) = recs.iter().find(|r| r.bits.len() != inst.record_len()) {
                return Err(domain(format!("circuit {id}: record of {} bits, expected {}", bad.bits.len(), inst.record_len())));
            }
            shot_statistics(inst, recs)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(per_circuit, set.t, set.theta)
}

/// Collapse-process outputs for every weak record of a small instance:
/// `(P(M_w), ρ(M_w))`, with records of zero probability dropped.
pub fn collapse_distribution(instance: &TreeInstance) -> Result<Vec<(f64, DensityMatrix2)>> {
    if instance.t > 3 {
        return Err(crate::Error::Capacity(format!("exact enumeration limited to t <= 3, got {}", instance.t)));
    }
    Ok(subtree(instance, 0))
}

fn subtree(instance: &TreeInstance, k: usize) -> Vec<(f64, DensityMatrix2)> {
    let n = instance.n_nodes();
    let leaf = vec![(1.0, DensityMatrix2::maximally_mixed())];
    let left = if 2 * k + 1 < n { subtree(instance, 2 * k + 1) } else { leaf.clone() };
    let right = if 2 * k + 2 < n { subtree(instance, 2 * k + 2) } else { leaf };
    let kraus = instance.kraus();
    let u = entangling_unitary(&instance.gates[k]);
    let mut out = Vec::with_capacity(4 * left.len() * right.len());
    for (wl, sl) in &left {
        for (wr, sr) in &right {
            for m in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                if let Some((rho, p)) = collapse_node(&kraus, &u, sl.matrix(), sr.matrix(), m, 0) {
                    out.push((wl * wr * 2.0 * p, rho));
                }
            }
        }
    }
    out
}

/// `Z_t(θ, U) = Σ_{M_w} P(M_w) Z(ρ(M_w))` for one instance, by enumeration.
pub fn exact_z(instance: &TreeInstance) -> Result<f64> {
    Ok(collapse_distribution(instance)?.iter().map(|(w, rho)| w * eig2(rho).0).sum())
}

/// `Σ_records p(record) X(record)` for one instance, by enumeration.
pub fn exact_expected_x(instance: &TreeInstance) -> Result<f64> {
    let mut total = 0.0;
    for (bits, p) in record_distribution(instance, 3)? {
        if p == 0.0 {
            continue;
        }
        let d = decode_bloch(instance, &bits[1..])?;
        total += p * x_statistic(bits[0], d.n.nz);
    }
    Ok(total)
}

/// Rotation taking unit Bloch vector `a` to unit vector `b`, as a qubit unitary.
fn bloch_rotation(a: [f64; 3], b: [f64; 3]) -> Mat2 {
    let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    let mut axis = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let mut len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if len < 1e-12 {
        if dot > 0.0 {
            return Mat2::identity();
        }
        // Antiparallel: any perpendicular axis.
        axis = if a[0].abs() < 0.9 { [0.0, -a[2], a[1]] } else { [-a[2], 0.0, a[0]] };
        len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    }
    let k = axis.map(|x| x / len);
    let alpha = dot.acos();
    let (c, s) = ((alpha / 2.0).cos(), (alpha / 2.0).sin());
    let i = C64::new(0.0, 1.0);
    Mat2::identity().scale_re(c) - (Mat2::pauli_x().scale_re(k[0]) + Mat2::pauli_y().scale_re(k[1]) + Mat2::pauli_z().scale_re(k[2])).scale(i * s)
}

/// Nodes and weights for averaging a function of `u = ŵ_z` over uniformly
/// random directions `ŵ`: two-point Gauss-Legendre on each half of
/// `[−1, 1]`, exact for `|u|` and for polynomials up to degree three on
/// each half.
pub fn direction_quadrature() -> [(f64, f64); 4] {
    let h = 0.5 / 3f64.sqrt();
    [(0.5 - h, 0.25), (0.5 + h, 0.25), (-0.5 + h, 0.25), (-0.5 - h, 0.25)]
}

/// `E[X | U]` with the root's first gate integrated exactly over the Haar
/// measure. Only the direction of the decoded Bloch vector depends on that
/// gate, so for each weak record the gate is replaced by `U1·Vᵀ`, where `V`
/// rotates `n̂` to quadrature directions. Probabilities come from the
/// expansion-process statevector and `X` from the decoder of the modified
/// circuit.
pub fn root_frame_averaged_expected_x(instance: &TreeInstance) -> Result<f64> {
    if instance.t > 3 {
        return Err(crate::Error::Capacity(format!("exact enumeration limited to t <= 3, got {}", instance.t)));
    }
    let n_weak = 2 * instance.n_nodes();
    let mut total = 0.0;
    for code in 0..(1usize << n_weak) {
        let m_w: Vec<u8> = (0..n_weak).map(|i| ((code >> (n_weak - 1 - i)) & 1) as u8).collect();
        let d: DecodeResult = match decode_bloch(instance, &m_w) {
            Ok(d) => d,
            Err(crate::Error::InconsistentRecord { .. }) => continue,
            Err(e) => return Err(e),
        };
        let r = d.n.norm();
        let nhat = if r > 1e-14 { [d.n.nx / r, d.n.ny / r, d.n.nz / r] } else { [0.0, 0.0, 1.0] };
        for (u, w) in direction_quadrature() {
            let target = [(1.0 - u * u).sqrt(), 0.0, u];
            let v = bloch_rotation(nhat, target).transpose();
            let mut gates: Vec<NodeGates> = instance.gates.clone();
            gates[0].u1 = gates[0].u1.compose(&Unitary2::new(v)?);
            let modified = TreeInstance::new(instance.t, instance.theta, gates, instance.seed)?;
            let nz = decode_bloch(&modified, &m_w)?.n.nz;
            for m0 in 0..2u8 {
                let rec = MeasurementRecord::from_parts(m0, &m_w)?;
                let p = record_probability(&modified, &rec, 3)?;
                total += w * p * x_statistic(m0, nz);
            }
        }
    }
    Ok(total)
}

/// Mean exact `Z_t(θ, U)` over `n` instances with seeds derived from `seed`,
/// and its standard error.
pub fn exact_z_ensemble(t: u32, theta: f64, n: u64, seed: u64) -> Result<(f64, f64)> {
    let zs = (0..n)
        .into_par_iter()
        .map(|i| exact_z(&build_instance(t, theta, crate::tree::circuit_seed(seed, i))?))
        .collect::<Result<Vec<f64>>>()?;
    let (m, sd) = mean_std(&zs);
    Ok((m, sd / (n as f64).sqrt()))
}
