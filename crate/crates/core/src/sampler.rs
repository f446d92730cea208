//! Born-rule sampling of measurement records from the expansion process.
//!
//! The probe qubit is never simulated: measuring it first leaves the root in
//! `|m0>` with `m0` a fair coin, which gives the same joint distribution.
//!
//! Two backends produce identical distributions. [`Backend::Statevector`]
//! keeps the whole tree state and is limited to small depths.
//! [`Backend::Branch`] walks the tree depth-first with 2×2 conditional states
//! and subtree effect operators, so its memory is linear in the node count.

use crate::error::{domain, Error, Result};
use crate::qmath::{entangling_unitary, DensityMatrix2, KrausPair, Mat2, Mat4, C64, ONE, ZERO};
use crate::rng::{stream, Purpose, StreamRng};
use crate::tree::{MeasurementRecord, TreeInstance};
use rand::Rng;
use std::str::FromStr;

/// Default statevector depth cap (`2^16` amplitudes).
pub const DEFAULT_MAX_DEPTH: u32 = 4;
/// Largest cap that may be configured.
pub const HARD_MAX_DEPTH: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Statevector,
    Branch,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(Backend::Statevector),
            "branch" => Ok(Backend::Branch),
            _ => Err(domain(format!("unknown backend `{s}` (expected statevector or branch)"))),
        }
    }
}

/// Statevector over the live system qubits. Bit `q` of an index is qubit `q`.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
    pub norm_sqr: f64,
}

impl StateVector {
    pub fn basis(m: u8) -> Self {
        let mut amplitudes = vec![ZERO; 2];
        amplitudes[m as usize] = ONE;
        StateVector { amplitudes, norm_sqr: 1.0 }
    }

    pub fn n_qubits(&self) -> u32 {
        self.amplitudes.len().trailing_zeros()
    }

    /// Appends a qubit in `|0>` as the new most significant bit.
    fn push_zero_qubit(&mut self) -> Result<()> {
        let n = self.amplitudes.len();
        self.amplitudes
            .try_reserve_exact(n)
            .map_err(|_| Error::Capacity(format!("cannot allocate {} amplitudes", 2 * n)))?;
        self.amplitudes.resize(2 * n, ZERO);
        Ok(())
    }

    /// Applies a 4×4 gate with qubit `a` as the first factor and `b` as the second.
    fn apply_two(&mut self, u: &Mat4, a: u32, b: u32) {
        let (ba, bb) = (1usize << a, 1usize << b);
        let m = &u.0;
        for i in 0..self.amplitudes.len() {
            if i & ba != 0 || i & bb != 0 {
                continue;
            }
            let idx = [i, i | bb, i | ba, i | ba | bb];
            let v = idx.map(|j| self.amplitudes[j]);
            for (r, &j) in idx.iter().enumerate() {
                self.amplitudes[j] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
            }
        }
    }

    /// Squared norm after applying `diag(d)` to qubit `q`, without applying it.
    fn weight(&self, d: [f64; 2], q: u32) -> f64 {
        let bit = 1usize << q;
        let (mut w0, mut w1) = (0.0, 0.0);
        for (i, a) in self.amplitudes.iter().enumerate() {
            if i & bit == 0 { w0 += a.norm_sqr() } else { w1 += a.norm_sqr() }
        }
        d[0] * d[0] * w0 + d[1] * d[1] * w1
    }

    fn apply_diag(&mut self, d: [f64; 2], q: u32) {
        let bit = 1usize << q;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= if i & bit == 0 { d[0] } else { d[1] };
        }
    }

    fn scale(&mut self, s: f64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
    }

    fn recompute_norm(&mut self) -> f64 {
        self.norm_sqr = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        self.norm_sqr
    }
}

/// Qubit carrying node `k`'s input. The root uses qubit 0, node `k` creates
/// qubit `k+1`, left children inherit their parent's input qubit and right
/// children take the parent's fresh qubit.
pub fn input_qubit(k: usize) -> u32 {
    let mut k = k;
    loop {
        if k == 0 {
            return 0;
        }
        if k % 2 == 0 {
            return ((k - 2) / 2 + 1) as u32;
        }
        k = (k - 1) / 2;
    }
}

fn check_cap(instance: &TreeInstance, max_depth: u32) -> Result<()> {
    if max_depth > HARD_MAX_DEPTH {
        return Err(Error::Capacity(format!("statevector cap {max_depth} exceeds hard limit {HARD_MAX_DEPTH}")));
    }
    if instance.t > max_depth {
        return Err(Error::Capacity(format!(
            "statevector backend limited to t <= {max_depth}, instance has t = {}",
            instance.t
        )));
    }
    Ok(())
}

/// Runs the expansion process node by node. `choose(k, which, p0)` returns the
/// outcome for node `k`'s output `which` (0 = r, 1 = s), given the
/// probability `p0` of outcome 0; it is consulted only for its bit.
fn expand<F>(instance: &TreeInstance, m0: u8, max_depth: u32, renormalize: bool, mut choose: F) -> Result<(Vec<u8>, StateVector)>
where
    F: FnMut(usize, usize, f64) -> u8,
{
    check_cap(instance, max_depth)?;
    let kraus = instance.kraus();
    let mut psi = StateVector::basis(m0);
    let mut bits = Vec::with_capacity(instance.record_len());
    bits.push(m0);
    for (k, g) in instance.gates.iter().enumerate() {
        psi.push_zero_qubit()?;
        let (qa, qb) = (input_qubit(k), k as u32 + 1);
        psi.apply_two(&entangling_unitary(g), qa, qb);
        for (which, q) in [qa, qb].into_iter().enumerate() {
            let total = psi.norm_sqr;
            let p0 = psi.weight(kraus.k0, q) / total;
            let m = choose(k, which, p0);
            let d = kraus.diag(m);
            psi.apply_diag(d, q);
            bits.push(m);
            if renormalize {
                let p = if m == 0 { p0 } else { 1.0 - p0 };
                psi.scale(1.0 / p.sqrt());
                psi.recompute_norm();
            } else {
                psi.recompute_norm();
            }
        }
    }
    Ok((bits, psi))
}

/// Samples one record with the statevector backend.
pub fn sample_record_statevector<R: Rng + ?Sized>(instance: &TreeInstance, rng: &mut R, max_depth: u32) -> Result<MeasurementRecord> {
    let m0 = rng.random_range(0..2u8);
    let (bits, _) = expand(instance, m0, max_depth, true, |_, _, p0| (rng.random::<f64>() >= p0) as u8)?;
    Ok(MeasurementRecord { bits })
}

/// Exact probability of a full record, including the factor 1/2 for `m0`.
pub fn record_probability(instance: &TreeInstance, record: &MeasurementRecord, max_depth: u32) -> Result<f64> {
    if record.bits.len() != instance.record_len() {
        return Err(domain("record length does not match the instance depth"));
    }
    let (_, psi) = expand(instance, record.m0(), max_depth, false, |k, which, _| record.bits[1 + 2 * k + which])?;
    Ok(0.5 * psi.norm_sqr)
}

/// Exact probabilities of every record of a small instance, by depth-first
/// branching of the statevector. Entries are `(bits, probability)` in
/// lexicographic bit order.
pub fn record_distribution(instance: &TreeInstance, max_depth: u32) -> Result<Vec<(Vec<u8>, f64)>> {
    check_cap(instance, max_depth.min(3))?;
    let kraus = instance.kraus();
    let us: Vec<Mat4> = instance.gates.iter().map(entangling_unitary).collect();
    let mut out = Vec::with_capacity(1 << instance.record_len());
    for m0 in 0..2u8 {
        let mut bits = vec![m0];
        branch_all(&us, &kraus, 0, StateVector::basis(m0), &mut bits, &mut out)?;
    }
    for (_, p) in out.iter_mut() {
        *p *= 0.5;
    }
    Ok(out)
}

fn branch_all(us: &[Mat4], kraus: &KrausPair, k: usize, mut psi: StateVector, bits: &mut Vec<u8>, out: &mut Vec<(Vec<u8>, f64)>) -> Result<()> {
    if k == us.len() {
        let n = psi.recompute_norm();
        out.push((bits.clone(), n));
        return Ok(());
    }
    psi.push_zero_qubit()?;
    let (qa, qb) = (input_qubit(k), k as u32 + 1);
    psi.apply_two(&us[k], qa, qb);
    for mr in 0..2u8 {
        let mut a = psi.clone();
        a.apply_diag(kraus.diag(mr), qa);
        for ms in 0..2u8 {
            let mut b = a.clone();
            b.apply_diag(kraus.diag(ms), qb);
            bits.push(mr);
            bits.push(ms);
            branch_all(us, kraus, k + 1, b, bits, out)?;
            bits.truncate(bits.len() - 2);
        }
    }
    Ok(())
}

/// Subtree effect operator handed from a node to its parent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSummary {
    pub effective_povm: Mat2,
}

/// Depth-first sampler state. `choose` decides each weak outcome from the
/// probability of outcome 0; `log_prob` accumulates the log of the chosen
/// conditional probabilities.
struct BranchWalk<'a, F> {
    us: Vec<Mat4>,
    kraus: KrausPair,
    n_nodes: usize,
    bits: &'a mut [u8],
    choose: F,
    log_prob: f64,
}

fn kron_diag_conj(d: [f64; 2], e: [f64; 2], m: &Mat4) -> Mat4 {
    let w = [d[0] * e[0], d[0] * e[1], d[1] * e[0], d[1] * e[1]];
    let mut out = *m;
    for i in 0..4 {
        for j in 0..4 {
            out.0[i][j] *= w[i] * w[j];
        }
    }
    out
}

impl<F: FnMut(usize, usize, f64) -> u8> BranchWalk<'_, F> {
    fn node(&mut self, k: usize, sigma: &Mat2) -> Result<Mat2> {
        let u = self.us[k];
        let mut tau = u.conjugate(&sigma.kron(&Mat2::diag(1.0, 0.0)));
        let mut ds = [[1.0; 2]; 2];
        for which in 0..2 {
            let total = tau.trace().re;
            let p0 = {
                let d = self.kraus.k0;
                let (a, b) = if which == 0 { (d, [1.0, 1.0]) } else { ([1.0, 1.0], d) };
                kron_diag_conj(a, b, &tau).trace().re / total
            };
            let m = (self.choose)(k, which, p0);
            let p = if m == 0 { p0 } else { 1.0 - p0 };
            self.log_prob += p.ln();
            self.bits[1 + 2 * k + which] = m;
            let d = self.kraus.diag(m);
            ds[which] = d;
            let (a, b) = if which == 0 { (d, [1.0, 1.0]) } else { ([1.0, 1.0], d) };
            tau = kron_diag_conj(a, b, &tau);
            let tr = tau.trace().re;
            if tr > 0.0 {
                tau = Mat4(tau.0.map(|r| r.map(|x| x / tr)));
            }
        }
        let (left, right) = (2 * k + 1, 2 * k + 2);
        let e_left = if left < self.n_nodes { self.node(left, &tau.trace_second())? } else { Mat2::identity() };
        let conditioned = (e_left.kron(&Mat2::identity()) * tau).trace_first();
        let sigma_right = DensityMatrix2::normalized(&conditioned).map(|(r, _)| *r.matrix()).unwrap_or_else(|| tau.trace_first());
        let e_right = if right < self.n_nodes { self.node(right, &sigma_right)? } else { Mat2::identity() };
        let kl = Mat2::diag(ds[0][0], ds[0][1]);
        let kr = Mat2::diag(ds[1][0], ds[1][1]);
        let inner = (kl * e_left * kl).kron(&(kr * e_right * kr));
        let e = (u.adjoint() * inner * u).project_second(0);
        let tr = e.trace().re;
        Ok(if tr > 0.0 { e.scale_re(1.0 / tr) } else { e })
    }
}

fn walk<F: FnMut(usize, usize, f64) -> u8>(instance: &TreeInstance, m0: u8, bits: &mut [u8], choose: F) -> Result<(f64, BranchSummary)> {
    bits[0] = m0;
    let mut w = BranchWalk {
        us: instance.gates.iter().map(entangling_unitary).collect(),
        kraus: instance.kraus(),
        n_nodes: instance.n_nodes(),
        bits,
        choose,
        log_prob: 0.0,
    };
    let e = w.node(0, DensityMatrix2::basis(m0).matrix())?;
    Ok((w.log_prob, BranchSummary { effective_povm: e }))
}

/// Samples one record with the depth-first backend.
pub fn sample_record_branch<R: Rng + ?Sized>(instance: &TreeInstance, rng: &mut R) -> Result<MeasurementRecord> {
    let m0 = rng.random_range(0..2u8);
    let mut bits = vec![0u8; instance.record_len()];
    walk(instance, m0, &mut bits, |_, _, p0| (rng.random::<f64>() >= p0) as u8)?;
    Ok(MeasurementRecord { bits })
}

/// Record probability from the depth-first recursion with forced outcomes.
pub fn branch_record_probability(instance: &TreeInstance, record: &MeasurementRecord) -> Result<f64> {
    if record.bits.len() != instance.record_len() {
        return Err(domain("record length does not match the instance depth"));
    }
    let forced = record.bits.clone();
    let mut bits = vec![0u8; instance.record_len()];
    let (lp, _) = walk(instance, record.m0(), &mut bits, |k, which, _| forced[1 + 2 * k + which])?;
    Ok(if lp.is_nan() { 0.0 } else { 0.5 * lp.exp() })
}

/// Samples one record with the chosen backend.
pub fn sample_record<R: Rng + ?Sized>(instance: &TreeInstance, rng: &mut R, backend: Backend, max_depth: u32) -> Result<MeasurementRecord> {
    match backend {
        Backend::Statevector => sample_record_statevector(instance, rng, max_depth),
        Backend::Branch => sample_record_branch(instance, rng),
    }
}

/// Stream for shot `shot` of circuit `circuit_id`.
pub fn shot_rng(seed: u64, circuit_id: u64, shot: u64) -> StreamRng {
    stream(seed, Purpose::Shot, &[circuit_id, shot])
}

/// `n_shots` records of one circuit; shot `s` uses [`shot_rng`]`(seed, circuit_id, s)`.
pub fn sample_shots(instance: &TreeInstance, circuit_id: u64, n_shots: u64, seed: u64, backend: Backend, max_depth: u32) -> Result<Vec<MeasurementRecord>> {
    (0..n_shots)
        .map(|s| sample_record(instance, &mut shot_rng(seed, circuit_id, s), backend, max_depth))
        .collect()
}
