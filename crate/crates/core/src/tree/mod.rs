//! Tree-circuit realizations, node indexing and measurement records.
//!
//! Nodes are numbered breadth-first: the root is 0 and node `k` has children
//! `2k+1` (fed by its through output `r`) and `2k+2` (fed by the fresh qubit
//! `s`). A record holds `m0` followed by the pair `(m_r, m_s)` of every node,
//! so node `k` owns bits `1+2k` and `2+2k` and every depth prefix is a prefix
//! of the record.

mod io;

pub use io::{
    circuit_seed, parse_instances, parse_records, write_instances, write_records, CircuitEntry, InstanceSet,
    RecordLine, FORMAT_VERSION,
};

use crate::error::{domain, Result};
use crate::qmath::{check_theta, kraus_pair, KrausPair, NodeGates};
use crate::rng::{stream, Purpose};

/// Number of nodes in a depth-`t` tree.
pub fn n_nodes(t: u32) -> usize {
    (1usize << t) - 1
}

/// Bits in a full record for depth `t`: `m0` plus two per node.
pub fn record_len(t: u32) -> usize {
    1 + 2 * n_nodes(t)
}

/// Largest depth accepted anywhere (keeps `2^t` well inside `usize`).
pub const MAX_DEPTH: u32 = 24;

fn check_depth(t: u32) -> Result<()> {
    if t < 1 || t > MAX_DEPTH {
        return Err(domain(format!("depth t = {t} outside [1, {MAX_DEPTH}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeInstance {
    pub t: u32,
    pub theta: f64,
    /// One entry per node in BFS order.
    pub gates: Vec<NodeGates>,
    pub seed: u64,
}

impl TreeInstance {
    pub fn new(t: u32, theta: f64, gates: Vec<NodeGates>, seed: u64) -> Result<Self> {
        check_depth(t)?;
        let theta = check_theta(theta)?;
        if gates.len() != n_nodes(t) {
            return Err(domain(format!("depth {t} needs {} nodes, got {}", n_nodes(t), gates.len())));
        }
        Ok(TreeInstance { t, theta, gates, seed })
    }

    /// Every gate set to the identity.
    pub fn identity(t: u32, theta: f64) -> Result<Self> {
        check_depth(t)?;
        TreeInstance::new(t, theta, vec![NodeGates::identity(); n_nodes(t)], 0)
    }

    pub fn n_nodes(&self) -> usize {
        self.gates.len()
    }

    pub fn record_len(&self) -> usize {
        record_len(self.t)
    }

    pub fn kraus(&self) -> KrausPair {
        kraus_pair(self.theta).expect("theta validated at construction")
    }

    pub fn topology(&self) -> Topology {
        Topology { t: self.t }
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        TreeInstance::new(self.t, theta, self.gates.clone(), self.seed)
    }
}

/// Draws `4(2^t − 1)` Haar gates, node by node in BFS order, from a stream
/// keyed by `seed`. Because nodes are drawn in order, the depth-`t'` instance
/// of a seed is the gate prefix of its depth-`t` instance.
pub fn build_instance(t: u32, theta: f64, seed: u64) -> Result<TreeInstance> {
    check_depth(t)?;
    let mut rng = stream(seed, Purpose::InstanceGates, &[]);
    let gates = (0..n_nodes(t)).map(|_| NodeGates::sample(&mut rng)).collect();
    TreeInstance::new(t, theta, gates, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasurementRecord {
    pub bits: Vec<u8>,
}

impl MeasurementRecord {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(domain(format!("bit {i} has value {}", bits[i])));
        }
        let n = bits.len();
        if n < 3 || (n - 1) % 2 != 0 || !((n - 1) / 2 + 1).is_power_of_two() {
            return Err(domain(format!("record length {n} is not 1 + 2(2^t - 1)")));
        }
        Ok(MeasurementRecord { bits })
    }

    /// Builds a record from `m0` and the weak outcomes.
    pub fn from_parts(m0: u8, weak: &[u8]) -> Result<Self> {
        let mut bits = Vec::with_capacity(weak.len() + 1);
        bits.push(m0);
        bits.extend_from_slice(weak);
        MeasurementRecord::new(bits)
    }

    pub fn depth(&self) -> u32 {
        ((self.bits.len() - 1) / 2 + 1).trailing_zeros()
    }

    pub fn m0(&self) -> u8 {
        self.bits[0]
    }

    /// Weak outcomes, two per node in BFS order.
    pub fn weak(&self) -> &[u8] {
        &self.bits[1..]
    }

    /// `(m_r, m_s)` of node `k`.
    pub fn pair(&self, k: usize) -> (u8, u8) {
        (self.bits[1 + 2 * k], self.bits[2 + 2 * k])
    }
}

/// Index arithmetic for a depth-`t` heap-ordered binary tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub t: u32,
}

impl Topology {
    pub fn new(t: u32) -> Result<Self> {
        check_depth(t)?;
        Ok(Topology { t })
    }

    pub fn n_nodes(&self) -> usize {
        n_nodes(self.t)
    }

    fn check_node(&self, k: usize) -> Result<()> {
        if k >= self.n_nodes() {
            return Err(domain(format!("node {k} outside a depth-{} tree", self.t)));
        }
        Ok(())
    }

    /// Node id of time step `i ∈ [1, t]`, position `p ∈ [0, 2^{i−1})`.
    pub fn node_id(&self, time: u32, pos: usize) -> Result<usize> {
        if time < 1 || time > self.t || pos >= 1usize << (time - 1) {
            return Err(domain(format!("(time {time}, position {pos}) outside a depth-{} tree", self.t)));
        }
        Ok((1usize << (time - 1)) - 1 + pos)
    }

    /// `(time, position)` of node `k`.
    pub fn position(&self, k: usize) -> Result<(u32, usize)> {
        self.check_node(k)?;
        let time = (usize::BITS - (k + 1).leading_zeros()) as u32;
        Ok((time, k + 1 - (1usize << (time - 1))))
    }

    pub fn parent(&self, k: usize) -> Result<Option<usize>> {
        self.check_node(k)?;
        Ok(if k == 0 { None } else { Some((k - 1) / 2) })
    }

    /// Children `(2k+1, 2k+2)`, or `None` for a leaf.
    pub fn children(&self, k: usize) -> Result<Option<(usize, usize)>> {
        self.check_node(k)?;
        Ok(if self.is_leaf_unchecked(k) { None } else { Some((2 * k + 1, 2 * k + 2)) })
    }

    pub fn is_leaf(&self, k: usize) -> Result<bool> {
        self.check_node(k)?;
        Ok(self.is_leaf_unchecked(k))
    }

    fn is_leaf_unchecked(&self, k: usize) -> bool {
        k >= (1usize << (self.t - 1)) - 1
    }

    /// Indices of node `k`'s outcome pair within a record.
    pub fn record_offsets(&self, k: usize) -> Result<(usize, usize)> {
        self.check_node(k)?;
        Ok((1 + 2 * k, 2 + 2 * k))
    }
}

/// Restricts an instance and one of its records to the first `t_prime` time steps.
pub fn truncate(
    instance: &TreeInstance,
    record: &MeasurementRecord,
    t_prime: u32,
) -> Result<(TreeInstance, MeasurementRecord)> {
    if t_prime < 1 || t_prime > instance.t {
        return Err(domain(format!("truncation depth {t_prime} outside [1, {}]", instance.t)));
    }
    if record.bits.len() != instance.record_len() {
        return Err(domain(format!(
            "record has {} bits, instance of depth {} needs {}",
            record.bits.len(),
            instance.t,
            instance.record_len()
        )));
    }
    let inst = TreeInstance {
        t: t_prime,
        theta: instance.theta,
        gates: instance.gates[..n_nodes(t_prime)].to_vec(),
        seed: instance.seed,
    };
    let rec = MeasurementRecord { bits: record.bits[..record_len(t_prime)].to_vec() };
    Ok((inst, rec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_sizes() {
        let i = build_instance(4, 2.0, 1).unwrap();
        assert_eq!(i.n_nodes(), 15);
        assert_eq!(i.gates.iter().flat_map(|g| g.as_array()).count(), 60);
        assert_eq!(i.record_len(), 31);
        let i = build_instance(1, 2.0, 1).unwrap();
        assert_eq!((i.n_nodes(), i.record_len()), (1, 3));
        assert!(build_instance(0, 2.0, 1).is_err());
        assert!(build_instance(2, 0.5, 1).is_err());
    }

    #[test]
    fn topology_examples() {
        let t2 = Topology::new(2).unwrap();
        assert_eq!(t2.position(0).unwrap(), (1, 0));
        assert_eq!(t2.position(1).unwrap(), (2, 0));
        assert_eq!(t2.position(2).unwrap(), (2, 1));
        assert_eq!(t2.children(0).unwrap(), Some((1, 2)));
        assert!(t2.position(3).is_err());
        let t4 = Topology::new(4).unwrap();
        assert!(t4.is_leaf(7).unwrap());
        assert!(!t4.is_leaf(6).unwrap());
        assert_eq!(t4.record_offsets(5).unwrap(), (11, 12));
        assert_eq!(t4.node_id(3, 2).unwrap(), 5);
        assert!(t4.node_id(3, 4).is_err());
    }

    #[test]
    fn truncation_examples() {
        let inst = build_instance(4, 2.0, 9).unwrap();
        let rec = MeasurementRecord::new((0..31).map(|i| (i % 3 == 0) as u8).collect()).unwrap();
        let (i2, r2) = truncate(&inst, &rec, 2).unwrap();
        assert_eq!((i2.n_nodes(), r2.bits.len()), (3, 7));
        assert_eq!(r2.bits[..], rec.bits[..7]);
        let (i1, r1) = truncate(&inst, &rec, 1).unwrap();
        assert_eq!((i1.n_nodes(), r1.bits.len()), (1, 3));
        let (i4, r4) = truncate(&inst, &rec, 4).unwrap();
        assert_eq!((i4, r4), (inst.clone(), rec.clone()));
        assert!(truncate(&inst, &rec, 5).is_err());
        assert_eq!(i2, build_instance(2, 2.0, 9).unwrap());
    }

    #[test]
    fn record_validation() {
        assert!(MeasurementRecord::new(vec![0, 1, 0]).is_ok());
        assert!(MeasurementRecord::new(vec![0, 1, 2]).is_err());
        assert!(MeasurementRecord::new(vec![0, 1, 0, 1, 1]).is_err());
        assert_eq!(MeasurementRecord::new(vec![0; 15]).unwrap().depth(), 3);
    }
}
