//! Test oracles shared by the integration suites.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use qtree::qmath::Unitary2;
use qtree::tree::TreeInstance;

/// Brute-force pure-state simulation over all system qubits plus the probe.
pub struct Brute {
    pub amp: Vec<C>,
}

impl Brute {
    fn one(&mut self, u: &Unitary2, q: usize) {
        let m = u.matrix().0;
        let bit = 1 << q;
        for i in 0..self.amp.len() {
            if i & bit == 0 {
                let (a, b) = (self.amp[i], self.amp[i | bit]);
                self.amp[i] = m[0][0] * a + m[0][1] * b;
                self.amp[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn cnot(&mut self, c: usize, t: usize) {
        for i in 0..self.amp.len() {
            if i & (1 << c) != 0 && i & (1 << t) == 0 {
                self.amp.swap(i, i | (1 << t));
            }
        }
    }

    fn kraus(&mut self, theta: f64, m: u8, q: usize) {
        let (s, c) = ((theta / 2.0).sin(), (theta / 2.0).cos());
        for (i, a) in self.amp.iter_mut().enumerate() {
            let bit = ((i >> q) & 1) as u8;
            *a *= if bit == m { c } else { s };
        }
    }
}

/// Probe reduced state after the forced weak outcomes, normalized.
pub fn brute_probe(inst: &TreeInstance, m_w: &[u8]) -> [[C; 2]; 2] {
    let n = inst.n_nodes();
    let n_sys = n + 1;
    let probe = n_sys;
    let mut b = Brute { amp: vec![C::new(0.0, 0.0); 1 << (n_sys + 1)] };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    b.amp[0] = C::new(h, 0.0);
    b.amp[(1 << probe) | 1] = C::new(h, 0.0);
    // Input qubit of each node: left child inherits, right child takes the parent's fresh qubit.
    let mut input = vec![0usize; n];
    for k in 0..n {
        for (child, q) in [(2 * k + 1, input[k]), (2 * k + 2, k + 1)] {
            if child < n {
                input[child] = q;
            }
        }
    }
    for (k, g) in inst.gates.iter().enumerate() {
        let (a, s) = (input[k], k + 1);
        b.one(&g.u1, a);
        b.one(&g.u2, s);
        b.cnot(a, s);
        b.one(&g.u3, a);
        b.one(&g.u4, s);
        b.kraus(inst.theta, m_w[2 * k], a);
        b.kraus(inst.theta, m_w[2 * k + 1], s);
    }
    let mut rho = [[C::new(0.0, 0.0); 2]; 2];
    let mask = (1 << probe) - 1;
    for i in 0..b.amp.len() {
        for j in 0..b.amp.len() {
            if i & mask == j & mask {
                rho[i >> probe][j >> probe] += b.amp[i] * b.amp[j].conj();
            }
        }
    }
    let tr = (rho[0][0] + rho[1][1]).re;
    rho.map(|r| r.map(|x| x / tr))
}

/// Deterministic checks shared by the property suite and the acceptance run.
pub mod checks {
    use qtree::decoder::{decode_bloch, invariance_check};
    use qtree::estimator::{run_protocol, ProtocolConfig};
    use qtree::pool::{pool_init, pool_step};
    use qtree::qmath::{haar_unitary, kraus_pair, Mat2};
    use qtree::rng::{stream, Purpose};
    use qtree::sampler::{sample_record, Backend};
    use qtree::theory::mean_a_power;
    use qtree::tree::{build_instance, truncate};
    use rand::Rng;

    pub type Check = Result<String, String>;

    pub fn kraus_completeness() -> Check {
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let theta = std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_PI_2 * i as f64 / 1000.0;
            let k = kraus_pair(theta).map_err(|e| e.to_string())?;
            let (a, b) = (k.op(0), k.op(1));
            let sum = a.adjoint() * a + b.adjoint() * b;
            worst = worst.max(sum.max_abs_diff(&Mat2::identity()));
        }
        if worst < 1e-12 { Ok(format!("max |ΣK†K − I| = {worst:.1e}")) } else { Err(format!("completeness off by {worst:e}")) }
    }

    pub fn haar_moments(n: usize) -> Check {
        let mut rng = stream(11, Purpose::Test, &[1]);
        let (mut s, mut s2) = (0.0, 0.0);
        let mut zsum = Mat2::zeros();
        for _ in 0..n {
            let u = haar_unitary(&mut rng);
            let p = u.matrix().0[0][0].norm_sqr();
            s += p;
            s2 += p * p;
            zsum = zsum + u.matrix().conjugate(&Mat2::pauli_z());
        }
        let nf = n as f64;
        let mean = s / nf;
        let se = ((s2 / nf - mean * mean) / nf).sqrt();
        // Entries of UσzU† have variance at most 1/3.
        let zmax = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| zsum.0[i][j].norm() / nf).fold(0.0, f64::max);
        let zbound = 4.0 * (1.0 / (3.0 * nf)).sqrt();
        if (mean - 0.5).abs() < 0.002 && (mean - 0.5).abs() < 4.0 * se && zmax < zbound {
            Ok(format!("E|U00|² = {mean:.5}, max |E[UσzU†]| = {zmax:.1e}"))
        } else {
            Err(format!("E|U00|² = {mean} (se {se:e}), max |E[UσzU†]| = {zmax:e} > {zbound:e}"))
        }
    }

    pub fn density_matrix_validity(cases: u64) -> Check {
        let mut worst_herm: f64 = 0.0;
        let mut worst_tr: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        for case in 0..cases {
            let mut rng = stream(case, Purpose::Test, &[21]);
            let t = rng.random_range(1..=5u32);
            let inst = build_instance(t, rng.random_range(1.5708..3.14159), 7000 + case).map_err(|e| e.to_string())?;
            let rec = sample_record(&inst, &mut rng, Backend::Branch, 4).map_err(|e| e.to_string())?;
            let d = decode_bloch(&inst, rec.weak()).map_err(|e| e.to_string())?;
            let m = d.rho.matrix();
            worst_herm = worst_herm.max(m.max_abs_diff(&m.adjoint()));
            worst_tr = worst_tr.max((m.trace() - 1.0).norm());
            min_eig = min_eig.min(d.z);
        }
        if worst_herm < 1e-12 && worst_tr < 1e-12 && min_eig >= -1e-12 {
            Ok(format!("{cases} decoded states, min eigenvalue {min_eig:.1e}"))
        } else {
            Err(format!("hermiticity {worst_herm:e}, trace {worst_tr:e}, min eigenvalue {min_eig:e}"))
        }
    }

    pub fn absorption_invariance(cases: u64) -> Check {
        for case in 0..cases {
            let mut rng = stream(case, Purpose::Test, &[22]);
            let t = rng.random_range(1..=4u32);
            let inst = build_instance(t, rng.random_range(1.6..3.1), 8000 + case).map_err(|e| e.to_string())?;
            let m_w: Vec<u8> = (0..inst.record_len() - 1).map(|_| rng.random_range(0..2u8)).collect();
            let m_p: Vec<u8> = (0..inst.n_nodes()).map(|_| rng.random_range(0..2u8)).collect();
            match invariance_check(&inst, &m_p, &m_w) {
                Ok(true) => {}
                Ok(false) => return Err(format!("case {case}: state changed")),
                Err(qtree::Error::InconsistentRecord { .. }) => {}
                Err(e) => return Err(e.to_string()),
            }
        }
        Ok(format!("{cases} random projection records absorbed"))
    }

    pub fn truncation_prefix() -> Check {
        for seed in 0..20u64 {
            let big = build_instance(6, 2.0, seed).map_err(|e| e.to_string())?;
            let mut rng = stream(seed, Purpose::Test, &[23]);
            let rec = sample_record(&big, &mut rng, Backend::Branch, 4).map_err(|e| e.to_string())?;
            for tp in 1..=6 {
                let small = build_instance(tp, 2.0, seed).map_err(|e| e.to_string())?;
                let (ti, tr) = truncate(&big, &rec, tp).map_err(|e| e.to_string())?;
                if ti.gates != small.gates || tr.bits[..] != rec.bits[..tr.bits.len()] {
                    return Err(format!("seed {seed}: prefix mismatch at t' = {tp}"));
                }
                let (ti2, tr2) = truncate(&ti, &tr, tp).map_err(|e| e.to_string())?;
                if ti2.gates != ti.gates || tr2 != tr {
                    return Err(format!("seed {seed}: truncation not idempotent at t' = {tp}"));
                }
                let a = decode_bloch(&ti, tr.weak()).map_err(|e| e.to_string())?;
                let b = decode_bloch(&small, tr.weak()).map_err(|e| e.to_string())?;
                if a.rho != b.rho {
                    return Err(format!("seed {seed}: decoded states differ at t' = {tp}"));
                }
            }
        }
        Ok("20 instances, t' = 1..6".into())
    }

    pub fn worker_determinism() -> Check {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
            pool.install(|| {
                let cfg = ProtocolConfig { t: 3, theta: 2.1, n_circuits: 40, n_shots: 4, seed: 9, backend: Backend::Statevector, max_depth: 4 };
                let est: Vec<(u64, u64)> =
                    run_protocol(&cfg).expect("protocol").iter().map(|r| (r.z_hat.to_bits(), r.se.to_bits())).collect();
                let mut p = pool_init(50_000, 2.1).expect("pool");
                for _ in 0..3 {
                    p = pool_step(&p, 4);
                }
                let bits: Vec<u64> = p.values.iter().map(|v| v.to_bits()).collect();
                let th = mean_a_power(2.1, 1.0, 40_000, 6).expect("theory");
                (est, bits, th.0.to_bits(), th.1.to_bits())
            })
        };
        let one = run(1);
        for threads in [2, 5] {
            if run(threads) != one {
                return Err(format!("results differ between 1 and {threads} workers"));
            }
        }
        let seed_changed = {
            let mut p = pool_init(1000, 2.1).map_err(|e| e.to_string())?;
            p = pool_step(&p, 5);
            p.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>() != one.1[..1000]
        };
        if !seed_changed {
            return Err("pool ignores its seed".into());
        }
        Ok("protocol, pool and theory identical on 1, 2, 5 workers".into())
    }
}
