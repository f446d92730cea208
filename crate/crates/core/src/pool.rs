//! Population-dynamics Monte Carlo for the collapse process.
//!
//! A pool holds samples of the smaller eigenvalue `Z` of a collapse-process
//! output. The distribution of that state is invariant under single-qubit
//! rotations, so `Z` alone describes it: each new sample takes two parents
//! from the previous generation, gives each a Haar-random eigenbasis and
//! pushes them through one node with fresh Haar gates and Born-sampled
//! outcomes.

use crate::error::{domain, Result};
use crate::qmath::{haar_unitary, kraus_pair, KrausPair};
use crate::rng::{stream, Purpose};
use crate::spectral::{CollapseNode, Spectral};
use crate::stats::{KahanSum, Moments};
use rand::Rng;
use rayon::prelude::*;

/// Values at or below this count as zero in the geometric mean.
pub const LOG_FLOOR: f64 = 1e-300;

/// How the two parents of a slot are drawn from the previous generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    /// Independent uniform draws.
    #[default]
    WithReplacement,
    /// Uniform draws conditioned on distinct slots.
    DistinctPair,
}

#[derive(Debug, Clone)]
pub struct Pool {
    pub theta: f64,
    pub t: u32,
    pub values: Vec<f64>,
    kraus: KrausPair,
    pub resampling: Resampling,
}

pub fn pool_init(size: usize, theta: f64) -> Result<Pool> {
    if size == 0 {
        return Err(domain("pool size must be at least 1"));
    }
    let kraus = kraus_pair(theta)?;
    Ok(Pool { theta: kraus.theta, t: 0, values: vec![0.5; size], kraus, resampling: Resampling::default() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolStats {
    pub z_mean: f64,
    /// Geometric mean over entries above [`LOG_FLOOR`]; zero when there are none.
    pub z_typ: f64,
    pub se: f64,
    /// Entries counted as zero.
    pub zeros: usize,
}

impl Pool {
    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn stats(&self) -> PoolStats {
        let chunk = 1 << 14;
        let (m, logs, n_pos) = self
            .values
            .par_chunks(chunk)
            .map(|c| {
                let mut m = Moments::default();
                let mut l = KahanSum::default();
                let mut n = 0usize;
                for &z in c {
                    m.push(z);
                    if z > LOG_FLOOR {
                        l.add(z.ln());
                        n += 1;
                    }
                }
                (m, l, n)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((Moments::default(), KahanSum::default(), 0usize), |(mut m, mut l, n), (m2, l2, n2)| {
                m.merge(&m2);
                l.merge(&l2);
                (m, l, n + n2)
            });
        let z_typ = if n_pos == 0 { 0.0 } else { (logs.value() / n_pos as f64).exp() };
        PoolStats { z_mean: m.mean(), z_typ, se: m.std_error(), zeros: self.values.len() - n_pos }
    }

    /// Draws the two parents of a slot from `n` entries.
    fn parents<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let n = self.values.len();
        let i = rng.random_range(0..n);
        match self.resampling {
            Resampling::WithReplacement => (i, rng.random_range(0..n)),
            Resampling::DistinctPair if n > 1 => {
                let j = rng.random_range(0..n - 1);
                (i, if j >= i { j + 1 } else { j })
            }
            Resampling::DistinctPair => (i, i),
        }
    }
}

/// One collapse node on inputs with smaller eigenvalues `zl`, `zr` in
/// Haar-random bases, with Haar gates and Born-sampled outcomes. Returns the
/// smaller eigenvalue of the surviving qubit.
pub fn sample_node<R: Rng + ?Sized>(kraus: &KrausPair, zl: f64, zr: f64, rng: &mut R) -> f64 {
    let sl = Spectral::from_basis(zl, haar_unitary(rng).matrix());
    let sr = Spectral::from_basis(zr, haar_unitary(rng).matrix());
    // The transpose of a Haar unitary is Haar, so gates are drawn directly
    // in the form the collapse node applies them.
    let node = CollapseNode {
        kraus: *kraus,
        left_gate: *haar_unitary(rng).matrix(),
        right_gate: *haar_unitary(rng).matrix(),
        proj_gate: *haar_unitary(rng).matrix(),
    };
    let m_r = (rng.random::<f64>() >= node.weak_probability(0, &sl)) as u8;
    let m_s = (rng.random::<f64>() >= node.weak_probability(0, &sr)) as u8;
    let bl = node.left(m_r, &sl);
    let br = node.right(m_s, &sr);
    let (t0, z0) = node.output(&bl, &br, 0);
    let (t1, z1) = node.output(&bl, &br, 1);
    if rng.random::<f64>() * (t0 + t1) < t0 { z0 } else { z1 }
}

/// Advances the pool by one generation. Slot `i` of generation `t+1` uses the
/// stream `(seed, θ, t+1, i)`, so the result does not depend on the number of
/// workers.
pub fn pool_step(pool: &Pool, seed: u64) -> Pool {
    let t = pool.t + 1;
    let theta_key = pool.theta.to_bits();
    let mut next = vec![0.0; pool.values.len()];
    next.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, out)| {
        let mut rng = stream(seed, Purpose::PoolSlot, &[theta_key, t as u64, i as u64]);
        let (a, b) = pool.parents(&mut rng);
        *out = sample_node(&pool.kraus, pool.values[a], pool.values[b], &mut rng);
    });
    Pool { theta: pool.theta, t, values: next, kraus: pool.kraus, resampling: pool.resampling }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub theta: f64,
    pub t: u32,
    pub z_mean: f64,
    pub z_typ: f64,
    pub se: f64,
    pub pool_size: usize,
}

/// Runs a pool per grid value up to `t_max`, reporting every generation.
pub fn pool_run(theta_grid: &[f64], t_max: u32, size: usize, seed: u64) -> Result<Vec<CurvePoint>> {
    pool_run_with(theta_grid, t_max, size, seed, Resampling::default(), |_| {})
}

/// [`pool_run`] with a resampling choice and a callback invoked per point.
pub fn pool_run_with<F: FnMut(&CurvePoint)>(
    theta_grid: &[f64],
    t_max: u32,
    size: usize,
    seed: u64,
    resampling: Resampling,
    mut on_point: F,
) -> Result<Vec<CurvePoint>> {
    if t_max < 1 {
        return Err(domain("t_max must be at least 1"));
    }
    let mut out = Vec::with_capacity(theta_grid.len() * t_max as usize);
    for &theta in theta_grid {
        let mut pool = pool_init(size, theta)?;
        pool.resampling = resampling;
        for _ in 0..t_max {
            pool = pool_step(&pool, seed);
            let s = pool.stats();
            let p = CurvePoint { theta: pool.theta, t: pool.t, z_mean: s.z_mean, z_typ: s.z_typ, se: s.se, pool_size: size };
            on_point(&p);
            out.push(p);
        }
    }
    Ok(out)
}

/// Parses `start:stop:count` (inclusive) into a grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || domain(format!("grid `{spec}` is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match count {
        0 => Err(bad()),
        1 => Ok(vec![start]),
        _ => Ok((0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect()),
    }
}
