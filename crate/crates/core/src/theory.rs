//! Linearized node recursion, front velocity, critical point and scaling fits.
//!
//! Near a pure fixed point the collapse node maps small input eigenvalues
//! `(Z', Z'')` to `A1 Z' + A2 Z''`, with random coefficients set by the gates
//! and outcomes. The typical `ln Z` then travels like a Fisher-KPP front with
//! velocity `v(λ) = ln E[A1^λ + A2^λ] / λ`, and the transition sits where
//! `E[A1 + A2] = 1`.

use crate::error::{domain, Error, Result};
use crate::qmath::{check_theta, haar_unitary, kraus_pair, KrausPair, NodeGates};
use crate::rng::{stream, Purpose};
use crate::spectral::{CollapseNode, Spectral};
use crate::stats::{linear_fit, LinearFit, Moments};
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

/// Default finite-difference step for the coefficients.
pub const EPSILON: f64 = 1e-6;

/// Samples per deterministic reduction chunk.
const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCoefficients {
    pub a1: f64,
    pub a2: f64,
    /// `(m_r, m_s, m_p)`.
    pub outcomes: [u8; 3],
    pub gates: NodeGates,
}

/// A sampled node with pure inputs and frozen outcomes.
#[derive(Debug, Clone, Copy)]
pub struct FrozenNode {
    pub node: CollapseNode,
    pub left: Spectral,
    pub right: Spectral,
    pub outcomes: [u8; 3],
    pub gates: NodeGates,
}

impl FrozenNode {
    /// Samples gates and pure Haar inputs, and Born-samples the outcomes at
    /// the pure baseline.
    pub fn sample<R: Rng + ?Sized>(kraus: &KrausPair, rng: &mut R) -> Self {
        let gates = NodeGates::sample(rng);
        let node = CollapseNode::from_gates(*kraus, &gates);
        let left = Spectral::from_basis(0.0, haar_unitary(rng).matrix());
        let right = Spectral::from_basis(0.0, haar_unitary(rng).matrix());
        let m_r = (rng.random::<f64>() >= node.weak_probability(0, &left)) as u8;
        let m_s = (rng.random::<f64>() >= node.weak_probability(0, &right)) as u8;
        let (bl, br) = (node.left(m_r, &left), node.right(m_s, &right));
        let (t0, _) = node.output(&bl, &br, 0);
        let (t1, _) = node.output(&bl, &br, 1);
        let m_p = (rng.random::<f64>() * (t0 + t1) >= t0) as u8;
        FrozenNode { node, left, right, outcomes: [m_r, m_s, m_p], gates }
    }

    /// Output smaller eigenvalue and trace for input eigenvalues `(z1, z2)`
    /// with the frozen bases and outcomes.
    pub fn z_out(&self, z1: f64, z2: f64) -> (f64, f64) {
        let l = Spectral { z: z1, ..self.left };
        let r = Spectral { z: z2, ..self.right };
        let [m_r, m_s, m_p] = self.outcomes;
        let (tr, z) = self.node.output(&self.node.left(m_r, &l), &self.node.right(m_s, &r), m_p);
        (z, tr)
    }

    pub fn coefficients(&self, epsilon: f64) -> Option<LinearCoefficients> {
        let (z1, tr1) = self.z_out(epsilon, 0.0);
        let (z2, tr2) = self.z_out(0.0, epsilon);
        if !(tr1 > 0.0 && tr2 > 0.0) {
            return None;
        }
        Some(LinearCoefficients { a1: z1 / epsilon, a2: z2 / epsilon, outcomes: self.outcomes, gates: self.gates })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(domain(format!("epsilon = {epsilon} outside (0, 1e-3]")));
    }
    Ok(())
}

/// Samples one node and extracts `A1`, `A2` by one-sided finite differences.
/// Samples whose forced outcomes have zero probability at the perturbed point
/// are redrawn.
pub fn node_linear_coefficients<R: Rng + ?Sized>(theta: f64, rng: &mut R, epsilon: f64) -> Result<LinearCoefficients> {
    check_epsilon(epsilon)?;
    let kraus = kraus_pair(theta)?;
    loop {
        if let Some(c) = FrozenNode::sample(&kraus, rng).coefficients(epsilon) {
            return Ok(c);
        }
    }
}

fn sample_coefficients(kraus: &KrausPair, seed: u64, i: u64) -> (f64, f64) {
    let mut rng = stream(seed, Purpose::TheorySample, &[i]);
    loop {
        if let Some(c) = FrozenNode::sample(kraus, &mut rng).coefficients(EPSILON) {
            return (c.a1, c.a2);
        }
    }
}

/// Deterministic parallel reduction of `f(a1, a2)` over samples `0..n`.
/// Sample `i` uses the stream `(seed, i)` independently of `θ`, so runs at
/// different `θ` share their random numbers.
fn reduce_samples<const K: usize, F>(theta: f64, n: u64, seed: u64, f: F) -> Result<[Moments; K]>
where
    F: Fn(f64, f64) -> [f64; K] + Sync,
{
    let kraus = kraus_pair(theta)?;
    let n_chunks = n.div_ceil(CHUNK);
    let parts: Vec<[Moments; K]> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = [Moments::default(); K];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let (a1, a2) = sample_coefficients(&kraus, seed, i);
                for (mk, v) in m.iter_mut().zip(f(a1, a2)) {
                    mk.push(v);
                }
            }
            m
        })
        .collect();
    let mut total = [Moments::default(); K];
    for p in &parts {
        for (t, m) in total.iter_mut().zip(p) {
            t.merge(m);
        }
    }
    Ok(total)
}

/// Monte Carlo `E[A1^λ + A2^λ]` and its standard error.
pub fn mean_a_power(theta: f64, lambda: f64, n_samples: u64, seed: u64) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(domain("need at least one sample"));
    }
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda = {lambda} must be positive")));
    }
    let [m] = reduce_samples(theta, n_samples, seed, |a1, a2| [pow(a1, lambda) + pow(a2, lambda)])?;
    Ok((m.mean(), m.std_error()))
}

fn pow(a: f64, lambda: f64) -> f64 {
    if a <= 0.0 { 0.0 } else if lambda == 1.0 { a } else { a.powf(lambda) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimate {
    pub theta: f64,
    pub lambda: f64,
    /// `−∞` when the mean vanishes.
    pub v: f64,
    pub mc_error: f64,
    /// True when `E[A1^λ + A2^λ] ≤ 0`, which happens only for projective measurement.
    pub degenerate: bool,
}

pub fn velocity(theta: f64, lambda: f64, n_samples: u64, seed: u64) -> Result<VelocityEstimate> {
    let (mean, se) = mean_a_power(theta, lambda, n_samples, seed)?;
    let theta = check_theta(theta)?;
    if !(mean > 0.0) {
        return Ok(VelocityEstimate { theta, lambda, v: f64::NEG_INFINITY, mc_error: 0.0, degenerate: true });
    }
    Ok(VelocityEstimate { theta, lambda, v: mean.ln() / lambda, mc_error: se / (lambda * mean), degenerate: false })
}

/// Central finite difference of `v(θ, λ)` in `λ` with common random numbers,
/// and its delta-method standard error.
pub fn velocity_lambda_derivative(theta: f64, lambda: f64, h: f64, n_samples: u64, seed: u64) -> Result<(f64, f64)> {
    if !(h > 0.0 && h < lambda) {
        return Err(domain("step must satisfy 0 < h < lambda"));
    }
    let (lp, lm) = (lambda + h, lambda - h);
    let [sp, sm, cross] = reduce_samples(theta, n_samples, seed, |a1, a2| {
        let p = pow(a1, lp) + pow(a2, lp);
        let m = pow(a1, lm) + pow(a2, lm);
        [p, m, p * m]
    })?;
    let (mp, mm) = (sp.mean(), sm.mean());
    if !(mp > 0.0 && mm > 0.0) {
        return Err(domain("degenerate coefficients"));
    }
    let d = (mp.ln() / lp - mm.ln() / lm) / (2.0 * h);
    let (gp, gm) = (1.0 / (lp * mp), 1.0 / (lm * mm));
    let cov = cross.mean() - mp * mm;
    let var = gp * gp * sp.variance() + gm * gm * sm.variance() - 2.0 * gp * gm * cov * (sp.n as f64 / (sp.n as f64 - 1.0).max(1.0));
    Ok((d, (var.max(0.0) / sp.n as f64).sqrt() / (2.0 * h)))
}

/// Selected front velocity `v(λ*) = min over λ ∈ (0, 1] of v(λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontVelocity {
    pub theta: f64,
    /// Minimizer; equals 1 when the minimum sits on the boundary.
    pub lambda_star: f64,
    pub v: f64,
    pub mc_error: f64,
}

const FRONT_GRID: usize = 20;

/// Minimizes `v(θ, λ)` over `λ ∈ (0, 1]`: one pass over `n_samples`
/// coefficient samples evaluates a grid of `λ = 0.05, 0.10, …, 1`, then a
/// parabola through the smallest grid point and its neighbours refines it.
pub fn front_velocity(theta: f64, n_samples: u64, seed: u64) -> Result<FrontVelocity> {
    if n_samples < 2 {
        return Err(domain("need at least two samples"));
    }
    let grid: [f64; FRONT_GRID] = std::array::from_fn(|i| 0.05 * (i + 1) as f64);
    let m = reduce_samples(theta, n_samples, seed, |a1, a2| grid.map(|l| pow(a1, l) + pow(a2, l)))?;
    let theta = check_theta(theta)?;
    let mut v = [0.0; FRONT_GRID];
    for (i, mi) in m.iter().enumerate() {
        if !(mi.mean() > 0.0) {
            return Err(domain(format!("degenerate coefficients at theta = {theta}")));
        }
        v[i] = mi.mean().ln() / grid[i];
    }
    let k = (0..FRONT_GRID).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
    let (lambda_star, v_star) = if k == 0 || k == FRONT_GRID - 1 {
        (grid[k], v[k])
    } else {
        let (a, b, c) = (v[k - 1], v[k], v[k + 1]);
        let curv = a - 2.0 * b + c;
        let shift = if curv > 0.0 { (0.5 * (a - c) / curv).clamp(-1.0, 1.0) } else { 0.0 };
        (grid[k] + 0.05 * shift, b - 0.25 * (a - c) * shift)
    };
    let j = ((lambda_star / 0.05).round() as usize).clamp(1, FRONT_GRID) - 1;
    let mc_error = m[j].std_error() / (grid[j] * m[j].mean());
    Ok(FrontVelocity { theta, lambda_star, v: v_star, mc_error })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPointResult {
    pub theta_c: f64,
    /// 95% statistical half-width.
    pub ci_halfwidth: f64,
    pub n_samples: u64,
    /// `E[A1^λ + A2^λ] − 1` at `theta_c` and its standard error.
    pub residual: f64,
    pub residual_se: f64,
    /// Slope of `E[A1^λ + A2^λ]` in `θ` at `theta_c`.
    pub slope: f64,
    pub evaluations: usize,
}

/// Bisection for `E[A1^λ + A2^λ] = 1` on `[π/2, π]`. Every evaluation uses
/// the same seed, so the bracketed function is smooth in `θ` and the
/// bisection is deterministic.
pub fn find_critical_point(lambda: f64, n_samples: u64, tol: f64, seed: u64) -> Result<CriticalPointResult> {
    find_critical_point_in(FRAC_PI_2, PI, lambda, n_samples, tol, seed)
}

pub fn find_critical_point_in(lo: f64, hi: f64, lambda: f64, n_samples: u64, tol: f64, seed: u64) -> Result<CriticalPointResult> {
    if !(tol > 0.0) {
        return Err(domain("tol must be positive"));
    }
    let (mut lo, mut hi) = (check_theta(lo)?, check_theta(hi)?);
    if lo >= hi {
        return Err(domain("bracket must satisfy lo < hi"));
    }
    let f = |theta: f64| mean_a_power(theta, lambda, n_samples, seed).map(|(m, se)| (m - 1.0, se));
    let (f_lo, _) = f(lo)?;
    let (f_hi, _) = f(hi)?;
    let mut evaluations = 2;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (fm, _) = f(mid)?;
        evaluations += 1;
        if fm > 0.0 { lo = mid } else { hi = mid }
    }
    let theta_c = 0.5 * (lo + hi);
    let (residual, residual_se) = f(theta_c)?;
    let d = 0.02;
    let (a, b) = ((theta_c - d).max(FRAC_PI_2), (theta_c + d).min(PI));
    let slope = (f(b)?.0 - f(a)?.0) / (b - a);
    evaluations += 3;
    let ci_halfwidth = 1.96 * residual_se / slope.abs() + 0.5 * tol;
    Ok(CriticalPointResult { theta_c, ci_halfwidth, n_samples, residual, residual_se, slope, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    /// Exponent of `−ln Z^typ_t ∼ t^slope`.
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub slope_stderr: f64,
    pub n_points: usize,
}

/// Least squares of `ln(−ln Z^typ_t)` against `ln t` for points
/// `(t, ln Z^typ_t)`, all with `t ≥ 20`.
pub fn scaling_fit(series: &[(f64, f64)]) -> Result<ScalingFit> {
    if series.len() < 10 {
        return Err(domain(format!("scaling fit needs at least 10 points, got {}", series.len())));
    }
    let mut x = Vec::with_capacity(series.len());
    let mut y = Vec::with_capacity(series.len());
    for &(t, ln_z) in series {
        if !(t >= 20.0) {
            return Err(domain(format!("t = {t} is inside the transient (t < 20)")));
        }
        if !(ln_z.is_finite() && ln_z < 0.0) {
            return Err(domain(format!("Z_typ at t = {t} is not in (0, 1)")));
        }
        x.push(t.ln());
        y.push((-ln_z).ln());
    }
    let LinearFit { slope, intercept, rms_residual, slope_stderr } =
        linear_fit(&x, &y).ok_or_else(|| domain("degenerate t values"))?;
    Ok(ScalingFit { slope, intercept, rms_residual, slope_stderr, n_points: series.len() })
}

/// Fits `ln Z^typ = −C / sqrt(θc − θ) + b` to points `(θ, ln Z^typ)` with
/// `θ < θc`; returns `(C, b)`.
pub fn fit_essential_singularity(series: &[(f64, f64)], theta_c: f64) -> Result<(f64, f64)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &(theta, ln_z) in series {
        if !(theta < theta_c && ln_z.is_finite()) {
            return Err(domain(format!("point at theta = {theta} unusable for the fit")));
        }
        x.push(1.0 / (theta_c - theta).sqrt());
        y.push(ln_z);
    }
    let fit = linear_fit(&x, &y).ok_or_else(|| domain("fit needs two distinct theta values"))?;
    Ok((-fit.slope, fit.intercept))
}
