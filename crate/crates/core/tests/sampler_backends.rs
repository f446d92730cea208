//! Both sampling backends against exact record probabilities.

use qtree::rng::{stream, Purpose};
use qtree::sampler::{
    branch_record_probability, record_distribution, record_probability, sample_record, sample_shots, Backend,
};
use qtree::tree::{build_instance, record_len, truncate, MeasurementRecord};
use qtree::Error;
use rayon::prelude::*;
use std::collections::HashMap;

fn code(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| 2 * acc + b as usize)
}

/// Largest `|freq − p| / σ` over all records, with `σ` from the binomial
/// variance floored at one count.
fn worst_sigma(exact: &[(Vec<u8>, f64)], counts: &HashMap<usize, u64>, n: u64) -> f64 {
    let nf = n as f64;
    let mut seen = 0;
    let mut worst: f64 = 0.0;
    for (bits, p) in exact {
        let c = counts.get(&code(bits)).copied().unwrap_or(0);
        seen += c;
        let sigma = (p * (1.0 - p) / nf).sqrt().max(1.0 / nf);
        worst = worst.max((c as f64 / nf - p).abs() / sigma);
    }
    assert_eq!(seen, n, "sampled a record outside the exact support");
    worst
}

#[test]
fn backends_agree_exactly_at_t2() {
    for seed in 0..20u64 {
        let inst = build_instance(2, 1.6 + 0.07 * seed as f64, seed).unwrap();
        let dist = record_distribution(&inst, 4).unwrap();
        assert_eq!(dist.len(), 1 << record_len(2));
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (bits, p) in &dist {
            let rec = MeasurementRecord::new(bits.clone()).unwrap();
            let b = branch_record_probability(&inst, &rec).unwrap();
            let s = record_probability(&inst, &rec, 4).unwrap();
            assert!((b - p).abs() < 1e-12 && (s - p).abs() < 1e-12, "seed {seed}: {p} {b} {s}");
        }
    }
}

#[test]
fn sampled_frequencies_match_exact_distribution() {
    let inst = build_instance(2, 2.0, 77).unwrap();
    let exact = record_distribution(&inst, 4).unwrap();
    let n = 1_000_000u64;
    for backend in [Backend::Statevector, Backend::Branch] {
        let counts = (0..n)
            .into_par_iter()
            .fold(HashMap::new, |mut m: HashMap<usize, u64>, s| {
                let rec = sample_record(&inst, &mut stream(3, Purpose::Test, &[s]), backend, 4).unwrap();
                *m.entry(code(&rec.bits)).or_default() += 1;
                m
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                a
            });
        let w = worst_sigma(&exact, &counts, n);
        assert!(w < 4.0, "{backend:?}: worst deviation {w:.2} sigma");
    }
}

#[test]
fn deep_branch_marginals_match_shallow_statevector() {
    let deep = build_instance(10, 2.3, 5).unwrap();
    let shallow = build_instance(2, 2.3, 5).unwrap();
    let exact = record_distribution(&shallow, 4).unwrap();
    let n = 100_000u64;
    let records: Vec<MeasurementRecord> = (0..n)
        .into_par_iter()
        .map(|s| sample_record(&deep, &mut stream(4, Purpose::Test, &[s]), Backend::Branch, 4).unwrap())
        .collect();
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for rec in &records {
        let (_, r) = truncate(&deep, rec, 2).unwrap();
        *counts.entry(code(&r.bits)).or_default() += 1;
    }
    let w = worst_sigma(&exact, &counts, n);
    assert!(w < 4.0, "worst deviation {w:.2} sigma");
}

#[test]
fn shots_do_not_depend_on_worker_count() {
    let inst = build_instance(4, 2.1, 12).unwrap();
    let run = |threads: usize, backend: Backend| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            (0..16u64).into_par_iter().map(|c| sample_shots(&inst, c, 8, 99, backend, 4).unwrap()).collect::<Vec<_>>()
        })
    };
    for backend in [Backend::Statevector, Backend::Branch] {
        let a = run(1, backend);
        assert_eq!(a, run(3, backend));
        assert_ne!(a[0], a[1]);
    }
}

#[test]
fn statevector_depth_cap() {
    let inst = build_instance(6, 2.0, 1).unwrap();
    let mut rng = stream(1, Purpose::Test, &[]);
    assert!(matches!(sample_record(&inst, &mut rng, Backend::Statevector, 4), Err(Error::Capacity(_))));
    assert!(matches!(sample_record(&inst, &mut rng, Backend::Statevector, 9), Err(Error::Capacity(_))));
    assert_eq!(sample_record(&inst, &mut rng, Backend::Branch, 4).unwrap().bits.len(), record_len(6));
    assert!("statevector".parse::<Backend>().is_ok() && "gpu".parse::<Backend>().is_err());
}
