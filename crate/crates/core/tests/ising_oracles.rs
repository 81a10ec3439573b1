//! Ising energies, gauges and classical solvers against exhaustive enumeration.

use std::collections::BTreeMap;

use ndar::ising::generate_sk;
use ndar::remap::to_original_frame;
use ndar::solvers::{brute_force, random_sampling, simulated_annealing, AnnealSchedule};
use ndar::{Bitstring, GaugeMask, IsingHamiltonian};
use rand::Rng;

/// Frozen ground energy of `generate_sk(16, 7)`.
const SK16_SEED7_GROUND: f64 = -44.0;
const SK16_SEED7_MINIMIZERS: [&str; 2] = ["0100010110101001", "1011101001010110"];

/// Energy straight from the definition, with no incremental updates.
fn naive_energy(h: &IsingHamiltonian, bits: &[u8]) -> f64 {
    let s = |i: usize| if bits[i] == 0 { 1.0 } else { -1.0 };
    let mut e = 0.0;
    for i in 0..h.n() {
        e += h.field(i) * s(i);
        for j in i + 1..h.n() {
            e += h.coupling(i, j) * s(i) * s(j);
        }
    }
    e
}

fn all_bits(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1u64 << n).map(move |k| (0..n).map(|i| ((k >> i) & 1) as u8).collect())
}

fn naive_ground(h: &IsingHamiltonian) -> (f64, Vec<Vec<u8>>) {
    let mut best = f64::INFINITY;
    let mut argmins = Vec::new();
    for bits in all_bits(h.n()) {
        let e = naive_energy(h, &bits);
        if e < best {
            best = e;
            argmins.clear();
        }
        if e == best {
            argmins.push(bits);
        }
    }
    (best, argmins)
}

fn random_field_instance(n: usize, seed: u64) -> IsingHamiltonian {
    let mut rng = ndar::seed::rng(seed);
    let linear: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.gen_range(-1.0..1.0))).collect();
    let quadratic: Vec<((usize, usize), f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|p| (p, rng.gen_range(-1.0..1.0)))
        .collect();
    IsingHamiltonian::from_terms(n, linear, quadratic).unwrap()
}

#[test]
fn sk16_seed7_matches_frozen_ground_state() {
    let h = generate_sk(16, 7).unwrap();
    let gs = brute_force(&h).unwrap();
    assert_eq!(gs.energy, SK16_SEED7_GROUND);
    assert_eq!(gs.minimizer_count, 2);
    let mut found: Vec<String> = gs.minimizers.iter().map(|b| b.to_string()).collect();
    found.sort();
    assert_eq!(found, SK16_SEED7_MINIMIZERS);
    for m in SK16_SEED7_MINIMIZERS {
        let x: Bitstring = m.parse().unwrap();
        assert_eq!(h.energy(&x).unwrap(), SK16_SEED7_GROUND);
    }
}

#[test]
fn brute_force_agrees_with_naive_enumerator() {
    for (n, seed) in [(3, 1), (6, 2), (9, 3), (12, 4)] {
        for h in [generate_sk(n, seed).unwrap(), random_field_instance(n, seed)] {
            let (e, argmins) = naive_ground(&h);
            let gs = brute_force(&h).unwrap();
            assert!((gs.energy - e).abs() < 1e-9, "n={n}");
            assert_eq!(gs.minimizer_count, argmins.len() as u64);
            let expect: Vec<Bitstring> = argmins.into_iter().map(Bitstring::from_bits).collect();
            let mut got = gs.minimizers.clone();
            got.sort();
            let mut expect = expect;
            expect.sort();
            assert_eq!(got, expect);
        }
    }
}

#[test]
fn energy_matches_definition() {
    let h = random_field_instance(7, 5);
    for bits in all_bits(7) {
        let e = h.energy(&Bitstring::from_bits(bits.iter().copied())).unwrap();
        assert!((e - naive_energy(&h, &bits)).abs() < 1e-12);
    }
}

#[test]
fn gauge_preserves_energy_multiset() {
    let mut rng = ndar::seed::rng(17);
    for seed in 0..3 {
        let h = random_field_instance(10, seed);
        let y = ndar::solvers::random_bitstring(&mut rng, 10);
        let g = h.gauge_transform(&y).unwrap();
        let multiset = |h: &IsingHamiltonian| {
            let mut m = BTreeMap::new();
            for k in 0..1u64 << 10 {
                *m.entry(h.energy_of_index(k).to_bits()).or_insert(0usize) += 1;
            }
            m
        };
        assert_eq!(multiset(&h), multiset(&g));
        for k in 0..1u64 << 10 {
            let x = Bitstring::from_index(k, 10);
            assert_eq!(g.energy(&x).unwrap(), h.energy(&x.xor(&y).unwrap()).unwrap());
        }
    }
}

#[test]
fn gauge_chain_frame_identity() {
    let mut rng = ndar::seed::rng(23);
    let h0 = random_field_instance(9, 8);
    for _ in 0..20 {
        let mut h = h0.clone();
        let mut cumulative = GaugeMask::identity(9);
        for _ in 0..5 {
            let y = ndar::solvers::random_bitstring(&mut rng, 9);
            h = h.gauge_transform(&y).unwrap();
            cumulative = cumulative.compose(&y).unwrap();
        }
        let x = ndar::solvers::random_bitstring(&mut rng, 9);
        let original = to_original_frame(&x, &cumulative).unwrap();
        assert_eq!(h.energy(&x).unwrap(), h0.energy(&original).unwrap());
    }
}

#[test]
fn annealing_finds_sk16_ground_state() {
    let h = generate_sk(16, 7).unwrap();
    let schedule = AnnealSchedule {
        sweeps: 1000,
        replicas: 32,
        seed: 1,
        ..AnnealSchedule::default()
    };
    let records = simulated_annealing(&h, &schedule).unwrap();
    let best = records.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
    assert_eq!(best, SK16_SEED7_GROUND);
}

#[test]
fn random_sampling_is_unbiased_for_zz_only() {
    let h = generate_sk(8, 2).unwrap();
    let records = random_sampling(&h, 100_000, 4).unwrap();
    let mean = records.iter().map(|r| r.energy).sum::<f64>() / records.len() as f64;
    // each of the 28 terms is +-1 with mean 0 and variance 1, pairwise uncorrelated
    let sigma = (28.0f64 / 100_000.0).sqrt();
    assert!(mean.abs() < 5.0 * sigma, "{mean}");
}

/// Best-of-M approximation-ratio quantiles against the exact order-statistic CDF.
#[test]
fn best_of_m_matches_order_statistics() {
    let h = generate_sk(12, 3).unwrap();
    let egs = brute_force(&h).unwrap().energy;
    let mut energies: Vec<f64> = (0..1u64 << 12).map(|k| h.energy_of_index(k)).collect();
    energies.sort_by(f64::total_cmp);
    let total = energies.len() as f64;
    let m = 10_000;
    // P(best-of-M <= e) = 1 - (1 - F(e))^M
    let cdf_best = |e: f64| {
        let f = energies.partition_point(|&x| x <= e) as f64 / total;
        1.0 - (1.0 - f).powi(m)
    };
    let reps = 200;
    let mut best: Vec<f64> = (0..reps)
        .map(|r| {
            random_sampling(&h, m as usize, 1000 + r)
                .unwrap()
                .iter()
                .map(|x| x.energy)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    best.sort_by(f64::total_cmp);
    let mut levels: Vec<f64> = energies.clone();
    levels.dedup();
    for &e in levels.iter().take(6) {
        let expected = cdf_best(e);
        let observed = best.iter().filter(|&&b| b <= e).count() as f64 / reps as f64;
        let sigma = (expected * (1.0 - expected) / reps as f64).sqrt().max(1e-3);
        assert!(
            (observed - expected).abs() <= 4.0 * sigma,
            "level AR {}: observed {observed}, expected {expected}",
            e / egs
        );
    }
}
