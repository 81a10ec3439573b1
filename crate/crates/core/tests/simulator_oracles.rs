//! Simulators against dense-operator and density-matrix references.

use ndar::circuit::{build_qaoa_circuit, sample_orderings, GateOrdering, QaoaParams};
use ndar::ising::generate_sk;
use ndar::simulator::{
    noiseless_probabilities, sample, simulate_density_oracle, simulate_noiseless, simulate_trajectories, Backend, NoiseModel,
};
use ndar::{Bitstring, IsingHamiltonian};
use num_complex::Complex64;
use rand::Rng;

type Matrix = Vec<Vec<Complex64>>;

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `<H>` of depth-`p` QAOA built from explicit `2^n x 2^n` operators.
fn dense_expectation(h: &IsingHamiltonian, gammas: &[f64], betas: &[f64]) -> f64 {
    let n = h.n();
    let dim = 1usize << n;
    // basis index k has qubit i in bit i; kron puts the last factor on bit 0
    let diag: Vec<f64> = (0..dim as u64).map(|k| h.energy_of_index(k)).collect();
    let mut psi = vec![Complex64::new((dim as f64).sqrt().recip(), 0.0); dim];
    for (&gamma, &beta) in gammas.iter().zip(betas) {
        for (a, &e) in psi.iter_mut().zip(&diag) {
            *a *= Complex64::from_polar(1.0, -gamma * e);
        }
        let (c, s) = (Complex64::new(beta.cos(), 0.0), Complex64::new(0.0, -beta.sin()));
        let rx = vec![vec![c, s], vec![s, c]];
        let mut u: Matrix = vec![vec![Complex64::new(1.0, 0.0)]];
        for _ in 0..n {
            u = kron(&u, &rx);
        }
        psi = mat_vec(&u, &psi);
    }
    psi.iter().zip(&diag).map(|(a, e)| a.norm_sqr() * e).sum()
}

fn expectation(h: &IsingHamiltonian, probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(k, p)| p * h.energy_of_index(k as u64)).sum()
}

fn random_params(rng: &mut impl Rng, p: usize) -> QaoaParams {
    QaoaParams::new(
        (0..p).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        (0..p).map(|_| rng.gen_range(-0.8..0.8)).collect(),
    )
    .unwrap()
}

fn with_fields(n: usize, seed: u64) -> IsingHamiltonian {
    let sk = generate_sk(n, seed).unwrap();
    let mut rng = ndar::seed::rng(seed + 100);
    let linear: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.gen_range(-1.0..1.0))).collect();
    IsingHamiltonian::from_terms(n, linear, sk.quadratic().iter().map(|(&k, &v)| (k, v))).unwrap()
}

#[test]
fn qaoa_expectation_matches_dense_operators() {
    let mut rng = ndar::seed::rng(3);
    for n in 2..=6 {
        for h in [generate_sk(n, n as u64).unwrap(), with_fields(n, n as u64)] {
            for p in [1, 2] {
                let params = random_params(&mut rng, p);
                let ordering = sample_orderings(n, 1, n as u64).unwrap().remove(0);
                let gl = build_qaoa_circuit(&h, &params, &ordering).unwrap();
                let ours = expectation(&h, &noiseless_probabilities(&gl).unwrap());
                let dense = dense_expectation(&h, &params.gammas, &params.betas);
                assert!((ours - dense).abs() < 1e-10, "n={n} p={p}: {ours} vs {dense}");
            }
        }
    }
}

#[test]
fn gate_ordering_is_inert_without_noise() {
    let mut rng = ndar::seed::rng(9);
    for n in 3..=6 {
        let h = with_fields(n, 40 + n as u64);
        let params = random_params(&mut rng, 2);
        let reference = noiseless_probabilities(&build_qaoa_circuit(&h, &params, &GateOrdering::identity(n)).unwrap()).unwrap();
        let k = if n <= 4 { (1..=n).product() } else { 20 };
        for ordering in sample_orderings(n, k, 5).unwrap() {
            let probs = noiseless_probabilities(&build_qaoa_circuit(&h, &params, &ordering).unwrap()).unwrap();
            let diff = probs.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "n={n} ordering {:?}", ordering.assignment);
        }
    }
}

#[test]
fn damping_conjugates_with_attractor() {
    let mut rng = ndar::seed::rng(21);
    for n in [3, 4, 5] {
        let h = with_fields(n, n as u64);
        let a = ndar::solvers::random_bitstring(&mut rng, n);
        let params = random_params(&mut rng, 2);
        let ordering = sample_orderings(n, 1, 3).unwrap().remove(0);
        let noise = NoiseModel::new(n, 0.05, 0.15).unwrap();
        let direct = simulate_density_oracle(
            &build_qaoa_circuit(&h, &params, &ordering).unwrap(),
            &noise.clone().with_attractor(a.clone()),
        )
        .unwrap();
        let conjugated = simulate_density_oracle(
            &build_qaoa_circuit(&h.gauge_transform(&a).unwrap(), &params, &ordering).unwrap(),
            &noise,
        )
        .unwrap();
        let mask = a.to_index() as usize;
        for x in 0..1usize << n {
            assert!((direct[x] - conjugated[x ^ mask]).abs() < 1e-12);
        }
    }
}

#[test]
fn trajectories_without_noise_follow_statevector() {
    let h = with_fields(5, 2);
    let gl = build_qaoa_circuit(&h, &QaoaParams::new(vec![0.7], vec![0.3]).unwrap(), &GateOrdering::identity(5)).unwrap();
    let shots = 50_000;
    let probs = noiseless_probabilities(&gl).unwrap();
    for batch in [
        simulate_trajectories(&gl, &NoiseModel::noiseless(5), shots, 4).unwrap(),
        simulate_noiseless(&gl, shots, 4).unwrap(),
    ] {
        let mut counts = vec![0.0; 32];
        for x in &batch.bitstrings {
            counts[x.to_index() as usize] += 1.0 / shots as f64;
        }
        let tv = 0.5 * counts.iter().zip(&probs).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv <= 3.0 * (32.0 / shots as f64).sqrt(), "{tv}");
    }
}

#[test]
fn strong_damping_concentrates_near_attractor() {
    let n = 16;
    let h = generate_sk(n, 7).unwrap();
    let gl = build_qaoa_circuit(&h, &QaoaParams::new(vec![0.3], vec![0.2]).unwrap(), &GateOrdering::identity(n)).unwrap();
    let batch = simulate_trajectories(&gl, &NoiseModel::strong(n), 400, 1).unwrap();
    let mean_hw = batch.bitstrings.iter().map(Bitstring::hamming_weight).sum::<usize>() as f64 / 400.0;
    assert!(mean_hw < 3.0, "mean Hamming weight {mean_hw}");

    let mirrored = NoiseModel::strong(n).with_attractor(Bitstring::ones(n));
    let batch = simulate_trajectories(&gl, &mirrored, 400, 1).unwrap();
    let mean_hw = batch.bitstrings.iter().map(Bitstring::hamming_weight).sum::<usize>() as f64 / 400.0;
    assert!(mean_hw > 13.0, "mean Hamming weight {mean_hw}");
}

#[test]
fn samples_do_not_depend_on_thread_count() {
    let h = generate_sk(8, 1).unwrap();
    let gl = build_qaoa_circuit(&h, &QaoaParams::new(vec![0.4, 0.2], vec![0.3, 0.1]).unwrap(), &GateOrdering::identity(8)).unwrap();
    let noise = NoiseModel::strong(8);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_trajectories(&gl, &noise, 2000, 77).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn density_backend_samples_follow_oracle() {
    let h = with_fields(4, 6);
    let gl = build_qaoa_circuit(&h, &QaoaParams::new(vec![0.5], vec![-0.4]).unwrap(), &GateOrdering::identity(4)).unwrap();
    let noise = NoiseModel::strong(4);
    let probs = simulate_density_oracle(&gl, &noise).unwrap();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let shots = 100_000;
    let batch = sample(&gl, Backend::Density, &noise, shots, 2).unwrap();
    let mut counts = vec![0.0; 16];
    for x in &batch.bitstrings {
        counts[x.to_index() as usize] += 1.0 / shots as f64;
    }
    let tv = 0.5 * counts.iter().zip(&probs).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv <= 3.0 * (16.0 / shots as f64).sqrt());
}

#[test]
fn identity_circuit_hamming_weights_are_binomial() {
    let n = 10;
    let h = generate_sk(n, 3).unwrap();
    let gl = build_qaoa_circuit(&h, &QaoaParams::constant(1, 0.0), &GateOrdering::identity(n)).unwrap();
    let shots = 20_000;
    let batch = simulate_noiseless(&gl, shots, 6).unwrap();
    let mut counts = vec![0.0; n + 1];
    for x in &batch.bitstrings {
        counts[x.hamming_weight()] += 1.0;
    }
    let binomial = |k: usize| (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64) / (1u64 << n) as f64;
    // merge the sparse tails {0,1} and {9,10} so every cell expects > 5 counts
    let cells: [&[usize]; 9] = [&[0, 1], &[2], &[3], &[4], &[5], &[6], &[7], &[8], &[9, 10]];
    let chi2: f64 = cells
        .iter()
        .map(|ks| {
            let expected: f64 = ks.iter().map(|&k| binomial(k) * shots as f64).sum();
            let observed: f64 = ks.iter().map(|&k| counts[k]).sum();
            (observed - expected).powi(2) / expected
        })
        .sum();
    // 95th percentile of chi-squared with 8 degrees of freedom
    assert!(chi2 < 15.507, "{chi2}");
}

#[test]
fn damping_breaks_gauge_symmetry() {
    let n = 8;
    let h = generate_sk(n, 12).unwrap();
    let params = QaoaParams::new(vec![0.3], vec![0.2]).unwrap();
    let noise = NoiseModel::new(n, 0.0, 0.05).unwrap();
    let shots = 4000;
    let mut rng = ndar::seed::rng(31);
    let stats: Vec<(f64, f64)> = (0..6)
        .map(|k| {
            let y = ndar::solvers::random_bitstring(&mut rng, n);
            let hy = h.gauge_transform(&y).unwrap();
            let gl = build_qaoa_circuit(&hy, &params, &GateOrdering::identity(n)).unwrap();
            let e = simulate_trajectories(&gl, &noise, shots, k).unwrap().energies(&hy).unwrap();
            let mean = e.iter().sum::<f64>() / shots as f64;
            let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (shots - 1) as f64;
            (mean, var / shots as f64)
        })
        .collect();
    let separated = stats
        .iter()
        .enumerate()
        .flat_map(|(a, s)| stats[a + 1..].iter().map(move |t| (s, t)))
        .any(|((m1, v1), (m2, v2))| (m1 - m2).abs() > 5.0 * (v1 + v2).sqrt());
    assert!(separated, "{stats:?}");
}
