//! Rayon data-parallel batch paths against the sequential fallback: circuit
//! generation, batch energy evaluation, and one GRPO gradient step.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gqe_core::exec::ExecMode;
use gqe_core::model::{init_params, ModelConfig};
use gqe_core::pauli::parse_hamiltonian;
use gqe_core::pool::{build_pool, default_angle_set};
use gqe_core::sampler::{evaluate_batch, generate_batch, TokenSequence};
use gqe_core::statevector::hartree_fock_state;
use gqe_core::trainer::{grpo_step, old_policy_logits};

const MODES: [(&str, ExecMode); 2] = [
    ("sequential", ExecMode::Sequential),
    ("parallel", ExecMode::Parallel),
];

fn fixture() -> gqe_core::pauli::Hamiltonian {
    let path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/h2_sto3g_0.7414.txt");
    parse_hamiltonian(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn bench_generation(c: &mut Criterion) {
    let pool = build_pool(4, 2, &default_angle_set(5)).unwrap();
    let params = init_params(&ModelConfig::with_defaults(pool.len(), 11), 1).unwrap();
    let mut group = c.benchmark_group("generate_batch_48x10");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| generate_batch(mode, &params, 10, 1.0, 7, 3, 0, 48).unwrap());
        });
    }
    group.finish();
}

fn bench_energy_evaluation(c: &mut Criterion) {
    let h = fixture();
    let pool = build_pool(4, 2, &default_angle_set(5)).unwrap();
    let init = hartree_fock_state(4, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sequences: Vec<TokenSequence> = (0..256)
        .map(|_| TokenSequence((0..10).map(|_| rng.random_range(1..=pool.len())).collect()))
        .collect();
    let mut group = c.benchmark_group("evaluate_batch_256x10");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| evaluate_batch(mode, &sequences, &pool, &h, &init).unwrap());
        });
    }
    group.finish();
}

fn bench_grpo_step(c: &mut Criterion) {
    let h = fixture();
    let pool = build_pool(4, 2, &default_angle_set(5)).unwrap();
    let init = hartree_fock_state(4, 2).unwrap();
    let params = init_params(&ModelConfig::with_defaults(pool.len(), 11), 1).unwrap();
    let theta_old = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sequences: Vec<TokenSequence> = (0..32)
        .map(|_| TokenSequence((0..10).map(|_| rng.random_range(1..=pool.len())).collect()))
        .collect();
    let batch = evaluate_batch(ExecMode::Parallel, &sequences, &pool, &h, &init).unwrap();
    let old = old_policy_logits(ExecMode::Parallel, &theta_old, &batch).unwrap();
    let mut group = c.benchmark_group("grpo_step_32x10");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| grpo_step(mode, &params, &old, &batch, 1.0, 0.2, false).unwrap());
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_generation,
    bench_energy_evaluation,
    bench_grpo_step
);
criterion_main!(benches);
