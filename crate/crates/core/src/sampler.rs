//! Autoregressive circuit generation and evaluation.
//!
//! Sequences are drawn token by token: the model is re-run on the full prefix
//! {0, j_1, …, j_{k−1}}, row k is tempered by the inverse temperature β, and
//! token j_k is sampled with probability ∝ exp(−β·w_j). Over N steps the
//! induced sequence distribution is ∝ exp(−β·w_sum). Generated sequences are
//! realized on the statevector by applying pool operators in token order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::model::{forward_logits, ModelParams};
use crate::pauli::Hamiltonian;
use crate::pool::{OperatorPool, PoolOperator};
use crate::rng;
use crate::statevector::{energy, ExpectationCache, StateVector};

/// Generated index sequence j̄; every token is in 1..=L.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<usize>);

impl TokenSequence {
    pub fn tokens(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A sampled sequence with its per-step chosen logits and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCircuit {
    pub sequence: TokenSequence,
    pub w_sum: f64,
    pub per_step_logits: Vec<f64>,
}

/// Where a record came from: freshly generated or reweighted pre-training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordOrigin {
    Model,
    Preconstructed,
}

/// A sequence with its measured energy and per-Pauli expectation cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub sequence: TokenSequence,
    pub energy: f64,
    pub cache: ExpectationCache,
    pub origin: RecordOrigin,
}

/// Normalized token probabilities softmax(−β·row), computed with max-shift.
pub fn token_probabilities(row: &[f64], beta: f64) -> Result<Vec<f64>> {
    if row.is_empty() {
        return Err(Error::Config("empty logit row".into()));
    }
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let mut max = f64::NEG_INFINITY;
    for &w in row {
        if !w.is_finite() {
            return Err(Error::Config(format!("non-finite logit {w}")));
        }
        max = max.max(-beta * w);
    }
    let mut probs: Vec<f64> = row.iter().map(|&w| (-beta * w - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(probs)
}

/// Draw one token (1-based) from softmax(−β·row).
pub fn sample_token<R: Rng>(row: &[f64], beta: f64, rng: &mut R) -> Result<usize> {
    let probs = token_probabilities(row, beta)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i + 1);
        }
    }
    Ok(probs.len())
}

/// Sample an N-token sequence, re-running the model on the growing prefix.
pub fn generate_sequence<R: Rng>(
    params: &ModelParams,
    n_tokens: usize,
    beta: f64,
    rng: &mut R,
) -> Result<SampledCircuit> {
    if n_tokens == 0 {
        return Err(Error::Config("sequence length must be positive".into()));
    }
    if n_tokens > params.config.max_positions - 1 {
        return Err(Error::LengthOverflow {
            length: n_tokens,
            max_positions: params.config.max_positions,
        });
    }
    let mut prefix: Vec<usize> = Vec::with_capacity(n_tokens + 1);
    prefix.push(0);
    let mut per_step_logits = Vec::with_capacity(n_tokens);
    for k in 1..=n_tokens {
        let logits = forward_logits(params, &prefix)?;
        let row = logits.row(k - 1);
        let token = sample_token(row, beta, rng)?;
        per_step_logits.push(row[token - 1]);
        prefix.push(token);
    }
    let w_sum = per_step_logits.iter().sum();
    Ok(SampledCircuit {
        sequence: TokenSequence(prefix[1..].to_vec()),
        w_sum,
        per_step_logits,
    })
}

/// Sample `count` sequences, one independent RNG stream per slot derived from
/// (master, tag, round, slot); identical results for any execution mode.
#[allow(clippy::too_many_arguments)]
pub fn generate_batch(
    mode: ExecMode,
    params: &ModelParams,
    n_tokens: usize,
    beta: f64,
    master_seed: u64,
    tag: u64,
    round: u64,
    count: usize,
) -> Result<Vec<SampledCircuit>> {
    let results = exec::map_indexed(mode, count, |i| {
        let mut stream: ChaCha8Rng = rng::stream(master_seed, tag, round, i as u64);
        generate_sequence(params, n_tokens, beta, &mut stream)
    });
    results.into_iter().collect()
}

/// Apply pool operators in token order (j_1 first) to a copy of `init`.
pub fn realize_state(
    sequence: &TokenSequence,
    pool: &OperatorPool,
    init: &StateVector,
) -> Result<StateVector> {
    if pool.n_qubits() != init.n_qubits() {
        return Err(Error::SizeMismatch {
            left: pool.n_qubits(),
            right: init.n_qubits(),
        });
    }
    let mut state = init.clone();
    for &token in sequence.tokens() {
        let op = if token >= 1 {
            pool.get(token - 1)
        } else {
            None
        };
        let op = op.ok_or(Error::TokenOutOfRange {
            token,
            limit: pool.len(),
        })?;
        match op {
            PoolOperator::Identity => {}
            PoolOperator::PauliEvolution { string, angle } => {
                state.rotate(string, *angle)?;
            }
        }
    }
    Ok(state)
}

/// Realize the circuit and measure its energy and per-Pauli expectations.
pub fn realize_and_evaluate(
    sequence: &TokenSequence,
    pool: &OperatorPool,
    h: &Hamiltonian,
    init: &StateVector,
) -> Result<EnergyRecord> {
    let state = realize_state(sequence, pool, init)?;
    let (e, cache) = energy(&state, h)?;
    Ok(EnergyRecord {
        sequence: sequence.clone(),
        energy: e,
        cache,
        origin: RecordOrigin::Model,
    })
}

/// Evaluate many sequences; embarrassingly parallel, one statevector each.
pub fn evaluate_batch(
    mode: ExecMode,
    sequences: &[TokenSequence],
    pool: &OperatorPool,
    h: &Hamiltonian,
    init: &StateVector,
) -> Result<Vec<EnergyRecord>> {
    let results = exec::map_slice(mode, sequences, |seq| {
        realize_and_evaluate(seq, pool, h, init)
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::pauli::parse_hamiltonian;
    use crate::pool::load_pool;
    use crate::statevector::hartree_fock_state;
    use rand::SeedableRng;

    fn tiny_params(l: usize) -> ModelParams {
        init_params(
            &ModelConfig {
                vocab_size: l + 1,
                max_positions: 6,
                n_layers: 1,
                n_heads: 2,
                embed_dim: 8,
                mlp_ratio: 2,
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn token_probabilities_match_analytic_two_way() {
        let probs = token_probabilities(&[0.0, (2.0f64).ln()], 1.0).unwrap();
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((probs[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn token_probabilities_shift_invariant() {
        let row = [0.3, -1.2, 0.7, 2.0];
        let a = token_probabilities(&row, 1.7).unwrap();
        let shifted: Vec<f64> = row.iter().map(|w| w + 5.0).collect();
        let b = token_probabilities(&shifted, 1.7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_token_rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_token(&[f64::NAN, 0.0], 1.0, &mut rng).is_err());
        assert!(sample_token(&[0.0], 0.0, &mut rng).is_err());
    }

    #[test]
    fn single_step_w_sum_is_that_logit() {
        let params = tiny_params(3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sc = generate_sequence(&params, 1, 1.0, &mut rng).unwrap();
        let logits = forward_logits(&params, &[0]).unwrap();
        assert_eq!(sc.sequence.len(), 1);
        assert_eq!(sc.w_sum, logits.get(0, sc.sequence.tokens()[0] - 1));
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let params = tiny_params(3);
        let mut a = ChaCha8Rng::seed_from_u64(123);
        let mut b = ChaCha8Rng::seed_from_u64(123);
        let sa = generate_sequence(&params, 4, 1.3, &mut a).unwrap();
        let sb = generate_sequence(&params, 4, 1.3, &mut b).unwrap();
        assert_eq!(sa, sb);
        assert!((sa.w_sum - sa.per_step_logits.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn batch_modes_agree() {
        let params = tiny_params(3);
        let seq = generate_batch(ExecMode::Sequential, &params, 3, 1.0, 77, 1, 0, 8).unwrap();
        let par = generate_batch(ExecMode::Parallel, &params, 3, 1.0, 77, 1, 0, 8).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn identity_sequence_keeps_initial_energy() {
        let pool = load_pool("I\n0.05 XXYX\n-0.05 XXYX\n").unwrap();
        let h = parse_hamiltonian("0.5 ZIII\n0.25 IZZI").unwrap();
        let init = hartree_fock_state(4, 2).unwrap();
        let (e0, _) = energy(&init, &h).unwrap();
        let rec = realize_and_evaluate(&TokenSequence(vec![1, 1, 1]), &pool, &h, &init).unwrap();
        assert!((rec.energy - e0).abs() < 1e-12);
    }

    #[test]
    fn rotation_followed_by_inverse_restores_energy() {
        let pool = load_pool("I\n0.05 XXYX\n-0.05 XXYX\n").unwrap();
        let h = parse_hamiltonian("0.5 ZIII\n0.25 IZZI\n-0.3 XXYY").unwrap();
        let init = hartree_fock_state(4, 2).unwrap();
        let (e0, _) = energy(&init, &h).unwrap();
        let rec = realize_and_evaluate(&TokenSequence(vec![2, 3]), &pool, &h, &init).unwrap();
        assert!((rec.energy - e0).abs() < 1e-9);
    }

    #[test]
    fn energy_independent_of_term_order() {
        let pool = load_pool("I\n0.05 XXYX\n0.1 YZXI\n").unwrap();
        let init = hartree_fock_state(4, 2).unwrap();
        let h1 = parse_hamiltonian("0.5 ZIII\n0.25 IZZI\n-0.3 XXYY").unwrap();
        let h2 = parse_hamiltonian("-0.3 XXYY\n0.5 ZIII\n0.25 IZZI").unwrap();
        let seq = TokenSequence(vec![2, 3, 2]);
        let a = realize_and_evaluate(&seq, &pool, &h1, &init).unwrap();
        let b = realize_and_evaluate(&seq, &pool, &h2, &init).unwrap();
        assert!((a.energy - b.energy).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_token_rejected() {
        let pool = load_pool("I\n0.05 XXYX\n").unwrap();
        let h = parse_hamiltonian("0.5 ZIII").unwrap();
        let init = hartree_fock_state(4, 2).unwrap();
        for bad in [0, 3, 99] {
            assert!(matches!(
                realize_and_evaluate(&TokenSequence(vec![bad]), &pool, &h, &init),
                Err(Error::TokenOutOfRange { .. })
            ));
        }
    }
}
