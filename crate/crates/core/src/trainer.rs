//! Training loop: replay buffer, GRPO and logit-matching losses, the
//! dispersion-triggered β schedule, and the per-epoch update cycle.
//!
//! Each epoch (i) samples N_sample fresh circuits and pushes their energy
//! records into the FIFO buffer, (ii) draws N_iter uniform batches and takes
//! one Adam step per batch, and (iii) updates β from the std of the fresh
//! energies. GRPO ratios are taken against parameters frozen at training
//! start; both policies are tempered by the current β.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::model::{
    backward_into, forward_cached, forward_logits, Adam, AdamConfig, Matrix, ModelConfig,
    ModelParams,
};
use crate::pauli::Hamiltonian;
use crate::pool::OperatorPool;
use crate::reweight::{mixed_batch, MixSchedule, PretrainDataset};
use crate::rng::{purpose, stream};
use crate::sampler::{
    evaluate_batch, generate_batch, token_probabilities, EnergyRecord, TokenSequence,
};
use crate::statevector::{energy, StateVector};

/// Gradient accumulation chunk size; fixed so that the parallel reduction
/// order is independent of thread count.
const GRAD_CHUNK: usize = 8;

pub fn population_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

// --- replay buffer -----------------------------------------------------------

/// Fixed-capacity FIFO store of energy records.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<EnergyRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, record: EnergyRecord) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &EnergyRecord> {
        self.entries.iter()
    }

    /// Uniform sample without replacement; clones the picked records.
    pub fn sample_batch<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<EnergyRecord> {
        let take = n.min(self.entries.len());
        rand::seq::index::sample(rng, self.entries.len(), take)
            .into_iter()
            .map(|i| self.entries[i].clone())
            .collect()
    }
}

// --- losses --------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Grpo,
    LogitMatching,
}

/// One optimizer-ready evaluation: scalar loss and parameter gradients.
pub struct LossStep {
    pub loss: f64,
    pub grads: ModelParams,
}

fn model_input(sequence: &TokenSequence) -> Vec<usize> {
    let mut input = Vec::with_capacity(sequence.len());
    input.push(0);
    input.extend_from_slice(&sequence.tokens()[..sequence.len() - 1]);
    input
}

/// Teacher-forced w_sum of a stored sequence under the current parameters.
fn w_sum_of(params: &ModelParams, sequence: &TokenSequence) -> Result<f64> {
    let input = model_input(sequence);
    let logits = forward_logits(params, &input)?;
    Ok(sequence
        .tokens()
        .iter()
        .enumerate()
        .map(|(k, &j)| logits.get(k, j - 1))
        .sum())
}

/// 𝓛_LM = (1/B) Σ_m (e^{−β·w_sum_m} − e^{−β·(E_m + offset)})².
pub fn logit_matching_loss(
    params: &ModelParams,
    batch: &[EnergyRecord],
    beta: f64,
    e_offset: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let b = batch.len() as f64;
    let mut loss = 0.0;
    for rec in batch {
        let w = w_sum_of(params, &rec.sequence)?;
        let d = (-beta * w).exp() - (-beta * (rec.energy + e_offset)).exp();
        loss += d * d / b;
    }
    Ok(loss)
}

/// Loss plus exact gradients for the logit-matching objective.
pub fn logit_matching_step(
    mode: ExecMode,
    params: &ModelParams,
    batch: &[EnergyRecord],
    beta: f64,
    e_offset: f64,
) -> Result<LossStep> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let b = batch.len() as f64;
    let chunks: Vec<&[EnergyRecord]> = batch.chunks(GRAD_CHUNK).collect();
    let parts = exec::map_slice(mode, &chunks, |chunk| -> Result<(f64, ModelParams)> {
        let mut grads = params.zeros_like();
        let mut loss = 0.0;
        for rec in chunk.iter() {
            let input = model_input(&rec.sequence);
            let (logits, cache) = forward_cached(params, &input)?;
            let w: f64 = rec
                .sequence
                .tokens()
                .iter()
                .enumerate()
                .map(|(k, &j)| logits.get(k, j - 1))
                .sum();
            let a = (-beta * w).exp();
            let target = (-beta * (rec.energy + e_offset)).exp();
            let d = a - target;
            loss += d * d / b;
            // d(loss)/d(w_sum) routed to each chosen logit
            let dw = -2.0 * beta * d * a / b;
            let mut dlogits = Matrix::zeros(logits.rows(), logits.cols());
            for (k, &j) in rec.sequence.tokens().iter().enumerate() {
                dlogits.set(k, j - 1, dw);
            }
            backward_into(params, &cache, &dlogits, &mut grads);
        }
        Ok((loss, grads))
    });
    let mut total_grads = params.zeros_like();
    let mut total_loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        total_loss += l;
        total_grads.add_scaled(&g, 1.0);
    }
    Ok(LossStep {
        loss: total_loss,
        grads: total_grads,
    })
}

/// Group-normalized advantages Â_m = (r_m − mean)/std with r_m = −E_m;
/// population std, and a degenerate batch yields all zeros.
pub fn grpo_advantages(energies: &[f64]) -> Vec<f64> {
    let rewards: Vec<f64> = energies.iter().map(|e| -e).collect();
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let std = population_std(&rewards);
    if std < 1e-12 {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - mean) / std).collect()
}

pub fn clip(rho: f64, epsilon: f64) -> f64 {
    rho.clamp(1.0 - epsilon, 1.0 + epsilon)
}

#[allow(clippy::too_many_arguments)]
fn grpo_sample(
    params: &ModelParams,
    old_logits: &Matrix,
    rec: &EnergyRecord,
    advantage: f64,
    beta: f64,
    epsilon: f64,
    min_form: bool,
    batch_size: f64,
) -> Result<(f64, Matrix, crate::model::ForwardCache)> {
    let input = model_input(&rec.sequence);
    let (logits, cache) = forward_cached(params, &input)?;
    let n = rec.sequence.len() as f64;
    let scale = advantage / (batch_size * n);
    let mut objective = 0.0;
    let mut dlogits = Matrix::zeros(logits.rows(), logits.cols());
    for (k, &j) in rec.sequence.tokens().iter().enumerate() {
        let probs = token_probabilities(logits.row(k), beta)?;
        let old_probs = token_probabilities(old_logits.row(k), beta)?;
        let rho = probs[j - 1] / old_probs[j - 1];
        if !rho.is_finite() {
            return Err(Error::Config(format!("non-finite importance ratio {rho}")));
        }
        let clipped = clip(rho, epsilon);
        let (term, pass_through) = if min_form {
            let unclipped = rho * advantage;
            let clipped_term = clipped * advantage;
            if unclipped <= clipped_term {
                (unclipped, true)
            } else {
                (clipped_term, (1.0 - epsilon..=1.0 + epsilon).contains(&rho))
            }
        } else {
            (
                clipped * advantage,
                (1.0 - epsilon..=1.0 + epsilon).contains(&rho),
            )
        };
        objective += term / (batch_size * n);
        if pass_through && advantage != 0.0 {
            // ∂ρ/∂w_j = ρ·(−β)(δ_{j,j_k} − π_θ(j)); ascend the objective.
            let row = dlogits.row_mut(k);
            for (idx, &p) in probs.iter().enumerate() {
                let indicator = if idx == j - 1 { 1.0 } else { 0.0 };
                row[idx] += scale * rho * (-beta) * (indicator - p);
            }
        }
    }
    Ok((objective, dlogits, cache))
}

/// Teacher-forced logits of every batch sequence under the frozen reference
/// parameters; these never change during a run and are cached by the trainer.
pub fn old_policy_logits(
    mode: ExecMode,
    theta_old: &ModelParams,
    batch: &[EnergyRecord],
) -> Result<Vec<Matrix>> {
    exec::map_slice(mode, batch, |rec| {
        forward_logits(theta_old, &model_input(&rec.sequence))
    })
    .into_iter()
    .collect()
}

/// The GRPO surrogate objective (1/B) Σ_m (1/N) Σ_k clip(ρ_mk)·Â_m.
pub fn grpo_objective(
    params: &ModelParams,
    old_logits: &[Matrix],
    batch: &[EnergyRecord],
    beta: f64,
    epsilon: f64,
    min_form: bool,
) -> Result<f64> {
    if batch.len() < 2 {
        return Err(Error::Config(
            "GRPO needs a batch of at least 2 records".into(),
        ));
    }
    let advantages = grpo_advantages(&batch.iter().map(|r| r.energy).collect::<Vec<_>>());
    let b = batch.len() as f64;
    let mut objective = 0.0;
    for ((rec, old), &adv) in batch.iter().zip(old_logits).zip(&advantages) {
        let (o, _, _) = grpo_sample(params, old, rec, adv, beta, epsilon, min_form, b)?;
        objective += o;
    }
    Ok(objective)
}

/// Gradient ascent on the GRPO objective, packaged as a descent step:
/// loss = −objective.
pub fn grpo_step(
    mode: ExecMode,
    params: &ModelParams,
    old_logits: &[Matrix],
    batch: &[EnergyRecord],
    beta: f64,
    epsilon: f64,
    min_form: bool,
) -> Result<LossStep> {
    if batch.len() < 2 {
        return Err(Error::Config(
            "GRPO needs a batch of at least 2 records".into(),
        ));
    }
    assert_eq!(old_logits.len(), batch.len());
    let advantages = grpo_advantages(&batch.iter().map(|r| r.energy).collect::<Vec<_>>());
    let b = batch.len() as f64;
    let items: Vec<(usize, &EnergyRecord)> = batch.iter().enumerate().collect();
    let chunks: Vec<&[(usize, &EnergyRecord)]> = items.chunks(GRAD_CHUNK).collect();
    let parts = exec::map_slice(mode, &chunks, |chunk| -> Result<(f64, ModelParams)> {
        let mut grads = params.zeros_like();
        let mut objective = 0.0;
        for &(m, rec) in chunk.iter() {
            let (o, dlogits, cache) = grpo_sample(
                params,
                &old_logits[m],
                rec,
                advantages[m],
                beta,
                epsilon,
                min_form,
                b,
            )?;
            objective += o;
            // descend −objective: flip the ascent direction
            let mut dneg = dlogits;
            for v in dneg.data_mut() {
                *v = -*v;
            }
            backward_into(params, &cache, &dneg, &mut grads);
        }
        Ok((objective, grads))
    });
    let mut total_grads = params.zeros_like();
    let mut objective = 0.0;
    for part in parts {
        let (o, g) = part?;
        objective += o;
        total_grads.add_scaled(&g, 1.0);
    }
    Ok(LossStep {
        loss: -objective,
        grads: total_grads,
    })
}

// --- β schedule ---------------------------------------------------------------

/// Dispersion-triggered update: β shrinks by α when the batch has collapsed
/// (std below τ_disp), grows by α otherwise; floored at α.
pub fn beta_step(beta: f64, energies: &[f64], alpha: f64, tau_disp: f64) -> f64 {
    let next = if population_std(energies) < tau_disp {
        beta - alpha
    } else {
        beta + alpha
    };
    next.max(alpha)
}

// --- configuration --------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_buffer_max: usize,
    pub n_batch: usize,
    pub n_sample: usize,
    pub n_iter: usize,
    pub n_epochs: usize,
    pub warmup_samples: usize,
    /// Sequence length N (number of tokens per circuit).
    pub seq_len: usize,
    pub beta0: f64,
    /// β step size of the dispersion-triggered schedule.
    pub alpha: f64,
    pub tau_disp: f64,
    /// GRPO clip width ε.
    pub epsilon: f64,
    /// Logit-matching offset; derived as round(−E_HF) when absent.
    pub e_offset: Option<f64>,
    pub loss: LossKind,
    /// Use min(ρÂ, clip(ρ)Â) instead of clip(ρ)·Â alone.
    pub grpo_min_form: bool,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Finite-shot expectation estimation; exact when absent.
    pub shots: Option<u64>,
    pub n_layers: usize,
    pub n_heads: usize,
    pub embed_dim: usize,
    pub mlp_ratio: usize,
    /// Model position capacity; defaults to seq_len + 1 when absent.
    pub max_positions: Option<usize>,
    /// Save a checkpoint every K epochs; 0 saves only the final one.
    pub checkpoint_every: usize,
    /// Initial fraction of pre-constructed records in a training batch.
    pub pretrain_fraction: f64,
    /// Epochs over which the pre-constructed fraction decays to zero.
    pub pretrain_decay_epochs: usize,
    /// Preload pre-constructed records into the buffer instead of mixing.
    pub pretrain_preload: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            n_buffer_max: 1000,
            n_batch: 50,
            n_sample: 50,
            n_iter: 5,
            n_epochs: 200,
            warmup_samples: 200,
            seq_len: 10,
            beta0: 1.0,
            alpha: 0.02,
            tau_disp: 1e-5,
            epsilon: 0.2,
            e_offset: None,
            loss: LossKind::Grpo,
            grpo_min_form: false,
            adam: AdamConfig::default(),
            seed: 0,
            shots: None,
            n_layers: 6,
            n_heads: 6,
            embed_dim: 96,
            mlp_ratio: 4,
            max_positions: None,
            checkpoint_every: 0,
            pretrain_fraction: 0.30,
            pretrain_decay_epochs: 150,
            pretrain_preload: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_buffer_max", self.n_buffer_max),
            ("n_batch", self.n_batch),
            ("n_sample", self.n_sample),
            ("n_iter", self.n_iter),
            ("seq_len", self.seq_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.n_batch > self.n_buffer_max {
            return Err(Error::Config(format!(
                "n_batch {} exceeds n_buffer_max {}",
                self.n_batch, self.n_buffer_max
            )));
        }
        if self.beta0 <= 0.0 || self.alpha <= 0.0 {
            return Err(Error::Config("beta0 and alpha must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.epsilon) || self.epsilon == 0.0 {
            return Err(Error::Config("epsilon must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.pretrain_fraction) {
            return Err(Error::Config("pretrain_fraction must lie in [0, 1]".into()));
        }
        if let Some(mp) = self.max_positions {
            if mp < self.seq_len + 1 {
                return Err(Error::Config(format!(
                    "max_positions {mp} too small for seq_len {}",
                    self.seq_len
                )));
            }
        }
        Ok(())
    }

    pub fn model_config(&self, pool_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: pool_size + 1,
            max_positions: self.max_positions.unwrap_or(self.seq_len + 1),
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            embed_dim: self.embed_dim,
            mlp_ratio: self.mlp_ratio,
        }
    }
}

/// One CSV row of the training trace.
#[derive(Debug, Clone, Serialize)]
pub struct EpochReport {
    pub epoch: u64,
    pub min_energy: f64,
    pub mean_energy: f64,
    pub std_energy: f64,
    pub beta: f64,
    pub loss: f64,
    pub n_energy_evaluations: u64,
}

impl EpochReport {
    pub const CSV_HEADER: &'static str =
        "epoch,min_energy,mean_energy,std_energy,beta,loss,n_energy_evaluations";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch,
            self.min_energy,
            self.mean_energy,
            self.std_energy,
            self.beta,
            self.loss,
            self.n_energy_evaluations
        )
    }
}

/// Pre-training data source: reweighted records plus their mixing schedule.
pub struct PretrainSource {
    pub dataset: PretrainDataset,
    pub schedule: MixSchedule,
}

/// Options for the adaptive token-count strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptiveOptions {
    pub n_start: usize,
    pub n_max: usize,
    /// Upper bound on epochs spent at one fixed length.
    pub epochs_per_length: usize,
    pub convergence_window: usize,
    pub convergence_tol: f64,
}

impl Default for AdaptiveOptions {
    fn default() -> AdaptiveOptions {
        AdaptiveOptions {
            n_start: 2,
            n_max: 10,
            epochs_per_length: 25,
            convergence_window: 5,
            convergence_tol: 1e-6,
        }
    }
}

pub struct Trainer {
    config: TrainConfig,
    pub params: ModelParams,
    theta_old: ModelParams,
    adam: Adam,
    pub buffer: ReplayBuffer,
    pool: OperatorPool,
    hamiltonian: Hamiltonian,
    init_state: StateVector,
    pub beta: f64,
    e_offset: f64,
    best: Option<(f64, TokenSequence)>,
    pub n_energy_evals: u64,
    epochs_done: u64,
    seq_len: usize,
    pretrain: Option<PretrainSource>,
    mode: ExecMode,
    new_records: Vec<EnergyRecord>,
    old_logits_cache: HashMap<TokenSequence, Matrix>,
    old_cache_limit: usize,
}

/// Reference-logit cache bound; the buffer holds at most n_buffer_max
/// distinct sequences, so a few thousand entries give steady-state hits.
const OLD_LOGITS_CACHE_MAX: usize = 2048;

impl Trainer {
    pub fn new(
        config: TrainConfig,
        pool: OperatorPool,
        hamiltonian: Hamiltonian,
        init_state: StateVector,
        pretrain: Option<PretrainSource>,
    ) -> Result<Trainer> {
        config.validate()?;
        if pool.n_qubits() != hamiltonian.n_qubits() {
            return Err(Error::SizeMismatch {
                left: pool.n_qubits(),
                right: hamiltonian.n_qubits(),
            });
        }
        let model_config = config.model_config(pool.len());
        let params = crate::model::init_params(&model_config, config.seed)?;
        Self::with_params(config, params, pool, hamiltonian, init_state, pretrain)
    }

    /// Start from explicit parameters (e.g. a loaded checkpoint). θ_old is
    /// snapshotted here and never refreshed.
    pub fn with_params(
        config: TrainConfig,
        params: ModelParams,
        pool: OperatorPool,
        hamiltonian: Hamiltonian,
        init_state: StateVector,
        pretrain: Option<PretrainSource>,
    ) -> Result<Trainer> {
        config.validate()?;
        let (hf_energy, _) = energy(&init_state, &hamiltonian)?;
        let e_offset = config.e_offset.unwrap_or_else(|| (-hf_energy).round());
        let adam = Adam::new(&params, config.adam.clone());
        let theta_old = params.clone();
        let mut trainer = Trainer {
            beta: config.beta0,
            buffer: ReplayBuffer::new(config.n_buffer_max),
            seq_len: config.seq_len,
            adam,
            theta_old,
            params,
            pool,
            hamiltonian,
            init_state,
            e_offset,
            best: None,
            n_energy_evals: 0,
            epochs_done: 0,
            pretrain,
            mode: ExecMode::auto(),
            new_records: Vec::new(),
            old_logits_cache: HashMap::new(),
            old_cache_limit: OLD_LOGITS_CACHE_MAX,
            config,
        };
        if trainer.config.pretrain_preload {
            if let Some(source) = &trainer.pretrain {
                for rec in source.dataset.records().to_vec() {
                    trainer.buffer.push(rec);
                }
            }
        }
        Ok(trainer)
    }

    pub fn exec_mode(&mut self, mode: ExecMode) {
        self.mode = mode;
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn e_offset(&self) -> f64 {
        self.e_offset
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn epochs_done(&self) -> u64 {
        self.epochs_done
    }

    pub fn best(&self) -> Option<(f64, &TokenSequence)> {
        self.best.as_ref().map(|(e, s)| (*e, s))
    }

    fn record_best(&mut self, records: &[EnergyRecord]) {
        for rec in records {
            let better = match &self.best {
                None => true,
                Some((e, _)) => rec.energy < *e,
            };
            if better {
                self.best = Some((rec.energy, rec.sequence.clone()));
            }
        }
    }

    fn sample_and_evaluate(&mut self, tag: u64, round: u64, count: usize) -> Result<Vec<f64>> {
        let circuits = generate_batch(
            self.mode,
            &self.params,
            self.seq_len,
            self.beta,
            self.config.seed,
            tag,
            round,
            count,
        )?;
        let sequences: Vec<TokenSequence> = circuits.into_iter().map(|c| c.sequence).collect();
        let records = evaluate_batch(
            self.mode,
            &sequences,
            &self.pool,
            &self.hamiltonian,
            &self.init_state,
        )?;
        self.n_energy_evals += records.len() as u64;
        self.record_best(&records);
        let energies: Vec<f64> = records.iter().map(|r| r.energy).collect();
        for rec in records {
            self.new_records.push(rec.clone());
            self.buffer.push(rec);
        }
        Ok(energies)
    }

    /// Records evaluated since the last drain (for cache-record persistence).
    pub fn drain_new_records(&mut self) -> Vec<EnergyRecord> {
        std::mem::take(&mut self.new_records)
    }

    #[cfg(test)]
    fn set_old_cache_limit(&mut self, limit: usize) {
        self.old_cache_limit = limit;
    }

    /// Reference-policy logits for a batch, served from the cache; θ_old is
    /// frozen so entries never go stale. The cache is cleared before miss
    /// collection when full, so every batch key is guaranteed present after
    /// the fill.
    fn old_logits_for(&mut self, batch: &[EnergyRecord]) -> Result<Vec<Matrix>> {
        let unique: Vec<&EnergyRecord> = {
            let mut seen = std::collections::HashSet::new();
            batch
                .iter()
                .filter(|r| seen.insert(r.sequence.clone()))
                .collect()
        };
        if self.old_logits_cache.len() + unique.len() > self.old_cache_limit {
            self.old_logits_cache.clear();
        }
        let misses: Vec<&&EnergyRecord> = unique
            .iter()
            .filter(|r| !self.old_logits_cache.contains_key(&r.sequence))
            .collect();
        if !misses.is_empty() {
            let computed = exec::map_slice(self.mode, &misses, |rec| {
                forward_logits(&self.theta_old, &model_input(&rec.sequence))
            });
            for (rec, logits) in misses.into_iter().zip(computed) {
                self.old_logits_cache.insert(rec.sequence.clone(), logits?);
            }
        }
        Ok(batch
            .iter()
            .map(|r| self.old_logits_cache[&r.sequence].clone())
            .collect())
    }

    /// Populate the buffer with `warmup_samples` records before training.
    pub fn warmup(&mut self) -> Result<()> {
        self.sample_and_evaluate(purpose::WARMUP, 0, self.config.warmup_samples)?;
        Ok(())
    }

    fn select_batch<R: Rng>(&self, epoch: u64, rng: &mut R) -> Vec<EnergyRecord> {
        if !self.config.pretrain_preload {
            if let Some(source) = &self.pretrain {
                return mixed_batch(
                    &self.buffer,
                    &source.dataset,
                    &source.schedule,
                    epoch,
                    self.config.n_batch,
                    rng,
                );
            }
        }
        self.buffer.sample_batch(self.config.n_batch, rng)
    }

    /// One training epoch: sample, update N_iter times, adapt β.
    pub fn train_epoch(&mut self) -> Result<EpochReport> {
        if self.buffer.is_empty() {
            return Err(Error::Config(
                "replay buffer is empty; run warmup() first".into(),
            ));
        }
        let epoch_index = self.epochs_done;
        let fresh =
            self.sample_and_evaluate(purpose::EPOCH_SAMPLE, epoch_index, self.config.n_sample)?;

        let mut loss_sum = 0.0;
        for it in 0..self.config.n_iter {
            let mut rng = stream(
                self.config.seed,
                purpose::BATCH_SELECT,
                epoch_index,
                it as u64,
            );
            let batch = self.select_batch(epoch_index, &mut rng);
            let step = match self.config.loss {
                LossKind::LogitMatching => {
                    logit_matching_step(self.mode, &self.params, &batch, self.beta, self.e_offset)?
                }
                LossKind::Grpo => {
                    let old = self.old_logits_for(&batch)?;
                    grpo_step(
                        self.mode,
                        &self.params,
                        &old,
                        &batch,
                        self.beta,
                        self.config.epsilon,
                        self.config.grpo_min_form,
                    )?
                }
            };
            loss_sum += step.loss;
            self.adam.step(&mut self.params, &step.grads);
        }

        self.beta = beta_step(self.beta, &fresh, self.config.alpha, self.config.tau_disp);
        self.epochs_done += 1;

        let mean = fresh.iter().sum::<f64>() / fresh.len() as f64;
        Ok(EpochReport {
            epoch: self.epochs_done,
            min_energy: self.best.as_ref().map(|(e, _)| *e).unwrap_or(f64::NAN),
            mean_energy: mean,
            std_energy: population_std(&fresh),
            beta: self.beta,
            loss: loss_sum / self.config.n_iter as f64,
            n_energy_evaluations: self.n_energy_evals,
        })
    }

    /// Warmup plus `n_epochs` epochs, invoking `on_epoch` per report.
    pub fn run<F: FnMut(&EpochReport) -> Result<()>>(
        &mut self,
        n_epochs: usize,
        mut on_epoch: F,
    ) -> Result<Vec<EpochReport>> {
        if self.buffer.is_empty() {
            self.warmup()?;
        }
        let mut reports = Vec::with_capacity(n_epochs);
        for _ in 0..n_epochs {
            let report = self.train_epoch()?;
            on_epoch(&report)?;
            reports.push(report);
        }
        Ok(reports)
    }

    /// Start short and lengthen: train at fixed N until the best energy stops
    /// improving, then N += 1; stop at N_max, at model capacity, or when two
    /// consecutive lengths converge to the same best energy.
    pub fn adaptive_length_run<F: FnMut(&EpochReport) -> Result<()>>(
        &mut self,
        options: &AdaptiveOptions,
        mut on_epoch: F,
    ) -> Result<Vec<EpochReport>> {
        if options.n_start > options.n_max {
            return Err(Error::Config("adaptive run needs n_start <= n_max".into()));
        }
        let capacity_limit = self.params.config.max_positions - 1;
        self.seq_len = options.n_start.min(capacity_limit);
        if self.buffer.is_empty() {
            self.warmup()?;
        }
        let mut reports: Vec<EpochReport> = Vec::new();
        let mut prev_phase: Option<(bool, f64)> = None;
        loop {
            let mut window: VecDeque<f64> = VecDeque::new();
            let mut phase_converged = false;
            for _ in 0..options.epochs_per_length {
                let report = self.train_epoch()?;
                on_epoch(&report)?;
                window.push_back(report.min_energy);
                if window.len() > options.convergence_window + 1 {
                    window.pop_front();
                }
                reports.push(report);
                if window.len() == options.convergence_window + 1 {
                    let improvement = window.front().unwrap() - window.back().unwrap();
                    if improvement < options.convergence_tol {
                        phase_converged = true;
                        break;
                    }
                }
            }
            let phase_best = self.best.as_ref().map(|(e, _)| *e).unwrap_or(f64::NAN);
            if let Some((prev_converged, prev_best)) = prev_phase {
                if phase_converged
                    && prev_converged
                    && (prev_best - phase_best) < options.convergence_tol
                {
                    break;
                }
            }
            prev_phase = Some((phase_converged, phase_best));
            if self.seq_len >= options.n_max || self.seq_len >= capacity_limit {
                break;
            }
            self.seq_len += 1;
        }
        Ok(reports)
    }
}
