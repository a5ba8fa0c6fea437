//! Coefficient reweighting and pre-training data preparation.
//!
//! A stored per-Pauli expectation cache prices the same circuit under any
//! Hamiltonian built from the same strings: E(Ĥ′) = Σ_a h′_a · q_a. Record
//! files persist those caches as JSON lines so any past run can seed a new
//! one; the lowest-energy fraction is kept and mixed into training batches
//! along a linearly decaying schedule.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::Hamiltonian;
use crate::sampler::{EnergyRecord, RecordOrigin, TokenSequence};
use crate::statevector::ExpectationCache;
use crate::trainer::ReplayBuffer;

/// Energy of a cached circuit under new coefficients: Σ_a h_a(Δ′)·q_a.
pub fn reweight_energy(cache: &ExpectationCache, h_new: &Hamiltonian) -> Result<f64> {
    let mut e = 0.0;
    for term in h_new.terms() {
        let q = cache
            .get(&term.string)
            .ok_or_else(|| Error::MissingPauli(term.string.clone()))?;
        e += term.coefficient * q;
    }
    Ok(e)
}

/// Reweighted records sorted ascending by energy, truncated to the lowest
/// fraction `x` (at least one record).
#[derive(Debug, Clone)]
pub struct PretrainDataset {
    records: Vec<EnergyRecord>,
    pub source_geometry: Option<String>,
    pub target_geometry: Option<String>,
    pub selection_fraction: f64,
}

impl PretrainDataset {
    pub fn records(&self) -> &[EnergyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }
}

/// Reweight every source record to `h_new`, keep the top x lowest energies.
pub fn build_pretrain_dataset(
    source: &[EnergyRecord],
    h_new: &Hamiltonian,
    x: f64,
    source_geometry: Option<String>,
) -> Result<PretrainDataset> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Config(format!(
            "selection fraction must lie in (0, 1], got {x}"
        )));
    }
    if source.is_empty() {
        return Err(Error::Config("no source records to reweight".into()));
    }
    let mut reweighted: Vec<EnergyRecord> = Vec::with_capacity(source.len());
    for rec in source {
        let energy = reweight_energy(&rec.cache, h_new)?;
        reweighted.push(EnergyRecord {
            sequence: rec.sequence.clone(),
            energy,
            cache: rec.cache.clone(),
            origin: RecordOrigin::Preconstructed,
        });
    }
    // stable: ties keep original insertion order
    reweighted.sort_by(|a, b| a.energy.partial_cmp(&b.energy).expect("finite energies"));
    let keep = ((x * source.len() as f64).floor() as usize).max(1);
    reweighted.truncate(keep);
    Ok(PretrainDataset {
        records: reweighted,
        source_geometry,
        target_geometry: h_new.geometry_label().map(str::to_string),
        selection_fraction: x,
    })
}

/// Linear decay of the pre-constructed share of a batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixSchedule {
    pub initial_fraction: f64,
    pub decay_epochs: usize,
}

impl Default for MixSchedule {
    fn default() -> MixSchedule {
        MixSchedule {
            initial_fraction: 0.30,
            decay_epochs: 150,
        }
    }
}

impl MixSchedule {
    pub fn fraction(&self, epoch: u64) -> f64 {
        let decay = self.decay_epochs as f64;
        if decay <= 0.0 {
            return 0.0;
        }
        (self.initial_fraction * (1.0 - epoch as f64 / decay)).max(0.0)
    }

    /// Pre-constructed record count in a batch: round-half-to-even of
    /// fraction(epoch)·n_batch.
    pub fn n_preconstructed(&self, epoch: u64, n_batch: usize) -> usize {
        (self.fraction(epoch) * n_batch as f64).round_ties_even() as usize
    }
}

/// A training batch with `n_pre` uniform draws from the pre-training dataset
/// and the remainder from the replay buffer (both without replacement).
pub fn mixed_batch<R: Rng>(
    buffer: &ReplayBuffer,
    dataset: &PretrainDataset,
    schedule: &MixSchedule,
    epoch: u64,
    n_batch: usize,
    rng: &mut R,
) -> Vec<EnergyRecord> {
    let mut n_pre = schedule.n_preconstructed(epoch, n_batch).min(n_batch);
    if dataset.is_empty() {
        n_pre = 0;
    } else {
        n_pre = n_pre.min(dataset.len());
    }
    let mut batch = Vec::with_capacity(n_batch);
    if n_pre > 0 {
        for i in rand::seq::index::sample(rng, dataset.len(), n_pre) {
            batch.push(dataset.records()[i].clone());
        }
    }
    batch.extend(buffer.sample_batch(n_batch - n_pre, rng));
    batch
}

/// Wire format of one cache-record line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheRecord {
    pub sequence: TokenSequence,
    pub geometry: Option<String>,
    pub energy: f64,
    pub pauli_expectations: ExpectationCache,
}

impl CacheRecord {
    pub fn from_record(rec: &EnergyRecord, geometry: Option<&str>) -> CacheRecord {
        CacheRecord {
            sequence: rec.sequence.clone(),
            geometry: geometry.map(str::to_string),
            energy: rec.energy,
            pauli_expectations: rec.cache.clone(),
        }
    }

    pub fn into_record(self, origin: RecordOrigin) -> EnergyRecord {
        EnergyRecord {
            sequence: self.sequence,
            energy: self.energy,
            cache: self.pauli_expectations,
            origin,
        }
    }
}

/// Append one record as a JSON line.
pub fn write_record_line<W: Write>(out: &mut W, record: &CacheRecord) -> Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Read a JSON-lines record file.
pub fn read_record_file<P: AsRef<Path>>(path: P) -> Result<Vec<CacheRecord>> {
    let file = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}
