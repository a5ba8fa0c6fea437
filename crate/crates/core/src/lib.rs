//! Generative quantum eigensolver core.
//!
//! A decoder-only transformer emits token sequences indexing a pool of Pauli
//! time-evolution operators; the resulting circuits are simulated exactly on
//! a statevector, and the model is trained (GRPO or logit matching, over a
//! FIFO replay buffer) so that low-energy circuits become likely.
//!
//! Modules follow the pipeline: [`pauli`] and [`statevector`] provide the
//! Hamiltonian representation and simulator, [`pool`] builds the operator
//! vocabulary, [`model`] is the transformer with exact reverse-mode
//! gradients, [`sampler`] generates and evaluates circuits, [`trainer`] runs
//! the optimization loop, and [`reweight`] turns stored per-Pauli
//! expectations into pre-training data for new Hamiltonians.

pub mod eigen;
pub mod error;
pub mod exec;
pub mod model;
pub mod pauli;
pub mod pool;
pub mod reweight;
pub mod rng;
pub mod sampler;
pub mod statevector;
pub mod trainer;

pub use error::{Error, Result};
