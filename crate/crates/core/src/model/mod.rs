//! Decoder-only transformer over the pool vocabulary.
//!
//! GPT-2 style: learned token and position embeddings, pre-norm blocks of
//! causal multi-head self-attention and a GELU MLP, a final layer norm, and a
//! linear projection to one logit per real token. Token 0 is the start symbol
//! and is never an output class, so the projection has L = vocab_size − 1
//! outputs. Everything is f64 and reverse-mode gradients are exact.

mod net;
mod tensor;

use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use net::{backward, backward_into, forward_cached, forward_logits, ForwardCache};
pub use tensor::Matrix;

use crate::error::{Error, Result};

const INIT_STD: f64 = 0.02;

/// Architecture hyper-parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// L + 1: real tokens 1..=L plus the start token 0.
    pub vocab_size: usize,
    pub max_positions: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub embed_dim: usize,
    pub mlp_ratio: usize,
}

impl ModelConfig {
    /// Paper-shaped default: 6 layers, 6 heads, width 96, MLP ratio 4.
    pub fn with_defaults(pool_size: usize, max_positions: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: pool_size + 1,
            max_positions,
            n_layers: 6,
            n_heads: 6,
            embed_dim: 96,
            mlp_ratio: 4,
        }
    }

    /// Number of output classes L (real tokens only).
    pub fn n_outputs(&self) -> usize {
        self.vocab_size - 1
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be at least 2".into()));
        }
        if self.embed_dim == 0 || self.n_heads == 0 || !self.embed_dim.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "embed_dim {} must be a positive multiple of n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if self.max_positions == 0 || self.n_layers == 0 || self.mlp_ratio == 0 {
            return Err(Error::Config(
                "max_positions, n_layers, mlp_ratio must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNormParams {
    fn ones(dim: usize) -> LayerNormParams {
        LayerNormParams {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }

    fn zeros(dim: usize) -> LayerNormParams {
        LayerNormParams {
            gain: vec![0.0; dim],
            bias: vec![0.0; dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub ln1: LayerNormParams,
    pub w_qkv: Matrix,
    pub b_qkv: Vec<f64>,
    pub w_attn_out: Matrix,
    pub b_attn_out: Vec<f64>,
    pub ln2: LayerNormParams,
    pub w_mlp_fc: Matrix,
    pub b_mlp_fc: Vec<f64>,
    pub w_mlp_proj: Matrix,
    pub b_mlp_proj: Vec<f64>,
}

/// All optimizable parameters plus the training step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tok_emb: Matrix,
    pub pos_emb: Matrix,
    pub blocks: Vec<BlockParams>,
    pub ln_f: LayerNormParams,
    pub w_head: Matrix,
    pub b_head: Vec<f64>,
    pub step: u64,
}

impl ModelParams {
    /// Same shapes, all parameter entries zero. Used as a gradient buffer.
    pub fn zeros_like(&self) -> ModelParams {
        let d = self.config.embed_dim;
        let hidden = d * self.config.mlp_ratio;
        ModelParams {
            config: self.config.clone(),
            tok_emb: Matrix::zeros(self.config.vocab_size, d),
            pos_emb: Matrix::zeros(self.config.max_positions, d),
            blocks: (0..self.config.n_layers)
                .map(|_| BlockParams {
                    ln1: LayerNormParams::zeros(d),
                    w_qkv: Matrix::zeros(d, 3 * d),
                    b_qkv: vec![0.0; 3 * d],
                    w_attn_out: Matrix::zeros(d, d),
                    b_attn_out: vec![0.0; d],
                    ln2: LayerNormParams::zeros(d),
                    w_mlp_fc: Matrix::zeros(d, hidden),
                    b_mlp_fc: vec![0.0; hidden],
                    w_mlp_proj: Matrix::zeros(hidden, d),
                    b_mlp_proj: vec![0.0; d],
                })
                .collect(),
            ln_f: LayerNormParams::zeros(d),
            w_head: Matrix::zeros(d, self.config.n_outputs()),
            b_head: vec![0.0; self.config.n_outputs()],
            step: 0,
        }
    }

    /// Labeled parameter blocks in a stable traversal order.
    pub fn labeled_slices(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("tok_emb".into(), self.tok_emb.data()),
            ("pos_emb".into(), self.pos_emb.data()),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.ln1.gain"), &b.ln1.gain));
            out.push((format!("block{i}.ln1.bias"), &b.ln1.bias));
            out.push((format!("block{i}.w_qkv"), b.w_qkv.data()));
            out.push((format!("block{i}.b_qkv"), &b.b_qkv));
            out.push((format!("block{i}.w_attn_out"), b.w_attn_out.data()));
            out.push((format!("block{i}.b_attn_out"), &b.b_attn_out));
            out.push((format!("block{i}.ln2.gain"), &b.ln2.gain));
            out.push((format!("block{i}.ln2.bias"), &b.ln2.bias));
            out.push((format!("block{i}.w_mlp_fc"), b.w_mlp_fc.data()));
            out.push((format!("block{i}.b_mlp_fc"), &b.b_mlp_fc));
            out.push((format!("block{i}.w_mlp_proj"), b.w_mlp_proj.data()));
            out.push((format!("block{i}.b_mlp_proj"), &b.b_mlp_proj));
        }
        out.push(("ln_f.gain".into(), &self.ln_f.gain));
        out.push(("ln_f.bias".into(), &self.ln_f.bias));
        out.push(("w_head".into(), self.w_head.data()));
        out.push(("b_head".into(), &self.b_head));
        out
    }

    /// Mutable parameter blocks in the same order as [`Self::labeled_slices`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.tok_emb.data_mut(), self.pos_emb.data_mut()];
        for b in &mut self.blocks {
            out.push(&mut b.ln1.gain);
            out.push(&mut b.ln1.bias);
            out.push(b.w_qkv.data_mut());
            out.push(&mut b.b_qkv);
            out.push(b.w_attn_out.data_mut());
            out.push(&mut b.b_attn_out);
            out.push(&mut b.ln2.gain);
            out.push(&mut b.ln2.bias);
            out.push(b.w_mlp_fc.data_mut());
            out.push(&mut b.b_mlp_fc);
            out.push(b.w_mlp_proj.data_mut());
            out.push(&mut b.b_mlp_proj);
        }
        out.push(&mut self.ln_f.gain);
        out.push(&mut self.ln_f.bias);
        out.push(self.w_head.data_mut());
        out.push(&mut self.b_head);
        out
    }

    /// self += scale · other, parameter-wise.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let theirs = other.labeled_slices();
        for (mine, (_, others)) in self.slices_mut().into_iter().zip(theirs) {
            for (a, &b) in mine.iter_mut().zip(others) {
                *a += scale * b;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.labeled_slices()
            .iter()
            .all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }

    pub fn n_parameters(&self) -> usize {
        self.labeled_slices().iter().map(|(_, s)| s.len()).sum()
    }
}

/// Deterministic initialization: N(0, 0.02²) for embeddings and weight
/// matrices, zero biases, unit layer-norm gains. Tensors are filled in
/// declaration order from a ChaCha8 stream, so equal seeds give equal params.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |m: &mut Matrix| {
        for v in m.data_mut() {
            *v =
                INIT_STD * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        }
    };
    let d = config.embed_dim;
    let hidden = d * config.mlp_ratio;
    let mut tok_emb = Matrix::zeros(config.vocab_size, d);
    gauss(&mut tok_emb);
    let mut pos_emb = Matrix::zeros(config.max_positions, d);
    gauss(&mut pos_emb);
    let mut blocks = Vec::with_capacity(config.n_layers);
    for _ in 0..config.n_layers {
        let mut w_qkv = Matrix::zeros(d, 3 * d);
        gauss(&mut w_qkv);
        let mut w_attn_out = Matrix::zeros(d, d);
        gauss(&mut w_attn_out);
        let mut w_mlp_fc = Matrix::zeros(d, hidden);
        gauss(&mut w_mlp_fc);
        let mut w_mlp_proj = Matrix::zeros(hidden, d);
        gauss(&mut w_mlp_proj);
        blocks.push(BlockParams {
            ln1: LayerNormParams::ones(d),
            w_qkv,
            b_qkv: vec![0.0; 3 * d],
            w_attn_out,
            b_attn_out: vec![0.0; d],
            ln2: LayerNormParams::ones(d),
            w_mlp_fc,
            b_mlp_fc: vec![0.0; hidden],
            w_mlp_proj,
            b_mlp_proj: vec![0.0; d],
        });
    }
    let mut w_head = Matrix::zeros(d, config.n_outputs());
    gauss(&mut w_head);
    Ok(ModelParams {
        config: config.clone(),
        tok_emb,
        pos_emb,
        blocks,
        ln_f: LayerNormParams::ones(d),
        w_head,
        b_head: vec![0.0; config.n_outputs()],
        step: 0,
    })
}

/// Adam with bias correction; no weight decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> AdamConfig {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Adam {
        let shapes: Vec<Vec<f64>> = params
            .labeled_slices()
            .iter()
            .map(|(_, s)| vec![0.0; s.len()])
            .collect();
        Adam {
            config,
            m: shapes.clone(),
            v: shapes,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.t += 1;
        let c1 = 1.0 - self.config.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.config.beta2.powi(self.t as i32);
        let grad_slices = grads.labeled_slices();
        for ((slot, (m, v)), (_, g)) in params
            .slices_mut()
            .into_iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .zip(grad_slices)
        {
            for i in 0..slot.len() {
                m[i] = self.config.beta1 * m[i] + (1.0 - self.config.beta1) * g[i];
                v[i] = self.config.beta2 * v[i] + (1.0 - self.config.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                slot[i] -= self.config.learning_rate * m_hat / (v_hat.sqrt() + self.config.epsilon);
            }
        }
        params.step += 1;
    }
}

/// Self-describing JSON checkpoint; `load(save(p)) == p` bit-exactly.
pub fn save_checkpoint<P: AsRef<Path>>(params: &ModelParams, path: P) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(BufWriter::new(file), params)?;
    Ok(())
}

pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<ModelParams> {
    let file = std::fs::File::open(path)?;
    let params: ModelParams = serde_json::from_reader(BufReader::new(file))?;
    params.config.validate()?;
    Ok(params)
}
