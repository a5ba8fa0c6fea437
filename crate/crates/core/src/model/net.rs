//! Forward pass with activation caching and exact reverse-mode backward.
//!
//! Causality is structural: attention rows only ever read positions j ≤ r,
//! so logit row r is a function of prefix[0..=r] bit-exactly.

// indexed loops mirror the r/j attention structure on purpose
#![allow(clippy::needless_range_loop)]

use super::tensor::Matrix;
use super::{LayerNormParams, ModelParams};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + GELU_A * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let inner = GELU_C * (u + GELU_A * u * u * u);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * u * u)
}

struct LnCache {
    xhat: Matrix,
    rstd: Vec<f64>,
}

fn layer_norm(x: &Matrix, p: &LayerNormParams) -> (Matrix, LnCache) {
    let (k, d) = (x.rows(), x.cols());
    let mut out = Matrix::zeros(k, d);
    let mut xhat = Matrix::zeros(k, d);
    let mut rstd = vec![0.0; k];
    for r in 0..k {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let xh = (row[j] - mean) * rs;
            xhat.set(r, j, xh);
            out.set(r, j, xh * p.gain[j] + p.bias[j]);
        }
    }
    (out, LnCache { xhat, rstd })
}

fn layer_norm_backward(
    dout: &Matrix,
    cache: &LnCache,
    p: &LayerNormParams,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Matrix {
    let (k, d) = (dout.rows(), dout.cols());
    let mut dx = Matrix::zeros(k, d);
    for r in 0..k {
        let dy = dout.row(r);
        let xhat = cache.xhat.row(r);
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..d {
            dgain[j] += dy[j] * xhat[j];
            dbias[j] += dy[j];
            let dxh = dy[j] * p.gain[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[j];
        }
        mean_dxhat /= d as f64;
        mean_dxhat_xhat /= d as f64;
        for j in 0..d {
            let dxh = dy[j] * p.gain[j];
            dx.set(
                r,
                j,
                cache.rstd[r] * (dxh - mean_dxhat - xhat[j] * mean_dxhat_xhat),
            );
        }
    }
    dx
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

struct BlockCache {
    ln1: LnCache,
    h1: Matrix,
    qkv: Matrix,
    probs: Vec<Matrix>,
    attn_concat: Matrix,
    ln2: LnCache,
    h2: Matrix,
    fc_pre: Matrix,
    gelu_out: Matrix,
}

/// Activations recorded by [`forward_cached`], consumed by [`backward`].
pub struct ForwardCache {
    prefix: Vec<usize>,
    blocks: Vec<BlockCache>,
    ln_f: LnCache,
    xf: Matrix,
}

fn attention(params_heads: usize, head_dim: usize, qkv: &Matrix) -> (Matrix, Vec<Matrix>) {
    let k = qkv.rows();
    let d = params_heads * head_dim;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut concat = Matrix::zeros(k, d);
    let mut probs = Vec::with_capacity(params_heads);
    for h in 0..params_heads {
        let qo = h * head_dim;
        let ko = d + h * head_dim;
        let vo = 2 * d + h * head_dim;
        let mut p = Matrix::zeros(k, k);
        for r in 0..k {
            let q = &qkv.row(r)[qo..qo + head_dim];
            // scores over positions j <= r only
            let mut scores = Vec::with_capacity(r + 1);
            let mut max = f64::NEG_INFINITY;
            for j in 0..=r {
                let key = &qkv.row(j)[ko..ko + head_dim];
                let s = q.iter().zip(key).map(|(a, b)| a * b).sum::<f64>() * scale;
                max = max.max(s);
                scores.push(s);
            }
            let mut z = 0.0;
            for s in &mut scores {
                *s = (*s - max).exp();
                z += *s;
            }
            for (j, s) in scores.iter().enumerate() {
                p.set(r, j, s / z);
            }
            let out_row = concat.row_mut(r);
            for j in 0..=r {
                let w = p.get(r, j);
                let v = &qkv.row(j)[vo..vo + head_dim];
                for (c, &vv) in v.iter().enumerate() {
                    out_row[qo + c] += w * vv;
                }
            }
        }
        probs.push(p);
    }
    (concat, probs)
}

fn attention_backward(
    n_heads: usize,
    head_dim: usize,
    qkv: &Matrix,
    probs: &[Matrix],
    d_concat: &Matrix,
) -> Matrix {
    let k = qkv.rows();
    let d = n_heads * head_dim;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut dqkv = Matrix::zeros(k, 3 * d);
    for h in 0..n_heads {
        let qo = h * head_dim;
        let ko = d + h * head_dim;
        let vo = 2 * d + h * head_dim;
        let p = &probs[h];
        for r in 0..k {
            let dseg = &d_concat.row(r)[qo..qo + head_dim];
            // dp and dv from the weighted value sum
            let mut dp = vec![0.0; r + 1];
            for j in 0..=r {
                let v = &qkv.row(j)[vo..vo + head_dim];
                dp[j] = dseg.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            }
            for j in 0..=r {
                let w = p.get(r, j);
                let dv = dqkv.row_mut(j);
                for (c, &g) in dseg.iter().enumerate() {
                    dv[vo + c] += w * g;
                }
            }
            // softmax backward
            let dot = (0..=r).map(|j| dp[j] * p.get(r, j)).sum::<f64>();
            // score gradients -> q and k
            for j in 0..=r {
                let ds = p.get(r, j) * (dp[j] - dot) * scale;
                if ds == 0.0 {
                    continue;
                }
                for c in 0..head_dim {
                    let qv = qkv.get(r, qo + c);
                    let kv = qkv.get(j, ko + c);
                    *dqkv.row_mut(r).get_mut(qo + c).unwrap() += ds * kv;
                    *dqkv.row_mut(j).get_mut(ko + c).unwrap() += ds * qv;
                }
            }
        }
    }
    dqkv
}

fn check_prefix(params: &ModelParams, prefix: &[usize]) -> Result<()> {
    if prefix.is_empty() {
        return Err(Error::Config("prefix must be nonempty".into()));
    }
    if prefix.len() > params.config.max_positions {
        return Err(Error::LengthOverflow {
            length: prefix.len(),
            max_positions: params.config.max_positions,
        });
    }
    for &t in prefix {
        if t >= params.config.vocab_size {
            return Err(Error::TokenOutOfRange {
                token: t,
                limit: params.config.vocab_size - 1,
            });
        }
    }
    Ok(())
}

/// Logits for every position of `prefix`: row r depends only on prefix[0..=r].
pub fn forward_logits(params: &ModelParams, prefix: &[usize]) -> Result<Matrix> {
    forward_cached(params, prefix).map(|(logits, _)| logits)
}

pub fn forward_cached(params: &ModelParams, prefix: &[usize]) -> Result<(Matrix, ForwardCache)> {
    check_prefix(params, prefix)?;
    let k = prefix.len();
    let d = params.config.embed_dim;
    let mut x = Matrix::zeros(k, d);
    for (i, &t) in prefix.iter().enumerate() {
        let tok = params.tok_emb.row(t);
        let pos = params.pos_emb.row(i);
        let row = x.row_mut(i);
        for j in 0..d {
            row[j] = tok[j] + pos[j];
        }
    }
    let mut blocks = Vec::with_capacity(params.config.n_layers);
    for b in &params.blocks {
        let (h1, ln1) = layer_norm(&x, &b.ln1);
        let mut qkv = h1.matmul(&b.w_qkv);
        qkv.add_row_bias(&b.b_qkv);
        let (attn_concat, probs) = attention(params.config.n_heads, params.config.head_dim(), &qkv);
        let mut attn_proj = attn_concat.matmul(&b.w_attn_out);
        attn_proj.add_row_bias(&b.b_attn_out);
        x.add_assign(&attn_proj);

        let (h2, ln2) = layer_norm(&x, &b.ln2);
        let mut fc_pre = h2.matmul(&b.w_mlp_fc);
        fc_pre.add_row_bias(&b.b_mlp_fc);
        let mut gelu_out = fc_pre.clone();
        for v in gelu_out.data_mut() {
            *v = gelu(*v);
        }
        let mut mlp = gelu_out.matmul(&b.w_mlp_proj);
        mlp.add_row_bias(&b.b_mlp_proj);
        x.add_assign(&mlp);

        blocks.push(BlockCache {
            ln1,
            h1,
            qkv,
            probs,
            attn_concat,
            ln2,
            h2,
            fc_pre,
            gelu_out,
        });
    }
    let (xf, ln_f) = layer_norm(&x, &params.ln_f);
    let mut logits = xf.matmul(&params.w_head);
    logits.add_row_bias(&params.b_head);
    let cache = ForwardCache {
        prefix: prefix.to_vec(),
        blocks,
        ln_f,
        xf,
    };
    Ok((logits, cache))
}

/// Gradients of a scalar loss with upstream `dlogits` = ∂loss/∂logits;
/// returns a fresh parameter-shaped gradient.
pub fn backward(params: &ModelParams, cache: &ForwardCache, dlogits: &Matrix) -> ModelParams {
    let mut grads = params.zeros_like();
    backward_into(params, cache, dlogits, &mut grads);
    grads
}

/// Accumulating variant of [`backward`].
pub fn backward_into(
    params: &ModelParams,
    cache: &ForwardCache,
    dlogits: &Matrix,
    grads: &mut ModelParams,
) {
    let k = cache.prefix.len();
    assert_eq!(dlogits.rows(), k);
    assert_eq!(dlogits.cols(), params.config.n_outputs());

    // head
    grads
        .w_head
        .add_assign(&cache.xf.matmul_transpose_self(dlogits));
    for (g, v) in grads.b_head.iter_mut().zip(column_sums(dlogits)) {
        *g += v;
    }
    let dxf = dlogits.matmul_transpose_other(&params.w_head);
    let mut dx = layer_norm_backward(
        &dxf,
        &cache.ln_f,
        &params.ln_f,
        &mut grads.ln_f.gain,
        &mut grads.ln_f.bias,
    );

    for (l, b) in params.blocks.iter().enumerate().rev() {
        let bc = &cache.blocks[l];
        let gb = &mut grads.blocks[l];

        // MLP branch: x_out = x_mid + gelu(h2·Wfc + b)·Wproj + b
        let dmlp = &dx;
        gb.w_mlp_proj
            .add_assign(&bc.gelu_out.matmul_transpose_self(dmlp));
        for (g, v) in gb.b_mlp_proj.iter_mut().zip(column_sums(dmlp)) {
            *g += v;
        }
        let dg = dmlp.matmul_transpose_other(&b.w_mlp_proj);
        let mut dfc = dg;
        for (v, &u) in dfc.data_mut().iter_mut().zip(bc.fc_pre.data()) {
            *v *= gelu_grad(u);
        }
        gb.w_mlp_fc.add_assign(&bc.h2.matmul_transpose_self(&dfc));
        for (g, v) in gb.b_mlp_fc.iter_mut().zip(column_sums(&dfc)) {
            *g += v;
        }
        let dh2 = dfc.matmul_transpose_other(&b.w_mlp_fc);
        let dx_ln2 = layer_norm_backward(&dh2, &bc.ln2, &b.ln2, &mut gb.ln2.gain, &mut gb.ln2.bias);
        let mut dx_mid = dx;
        dx_mid.add_assign(&dx_ln2);

        // attention branch: x_mid = x_in + attn(ln1(x_in))·Wout + b
        let dattn_proj = &dx_mid;
        gb.w_attn_out
            .add_assign(&bc.attn_concat.matmul_transpose_self(dattn_proj));
        for (g, v) in gb.b_attn_out.iter_mut().zip(column_sums(dattn_proj)) {
            *g += v;
        }
        let dconcat = dattn_proj.matmul_transpose_other(&b.w_attn_out);
        let dqkv = attention_backward(
            params.config.n_heads,
            params.config.head_dim(),
            &bc.qkv,
            &bc.probs,
            &dconcat,
        );
        gb.w_qkv.add_assign(&bc.h1.matmul_transpose_self(&dqkv));
        for (g, v) in gb.b_qkv.iter_mut().zip(column_sums(&dqkv)) {
            *g += v;
        }
        let dh1 = dqkv.matmul_transpose_other(&b.w_qkv);
        let dx_ln1 = layer_norm_backward(&dh1, &bc.ln1, &b.ln1, &mut gb.ln1.gain, &mut gb.ln1.bias);
        let mut dx_in = dx_mid;
        dx_in.add_assign(&dx_ln1);
        dx = dx_in;
    }

    for (i, &t) in cache.prefix.iter().enumerate() {
        let src = dx.row(i);
        let tok = grads.tok_emb.row_mut(t);
        for (g, &v) in tok.iter_mut().zip(src) {
            *g += v;
        }
        let pos = grads.pos_emb.row_mut(i);
        for (g, &v) in pos.iter_mut().zip(src) {
            *g += v;
        }
    }
}
