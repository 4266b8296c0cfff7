//! Forward pass, cross-entropy loss and exact backward pass.
//!
//! Blocks are pre-norm residual: x + Attn(LN(x)), then x + FFN(LN(x)) with
//! GELU, followed by a final layer norm. The classifier reads position 0
//! (the CLS token) only. All reductions run in a fixed order so repeated
//! runs are bitwise identical.

use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView2, Axis};
use rand::Rng;

use super::{EncoderConfig, LayerParams, ModelError, ModelParams};
use crate::token::{assemble_batch, TokenSequence, Tokens};

const LN_EPS: f64 = 1e-5;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
        + x * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

struct NormCache {
    mean: Array2<f64>,    // [B, T]
    inv_std: Array2<f64>, // [B, T]
}

/// LayerNorm over the feature axis.
fn layer_norm(x: &Array3<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array3<f64>, NormCache) {
    let (b, t, d) = x.dim();
    let mut out = Array3::zeros((b, t, d));
    let mut mean = Array2::zeros((b, t));
    let mut inv_std = Array2::zeros((b, t));
    for bi in 0..b {
        for ti in 0..t {
            let row = x.slice(s![bi, ti, ..]);
            let m = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            mean[(bi, ti)] = m;
            inv_std[(bi, ti)] = is;
            let mut o = out.slice_mut(s![bi, ti, ..]);
            for di in 0..d {
                o[di] = (row[di] - m) * is * gain[di] + bias[di];
            }
        }
    }
    (out, NormCache { mean, inv_std })
}

/// Backward of layer_norm. Returns dx; accumulates dgain/dbias.
fn layer_norm_backward(
    dy: &Array3<f64>,
    x: &Array3<f64>,
    cache: &NormCache,
    gain: &Array1<f64>,
    dgain: &mut Array1<f64>,
    dbias: &mut Array1<f64>,
) -> Array3<f64> {
    let (b, t, d) = x.dim();
    let mut dx = Array3::zeros((b, t, d));
    for bi in 0..b {
        for ti in 0..t {
            let m = cache.mean[(bi, ti)];
            let is = cache.inv_std[(bi, ti)];
            let xr = x.slice(s![bi, ti, ..]);
            let dyr = dy.slice(s![bi, ti, ..]);
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for di in 0..d {
                let xhat = (xr[di] - m) * is;
                let dxhat = dyr[di] * gain[di];
                dgain[di] += dyr[di] * xhat;
                dbias[di] += dyr[di];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
            }
            let inv_d = 1.0 / d as f64;
            let mut dxr = dx.slice_mut(s![bi, ti, ..]);
            for di in 0..d {
                let xhat = (xr[di] - m) * is;
                let dxhat = dyr[di] * gain[di];
                dxr[di] = is * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
            }
        }
    }
    dx
}

/// x [B,T,D] times w [D,E] plus bias, flattening the batch/time axes.
fn linear(x: &Array3<f64>, w: &Array2<f64>, bias: &Array1<f64>) -> Array3<f64> {
    let (b, t, d) = x.dim();
    let e = w.ncols();
    let flat = x.to_shape((b * t, d)).unwrap();
    let mut y = flat.dot(w);
    y += bias;
    y.into_shape_with_order((b, t, e)).unwrap()
}

/// Backward of `linear`: accumulates dw/dbias, returns dx.
fn linear_backward(
    dy: &Array3<f64>,
    x: &Array3<f64>,
    w: &Array2<f64>,
    dw: &mut Array2<f64>,
    dbias: &mut Array1<f64>,
) -> Array3<f64> {
    let (b, t, d) = x.dim();
    let e = w.ncols();
    let xf = x.to_shape((b * t, d)).unwrap();
    let dyf = dy.to_shape((b * t, e)).unwrap();
    *dw += &xf.t().dot(&dyf);
    *dbias += &dyf.sum_axis(Axis(0));
    dyf.dot(&w.t()).into_shape_with_order((b, t, d)).unwrap()
}

struct AttnCache {
    ln_out: Array3<f64>,
    q: Array3<f64>,
    k: Array3<f64>,
    v: Array3<f64>,
    weights: Array4<f64>, // [B, H, T, T]
    ctx: Array3<f64>,
}

/// Multi-head scaled dot-product attention with key masking. Masked keys
/// receive -inf scores so their softmax weight is exactly zero.
fn attention_forward(
    ln_out: Array3<f64>,
    mask: &Array2<bool>,
    layer: &LayerParams,
    heads: usize,
) -> (Array3<f64>, AttnCache) {
    let (b, t, d) = ln_out.dim();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(&ln_out, &layer.wq, &layer.bq);
    let k = linear(&ln_out, &layer.wk, &layer.bk);
    let v = linear(&ln_out, &layer.wv, &layer.bv);
    let mut weights = Array4::zeros((b, heads, t, t));
    let mut ctx = Array3::zeros((b, t, d));
    for bi in 0..b {
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = q.slice(s![bi, .., cols.clone()]);
            let kh = k.slice(s![bi, .., cols.clone()]);
            let vh = v.slice(s![bi, .., cols.clone()]);
            let mut scores = qh.dot(&kh.t());
            scores *= scale;
            for j in 0..t {
                if !mask[(bi, j)] {
                    scores.column_mut(j).fill(f64::NEG_INFINITY);
                }
            }
            // row-wise softmax
            for i in 0..t {
                let mut row = scores.row_mut(i);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for val in row.iter_mut() {
                    *val = (*val - max).exp();
                    sum += *val;
                }
                row.mapv_inplace(|val| val / sum);
            }
            let ctx_h = scores.dot(&vh);
            ctx.slice_mut(s![bi, .., cols]).assign(&ctx_h);
            weights.slice_mut(s![bi, h, .., ..]).assign(&scores);
        }
    }
    let out = linear(&ctx, &layer.wo, &layer.bo);
    let cache = AttnCache {
        ln_out,
        q,
        k,
        v,
        weights,
        ctx,
    };
    (out, cache)
}

/// Backward through the attention sublayer. Returns d(ln_out); accumulates
/// projection gradients.
fn attention_backward(
    d_out: &Array3<f64>,
    cache: &AttnCache,
    layer: &LayerParams,
    grads: &mut LayerParams,
    heads: usize,
) -> Array3<f64> {
    let (b, t, d) = cache.ln_out.dim();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let d_ctx = linear_backward(d_out, &cache.ctx, &layer.wo, &mut grads.wo, &mut grads.bo);
    let mut dq = Array3::zeros((b, t, d));
    let mut dk = Array3::zeros((b, t, d));
    let mut dv = Array3::zeros((b, t, d));
    for bi in 0..b {
        for h in 0..heads {
            let cols = h * dh..(h + 1) * dh;
            let w = cache.weights.slice(s![bi, h, .., ..]);
            let vh = cache.v.slice(s![bi, .., cols.clone()]);
            let qh = cache.q.slice(s![bi, .., cols.clone()]);
            let kh = cache.k.slice(s![bi, .., cols.clone()]);
            let d_ctx_h = d_ctx.slice(s![bi, .., cols.clone()]);
            // d weights and d v
            let d_w = d_ctx_h.dot(&vh.t());
            dv.slice_mut(s![bi, .., cols.clone()])
                .assign(&w.t().dot(&d_ctx_h));
            // softmax backward per row
            let mut d_scores = Array2::zeros((t, t));
            for i in 0..t {
                let wi = w.row(i);
                let dwi = d_w.row(i);
                let dot = wi.dot(&dwi);
                for j in 0..t {
                    d_scores[(i, j)] = wi[j] * (dwi[j] - dot);
                }
            }
            d_scores *= scale;
            dq.slice_mut(s![bi, .., cols.clone()])
                .assign(&d_scores.dot(&kh));
            dk.slice_mut(s![bi, .., cols]).assign(&d_scores.t().dot(&qh));
        }
    }
    let mut d_ln = linear_backward(&dq, &cache.ln_out, &layer.wq, &mut grads.wq, &mut grads.bq);
    d_ln += &linear_backward(&dk, &cache.ln_out, &layer.wk, &mut grads.wk, &mut grads.bk);
    d_ln += &linear_backward(&dv, &cache.ln_out, &layer.wv, &mut grads.wv, &mut grads.bv);
    d_ln
}

struct LayerCache {
    x_in: Array3<f64>,
    ln1: NormCache,
    attn: AttnCache,
    drop1: Option<Array3<f64>>,
    x_mid: Array3<f64>,
    ln2: NormCache,
    ln2_out: Array3<f64>,
    h_pre: Array3<f64>,
    h_act: Array3<f64>,
    drop2: Option<Array3<f64>>,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    x_final: Array3<f64>,
    ln_f: NormCache,
    cls: Array2<f64>, // [B, D] final-norm output at position 0
}

fn dropout_mask<R: Rng>(shape: (usize, usize, usize), p: f64, rng: &mut R) -> Array3<f64> {
    let keep = 1.0 - p;
    let mut m = Array3::zeros(shape);
    for v in m.iter_mut() {
        *v = if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
    }
    m
}

fn encoder_forward<R: Rng>(
    x0: Array3<f64>,
    mask: &Array2<bool>,
    params: &ModelParams,
    cfg: &EncoderConfig,
    mut dropout_rng: Option<&mut R>,
) -> Result<(Array2<f64>, ForwardCache), ModelError> {
    let (b, t, d) = x0.dim();
    if d != cfg.dim {
        return Err(ModelError::ShapeMismatch(format!(
            "input width {d} != config dim {}",
            cfg.dim
        )));
    }
    if mask.dim() != (b, t) {
        return Err(ModelError::ShapeMismatch(format!(
            "mask {:?} vs batch ({b}, {t})",
            mask.dim()
        )));
    }
    let mut x = x0;
    let mut layer_caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let x_in = x;
        let (ln1_out, ln1) = layer_norm(&x_in, &layer.ln1_g, &layer.ln1_b);
        let (mut attn_out, attn) = attention_forward(ln1_out, mask, layer, cfg.heads);
        let drop1 = match dropout_rng.as_deref_mut() {
            Some(rng) if cfg.dropout > 0.0 => {
                let m = dropout_mask((b, t, d), cfg.dropout, rng);
                attn_out *= &m;
                Some(m)
            }
            _ => None,
        };
        let x_mid = &x_in + &attn_out;
        let (ln2_out, ln2) = layer_norm(&x_mid, &layer.ln2_g, &layer.ln2_b);
        let h_pre = linear(&ln2_out, &layer.w1, &layer.b1);
        let h_act = h_pre.mapv(gelu);
        let mut ffn_out = linear(&h_act, &layer.w2, &layer.b2);
        let drop2 = match dropout_rng.as_deref_mut() {
            Some(rng) if cfg.dropout > 0.0 => {
                let m = dropout_mask((b, t, d), cfg.dropout, rng);
                ffn_out *= &m;
                Some(m)
            }
            _ => None,
        };
        x = &x_mid + &ffn_out;
        layer_caches.push(LayerCache {
            x_in,
            ln1,
            attn,
            drop1,
            x_mid,
            ln2,
            ln2_out,
            h_pre,
            h_act,
            drop2,
        });
    }
    let (ln_f_out, ln_f) = layer_norm(&x, &params.ln_f_g, &params.ln_f_b);
    let cls: Array2<f64> = ln_f_out.slice(s![.., 0, ..]).to_owned();
    let mut logits = cls.dot(&params.w_cls);
    logits += &params.b_cls;
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(ModelError::NonFiniteActivation("logits".into()));
    }
    Ok((
        logits,
        ForwardCache {
            layers: layer_caches,
            x_final: x,
            ln_f,
            cls,
        },
    ))
}

/// Inference forward pass: embedded batch + mask to logits.
pub fn forward(
    x: &Array3<f64>,
    mask: &Array2<bool>,
    params: &ModelParams,
    cfg: &EncoderConfig,
) -> Result<Array2<f64>, ModelError> {
    let (logits, _) =
        encoder_forward::<rand::rngs::StdRng>(x.clone(), mask, params, cfg, None)?;
    Ok(logits)
}

/// Softmax cross-entropy. Returns (mean loss, dlogits, correct count).
fn cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, Array2<f64>, usize), ModelError> {
    let (b, k) = logits.dim();
    if labels.len() != b {
        return Err(ModelError::ShapeMismatch("labels/batch length".into()));
    }
    let mut dlogits = Array2::zeros((b, k));
    let mut loss = 0.0;
    let mut correct = 0;
    for bi in 0..b {
        let row = logits.row(bi);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row.iter() {
            sum += (v - max).exp();
        }
        let log_z = max + sum.ln();
        let label = labels[bi];
        if label >= k {
            return Err(ModelError::ShapeMismatch(format!("label {label} >= K {k}")));
        }
        loss += log_z - row[label];
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if argmax == label {
            correct += 1;
        }
        for j in 0..k {
            let p = (row[j] - log_z).exp();
            dlogits[(bi, j)] = (p - if j == label { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    loss /= b as f64;
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteActivation("loss".into()));
    }
    Ok((loss, dlogits, correct))
}

/// Scatter the input-embedding gradient back into the table gradients.
fn embedding_backward(dx0: &Array3<f64>, seqs: &[TokenSequence], grads: &mut ModelParams) {
    let t = &mut grads.tables;
    for (bi, seq) in seqs.iter().enumerate() {
        let d_cls = dx0.slice(s![bi, 0, ..]);
        t.e_cls += &d_cls;
        match &seq.tokens {
            Tokens::Point(tokens) => {
                for (ti, tok) in tokens.iter().enumerate() {
                    let g: ArrayView2<f64> = dx0.slice(s![bi, ti + 1..ti + 2, ..]);
                    let g = g.row(0);
                    let i = tok.contour_index.min(t.e_c_idx.nrows() - 1);
                    let j = tok.point_index.min(t.e_p_idx.nrows() - 1);
                    t.e_c_idx.row_mut(i).scaled_add(1.0, &g);
                    t.e_p_idx.row_mut(j).scaled_add(1.0, &g);
                    t.e_loc_x.row_mut(tok.x_bin).scaled_add(1.0, &g);
                    t.e_loc_y.row_mut(tok.y_bin).scaled_add(1.0, &g);
                    t.e_flag.row_mut(tok.on_curve as usize).scaled_add(1.0, &g);
                }
            }
            Tokens::Command(tokens) => {
                for (ti, tok) in tokens.iter().enumerate() {
                    let g: ArrayView2<f64> = dx0.slice(s![bi, ti + 1..ti + 2, ..]);
                    let g = g.row(0);
                    let i = tok.command_index.min(t.e_idx.nrows() - 1);
                    t.e_idx.row_mut(i).scaled_add(1.0, &g);
                    t.e_cmd.row_mut(tok.kind.id()).scaled_add(1.0, &g);
                    for (slot, table) in t.e_arg.iter_mut().enumerate() {
                        table.row_mut(tok.arg_bins[slot]).scaled_add(1.0, &g);
                    }
                }
            }
        }
    }
}

pub struct LossOutput {
    pub loss: f64,
    pub grads: ModelParams,
    pub correct: usize,
}

/// Mean cross-entropy and exact gradients for every parameter, embedding
/// tables included. `dropout_rng` enables dropout when the config asks for
/// it; pass `None` for deterministic evaluation-style gradients.
pub fn loss_and_grads<R: Rng>(
    seqs: &[TokenSequence],
    params: &ModelParams,
    cfg: &EncoderConfig,
    quant: &crate::token::QuantizerConfig,
    limits: &crate::token::TokenizerLimits,
    dropout_rng: Option<&mut R>,
) -> Result<LossOutput, ModelError> {
    cfg.validate()?;
    let (x0, mask, labels) = assemble_batch(seqs, &params.tables);
    let (logits, cache) = encoder_forward(x0, &mask, params, cfg, dropout_rng)?;
    let (loss, dlogits, correct) = cross_entropy(&logits, &labels)?;

    let mut grads = ModelParams::zeros(cfg, quant, limits);

    // classifier
    grads.w_cls += &cache.cls.t().dot(&dlogits);
    grads.b_cls += &dlogits.sum_axis(Axis(0));
    let d_cls = dlogits.dot(&params.w_cls.t()); // [B, D]

    // final layer norm (gradient enters only at position 0)
    let (b, t, d) = cache.x_final.dim();
    let mut d_ln_f_out = Array3::zeros((b, t, d));
    d_ln_f_out.slice_mut(s![.., 0, ..]).assign(&d_cls);
    let mut dx = layer_norm_backward(
        &d_ln_f_out,
        &cache.x_final,
        &cache.ln_f,
        &params.ln_f_g,
        &mut grads.ln_f_g,
        &mut grads.ln_f_b,
    );

    for (li, layer_cache) in cache.layers.iter().enumerate().rev() {
        let layer = &params.layers[li];
        let grad_layer = &mut grads.layers[li];

        // x = x_mid + drop2(ffn_out)
        let mut d_ffn_out = dx.clone();
        if let Some(m) = &layer_cache.drop2 {
            d_ffn_out *= m;
        }
        let mut d_h_act = linear_backward(
            &d_ffn_out,
            &layer_cache.h_act,
            &layer.w2,
            &mut grad_layer.w2,
            &mut grad_layer.b2,
        );
        // gelu
        d_h_act.zip_mut_with(&layer_cache.h_pre, |g, &pre| *g *= gelu_grad(pre));
        let d_ln2_out = linear_backward(
            &d_h_act,
            &layer_cache.ln2_out,
            &layer.w1,
            &mut grad_layer.w1,
            &mut grad_layer.b1,
        );
        let d_x_mid_from_ln2 = layer_norm_backward(
            &d_ln2_out,
            &layer_cache.x_mid,
            &layer_cache.ln2,
            &layer.ln2_g,
            &mut grad_layer.ln2_g,
            &mut grad_layer.ln2_b,
        );
        let d_x_mid = &dx + &d_x_mid_from_ln2;

        // x_mid = x_in + drop1(attn_out)
        let mut d_attn_out = d_x_mid.clone();
        if let Some(m) = &layer_cache.drop1 {
            d_attn_out *= m;
        }
        let d_ln1_out =
            attention_backward(&d_attn_out, &layer_cache.attn, layer, grad_layer, cfg.heads);
        let d_x_in_from_ln1 = layer_norm_backward(
            &d_ln1_out,
            &layer_cache.x_in,
            &layer_cache.ln1,
            &layer.ln1_g,
            &mut grad_layer.ln1_g,
            &mut grad_layer.ln1_b,
        );
        dx = &d_x_mid + &d_x_in_from_ln1;
    }

    embedding_backward(&dx, seqs, &mut grads);
    Ok(LossOutput {
        loss,
        grads,
        correct,
    })
}

/// Loss without gradients (used by finite-difference checks and validation).
pub fn loss_only(
    seqs: &[TokenSequence],
    params: &ModelParams,
    cfg: &EncoderConfig,
) -> Result<f64, ModelError> {
    let (x0, mask, labels) = assemble_batch(seqs, &params.tables);
    let (logits, _) = encoder_forward::<rand::rngs::StdRng>(x0, &mask, params, cfg, None)?;
    let (loss, _, _) = cross_entropy(&logits, &labels)?;
    Ok(loss)
}

/// Deterministic inference over a slice of sequences. Returns (loss,
/// predicted class per sequence, correct count).
pub fn predict(
    seqs: &[TokenSequence],
    params: &ModelParams,
    cfg: &EncoderConfig,
) -> Result<(f64, Vec<usize>, usize), ModelError> {
    let (x0, mask, labels) = assemble_batch(seqs, &params.tables);
    let (logits, _) = encoder_forward::<rand::rngs::StdRng>(x0, &mask, params, cfg, None)?;
    let (loss, _, correct) = cross_entropy(&logits, &labels)?;
    let preds = logits
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        })
        .collect();
    Ok((loss, preds, correct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::{PointToken, QuantizerConfig, TokenizerLimits};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg(classes: usize) -> EncoderConfig {
        EncoderConfig {
            dim: 8,
            heads: 2,
            layers: 1,
            ffn_dim: 16,
            classes,
            dropout: 0.0,
            seed: 0,
        }
    }

    fn tiny_limits() -> TokenizerLimits {
        TokenizerLimits {
            max_contours: 4,
            max_points: 16,
            max_cmds: 16,
            max_len_points: 32,
            max_len_commands: 32,
        }
    }

    fn toy_seq(rng: &mut ChaCha8Rng, len: usize, label: usize) -> TokenSequence {
        use rand::Rng;
        let tokens = (0..len)
            .map(|j| PointToken {
                contour_index: rng.gen_range(0..3),
                point_index: j,
                x_bin: rng.gen_range(0..256),
                y_bin: rng.gen_range(0..256),
                on_curve: rng.gen_bool(0.7),
            })
            .collect();
        TokenSequence {
            tokens: Tokens::Point(tokens),
            label,
        }
    }

    #[test]
    fn zero_params_give_uniform_logits_and_ln_k_loss() {
        let cfg = tiny_cfg(16);
        let quant = QuantizerConfig::new(1000.0);
        let limits = tiny_limits();
        let mut params = ModelParams::zeros(&cfg, &quant, &limits);
        // layer norms need unit gain to avoid collapsing to the bias
        for l in &mut params.layers {
            l.ln1_g.fill(1.0);
            l.ln2_g.fill(1.0);
        }
        params.ln_f_g.fill(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seqs: Vec<_> = (0..4).map(|i| toy_seq(&mut rng, 5, i % 16)).collect();
        let loss = loss_only(&seqs, &params, &cfg).unwrap();
        assert!((loss - (16.0f64).ln()).abs() < 1e-6, "loss {loss}");
    }

    #[test]
    fn single_token_attention_is_identity_softmax() {
        // T=1 (CLS only): softmax over one key must weight it 1.0
        let cfg = tiny_cfg(2);
        let quant = QuantizerConfig::new(1000.0);
        let limits = tiny_limits();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
        let seqs = vec![TokenSequence {
            tokens: Tokens::Point(vec![]),
            label: 0,
        }];
        let (x0, mask, _) = assemble_batch(&seqs, &params.tables);
        let (ln1_out, _) = layer_norm(&x0, &params.layers[0].ln1_g, &params.layers[0].ln1_b);
        let (_, cache) = attention_forward(ln1_out, &mask, &params.layers[0], cfg.heads);
        for h in 0..cfg.heads {
            assert!((cache.weights[(0, h, 0, 0)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rows_sum_to_one_and_masked_keys_zero() {
        let cfg = tiny_cfg(2);
        let quant = QuantizerConfig::new(1000.0);
        let limits = tiny_limits();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
        let seqs = vec![toy_seq(&mut rng, 3, 0), toy_seq(&mut rng, 6, 1)];
        let (x0, mask, _) = assemble_batch(&seqs, &params.tables);
        let (ln1_out, _) = layer_norm(&x0, &params.layers[0].ln1_g, &params.layers[0].ln1_b);
        let (_, cache) = attention_forward(ln1_out, &mask, &params.layers[0], cfg.heads);
        let (b, t) = mask.dim();
        for bi in 0..b {
            for h in 0..cfg.heads {
                for i in 0..t {
                    let row = cache.weights.slice(s![bi, h, i, ..]);
                    let sum: f64 = row.sum();
                    assert!((sum - 1.0).abs() < 1e-6);
                    for j in 0..t {
                        if !mask[(bi, j)] {
                            assert_eq!(row[j], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn logits_invariant_to_padded_token_contents() {
        let cfg = tiny_cfg(4);
        let quant = QuantizerConfig::new(1000.0);
        let limits = tiny_limits();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
        let seqs = vec![toy_seq(&mut rng, 3, 0), toy_seq(&mut rng, 7, 1)];
        let (x0, mask, _) = assemble_batch(&seqs, &params.tables);
        let logits_a = forward(&x0, &mask, &params, &cfg).unwrap();
        let mut x1 = x0.clone();
        // poison the padded rows of the first sample
        for ti in 4..x1.dim().1 {
            x1.slice_mut(s![0, ti, ..]).fill(123.456);
        }
        let logits_b = forward(&x1, &mask, &params, &cfg).unwrap();
        for (a, b) in logits_a.iter().zip(logits_b.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicated_batch_row_duplicates_logits() {
        let cfg = tiny_cfg(4);
        let quant = QuantizerConfig::new(1000.0);
        let limits = tiny_limits();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
        let s0 = toy_seq(&mut rng, 4, 2);
        let seqs = vec![s0.clone(), s0];
        let (x0, mask, _) = assemble_batch(&seqs, &params.tables);
        let logits = forward(&x0, &mask, &params, &cfg).unwrap();
        for j in 0..4 {
            assert!((logits[(0, j)] - logits[(1, j)]).abs() < 1e-12);
        }
    }

    #[test]
    fn padded_token_embedding_grads_are_zero() {
        let cfg = tiny_cfg(4);
        let quant = QuantizerConfig::new(1000.0);
        let limits = tiny_limits();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
        // one short and one long sequence; a bin used ONLY by no token should
        // have zero gradient
        let short = TokenSequence {
            tokens: Tokens::Point(vec![PointToken {
                contour_index: 0,
                point_index: 0,
                x_bin: 1,
                y_bin: 1,
                on_curve: true,
            }]),
            label: 0,
        };
        let long = toy_seq(&mut rng, 6, 1);
        let out = loss_and_grads::<ChaCha8Rng>(
            &[short, long],
            &params,
            &cfg,
            &quant,
            &limits,
            None,
        )
        .unwrap();
        // pad row of the location tables is never referenced in point mode
        let pad = quant.pad_index();
        assert!(out.grads.tables.e_loc_x.row(pad).iter().all(|&v| v == 0.0));
        assert!(out.grads.tables.e_loc_y.row(pad).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradcheck_tiny_config() {
        // full check lives in the acceptance suite; this is a smoke test on
        // a handful of parameters
        let cfg = tiny_cfg(3);
        let quant = QuantizerConfig::new(1000.0);
        let limits = tiny_limits();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
        let seqs: Vec<_> = (0..2).map(|i| toy_seq(&mut rng, 5, i)).collect();
        let out =
            loss_and_grads::<ChaCha8Rng>(&seqs, &params, &cfg, &quant, &limits, None).unwrap();
        let analytic = out.grads.layers[0].wq[(0, 0)];
        let eps = 1e-5;
        params.layers[0].wq[(0, 0)] += eps;
        let lp = loss_only(&seqs, &params, &cfg).unwrap();
        params.layers[0].wq[(0, 0)] -= 2.0 * eps;
        let lm = loss_only(&seqs, &params, &cfg).unwrap();
        let numeric = (lp - lm) / (2.0 * eps);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        assert!(
            (analytic - numeric).abs() / denom < 1e-4,
            "analytic {analytic} numeric {numeric}"
        );
    }
}
