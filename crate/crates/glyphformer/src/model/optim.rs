//! AdamW with decoupled weight decay and the warmup / inverse-square-root
//! learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::{ModelParams, ParamKind};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerHyper {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub warmup: u64,
}

impl Default for OptimizerHyper {
    fn default() -> Self {
        OptimizerHyper {
            base_lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            warmup: 250,
        }
    }
}

/// Per-parameter moment accumulators, aligned with the order of
/// [`ModelParams::flat_views`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub hyper: OptimizerHyper,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, hyper: OptimizerHyper) -> Self {
        let m: Vec<Vec<f64>> = params
            .flat_views()
            .iter()
            .map(|(_, _, s)| vec![0.0; s.len()])
            .collect();
        let v = m.clone();
        OptimizerState {
            hyper,
            step: 0,
            m,
            v,
        }
    }
}

/// Linear warmup to `base_lr` at `warmup` steps, then inverse-square-root
/// decay: lr = base_lr * min(step/warmup, sqrt(warmup/step)).
pub fn lr_at(step: u64, hyper: &OptimizerHyper) -> f64 {
    assert!(step >= 1, "schedule is defined for step >= 1");
    let s = step as f64;
    let w = hyper.warmup as f64;
    hyper.base_lr * (s / w).min((w / s).sqrt())
}

/// One AdamW step. Weight decay is decoupled (applied straight to the
/// parameter, independent of the moment update) and only touches matrices
/// and embedding tables; biases, norms and pad rows are exempt.
pub fn adamw_step(params: &mut ModelParams, grads: &ModelParams, state: &mut OptimizerState) {
    state.step += 1;
    let lr = lr_at(state.step, &state.hyper);
    let h = state.hyper;
    let bc1 = 1.0 - h.beta1.powi(state.step as i32);
    let bc2 = 1.0 - h.beta2.powi(state.step as i32);

    let grad_views = grads.flat_views();
    let mut param_views = params.flat_views_mut();
    assert_eq!(grad_views.len(), param_views.len());
    for (idx, (pv, gv)) in param_views.iter_mut().zip(grad_views.iter()).enumerate() {
        let (ref name, kind, ref mut p) = *pv;
        let (ref gname, _, g) = *gv;
        debug_assert_eq!(name, gname);
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let decayed = |i: usize| -> bool {
            match kind {
                ParamKind::Matrix => true,
                ParamKind::Bias | ParamKind::Norm => false,
                ParamKind::Embedding { pad_row, dim } => match pad_row {
                    Some(r) => !(i >= r * dim && i < (r + 1) * dim),
                    None => true,
                },
            }
        };
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + h.eps);
            if h.weight_decay > 0.0 && decayed(i) {
                p[i] -= lr * h.weight_decay * p[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EncoderConfig;
    use crate::token::{QuantizerConfig, TokenizerLimits};

    fn hyper() -> OptimizerHyper {
        OptimizerHyper::default()
    }

    #[test]
    fn lr_warmup_midpoint() {
        assert!((lr_at(125, &hyper()) - 5e-5).abs() < 1e-18);
    }

    #[test]
    fn lr_peak_at_warmup_end() {
        assert!((lr_at(250, &hyper()) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn lr_inverse_sqrt_decay() {
        let expect = 1e-4 * (250.0f64 / 1000.0).sqrt();
        assert!((lr_at(1000, &hyper()) - expect).abs() < 1e-18);
        assert!((lr_at(1000, &hyper()) - 5e-5).abs() < 1e-18);
    }

    fn small_setup() -> (ModelParams, EncoderConfig, QuantizerConfig, TokenizerLimits) {
        let cfg = EncoderConfig {
            dim: 4,
            heads: 2,
            layers: 1,
            ffn_dim: 8,
            classes: 2,
            dropout: 0.0,
            seed: 0,
        };
        let quant = QuantizerConfig::new(1000.0);
        let limits = TokenizerLimits {
            max_contours: 2,
            max_points: 4,
            max_cmds: 4,
            max_len_points: 8,
            max_len_commands: 8,
        };
        let params = ModelParams::zeros(&cfg, &quant, &limits);
        (params, cfg, quant, limits)
    }

    #[test]
    fn zero_grad_with_decay_shrinks_matrices_exactly() {
        let (mut params, cfg, quant, limits) = small_setup();
        params.layers[0].wq.fill(2.0);
        params.layers[0].bq.fill(2.0);
        let grads = ModelParams::zeros(&cfg, &quant, &limits);
        let mut state = OptimizerState::new(&params, hyper());
        adamw_step(&mut params, &grads, &mut state);
        let lr = lr_at(1, &hyper());
        let expect = 2.0 * (1.0 - lr * 0.01);
        for &v in params.layers[0].wq.iter() {
            assert!((v - expect).abs() < 1e-15);
        }
        // biases are exempt from decay
        for &v in params.layers[0].bq.iter() {
            assert_eq!(v, 2.0);
        }
    }

    #[test]
    fn pad_rows_exempt_from_decay() {
        let (mut params, cfg, quant, limits) = small_setup();
        params.tables.e_loc_x.fill(1.0);
        let grads = ModelParams::zeros(&cfg, &quant, &limits);
        let mut state = OptimizerState::new(&params, hyper());
        adamw_step(&mut params, &grads, &mut state);
        let pad = quant.pad_index();
        for &v in params.tables.e_loc_x.row(pad).iter() {
            assert_eq!(v, 1.0);
        }
        for &v in params.tables.e_loc_x.row(0).iter() {
            assert!(v < 1.0);
        }
    }

    #[test]
    fn constant_gradient_update_approaches_lr() {
        let (mut params, cfg, quant, limits) = small_setup();
        let mut grads = ModelParams::zeros(&cfg, &quant, &limits);
        grads.layers[0].wq.fill(0.5);
        let mut h = hyper();
        h.weight_decay = 0.0;
        h.warmup = 1; // constant-ish schedule after step 1
        let mut state = OptimizerState::new(&params, h);
        let mut prev = params.layers[0].wq[(0, 0)];
        for _ in 0..200 {
            adamw_step(&mut params, &grads, &mut state);
            prev = params.layers[0].wq[(0, 0)];
        }
        let before = prev;
        adamw_step(&mut params, &grads, &mut state);
        let update = (params.layers[0].wq[(0, 0)] - before).abs();
        let lr = lr_at(state.step, &h);
        assert!((update - lr).abs() / lr < 0.05, "update {update} lr {lr}");
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let (mut params, cfg, quant, limits) = small_setup();
            params.layers[0].wq.fill(0.3);
            let mut grads = ModelParams::zeros(&cfg, &quant, &limits);
            grads.layers[0].wq.fill(0.01);
            let mut state = OptimizerState::new(&params, hyper());
            for _ in 0..10 {
                adamw_step(&mut params, &grads, &mut state);
            }
            params.layers[0].wq.clone()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b); // bitwise
    }
}
