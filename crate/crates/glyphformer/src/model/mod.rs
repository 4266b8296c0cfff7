//! From-scratch Transformer encoder with a CLS classification head: exact
//! gradients, AdamW, and the warmup / inverse-square-root schedule.

mod net;
mod optim;

pub use net::{forward, loss_and_grads, loss_only, predict, LossOutput};
pub use optim::{adamw_step, lr_at, OptimizerHyper, OptimizerState};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::token::{EmbeddingTables, Mode, QuantizerConfig, TokenizerLimits};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation detected ({0})")]
    NonFiniteActivation(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Architecture sizes. Defaults follow the reference setup: D=64, H=4, L=3,
/// FFN hidden 128.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EncoderConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_ffn")]
    pub ffn_dim: usize,
    pub classes: usize,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dim() -> usize {
    64
}
fn default_heads() -> usize {
    4
}
fn default_layers() -> usize {
    3
}
fn default_ffn() -> usize {
    128
}

impl EncoderConfig {
    pub fn with_classes(classes: usize) -> Self {
        EncoderConfig {
            dim: 64,
            heads: 4,
            layers: 3,
            ffn_dim: 128,
            classes,
            dropout: 0.0,
            seed: 0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 || self.heads == 0 || self.layers == 0 || self.ffn_dim == 0 {
            return Err(ModelError::InvalidConfig("all dims must be positive".into()));
        }
        if self.dim % self.heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if self.classes < 2 {
            return Err(ModelError::InvalidConfig("need at least 2 classes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln1_g: Array1<f64>,
    pub ln1_b: Array1<f64>,
    pub ln2_g: Array1<f64>,
    pub ln2_b: Array1<f64>,
}

impl LayerParams {
    fn zeros(dim: usize, ffn: usize) -> Self {
        LayerParams {
            wq: Array2::zeros((dim, dim)),
            bq: Array1::zeros(dim),
            wk: Array2::zeros((dim, dim)),
            bk: Array1::zeros(dim),
            wv: Array2::zeros((dim, dim)),
            bv: Array1::zeros(dim),
            wo: Array2::zeros((dim, dim)),
            bo: Array1::zeros(dim),
            w1: Array2::zeros((dim, ffn)),
            b1: Array1::zeros(ffn),
            w2: Array2::zeros((ffn, dim)),
            b2: Array1::zeros(dim),
            ln1_g: Array1::zeros(dim),
            ln1_b: Array1::zeros(dim),
            ln2_g: Array1::zeros(dim),
            ln2_b: Array1::zeros(dim),
        }
    }
}

/// All learnable tensors, embedding tables included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    pub ln_f_g: Array1<f64>,
    pub ln_f_b: Array1<f64>,
    pub w_cls: Array2<f64>,
    pub b_cls: Array1<f64>,
    pub tables: EmbeddingTables,
}

/// How a tensor participates in weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Projection / FFN / classifier matrix: decayed.
    Matrix,
    /// Bias vector or CLS vector: not decayed.
    Bias,
    /// Layer-norm gain/bias: not decayed.
    Norm,
    /// Embedding table: decayed except for the pad row (element range
    /// `pad_row*dim .. (pad_row+1)*dim` of the flat slice).
    Embedding { pad_row: Option<usize>, dim: usize },
}

/// Sample from a normal truncated at two standard deviations.
pub fn trunc_normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    let normal = Normal::new(0.0, std).unwrap();
    loop {
        let v = normal.sample(rng);
        if v.abs() <= 2.0 * std {
            return v;
        }
    }
}

impl ModelParams {
    pub fn zeros(cfg: &EncoderConfig, quant: &QuantizerConfig, limits: &TokenizerLimits) -> Self {
        ModelParams {
            layers: (0..cfg.layers)
                .map(|_| LayerParams::zeros(cfg.dim, cfg.ffn_dim))
                .collect(),
            ln_f_g: Array1::zeros(cfg.dim),
            ln_f_b: Array1::zeros(cfg.dim),
            w_cls: Array2::zeros((cfg.dim, cfg.classes)),
            b_cls: Array1::zeros(cfg.classes),
            tables: EmbeddingTables::zeros(cfg.dim, quant.bins, limits),
        }
    }

    /// Truncated-normal init (std 0.02), zero biases, unit layer-norm gains.
    pub fn init<R: Rng>(
        cfg: &EncoderConfig,
        quant: &QuantizerConfig,
        limits: &TokenizerLimits,
        rng: &mut R,
    ) -> Self {
        const STD: f64 = 0.02;
        let mut p = Self::zeros(cfg, quant, limits);
        for layer in &mut p.layers {
            for w in [
                &mut layer.wq,
                &mut layer.wk,
                &mut layer.wv,
                &mut layer.wo,
                &mut layer.w1,
                &mut layer.w2,
            ] {
                for v in w.iter_mut() {
                    *v = trunc_normal(rng, STD);
                }
            }
            layer.ln1_g.fill(1.0);
            layer.ln2_g.fill(1.0);
        }
        p.ln_f_g.fill(1.0);
        for v in p.w_cls.iter_mut() {
            *v = trunc_normal(rng, STD);
        }
        p.tables = EmbeddingTables::init(cfg.dim, quant.bins, limits, rng, STD);
        p
    }

    /// Flat immutable views over every tensor, in a fixed order shared with
    /// [`flat_views_mut`](Self::flat_views_mut).
    pub fn flat_views(&self) -> Vec<(String, ParamKind, &[f64])> {
        let dim = self.tables.dim();
        let mut out: Vec<(String, ParamKind, &[f64])> = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let n = |s: &str| format!("layer{i}.{s}");
            out.push((n("wq"), ParamKind::Matrix, l.wq.as_slice().unwrap()));
            out.push((n("bq"), ParamKind::Bias, l.bq.as_slice().unwrap()));
            out.push((n("wk"), ParamKind::Matrix, l.wk.as_slice().unwrap()));
            out.push((n("bk"), ParamKind::Bias, l.bk.as_slice().unwrap()));
            out.push((n("wv"), ParamKind::Matrix, l.wv.as_slice().unwrap()));
            out.push((n("bv"), ParamKind::Bias, l.bv.as_slice().unwrap()));
            out.push((n("wo"), ParamKind::Matrix, l.wo.as_slice().unwrap()));
            out.push((n("bo"), ParamKind::Bias, l.bo.as_slice().unwrap()));
            out.push((n("w1"), ParamKind::Matrix, l.w1.as_slice().unwrap()));
            out.push((n("b1"), ParamKind::Bias, l.b1.as_slice().unwrap()));
            out.push((n("w2"), ParamKind::Matrix, l.w2.as_slice().unwrap()));
            out.push((n("b2"), ParamKind::Bias, l.b2.as_slice().unwrap()));
            out.push((n("ln1_g"), ParamKind::Norm, l.ln1_g.as_slice().unwrap()));
            out.push((n("ln1_b"), ParamKind::Norm, l.ln1_b.as_slice().unwrap()));
            out.push((n("ln2_g"), ParamKind::Norm, l.ln2_g.as_slice().unwrap()));
            out.push((n("ln2_b"), ParamKind::Norm, l.ln2_b.as_slice().unwrap()));
        }
        out.push(("ln_f_g".into(), ParamKind::Norm, self.ln_f_g.as_slice().unwrap()));
        out.push(("ln_f_b".into(), ParamKind::Norm, self.ln_f_b.as_slice().unwrap()));
        out.push(("w_cls".into(), ParamKind::Matrix, self.w_cls.as_slice().unwrap()));
        out.push(("b_cls".into(), ParamKind::Bias, self.b_cls.as_slice().unwrap()));
        let t = &self.tables;
        let pad_bins = t.e_loc_x.nrows() - 1;
        out.push(("e_cls".into(), ParamKind::Bias, t.e_cls.as_slice().unwrap()));
        out.push((
            "e_c_idx".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_c_idx.as_slice().unwrap(),
        ));
        out.push((
            "e_p_idx".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_p_idx.as_slice().unwrap(),
        ));
        out.push((
            "e_loc_x".into(),
            ParamKind::Embedding { pad_row: Some(pad_bins), dim },
            t.e_loc_x.as_slice().unwrap(),
        ));
        out.push((
            "e_loc_y".into(),
            ParamKind::Embedding { pad_row: Some(pad_bins), dim },
            t.e_loc_y.as_slice().unwrap(),
        ));
        out.push((
            "e_flag".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_flag.as_slice().unwrap(),
        ));
        out.push((
            "e_idx".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_idx.as_slice().unwrap(),
        ));
        out.push((
            "e_cmd".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_cmd.as_slice().unwrap(),
        ));
        for (s, table) in t.e_arg.iter().enumerate() {
            out.push((
                format!("e_arg{s}"),
                ParamKind::Embedding { pad_row: Some(pad_bins), dim },
                table.as_slice().unwrap(),
            ));
        }
        out
    }

    /// Flat mutable views in the same order as [`flat_views`](Self::flat_views).
    pub fn flat_views_mut(&mut self) -> Vec<(String, ParamKind, &mut [f64])> {
        let dim = self.tables.dim();
        let mut out: Vec<(String, ParamKind, &mut [f64])> = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            let n = |s: &str| format!("layer{i}.{s}");
            out.push((n("wq"), ParamKind::Matrix, l.wq.as_slice_mut().unwrap()));
            out.push((n("bq"), ParamKind::Bias, l.bq.as_slice_mut().unwrap()));
            out.push((n("wk"), ParamKind::Matrix, l.wk.as_slice_mut().unwrap()));
            out.push((n("bk"), ParamKind::Bias, l.bk.as_slice_mut().unwrap()));
            out.push((n("wv"), ParamKind::Matrix, l.wv.as_slice_mut().unwrap()));
            out.push((n("bv"), ParamKind::Bias, l.bv.as_slice_mut().unwrap()));
            out.push((n("wo"), ParamKind::Matrix, l.wo.as_slice_mut().unwrap()));
            out.push((n("bo"), ParamKind::Bias, l.bo.as_slice_mut().unwrap()));
            out.push((n("w1"), ParamKind::Matrix, l.w1.as_slice_mut().unwrap()));
            out.push((n("b1"), ParamKind::Bias, l.b1.as_slice_mut().unwrap()));
            out.push((n("w2"), ParamKind::Matrix, l.w2.as_slice_mut().unwrap()));
            out.push((n("b2"), ParamKind::Bias, l.b2.as_slice_mut().unwrap()));
            out.push((n("ln1_g"), ParamKind::Norm, l.ln1_g.as_slice_mut().unwrap()));
            out.push((n("ln1_b"), ParamKind::Norm, l.ln1_b.as_slice_mut().unwrap()));
            out.push((n("ln2_g"), ParamKind::Norm, l.ln2_g.as_slice_mut().unwrap()));
            out.push((n("ln2_b"), ParamKind::Norm, l.ln2_b.as_slice_mut().unwrap()));
        }
        out.push(("ln_f_g".into(), ParamKind::Norm, self.ln_f_g.as_slice_mut().unwrap()));
        out.push(("ln_f_b".into(), ParamKind::Norm, self.ln_f_b.as_slice_mut().unwrap()));
        out.push(("w_cls".into(), ParamKind::Matrix, self.w_cls.as_slice_mut().unwrap()));
        out.push(("b_cls".into(), ParamKind::Bias, self.b_cls.as_slice_mut().unwrap()));
        let t = &mut self.tables;
        let pad_bins = t.e_loc_x.nrows() - 1;
        out.push(("e_cls".into(), ParamKind::Bias, t.e_cls.as_slice_mut().unwrap()));
        out.push((
            "e_c_idx".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_c_idx.as_slice_mut().unwrap(),
        ));
        out.push((
            "e_p_idx".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_p_idx.as_slice_mut().unwrap(),
        ));
        out.push((
            "e_loc_x".into(),
            ParamKind::Embedding { pad_row: Some(pad_bins), dim },
            t.e_loc_x.as_slice_mut().unwrap(),
        ));
        out.push((
            "e_loc_y".into(),
            ParamKind::Embedding { pad_row: Some(pad_bins), dim },
            t.e_loc_y.as_slice_mut().unwrap(),
        ));
        out.push((
            "e_flag".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_flag.as_slice_mut().unwrap(),
        ));
        out.push((
            "e_idx".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_idx.as_slice_mut().unwrap(),
        ));
        out.push((
            "e_cmd".into(),
            ParamKind::Embedding { pad_row: None, dim },
            t.e_cmd.as_slice_mut().unwrap(),
        ));
        for (s, table) in t.e_arg.iter_mut().enumerate() {
            out.push((
                format!("e_arg{s}"),
                ParamKind::Embedding { pad_row: Some(pad_bins), dim },
                table.as_slice_mut().unwrap(),
            ));
        }
        out
    }
}

/// Versioned checkpoint: config, parameters, optimizer state and step
/// counter, JSON-serialized (f64 round-trips exactly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub mode: Mode,
    pub config: EncoderConfig,
    pub quantizer: QuantizerConfig,
    pub limits: TokenizerLimits,
    pub params: ModelParams,
    pub optimizer: Option<OptimizerState>,
    pub step: u64,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        let file = std::fs::File::create(path)
            .map_err(|e| ModelError::Checkpoint(format!("create {}: {e}", path.display())))?;
        let writer = std::io::BufWriter::new(file);
        serde_json::to_writer(writer, self)
            .map_err(|e| ModelError::Checkpoint(format!("serialize: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError> {
        let file = std::fs::File::open(path)
            .map_err(|e| ModelError::Checkpoint(format!("open {}: {e}", path.display())))?;
        let reader = std::io::BufReader::new(file);
        let ckpt: Checkpoint = serde_json::from_reader(reader)
            .map_err(|e| ModelError::Checkpoint(format!("parse: {e}")))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn flat_view_orders_agree() {
        let cfg = EncoderConfig::with_classes(3);
        let quant = QuantizerConfig::new(1000.0);
        let limits = TokenizerLimits::default();
        let mut p = ModelParams::zeros(&cfg, &quant, &limits);
        let names: Vec<String> = p.flat_views().into_iter().map(|(n, _, _)| n).collect();
        let names_mut: Vec<String> = p.flat_views_mut().into_iter().map(|(n, _, _)| n).collect();
        assert_eq!(names, names_mut);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let cfg = EncoderConfig {
            dim: 8,
            heads: 2,
            layers: 1,
            ffn_dim: 16,
            classes: 2,
            dropout: 0.0,
            seed: 1,
        };
        let quant = QuantizerConfig::new(1000.0);
        let limits = TokenizerLimits {
            max_contours: 4,
            max_points: 8,
            max_cmds: 8,
            max_len_points: 16,
            max_len_commands: 16,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            mode: Mode::Point,
            config: cfg,
            quantizer: quant,
            limits,
            params,
            optimizer: None,
            step: 17,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.step, 17);
        assert_eq!(loaded.params, ckpt.params);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EncoderConfig::with_classes(2);
        cfg.dim = 10;
        cfg.heads = 4;
        assert!(cfg.validate().is_err());
        assert!(EncoderConfig::with_classes(1).validate().is_err());
        assert!(EncoderConfig::with_classes(16).validate().is_ok());
    }
}
