//! Quantized token sequences for both outline forms, plus the embedding
//! tables and lookups that turn them into model input.
//!
//! Point mode carries one token per outline point (contour index, point
//! index, quantized location, on/off flag). Command mode carries one token
//! per drawing command (command index, command type, six quantized argument
//! slots). Each token's embedding is the sum of its component lookups, and a
//! learned CLS vector is prepended.

use ndarray::{Array1, Array2, Array3, s};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::font::GlyphOutline;
use crate::outline::{CommandKind, CommandPath, PAD_SENTINEL};

#[derive(Debug, Error)]
pub enum TokenError {
    #[error("non-finite coordinate {0}")]
    NonFiniteCoordinate(f64),
    #[error("sequence of {len} tokens exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Point,
    Command,
}

/// Coordinate quantization settings. `pad_index` is the reserved embedding
/// row for the -1 padding sentinel and always equals `bins`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub bins: usize,
    pub units_per_em: f64,
}

impl QuantizerConfig {
    pub fn new(units_per_em: f64) -> Self {
        QuantizerConfig {
            bins: 256,
            units_per_em,
        }
    }

    pub fn pad_index(&self) -> usize {
        self.bins
    }
}

/// Size caps for the index embedding tables and token sequences. Index
/// overflow clamps to the table's last row; overlong sequences are rejected
/// so the caller can skip the glyph.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TokenizerLimits {
    pub max_contours: usize,
    pub max_points: usize,
    pub max_cmds: usize,
    pub max_len_points: usize,
    pub max_len_commands: usize,
}

impl Default for TokenizerLimits {
    fn default() -> Self {
        TokenizerLimits {
            max_contours: 64,
            max_points: 512,
            max_cmds: 512,
            max_len_points: 1024,
            max_len_commands: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointToken {
    pub contour_index: usize,
    pub point_index: usize,
    pub x_bin: usize,
    pub y_bin: usize,
    pub on_curve: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandToken {
    pub command_index: usize,
    pub kind: CommandKind,
    pub arg_bins: [usize; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "tokens", rename_all = "lowercase")]
pub enum Tokens {
    Point(Vec<PointToken>),
    Command(Vec<CommandToken>),
}

impl Tokens {
    pub fn len(&self) -> usize {
        match self {
            Tokens::Point(t) => t.len(),
            Tokens::Command(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> Mode {
        match self {
            Tokens::Point(_) => Mode::Point,
            Tokens::Command(_) => Mode::Command,
        }
    }
}

/// A tokenized glyph with its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    #[serde(flatten)]
    pub tokens: Tokens,
    pub label: usize,
}

/// One line of the line-delimited JSON dataset dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(flatten)]
    pub tokens: Tokens,
    pub label: usize,
    pub font: String,
    pub codepoint: u32,
}

/// Quantize a coordinate in font units to a bin index. The normalized value
/// coord / units_per_em is clamped to [0, 1); the exact sentinel -1 maps to
/// the reserved pad row.
pub fn quantize(coord: f64, cfg: &QuantizerConfig) -> Result<usize, TokenError> {
    if !coord.is_finite() {
        return Err(TokenError::NonFiniteCoordinate(coord));
    }
    if coord == PAD_SENTINEL {
        return Ok(cfg.pad_index());
    }
    let t = (coord / cfg.units_per_em).clamp(0.0, 1.0);
    let bin = (t * cfg.bins as f64).floor() as usize;
    Ok(bin.min(cfg.bins - 1))
}

/// Tokenize a point-form outline: one token per point, indices 0-based and
/// restarting per contour.
pub fn encode_points(
    outline: &GlyphOutline,
    cfg: &QuantizerConfig,
    limits: &TokenizerLimits,
    label: usize,
) -> Result<TokenSequence, TokenError> {
    let n = outline.num_points();
    if n > limits.max_len_points {
        return Err(TokenError::SequenceTooLong {
            len: n,
            max_len: limits.max_len_points,
        });
    }
    let mut tokens = Vec::with_capacity(n);
    for (i, contour) in outline.contours.iter().enumerate() {
        for (j, p) in contour.iter().enumerate() {
            tokens.push(PointToken {
                contour_index: i,
                point_index: j,
                x_bin: quantize(p.x, cfg)?,
                y_bin: quantize(p.y, cfg)?,
                on_curve: p.on_curve,
            });
        }
    }
    Ok(TokenSequence {
        tokens: Tokens::Point(tokens),
        label,
    })
}

/// Tokenize a command path: one token per command. Slots a command kind does
/// not use get the pad row regardless of the stored sentinel.
pub fn encode_commands(
    path: &CommandPath,
    cfg: &QuantizerConfig,
    limits: &TokenizerLimits,
    label: usize,
) -> Result<TokenSequence, TokenError> {
    let n = path.commands.len();
    if n > limits.max_len_commands {
        return Err(TokenError::SequenceTooLong {
            len: n,
            max_len: limits.max_len_commands,
        });
    }
    let mut tokens = Vec::with_capacity(n);
    for cmd in &path.commands {
        let used = cmd.kind.used_slots();
        let mut arg_bins = [cfg.pad_index(); 6];
        for (slot, &u) in used.iter().enumerate() {
            if u {
                arg_bins[slot] = quantize(cmd.args[slot], cfg)?;
            }
        }
        tokens.push(CommandToken {
            command_index: cmd.index,
            kind: cmd.kind,
            arg_bins,
        });
    }
    Ok(TokenSequence {
        tokens: Tokens::Command(tokens),
        label,
    })
}

/// All learnable embedding tables. Every table shares the embedding width D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTables {
    pub e_cls: Array1<f64>,
    // point mode
    pub e_c_idx: Array2<f64>,
    pub e_p_idx: Array2<f64>,
    pub e_loc_x: Array2<f64>,
    pub e_loc_y: Array2<f64>,
    pub e_flag: Array2<f64>,
    // command mode
    pub e_idx: Array2<f64>,
    pub e_cmd: Array2<f64>,
    pub e_arg: Vec<Array2<f64>>, // six tables
}

impl EmbeddingTables {
    pub fn zeros(dim: usize, bins: usize, limits: &TokenizerLimits) -> Self {
        EmbeddingTables {
            e_cls: Array1::zeros(dim),
            e_c_idx: Array2::zeros((limits.max_contours + 1, dim)),
            e_p_idx: Array2::zeros((limits.max_points + 1, dim)),
            e_loc_x: Array2::zeros((bins + 1, dim)),
            e_loc_y: Array2::zeros((bins + 1, dim)),
            e_flag: Array2::zeros((2, dim)),
            e_idx: Array2::zeros((limits.max_cmds + 1, dim)),
            e_cmd: Array2::zeros((CommandKind::COUNT, dim)),
            e_arg: (0..6).map(|_| Array2::zeros((bins + 1, dim))).collect(),
        }
    }

    pub fn init<R: Rng>(dim: usize, bins: usize, limits: &TokenizerLimits, rng: &mut R, std: f64) -> Self {
        let mut t = Self::zeros(dim, bins, limits);
        for table in t.tables_mut() {
            for v in table.iter_mut() {
                *v = crate::model::trunc_normal(rng, std);
            }
        }
        t
    }

    fn tables_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v = vec![
            &mut self.e_c_idx,
            &mut self.e_p_idx,
            &mut self.e_loc_x,
            &mut self.e_loc_y,
            &mut self.e_flag,
            &mut self.e_idx,
            &mut self.e_cmd,
        ];
        v.extend(self.e_arg.iter_mut());
        v
    }

    pub fn dim(&self) -> usize {
        self.e_cls.len()
    }
}

fn clamp_row(idx: usize, rows: usize) -> usize {
    if idx >= rows {
        log::warn!("index {idx} clamped to embedding table row {}", rows - 1);
        rows - 1
    } else {
        idx
    }
}

/// Embed a token sequence: row 0 is the CLS vector, row t+1 the sum of token
/// t's component lookups.
pub fn embed(seq: &TokenSequence, tables: &EmbeddingTables) -> Array2<f64> {
    let dim = tables.dim();
    let mut out = Array2::zeros((seq.tokens.len() + 1, dim));
    out.row_mut(0).assign(&tables.e_cls);
    match &seq.tokens {
        Tokens::Point(tokens) => {
            for (t, tok) in tokens.iter().enumerate() {
                let i = clamp_row(tok.contour_index, tables.e_c_idx.nrows());
                let j = clamp_row(tok.point_index, tables.e_p_idx.nrows());
                let mut row = out.row_mut(t + 1);
                row += &tables.e_c_idx.row(i);
                row += &tables.e_p_idx.row(j);
                row += &tables.e_loc_x.row(tok.x_bin);
                row += &tables.e_loc_y.row(tok.y_bin);
                row += &tables.e_flag.row(tok.on_curve as usize);
            }
        }
        Tokens::Command(tokens) => {
            for (t, tok) in tokens.iter().enumerate() {
                let i = clamp_row(tok.command_index, tables.e_idx.nrows());
                let mut row = out.row_mut(t + 1);
                row += &tables.e_idx.row(i);
                row += &tables.e_cmd.row(tok.kind.id());
                for (slot, table) in tables.e_arg.iter().enumerate() {
                    row += &table.row(tok.arg_bins[slot]);
                }
            }
        }
    }
    out
}

/// Right-pad a batch of sequences to the batch maximum and embed. The mask
/// is true exactly on the CLS position and real tokens.
pub fn assemble_batch(
    seqs: &[TokenSequence],
    tables: &EmbeddingTables,
) -> (Array3<f64>, Array2<bool>, Vec<usize>) {
    assert!(!seqs.is_empty());
    let dim = tables.dim();
    let t_max = seqs.iter().map(|s| s.tokens.len()).max().unwrap() + 1;
    let b = seqs.len();
    let mut x = Array3::zeros((b, t_max, dim));
    let mut mask = Array2::from_elem((b, t_max), false);
    let mut labels = Vec::with_capacity(b);
    for (bi, seq) in seqs.iter().enumerate() {
        let e = embed(seq, tables);
        let t = e.nrows();
        x.slice_mut(s![bi, ..t, ..]).assign(&e);
        for ti in 0..t {
            mask[(bi, ti)] = true;
        }
        labels.push(seq.label);
    }
    (x, mask, labels)
}
