//! Manifest-driven dataset construction with per-font 80/10/10 splits.
//!
//! Split membership is decided once per font on the set of codepoints usable
//! in every representation, so the four formats train and test on identical
//! glyph partitions.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::font::{parse_font, FontFile};
use crate::outline::{convert, Converted, Representation};
use crate::token::{
    encode_commands, encode_points, DatasetRecord, Mode, QuantizerConfig, TokenSequence,
    TokenizerLimits,
};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Style,
    Weight,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
}

/// Optional architecture overrides carried by the manifest; unset fields keep
/// the reference defaults (D=64, H=4, L=3, FFN 128, dropout 0).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ModelOverrides {
    pub dim: Option<usize>,
    pub heads: Option<usize>,
    pub layers: Option<usize>,
    pub ffn_dim: Option<usize>,
    pub dropout: Option<f64>,
}

impl ModelOverrides {
    pub fn encoder_config(&self, classes: usize, seed: u64) -> crate::model::EncoderConfig {
        let mut cfg = crate::model::EncoderConfig::with_classes(classes);
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.heads {
            cfg.heads = v;
        }
        if let Some(v) = self.layers {
            cfg.layers = v;
        }
        if let Some(v) = self.ffn_dim {
            cfg.ffn_dim = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        cfg.seed = seed;
        cfg
    }
}

fn default_fractions() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

fn default_bins() -> usize {
    256
}

fn default_representation() -> Representation {
    Representation::PostScript
}

/// Experiment description: which fonts, which task, how to split and encode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub task: Task,
    pub entries: Vec<ManifestEntry>,
    pub seed: u64,
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    #[serde(default = "default_representation")]
    pub representation: Representation,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub model: ModelOverrides,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Manifest(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.entries.is_empty() {
            return Err(ExperimentError::Manifest("no entries".into()));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.fractions.iter().any(|&f| f < 0.0) {
            return Err(ExperimentError::Manifest(format!(
                "split fractions {:?} must be non-negative and sum to 1",
                self.fractions
            )));
        }
        if self.bins < 2 {
            return Err(ExperimentError::Manifest("bins must be >= 2".into()));
        }
        let mut labels: Vec<String> = Vec::new();
        for e in &self.entries {
            labels.push(self.effective_label(e)?);
        }
        labels.sort();
        labels.dedup();
        if labels.len() < 2 {
            return Err(ExperimentError::Manifest(
                "need at least 2 distinct labels".into(),
            ));
        }
        Ok(())
    }

    /// Class label text for an entry: the style label, or family-x-weight for
    /// the weight task.
    pub fn effective_label(&self, entry: &ManifestEntry) -> Result<String, ExperimentError> {
        match self.task {
            Task::Style => Ok(entry.label.clone()),
            Task::Weight => match &entry.weight {
                Some(w) => Ok(format!("{}-{}", entry.label, w)),
                None => Err(ExperimentError::Manifest(format!(
                    "weight task requires a weight tag for {}",
                    entry.path
                ))),
            },
        }
    }

    /// Sorted distinct class labels; position = class index.
    pub fn label_space(&self) -> Result<Vec<String>, ExperimentError> {
        let mut labels: Vec<String> = self
            .entries
            .iter()
            .map(|e| self.effective_label(e))
            .collect::<Result<_, _>>()?;
        labels.sort();
        labels.dedup();
        Ok(labels)
    }
}

/// Frozen split membership for one font: codepoints per split, in the
/// shuffled order they were assigned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FontPlan {
    pub path: String,
    pub label_index: usize,
    pub units_per_em: f64,
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
    pub skipped_empty: usize,
    pub skipped_overlong: usize,
}

/// Split membership for the whole manifest, shared across representations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPlan {
    pub labels: Vec<String>,
    pub fonts: Vec<FontPlan>,
}

fn load_font(path: &str) -> Result<FontFile, ExperimentError> {
    let bytes = std::fs::read(path).map_err(|e| ExperimentError::Manifest(format!(
        "cannot read font {path}: {e}"
    )))?;
    parse_font(&bytes).map_err(|source| ExperimentError::FontLoad {
        path: path.to_string(),
        source,
    })
}

/// A glyph is usable when it is non-empty and encodes within the limits in
/// every one of the four representations.
fn usable_in_all(
    font: &FontFile,
    glyph_id: u16,
    quant: &QuantizerConfig,
    limits: &TokenizerLimits,
) -> Result<bool, ExperimentError> {
    let outline = match font.glyph_outline(glyph_id) {
        Ok(o) => o,
        Err(_) => return Ok(false),
    };
    if outline.is_empty() {
        return Ok(false);
    }
    for rep in Representation::ALL {
        let converted = match convert(&outline, rep) {
            Ok(c) => c,
            Err(_) => return Ok(false),
        };
        let ok = match converted {
            Converted::Points(o) => encode_points(&o, quant, limits, 0).is_ok(),
            Converted::Commands(p) => encode_commands(&p, quant, limits, 0).is_ok(),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn font_seed(base: u64, entry_index: usize) -> u64 {
    base ^ (entry_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Decide split membership for every font in the manifest. Deterministic in
/// (manifest, glyph cap); parallel over fonts.
pub fn compute_splits(
    manifest: &Manifest,
    glyph_cap: Option<usize>,
) -> Result<SplitPlan, ExperimentError> {
    let labels = manifest.label_space()?;
    let fonts: Vec<FontPlan> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(idx, entry)| -> Result<FontPlan, ExperimentError> {
            let font = load_font(&entry.path)?;
            let quant = QuantizerConfig {
                bins: manifest.bins,
                units_per_em: font.units_per_em as f64,
            };
            let limits = TokenizerLimits::default();
            let label_text = manifest.effective_label(entry)?;
            let label_index = labels.binary_search(&label_text).unwrap();

            let mut usable: Vec<u32> = Vec::new();
            let mut skipped_empty = 0usize;
            let mut skipped_overlong = 0usize;
            for cp in font.list_codepoints().map_err(|source| {
                ExperimentError::FontLoad {
                    path: entry.path.clone(),
                    source,
                }
            })? {
                let Some(gid) = font.char_to_glyph(cp).ok().flatten() else {
                    continue;
                };
                match font.glyph_outline(gid) {
                    Ok(o) if o.is_empty() => skipped_empty += 1,
                    Ok(_) if usable_in_all(&font, gid, &quant, &limits)? => {
                        usable.push(cp as u32)
                    }
                    Ok(_) => skipped_overlong += 1,
                    Err(_) => skipped_overlong += 1,
                }
            }
            if usable.is_empty() {
                log::warn!("{}: no usable glyphs", entry.path);
            }

            let mut rng = ChaCha8Rng::seed_from_u64(font_seed(manifest.seed, idx));
            usable.shuffle(&mut rng);
            if let Some(cap) = glyph_cap {
                usable.truncate(cap);
            }
            let n = usable.len();
            let n_train = (n as f64 * manifest.fractions[0]).floor() as usize;
            let n_val = (n as f64 * manifest.fractions[1]).floor() as usize;
            let val_end = (n_train + n_val).min(n);
            Ok(FontPlan {
                path: entry.path.clone(),
                label_index,
                units_per_em: font.units_per_em as f64,
                train: usable[..n_train].to_vec(),
                val: usable[n_train..val_end].to_vec(),
                test: usable[val_end..].to_vec(),
                skipped_empty,
                skipped_overlong,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(SplitPlan { labels, fonts })
}

/// Encoded splits for one representation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<TokenSequence>,
    pub val: Vec<TokenSequence>,
    pub test: Vec<TokenSequence>,
    pub labels: Vec<String>,
    pub mode: Mode,
    pub bins: usize,
    pub limits: TokenizerLimits,
}

fn encode_one(
    font: &FontFile,
    cp: u32,
    rep: Representation,
    quant: &QuantizerConfig,
    limits: &TokenizerLimits,
    label: usize,
) -> Result<TokenSequence, ExperimentError> {
    let c = char::from_u32(cp)
        .ok_or_else(|| ExperimentError::Manifest(format!("invalid codepoint {cp}")))?;
    let gid = font
        .char_to_glyph(c)
        .ok()
        .flatten()
        .ok_or_else(|| ExperimentError::Manifest(format!("unmapped codepoint U+{cp:04X}")))?;
    let outline = font.glyph_outline(gid).map_err(|source| {
        ExperimentError::FontLoad {
            path: String::new(),
            source,
        }
    })?;
    let converted = convert(&outline, rep)
        .map_err(|e| ExperimentError::Manifest(format!("conversion failed: {e}")))?;
    let seq = match converted {
        Converted::Points(o) => encode_points(&o, quant, limits, label),
        Converted::Commands(p) => encode_commands(&p, quant, limits, label),
    }
    .map_err(|e| ExperimentError::Manifest(format!("encoding failed: {e}")))?;
    Ok(seq)
}

/// Encode a frozen split plan under one representation. Sequences keep plan
/// order (font order, then shuffled codepoint order within the font).
pub fn realize(
    manifest: &Manifest,
    plan: &SplitPlan,
    rep: Representation,
) -> Result<Dataset, ExperimentError> {
    let limits = TokenizerLimits::default();
    let per_font: Vec<[Vec<TokenSequence>; 3]> = plan
        .fonts
        .par_iter()
        .map(|fp| -> Result<[Vec<TokenSequence>; 3], ExperimentError> {
            let font = load_font(&fp.path)?;
            let quant = QuantizerConfig {
                bins: manifest.bins,
                units_per_em: fp.units_per_em,
            };
            let enc = |cps: &[u32]| -> Result<Vec<TokenSequence>, ExperimentError> {
                cps.iter()
                    .map(|&cp| encode_one(&font, cp, rep, &quant, &limits, fp.label_index))
                    .collect()
            };
            Ok([enc(&fp.train)?, enc(&fp.val)?, enc(&fp.test)?])
        })
        .collect::<Result<_, _>>()?;

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for [tr, va, te] in per_font {
        train.extend(tr);
        val.extend(va);
        test.extend(te);
    }

    let mut class_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &train {
        *class_counts.entry(s.label).or_default() += 1;
    }
    for (i, label) in plan.labels.iter().enumerate() {
        if class_counts.get(&i).copied().unwrap_or(0) == 0 {
            return Err(ExperimentError::EmptyClass(label.clone()));
        }
    }

    let mode = if rep.is_point_form() {
        Mode::Point
    } else {
        Mode::Command
    };
    Ok(Dataset {
        train,
        val,
        test,
        labels: plan.labels.clone(),
        mode,
        bins: manifest.bins,
        limits,
    })
}

/// One-shot dataset build for the manifest's own representation.
pub fn build_dataset(
    manifest: &Manifest,
    glyph_cap: Option<usize>,
) -> Result<(SplitPlan, Dataset), ExperimentError> {
    let plan = compute_splits(manifest, glyph_cap)?;
    let dataset = realize(manifest, &plan, manifest.representation)?;
    Ok((plan, dataset))
}

/// Token records for every glyph of one font that is usable under `rep`,
/// ordered by codepoint. Backs the line-delimited JSON dump.
pub fn font_records(
    path: &Path,
    rep: Representation,
    bins: usize,
) -> Result<Vec<DatasetRecord>, ExperimentError> {
    let font = load_font(&path.to_string_lossy())?;
    let quant = QuantizerConfig {
        bins,
        units_per_em: font.units_per_em as f64,
    };
    let limits = TokenizerLimits::default();
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut out = Vec::new();
    for cp in font.list_codepoints().map_err(|source| ExperimentError::FontLoad {
        path: path.display().to_string(),
        source,
    })? {
        let Some(gid) = font.char_to_glyph(cp).ok().flatten() else {
            continue;
        };
        let Ok(outline) = font.glyph_outline(gid) else {
            log::warn!("{name}: skipping malformed glyph for U+{:04X}", cp as u32);
            continue;
        };
        if outline.is_empty() {
            continue;
        }
        let Ok(converted) = convert(&outline, rep) else {
            log::warn!("{name}: skipping unconvertible glyph U+{:04X}", cp as u32);
            continue;
        };
        let seq = match converted {
            Converted::Points(o) => encode_points(&o, &quant, &limits, 0),
            Converted::Commands(p) => encode_commands(&p, &quant, &limits, 0),
        };
        match seq {
            Ok(s) => out.push(DatasetRecord {
                tokens: s.tokens,
                label: 0,
                font: name.clone(),
                codepoint: cp as u32,
            }),
            Err(e) => log::warn!("{name}: skipping U+{:04X}: {e}", cp as u32),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> String {
        format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn style_manifest() -> Manifest {
        Manifest {
            task: Task::Style,
            entries: vec![
                ManifestEntry {
                    path: fixture("style_angular.ttf"),
                    label: "angular".into(),
                    weight: None,
                },
                ManifestEntry {
                    path: fixture("style_rounded.ttf"),
                    label: "rounded".into(),
                    weight: None,
                },
            ],
            seed: 7,
            fractions: default_fractions(),
            representation: Representation::PostScript,
            bins: 256,
            model: ModelOverrides::default(),
        }
    }

    #[test]
    fn split_sizes_follow_fractions() {
        let plan = compute_splits(&style_manifest(), Some(100)).unwrap();
        for fp in &plan.fonts {
            let n = fp.train.len() + fp.val.len() + fp.test.len();
            assert_eq!(fp.train.len(), (n as f64 * 0.8).floor() as usize);
            assert_eq!(fp.val.len(), (n as f64 * 0.1).floor() as usize);
        }
    }

    #[test]
    fn splits_are_deterministic_and_disjoint() {
        let m = style_manifest();
        let a = compute_splits(&m, None).unwrap();
        let b = compute_splits(&m, None).unwrap();
        for (fa, fb) in a.fonts.iter().zip(&b.fonts) {
            assert_eq!(fa.train, fb.train);
            assert_eq!(fa.val, fb.val);
            assert_eq!(fa.test, fb.test);
            let mut all: Vec<u32> = fa
                .train
                .iter()
                .chain(&fa.val)
                .chain(&fa.test)
                .copied()
                .collect();
            let total = all.len();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), total, "splits overlap");
        }
    }

    #[test]
    fn glyph_cap_limits_per_font() {
        let plan = compute_splits(&style_manifest(), Some(50)).unwrap();
        for fp in &plan.fonts {
            assert!(fp.train.len() + fp.val.len() + fp.test.len() <= 50);
        }
    }

    #[test]
    fn realize_same_membership_across_formats() {
        let m = style_manifest();
        let plan = compute_splits(&m, Some(40)).unwrap();
        let sizes: Vec<(usize, usize, usize)> = Representation::ALL
            .iter()
            .map(|&rep| {
                let d = realize(&m, &plan, rep).unwrap();
                (d.train.len(), d.val.len(), d.test.len())
            })
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn weight_task_label_includes_weight() {
        let mut m = style_manifest();
        m.task = Task::Weight;
        m.entries[0].weight = Some("regular".into());
        m.entries[1].weight = Some("bold".into());
        let labels = m.label_space().unwrap();
        assert_eq!(labels, vec!["angular-regular", "rounded-bold"]);
    }

    #[test]
    fn weight_task_requires_tag() {
        let mut m = style_manifest();
        m.task = Task::Weight;
        assert!(m.validate().is_err());
    }

    #[test]
    fn single_label_rejected() {
        let mut m = style_manifest();
        m.entries[1].label = "angular".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn font_records_modes_match_representation() {
        let p = std::path::PathBuf::from(fixture("triangle.ttf"));
        let recs = font_records(&p, Representation::PostScript, 256).unwrap();
        assert!(!recs.is_empty());
        for r in &recs {
            assert_eq!(r.tokens.mode(), Mode::Command);
        }
        let recs = font_records(&p, Representation::OriginalTT, 256).unwrap();
        for r in &recs {
            assert_eq!(r.tokens.mode(), Mode::Point);
        }
    }
}
