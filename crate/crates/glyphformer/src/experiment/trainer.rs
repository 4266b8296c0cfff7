//! Training loop, evaluation, and the four-format comparison protocol.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{
    adamw_step, loss_and_grads, loss_only, lr_at, predict, Checkpoint, EncoderConfig, ModelParams,
    OptimizerHyper, OptimizerState, CHECKPOINT_VERSION,
};
use crate::outline::Representation;
use crate::token::{QuantizerConfig, TokenSequence};

use super::dataset::{compute_splits, realize, Dataset, Manifest, SplitPlan};
use super::metrics::MetricsReport;
use super::ExperimentError;

/// Named training scale. "paper" matches the reference protocol; "desk" is a
/// CPU-sized variant with a per-font glyph cap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainProfile {
    pub epochs: usize,
    pub batch_size: usize,
    pub glyph_cap: Option<usize>,
    pub hyper: OptimizerHyper,
}

impl TrainProfile {
    pub fn paper() -> Self {
        TrainProfile {
            epochs: 512,
            batch_size: 1024,
            glyph_cap: None,
            hyper: OptimizerHyper::default(),
        }
    }

    pub fn desk() -> Self {
        TrainProfile {
            epochs: 64,
            batch_size: 256,
            glyph_cap: Some(500),
            hyper: OptimizerHyper::default(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }
}

/// One line of the training log (line-delimited JSON on disk).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub labels: Vec<String>,
}

fn make_checkpoint(
    params: &ModelParams,
    optimizer: &OptimizerState,
    cfg: &EncoderConfig,
    quant: QuantizerConfig,
    dataset: &Dataset,
) -> Checkpoint {
    Checkpoint {
        version: CHECKPOINT_VERSION,
        mode: dataset.mode,
        config: *cfg,
        quantizer: quant,
        limits: dataset.limits,
        params: params.clone(),
        optimizer: Some(optimizer.clone()),
        step: optimizer.step,
    }
}

/// Mean loss over a split, evaluated in fixed-size batches with a sequential
/// final reduction (deterministic regardless of thread count).
fn split_loss(
    seqs: &[TokenSequence],
    params: &ModelParams,
    cfg: &EncoderConfig,
    batch_size: usize,
) -> Result<f64, ExperimentError> {
    if seqs.is_empty() {
        return Ok(0.0);
    }
    let partial: Vec<(f64, usize)> = seqs
        .par_chunks(batch_size)
        .map(|chunk| loss_only(chunk, params, cfg).map(|l| (l, chunk.len())))
        .collect::<Result<_, _>>()?;
    let total: f64 = partial.iter().map(|(l, n)| l * *n as f64).sum();
    Ok(total / seqs.len() as f64)
}

/// Train on an already-built dataset. Seeded shuffling each epoch; logs train
/// and validation loss; keeps the best-validation checkpoint alongside the
/// final one. A non-finite loss aborts with the last good checkpoint.
pub fn train_dataset(
    dataset: &Dataset,
    cfg: &EncoderConfig,
    profile: &TrainProfile,
    seed: u64,
) -> Result<TrainOutcome, ExperimentError> {
    cfg.validate()?;
    if dataset.train.is_empty() {
        return Err(ExperimentError::Manifest("empty training split".into()));
    }
    // units_per_em varies per font and is applied at encode time; the
    // checkpoint quantizer only pins the bin count.
    let quant = QuantizerConfig {
        bins: dataset.bins,
        units_per_em: 1.0,
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::init(cfg, &quant, &dataset.limits, &mut init_rng);
    let mut optimizer = OptimizerState::new(&params, profile.hyper);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));

    let mut best = make_checkpoint(&params, &optimizer, cfg, quant, dataset);
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;
    let mut log = Vec::with_capacity(profile.epochs);
    let mut indices: Vec<usize> = (0..dataset.train.len()).collect();

    for epoch in 1..=profile.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in indices.chunks(profile.batch_size) {
            let batch: Vec<TokenSequence> = chunk
                .iter()
                .map(|&i| dataset.train[i].clone())
                .collect();
            let rng = if cfg.dropout > 0.0 {
                Some(&mut dropout_rng)
            } else {
                None
            };
            let out = loss_and_grads(&batch, &params, cfg, &quant, &dataset.limits, rng)?;
            if !out.loss.is_finite() {
                return Err(ExperimentError::Divergence {
                    epoch,
                    last_good: Box::new(best),
                });
            }
            adamw_step(&mut params, &out.grads, &mut optimizer);
            loss_sum += out.loss * batch.len() as f64;
        }
        let train_loss = loss_sum / dataset.train.len() as f64;
        let val_loss = split_loss(&dataset.val, &params, cfg, profile.batch_size)?;
        if !val_loss.is_finite() {
            return Err(ExperimentError::Divergence {
                epoch,
                last_good: Box::new(best),
            });
        }
        let lr = lr_at(optimizer.step.max(1), &profile.hyper);
        log.push(EpochLog {
            epoch,
            lr,
            train_loss,
            val_loss,
        });
        log::info!("epoch {epoch}: lr {lr:.3e} train {train_loss:.4} val {val_loss:.4}");
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best = make_checkpoint(&params, &optimizer, cfg, quant, dataset);
        }
    }

    let last = make_checkpoint(&params, &optimizer, cfg, quant, dataset);
    Ok(TrainOutcome {
        best,
        last,
        best_epoch,
        log,
        labels: dataset.labels.clone(),
    })
}

/// Manifest-level training entry point: build the dataset for the manifest's
/// representation and train under the profile.
pub fn train(
    manifest: &Manifest,
    profile: &TrainProfile,
) -> Result<(SplitPlan, Dataset, TrainOutcome), ExperimentError> {
    let plan = compute_splits(manifest, profile.glyph_cap)?;
    let dataset = realize(manifest, &plan, manifest.representation)?;
    let cfg = manifest
        .model
        .encoder_config(plan.labels.len(), manifest.seed);
    let outcome = train_dataset(&dataset, &cfg, profile, manifest.seed)?;
    Ok((plan, dataset, outcome))
}

/// Deterministic full-split evaluation of a checkpoint.
pub fn evaluate(
    ckpt: &Checkpoint,
    split: &[TokenSequence],
) -> Result<MetricsReport, ExperimentError> {
    if split.is_empty() {
        return Err(ExperimentError::ConfigMismatch("empty split".into()));
    }
    let mode = split[0].tokens.mode();
    if mode != ckpt.mode {
        return Err(ExperimentError::ConfigMismatch(format!(
            "checkpoint encodes {:?} tokens but the split holds {:?} tokens",
            ckpt.mode, mode
        )));
    }
    if let Some(&bad) = split
        .iter()
        .map(|s| &s.label)
        .find(|&&l| l >= ckpt.config.classes)
    {
        return Err(ExperimentError::ConfigMismatch(format!(
            "label {bad} out of range for {} classes",
            ckpt.config.classes
        )));
    }

    const EVAL_BATCH: usize = 256;
    let partial: Vec<(f64, Vec<usize>, usize)> = split
        .par_chunks(EVAL_BATCH)
        .map(|chunk| predict(chunk, &ckpt.params, &ckpt.config))
        .collect::<Result<_, _>>()?;
    let mut loss_sum = 0.0;
    let mut preds = Vec::with_capacity(split.len());
    for (chunk, (loss, p, _)) in split.chunks(EVAL_BATCH).zip(partial) {
        loss_sum += loss * chunk.len() as f64;
        preds.extend(p);
    }
    let truth: Vec<usize> = split.iter().map(|s| s.label).collect();
    Ok(MetricsReport::from_predictions(
        &truth,
        &preds,
        ckpt.config.classes,
        loss_sum / split.len() as f64,
    ))
}

/// Test metrics for one representation, reported for both the
/// best-validation and the final checkpoint.
#[derive(Debug, Serialize, Deserialize)]
pub struct FormatOutcome {
    pub representation: Representation,
    pub best_epoch: usize,
    pub best_test: MetricsReport,
    pub final_test: MetricsReport,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub labels: Vec<String>,
    pub rows: Vec<FormatOutcome>,
}

impl ComparisonReport {
    /// Four-row metrics table (best-validation checkpoint), one row per
    /// outline representation.
    pub fn csv(&self) -> String {
        let mut out = String::from(MetricsReport::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.best_test.csv_row(row.representation.name()));
            out.push('\n');
        }
        out
    }
}

/// Run the identical train/eval protocol for all four representations with
/// shared split membership, returning per-format test metrics and loss
/// curves.
pub fn compare_formats(
    manifest: &Manifest,
    profile: &TrainProfile,
) -> Result<ComparisonReport, ExperimentError> {
    let plan = compute_splits(manifest, profile.glyph_cap)?;
    let cfg = manifest
        .model
        .encoder_config(plan.labels.len(), manifest.seed);
    let mut rows = Vec::with_capacity(4);
    for rep in Representation::ALL {
        log::info!("training representation {}", rep.name());
        let dataset = realize(manifest, &plan, rep)?;
        let outcome = train_dataset(&dataset, &cfg, profile, manifest.seed)?;
        let best_test = evaluate(&outcome.best, &dataset.test)?;
        let final_test = evaluate(&outcome.last, &dataset.test)?;
        rows.push(FormatOutcome {
            representation: rep,
            best_epoch: outcome.best_epoch,
            best_test,
            final_test,
            log: outcome.log,
        });
    }
    Ok(ComparisonReport {
        labels: plan.labels,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::{Mode, PointToken, Tokens, TokenizerLimits};

    // two linearly separable synthetic classes in point-token space
    fn toy_dataset(n_per_class: usize) -> Dataset {
        let limits = TokenizerLimits {
            max_contours: 4,
            max_points: 16,
            max_cmds: 16,
            max_len_points: 32,
            max_len_commands: 32,
        };
        let mut seqs = Vec::new();
        for label in 0..2usize {
            for i in 0..n_per_class {
                let base = if label == 0 { 20 } else { 200 };
                let tokens: Vec<PointToken> = (0..4)
                    .map(|j| PointToken {
                        contour_index: 0,
                        point_index: j,
                        x_bin: base + (i + j) % 8,
                        y_bin: base + (i * 3 + j) % 8,
                        on_curve: j % 2 == 0,
                    })
                    .collect();
                seqs.push(TokenSequence {
                    tokens: Tokens::Point(tokens),
                    label,
                });
            }
        }
        let train = seqs.clone();
        Dataset {
            train,
            val: seqs.clone(),
            test: seqs,
            labels: vec!["a".into(), "b".into()],
            mode: Mode::Point,
            bins: 256,
            limits,
        }
    }

    fn tiny_cfg() -> EncoderConfig {
        EncoderConfig {
            dim: 16,
            heads: 2,
            layers: 1,
            ffn_dim: 32,
            classes: 2,
            dropout: 0.0,
            seed: 3,
        }
    }

    #[test]
    fn log_is_structural() {
        let ds = toy_dataset(4);
        let profile = TrainProfile {
            epochs: 3,
            batch_size: 8,
            glyph_cap: None,
            hyper: OptimizerHyper::default(),
        };
        let out = train_dataset(&ds, &tiny_cfg(), &profile, 11).unwrap();
        assert_eq!(out.log.len(), 3);
        for (i, e) in out.log.iter().enumerate() {
            assert_eq!(e.epoch, i + 1);
            assert!(e.lr > 0.0);
            assert!(e.train_loss.is_finite());
            assert!(e.val_loss.is_finite());
        }
    }

    #[test]
    fn zero_epochs_yields_initial_model() {
        let ds = toy_dataset(4);
        let profile = TrainProfile {
            epochs: 0,
            batch_size: 8,
            glyph_cap: None,
            hyper: OptimizerHyper::default(),
        };
        let out = train_dataset(&ds, &tiny_cfg(), &profile, 11).unwrap();
        assert!(out.log.is_empty());
        let report = evaluate(&out.last, &ds.test).unwrap();
        assert!((report.loss - (2.0f64).ln()).abs() < 0.05);
    }

    #[test]
    fn toy_overfit_reaches_full_accuracy() {
        let ds = toy_dataset(8);
        let profile = TrainProfile {
            epochs: 60,
            batch_size: 16,
            glyph_cap: None,
            hyper: OptimizerHyper {
                base_lr: 1e-3,
                warmup: 20,
                ..OptimizerHyper::default()
            },
        };
        let out = train_dataset(&ds, &tiny_cfg(), &profile, 11).unwrap();
        let report = evaluate(&out.last, &ds.train).unwrap();
        assert_eq!(report.accuracy, 1.0, "train loss log: {:?}", out.log.last());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_dataset(4);
        let profile = TrainProfile {
            epochs: 4,
            batch_size: 8,
            glyph_cap: None,
            hyper: OptimizerHyper::default(),
        };
        let a = train_dataset(&ds, &tiny_cfg(), &profile, 5).unwrap();
        let b = train_dataset(&ds, &tiny_cfg(), &profile, 5).unwrap();
        assert_eq!(a.last.params, b.last.params);
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.val_loss.to_bits(), y.val_loss.to_bits());
        }
    }

    #[test]
    fn evaluation_is_pure() {
        let ds = toy_dataset(4);
        let profile = TrainProfile {
            epochs: 2,
            batch_size: 8,
            glyph_cap: None,
            hyper: OptimizerHyper::default(),
        };
        let out = train_dataset(&ds, &tiny_cfg(), &profile, 5).unwrap();
        let a = evaluate(&out.best, &ds.test).unwrap();
        let b = evaluate(&out.best, &ds.test).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mode_mismatch_rejected() {
        let ds = toy_dataset(4);
        let profile = TrainProfile {
            epochs: 0,
            batch_size: 8,
            glyph_cap: None,
            hyper: OptimizerHyper::default(),
        };
        let out = train_dataset(&ds, &tiny_cfg(), &profile, 5).unwrap();
        let cmd_split = vec![TokenSequence {
            tokens: Tokens::Command(vec![]),
            label: 0,
        }];
        assert!(matches!(
            evaluate(&out.last, &cmd_split),
            Err(ExperimentError::ConfigMismatch(_))
        ));
    }
}
