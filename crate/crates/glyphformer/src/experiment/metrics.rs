//! Classification metrics computed from a confusion matrix.

use serde::{Deserialize, Serialize};

/// Evaluation summary for one split: mean cross-entropy, accuracy, macro and
/// support-weighted F1, and the K x K confusion matrix (rows = true class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub loss: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub confusion: Vec<Vec<usize>>,
    /// Classes whose F1 denominator was zero (never true, never predicted);
    /// they contribute F1 = 0 and are excluded from the macro mean.
    pub undefined_f1_classes: Vec<usize>,
}

/// Per-class F1 from a confusion matrix. Returns (f1, defined) per class;
/// a class absent from both truth and predictions has 2tp+fp+fn = 0, gets
/// F1 = 0 and defined = false.
pub fn per_class_f1(confusion: &[Vec<usize>]) -> Vec<(f64, bool)> {
    let k = confusion.len();
    (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let fn_: usize = confusion[c].iter().sum::<usize>() - tp;
            let fp: usize = (0..k).map(|r| confusion[r][c]).sum::<usize>() - tp;
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                (0.0, false)
            } else {
                (2.0 * tp as f64 / denom as f64, true)
            }
        })
        .collect()
}

impl MetricsReport {
    /// Build the report from aligned truth/prediction vectors and a
    /// precomputed mean loss.
    pub fn from_predictions(truth: &[usize], preds: &[usize], classes: usize, loss: f64) -> Self {
        assert_eq!(truth.len(), preds.len());
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(preds) {
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion, loss)
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>, loss: f64) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = confusion.iter().enumerate().map(|(i, row)| row[i]).sum();
        let accuracy = if total == 0 {
            0.0
        } else {
            trace as f64 / total as f64
        };

        let f1s = per_class_f1(&confusion);
        let undefined: Vec<usize> = f1s
            .iter()
            .enumerate()
            .filter(|(_, (_, def))| !def)
            .map(|(c, _)| c)
            .collect();
        if !undefined.is_empty() {
            log::warn!(
                "classes {:?} absent from truth and predictions; F1 treated as 0",
                undefined
            );
        }
        let present = f1s.iter().filter(|(_, def)| *def).count();
        let macro_f1 = if present == 0 {
            0.0
        } else {
            f1s.iter().filter(|(_, def)| *def).map(|(f, _)| f).sum::<f64>() / present as f64
        };
        let weighted_f1 = if total == 0 {
            0.0
        } else {
            f1s.iter()
                .enumerate()
                .map(|(c, (f, _))| {
                    let support: usize = confusion[c].iter().sum();
                    f * support as f64 / total as f64
                })
                .sum()
        };
        MetricsReport {
            loss,
            accuracy,
            macro_f1,
            weighted_f1,
            confusion,
            undefined_f1_classes: undefined,
        }
    }

    pub const CSV_HEADER: &'static str = "outline,loss,acc,macro_f1,w_f1";

    /// One CSV row under [`CSV_HEADER`](Self::CSV_HEADER), labeled with the
    /// outline representation name.
    pub fn csv_row(&self, outline: &str) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            outline, self.loss, self.accuracy, self.macro_f1, self.weighted_f1
        )
    }
}
