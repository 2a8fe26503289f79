use std::fmt::Write as _;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::labels_for;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::nn::{Checkpoint, Network, SeqBatch};
use crate::sensor::Task;

/// Rows per inference batch.
const PREDICT_BATCH: usize = 256;

/// Precision/recall from a confusion matrix (rows = truth, columns =
/// prediction).
///
/// Macro precision and recall are unweighted class means; macro F1 is their
/// harmonic mean. A class never predicted has precision 0, a class with no
/// support has recall 0, and F1 is 0 when both macro means are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Vec<u64>>, class_names: Vec<String>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || class_names.len() != k || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::ShapeMismatch(format!(
                "confusion must be {0}×{0} for {0} class names",
                class_names.len()
            )));
        }
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let mut precision = Vec::with_capacity(k);
        let mut recall = Vec::with_capacity(k);
        for c in 0..k {
            let tp = confusion[c][c];
            let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
            let support: u64 = confusion[c].iter().sum();
            precision.push(ratio(tp, predicted));
            recall.push(ratio(tp, support));
        }
        let macro_precision = precision.iter().sum::<f64>() / k as f64;
        let macro_recall = recall.iter().sum::<f64>() / k as f64;
        let macro_f1 = if macro_precision + macro_recall == 0.0 {
            0.0
        } else {
            2.0 * macro_precision * macro_recall / (macro_precision + macro_recall)
        };
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
        Ok(Self {
            class_names,
            accuracy: ratio(correct, total),
            confusion,
            per_class_precision: precision,
            per_class_recall: recall,
            macro_precision,
            macro_recall,
            macro_f1,
        })
    }

    pub fn from_predictions(
        truth: &[usize],
        predicted: &[usize],
        class_names: Vec<String>,
    ) -> Result<Self> {
        let k = class_names.len();
        if truth.len() != predicted.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::ShapeMismatch(format!(
                    "class index {} out of range for {k} classes",
                    t.max(p)
                )));
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion, class_names)
    }

    pub fn for_task(task: Task, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        let names = (0..task.n_classes())
            .map(|c| task.class_name(c).to_string())
            .collect();
        Self::from_predictions(truth, predicted, names)
    }

    pub fn support(&self) -> Vec<u64> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$} {:>9} {:>9} {:>8}",
            "class", "precision", "recall", "support"
        );
        for (c, name) in self.class_names.iter().enumerate() {
            let _ = writeln!(
                s,
                "{name:<width$} {:>9.4} {:>9.4} {:>8}",
                self.per_class_precision[c],
                self.per_class_recall[c],
                self.confusion[c].iter().sum::<u64>()
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "macro precision {:.4}", self.macro_precision);
        let _ = writeln!(s, "macro recall    {:.4}", self.macro_recall);
        let _ = writeln!(s, "macro F1        {:.4}", self.macro_f1);
        let _ = writeln!(s, "accuracy        {:.4}", self.accuracy);
        let _ = writeln!(s);
        let _ = writeln!(s, "confusion (rows = truth, columns = prediction)");
        for (c, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>6}")).collect();
            let _ = writeln!(s, "{:<width$} {}", self.class_names[c], cells.join(""));
        }
        s
    }
}

pub fn argmax_rows(probs: ArrayView2<'_, f32>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|r| {
            // first maximum wins, so ties resolve to the lower class
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Class probabilities for already scaled sequences; row `i` belongs to
/// `seqs[i]`.
pub fn predict_proba(net: &Network<f32>, seqs: &[FeatureSequence]) -> Result<Array2<f32>> {
    let Some(first) = seqs.first() else {
        return Ok(Array2::zeros((0, net.n_classes())));
    };
    let (steps, dim) = (first.steps, first.dim);
    if dim != net.input_dim() || seqs.iter().any(|s| s.steps != steps || s.dim != dim) {
        return Err(Error::ShapeMismatch(format!(
            "network expects {} features per step, got sequences of {dim}",
            net.input_dim()
        )));
    }
    let parts = seqs
        .par_chunks(PREDICT_BATCH)
        .map(|chunk| {
            let x = SeqBatch::from_samples(chunk.iter().map(|s| s.values.as_slice()), steps, dim)?;
            net.predict(&x)
        })
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("equal widths"))
}

/// Scores already scaled sequences against their labels for `task`.
pub fn evaluate(net: &Network<f32>, seqs: &[FeatureSequence], task: Task) -> Result<EvalReport> {
    let truth = labels_for(seqs, task)?;
    let predicted = argmax_rows(predict_proba(net, seqs)?.view());
    EvalReport::for_task(task, &truth, &predicted)
}

impl Checkpoint {
    /// Class probabilities for raw (unscaled) sequences.
    pub fn predict_proba(&self, seqs: &[FeatureSequence]) -> Result<Array2<f32>> {
        let scaled = seqs
            .iter()
            .map(|s| self.scaler.apply(s))
            .collect::<Result<Vec<_>>>()?;
        predict_proba(&self.network, &scaled)
    }

    pub fn evaluate(&self, seqs: &[FeatureSequence]) -> Result<EvalReport> {
        let truth = labels_for(seqs, self.meta.task)?;
        let predicted = argmax_rows(self.predict_proba(seqs)?.view());
        EvalReport::for_task(self.meta.task, &truth, &predicted)
    }
}
