use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{argmax_rows, EvalReport};
use super::train::{labels_for, train, History, TrainConfig};
use super::{stage_rng, Stage};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::nn::{Checkpoint, LrSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
}

/// Indices into the split set, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferSplit {
    pub variant: Variant,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl TransferSplit {
    pub fn select<T: Clone>(idx: &[usize], items: &[T]) -> Vec<T> {
        idx.iter().map(|&i| items[i].clone()).collect()
    }
}

/// Per class, the first `ceil(n/2)` samples in input order form part one and
/// the rest part two. Variant A trains on part one, variant B on part two, so
/// the two variants swap roles exactly.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    variant: Variant,
) -> Result<TransferSplit> {
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class
            .get_mut(c)
            .ok_or_else(|| {
                Error::ShapeMismatch(format!("label {c} out of range for {n_classes} classes"))
            })?
            .push(i);
    }
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
            });
        }
        let cut = members.len().div_ceil(2);
        first.extend_from_slice(&members[..cut]);
        second.extend_from_slice(&members[cut..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    let (train, val) = match variant {
        Variant::A => (first, second),
        Variant::B => (second, first),
    };
    Ok(TransferSplit {
        variant,
        train,
        val,
    })
}

/// Elementwise mean of two probability matrices.
pub fn fuse_probs(a: &Array2<f32>, b: &Array2<f32>) -> Result<Array2<f32>> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!(
            "fusing {:?} with {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok((a + b) * 0.5)
}

/// Two fine-tuned models whose softmax outputs are averaged.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedModel {
    pub a: Checkpoint,
    pub b: Checkpoint,
}

impl FusedModel {
    pub fn new(a: Checkpoint, b: Checkpoint) -> Result<Self> {
        if a.meta.task != b.meta.task
            || a.meta.features != b.meta.features
            || a.meta.window != b.meta.window
        {
            return Err(Error::BadConfig(
                "fused models must share task, window and feature config".into(),
            ));
        }
        Ok(Self { a, b })
    }

    pub fn predict_proba(&self, seqs: &[FeatureSequence]) -> Result<Array2<f32>> {
        fuse_probs(&self.a.predict_proba(seqs)?, &self.b.predict_proba(seqs)?)
    }

    pub fn evaluate(&self, seqs: &[FeatureSequence]) -> Result<EvalReport> {
        let task = self.a.meta.task;
        let truth = labels_for(seqs, task)?;
        let predicted = argmax_rows(self.predict_proba(seqs)?.view());
        EvalReport::for_task(task, &truth, &predicted)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Early-stopping patience on each variant's transfer validation F1.
    pub patience: usize,
    pub batch_size: usize,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            lr: 2e-5,
            epochs: 200,
            patience: 20,
            batch_size: 128,
        }
    }
}

pub struct TransferOutcome {
    pub split_a: TransferSplit,
    pub split_b: TransferSplit,
    pub fused: FusedModel,
    pub history_a: History,
    pub history_b: History,
    pub report_base: EvalReport,
    pub report_a: EvalReport,
    pub report_b: EvalReport,
    pub report_fused: EvalReport,
}

/// Fine-tunes two copies of `base` on the complementary stratified halves of
/// `val_set`, fuses them, and scores base, both variants and the fusion on
/// `eval_set`.
pub fn transfer_and_fuse(
    base: &Checkpoint,
    val_set: &[FeatureSequence],
    eval_set: &[FeatureSequence],
    cfg: &TransferConfig,
    seed: u64,
) -> Result<TransferOutcome> {
    let task = base.meta.task;
    let labels = labels_for(val_set, task)?;
    let scaled = val_set
        .iter()
        .map(|s| base.scaler.apply(s))
        .collect::<Result<Vec<_>>>()?;

    let tune = |variant: Variant, stage: Stage| -> Result<(TransferSplit, Checkpoint, History)> {
        let split = stratified_split(&labels, task.n_classes(), variant)?;
        let train_cfg = TrainConfig {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            schedule: LrSchedule::constant(cfg.lr),
            early_stop_patience: Some(cfg.patience),
            target_f1: None,
            seed: stage_rng(seed, stage, 0).random(),
        };
        let out = train(
            base.network.clone(),
            &TransferSplit::select(&split.train, &scaled),
            &TransferSplit::select(&split.val, &scaled),
            task,
            &train_cfg,
        )?;
        let mut meta = base.meta.clone();
        meta.epoch = out.best_epoch;
        let ckpt = Checkpoint {
            meta,
            network: out.network,
            optimizer: Some(out.optimizer),
            scaler: base.scaler.clone(),
        };
        Ok((split, ckpt, out.history))
    };
    let (split_a, model_a, history_a) = tune(Variant::A, Stage::TransferA)?;
    let (split_b, model_b, history_b) = tune(Variant::B, Stage::TransferB)?;

    let report_base = base.evaluate(eval_set)?;
    let report_a = model_a.evaluate(eval_set)?;
    let report_b = model_b.evaluate(eval_set)?;
    let fused = FusedModel::new(model_a, model_b)?;
    let report_fused = fused.evaluate(eval_set)?;
    Ok(TransferOutcome {
        split_a,
        split_b,
        fused,
        history_a,
        history_b,
        report_base,
        report_a,
        report_b,
        report_fused,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn even_class_halves() {
        let labels = vec![0; 10]
            .into_iter()
            .chain(vec![1; 4])
            .collect::<Vec<_>>();
        let a = stratified_split(&labels, 2, Variant::A).unwrap();
        assert_eq!(a.train, [0, 1, 2, 3, 4, 10, 11]);
        assert_eq!(a.val, [5, 6, 7, 8, 9, 12, 13]);
    }

    #[test]
    fn odd_class_extra_goes_to_part_one() {
        let labels = [1, 0, 1, 1, 0, 1, 1, 1, 1];
        let a = stratified_split(&labels, 2, Variant::A).unwrap();
        let b = stratified_split(&labels, 2, Variant::B).unwrap();
        let count = |idx: &[usize], c| idx.iter().filter(|&&i| labels[i] == c).count();
        assert_eq!((count(&a.train, 1), count(&a.val, 1)), (4, 3));
        assert_eq!((count(&b.train, 1), count(&b.val, 1)), (3, 4));
        assert_eq!(a.train, b.val);
        assert_eq!(a.val, b.train);
    }

    #[test]
    fn small_or_missing_class() {
        assert!(matches!(
            stratified_split(&[0, 0, 1], 2, Variant::A),
            Err(Error::ClassTooSmall { class: 1, count: 1 })
        ));
        assert!(matches!(
            stratified_split(&[0, 0], 2, Variant::B),
            Err(Error::ClassTooSmall { class: 1, count: 0 })
        ));
    }

    #[test]
    fn fused_probabilities() {
        let a = array![[0.9f32, 0.1]];
        let b = array![[0.2f32, 0.8]];
        let f = fuse_probs(&a, &b).unwrap();
        assert!((f[[0, 0]] - 0.55).abs() < 1e-6 && (f[[0, 1]] - 0.45).abs() < 1e-6);
        assert_eq!(argmax_rows(f.view()), [0]);
        assert_eq!(fuse_probs(&a, &a).unwrap(), a);
    }

    proptest! {
        #[test]
        fn variants_partition_and_complement(labels in proptest::collection::vec(0usize..3, 0..60)) {
            let mut labels = labels;
            labels.extend([0, 0, 1, 1, 2, 2]);
            let a = stratified_split(&labels, 3, Variant::A).unwrap();
            let b = stratified_split(&labels, 3, Variant::B).unwrap();
            prop_assert_eq!(&a.train, &b.val);
            prop_assert_eq!(&a.val, &b.train);
            let mut all: Vec<usize> = a.train.iter().chain(&a.val).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 0..3 {
                let n = labels.iter().filter(|&&l| l == c).count();
                let t = a.train.iter().filter(|&&i| labels[i] == c).count();
                prop_assert!(t.abs_diff(n - t) <= 1);
            }
        }

        #[test]
        fn fusion_is_symmetric(v in proptest::collection::vec(0f32..1.0, 12)) {
            let a = Array2::from_shape_vec((3, 4), v[..12].to_vec()).unwrap();
            let b = a.mapv(|x| 1.0 - x * x);
            prop_assert_eq!(fuse_probs(&a, &b).unwrap(), fuse_probs(&b, &a).unwrap());
        }
    }
}
