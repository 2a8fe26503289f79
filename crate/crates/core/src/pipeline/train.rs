use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::evaluate;
use super::{stage_rng, Stage};
use crate::error::{Error, Result};
use crate::features::{FeatureScaler, FeatureSequence};
use crate::nn::{
    cross_entropy, Checkpoint, CheckpointMeta, Ctx, LrSchedule, Network, OptimizerState, SeqBatch,
};
use crate::sensor::Task;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    /// Stop after this many epochs without a new best validation F1.
    pub early_stop_patience: Option<usize>,
    /// Stop as soon as validation F1 reaches this value.
    pub target_f1: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 128,
            schedule: LrSchedule::default(),
            early_stop_patience: None,
            target_f1: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn val_f1(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.val_f1).collect()
    }

    /// First epoch (0-based) whose validation F1 reaches `threshold`.
    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.val_f1 >= threshold)
            .map(|r| r.epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,lr,train_loss,val_f1\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", r.epoch, r.lr, r.train_loss, r.val_f1);
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best validation F1 (earliest on ties).
    pub network: Network<f32>,
    pub optimizer: OptimizerState<f32>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub history: History,
}

/// Class index of every sequence for `task`.
pub fn labels_for(seqs: &[FeatureSequence], task: Task) -> Result<Vec<usize>> {
    seqs.iter()
        .enumerate()
        .map(|(i, s)| {
            task.class_of(s.activity, s.location).ok_or_else(|| {
                Error::BadConfig(format!(
                    "sample {i} has no location label, required for {task:?}"
                ))
            })
        })
        .collect()
}

/// Mini-batch training on already scaled sequences.
pub fn train(
    mut net: Network<f32>,
    train_set: &[FeatureSequence],
    val_set: &[FeatureSequence],
    task: Task,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset(
            "training needs nonempty train and validation sets".into(),
        ));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::BadConfig(
            "epochs and batch_size must be positive".into(),
        ));
    }
    if net.n_classes() != task.n_classes() {
        return Err(Error::BadConfig(format!(
            "network has {} classes, {task:?} needs {}",
            net.n_classes(),
            task.n_classes()
        )));
    }
    let labels = labels_for(train_set, task)?;
    let (steps, dim) = (train_set[0].steps, train_set[0].dim);

    let mut shuffle_rng = stage_rng(cfg.seed, Stage::Shuffle, 0);
    let mut dropout_rng = stage_rng(cfg.seed, Stage::Dropout, 0);
    let mut opt = OptimizerState::new(cfg.schedule);
    let mut history = History::default();
    let mut best: Option<(Network<f32>, OptimizerState<f32>, usize, f64)> = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.epochs {
        opt.set_epoch(epoch, &history.val_f1());
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = SeqBatch::from_samples(
                chunk.iter().map(|&i| train_set[i].values.as_slice()),
                steps,
                dim,
            )?;
            let targets: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            net.zero_grad();
            let (probs, cache) = net.forward(&x, &mut Ctx::train(&mut dropout_rng))?;
            let (loss, grad) = cross_entropy(&probs, &targets)?;
            net.backward(&cache, &grad)?;
            opt.step_network(&mut net)?;
            loss_sum += loss as f64 * chunk.len() as f64;
        }
        let val_f1 = evaluate(&net, val_set, task)?.macro_f1;
        history.records.push(EpochRecord {
            epoch,
            lr: opt.lr,
            train_loss: loss_sum / train_set.len() as f64,
            val_f1,
        });
        if best.as_ref().is_none_or(|b| val_f1 > b.3) {
            let mut snapshot = net.clone();
            snapshot.zero_grad();
            best = Some((snapshot, opt.clone(), epoch, val_f1));
            stale = 0;
        } else {
            stale += 1;
        }
        if cfg.early_stop_patience.is_some_and(|p| stale >= p)
            || cfg.target_f1.is_some_and(|t| val_f1 >= t)
        {
            break;
        }
    }
    let (network, optimizer, best_epoch, best_val_f1) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        network,
        optimizer,
        best_epoch,
        best_val_f1,
        history,
    })
}

pub struct FitOutput {
    pub checkpoint: Checkpoint,
    pub history: History,
}

/// Fits the feature scaler on `train_set`, initializes a network from
/// `meta.network` and trains it. `meta.input_dim` and `meta.epoch` are filled
/// in from the data and the best epoch.
pub fn fit(
    train_set: &[FeatureSequence],
    val_set: &[FeatureSequence],
    mut meta: CheckpointMeta,
    cfg: &TrainConfig,
) -> Result<FitOutput> {
    let scaler = FeatureScaler::fit(train_set)?;
    let scale = |s: &[FeatureSequence]| {
        s.iter()
            .map(|x| scaler.apply(x))
            .collect::<Result<Vec<_>>>()
    };
    let (train_scaled, val_scaled) = (scale(train_set)?, scale(val_set)?);
    meta.input_dim = scaler.dim();
    let net = Network::new(
        &meta.network,
        meta.input_dim,
        &mut stage_rng(cfg.seed, Stage::Init, 0),
    )?;
    let out = train(net, &train_scaled, &val_scaled, meta.task, cfg)?;
    meta.epoch = out.best_epoch;
    Ok(FitOutput {
        checkpoint: Checkpoint {
            meta,
            network: out.network,
            optimizer: Some(out.optimizer),
            scaler,
        },
        history: out.history,
    })
}
