use indrnn_har::features::{extract_all, FeatureConfig, FeatureSequence, WindowSpec};
use indrnn_har::nn::{
    load_checkpoint, save_checkpoint, CheckpointMeta, DropoutConfig, LrSchedule, NetworkConfig,
};
use indrnn_har::pipeline::{
    fit, ingest, synthesize, write_dataset, FitOutput, Role, SyntheticSpec, TrainConfig,
};
use indrnn_har::sensor::{preprocess_sample, RawSample, Task};

fn featurize(samples: &[RawSample]) -> Vec<FeatureSequence> {
    let d: Vec<_> = samples
        .iter()
        .map(|s| preprocess_sample(s).unwrap())
        .collect();
    extract_all(&d, &WindowSpec::default(), &FeatureConfig::default()).unwrap()
}

fn synth(seed: u64, n: usize) -> Vec<RawSample> {
    synthesize(&SyntheticSpec {
        seed,
        samples_per_class: n,
        ..Default::default()
    })
    .unwrap()
}

fn meta(task: Task) -> CheckpointMeta {
    CheckpointMeta {
        network: NetworkConfig {
            block_layers: vec![1, 1],
            growth_rate: 8,
            stem_width: 16,
            n_classes: task.n_classes(),
            dropout: DropoutConfig {
                input: 0.1,
                dense_layer: 0.2,
                bottleneck: 0.1,
                transition: 0.1,
            },
            ..Default::default()
        },
        input_dim: 0,
        window: WindowSpec::default(),
        features: FeatureConfig::default(),
        task,
        epoch: 0,
    }
}

fn quick_fit(epochs: usize, seed: u64) -> (FitOutput, Vec<FeatureSequence>) {
    let train = featurize(&synth(1, 4));
    let val = featurize(&synth(2, 2));
    let cfg = TrainConfig {
        epochs,
        batch_size: 8,
        schedule: LrSchedule::constant(2e-3),
        seed,
        ..Default::default()
    };
    (fit(&train, &val, meta(Task::Activity), &cfg).unwrap(), val)
}

#[test]
fn one_epoch_is_reproducible() {
    let (a, _) = quick_fit(1, 5);
    let (b, _) = quick_fit(1, 5);
    assert_eq!(a.history, b.history);
    assert_eq!(a.checkpoint, b.checkpoint);
    let (c, _) = quick_fit(1, 6);
    assert_ne!(
        a.history.records[0].train_loss,
        c.history.records[0].train_loss
    );
}

#[test]
fn best_epoch_is_retained() {
    let (out, val) = quick_fit(6, 3);
    let best = out
        .history
        .records
        .iter()
        .map(|r| r.val_f1)
        .fold(f64::MIN, f64::max);
    let kept = &out.history.records[out.checkpoint.meta.epoch];
    assert_eq!(kept.val_f1, best);
    assert!(out.history.records[..out.checkpoint.meta.epoch]
        .iter()
        .all(|r| r.val_f1 < best));
    assert_eq!(out.checkpoint.evaluate(&val).unwrap().macro_f1, best);
    let csv = out.history.to_csv();
    assert!(csv.starts_with("epoch,lr,train_loss,val_f1\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn ingest_to_prediction_keeps_row_order() {
    let samples = synth(8, 2);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &samples).unwrap();
    let ds = ingest(dir.path(), Role::Test).unwrap();
    assert_eq!(ds.samples, samples);

    let feats = featurize(&ds.samples);
    let (out, _) = quick_fit(2, 1);
    let all = out.checkpoint.predict_proba(&feats).unwrap();
    for (i, f) in feats.iter().enumerate() {
        let one = out
            .checkpoint
            .predict_proba(std::slice::from_ref(f))
            .unwrap();
        assert_eq!(one.row(0), all.row(i));
    }
}

#[test]
fn trained_checkpoint_round_trips_through_disk() {
    let (out, val) = quick_fit(2, 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &out.checkpoint).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, out.checkpoint);
    let (p, q) = (
        out.checkpoint.predict_proba(&val).unwrap(),
        back.predict_proba(&val).unwrap(),
    );
    assert!(p
        .iter()
        .zip(q.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn location_task_needs_location_labels() {
    let mut train = featurize(&synth(1, 2));
    train[0].location = None;
    let val = featurize(&synth(2, 2));
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 8,
        ..Default::default()
    };
    assert!(fit(&train, &val, meta(Task::LocationGroup), &cfg).is_err());
}
