use std::path::{Path, PathBuf};

use indrnn_har::features::{
    extract_all, read_feature_file, write_feature_file, FeatureConfig, FeatureSequence, WindowSpec,
    FEATURE_FILE_VERSION,
};
use indrnn_har::nn::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
use indrnn_har::pipeline::{
    argmax_rows, fit, ingest, recognize_location_group, synthesize, transfer_and_fuse,
    write_dataset, EvalReport, FusedModel, Role,
};
use indrnn_har::sensor::{preprocess_sample, LocationGroup, Task};
use indrnn_har::{Error, Result};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{Cli, Command, GroupArg};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const VERSION_FILE: &str = "version.txt";
pub const FUSED_MANIFEST: &str = "fused.json";

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { context, source }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(io_err(format!("writing {}", path.display())))?;
    Ok(path)
}

pub fn run(cli: Cli) -> Result<()> {
    let task_override = match &cli.command {
        Command::Train { task, .. } => task.map(Into::into),
        _ => None,
    };
    let cfg =
        RunConfig::load(cli.config.as_deref())?.resolve(cli.seed, cli.threads, task_override)?;
    if cfg.threads > 0 {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    let out = &cli.out;
    std::fs::create_dir_all(out).map_err(io_err(format!("creating {}", out.display())))?;
    write(out, RESOLVED_CONFIG, cfg.to_toml())?;
    write(
        out,
        VERSION_FILE,
        format!(
            "indrnn-har {}\ncheckpoint format {CHECKPOINT_VERSION}\nfeature format {FEATURE_FILE_VERSION}\n",
            env!("CARGO_PKG_VERSION")
        ),
    )?;

    match cli.command {
        Command::Synth => synth(&cfg, out),
        Command::Features { input } => features(&cfg, &input, out),
        Command::Train {
            train, val, group, ..
        } => train_cmd(&cfg, &train, &val, group, out),
        Command::Eval { model, data } => eval(&model, &data, out),
        Command::Transfer { model, val, test } => {
            transfer(&cfg, &model, &val, test.as_deref(), out)
        }
        Command::Predict { model, data } => predict(&model, &data, out),
        Command::Locate { model, data } => locate(&model, &data, out),
    }
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let samples = synthesize(&cfg.synth)?;
    write_dataset(out, &samples)?;
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}

/// Featurizes a dataset directory, or reads a feature file as is.
fn load_features(
    path: &Path,
    window: &WindowSpec,
    features: &FeatureConfig,
) -> Result<Vec<FeatureSequence>> {
    if path.is_dir() {
        let ds = ingest(path, Role::Test)?;
        let derotated = ds
            .samples
            .par_iter()
            .map(preprocess_sample)
            .collect::<Result<Vec<_>>>()?;
        extract_all(&derotated, window, features)
    } else {
        read_feature_file(path)
    }
}

fn features(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let seqs = load_features(input, &cfg.window, &cfg.features)?;
    let path = out.join("features.bin");
    write_feature_file(&path, &seqs)?;
    let first = seqs
        .first()
        .ok_or_else(|| Error::EmptyDataset(input.display().to_string()))?;
    println!(
        "F={} steps={} samples={}",
        first.dim,
        first.steps,
        seqs.len()
    );
    Ok(())
}

fn in_group(seqs: Vec<FeatureSequence>, group: Option<GroupArg>) -> Result<Vec<FeatureSequence>> {
    let Some(g) = group else {
        return Ok(seqs);
    };
    let want = match g {
        GroupArg::BagHand => LocationGroup::BagHand,
        GroupArg::HipsTorso => LocationGroup::HipsTorso,
    };
    let kept: Vec<_> = seqs
        .into_iter()
        .filter(|s| s.location.map(|l| l.group()) == Some(want))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no samples from group {}",
            want.name()
        )));
    }
    Ok(kept)
}

fn train_cmd(
    cfg: &RunConfig,
    train: &Path,
    val: &Path,
    group: Option<GroupArg>,
    out: &Path,
) -> Result<()> {
    let train_set = in_group(load_features(train, &cfg.window, &cfg.features)?, group)?;
    let val_set = in_group(load_features(val, &cfg.window, &cfg.features)?, group)?;
    let meta = CheckpointMeta {
        network: cfg.network.clone(),
        input_dim: 0,
        window: cfg.window,
        features: cfg.features,
        task: cfg.task(),
        epoch: 0,
    };
    let fitted = fit(&train_set, &val_set, meta, &cfg.train)?;
    save_checkpoint(&out.join("model.ckpt"), &fitted.checkpoint)?;
    write(out, "history.csv", fitted.history.to_csv())?;
    let best = &fitted.history.records[fitted.checkpoint.meta.epoch];
    println!("best epoch {} val macro F1 {:.4}", best.epoch, best.val_f1);
    Ok(())
}

/// A single checkpoint or two fused ones.
enum Model {
    Single(Box<Checkpoint>),
    Fused(Box<FusedModel>),
}

#[derive(Serialize, Deserialize)]
struct FusedManifest {
    members: [String; 2],
}

impl Model {
    fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(format!("reading {}", path.display())))?;
        if bytes.starts_with(CHECKPOINT_MAGIC) {
            return Checkpoint::decode(&bytes).map(|c| Model::Single(Box::new(c)));
        }
        let manifest: FusedManifest = serde_json::from_slice(&bytes).map_err(|e| {
            Error::CorruptCheckpoint(format!(
                "{} is neither a checkpoint nor a fused manifest: {e}",
                path.display()
            ))
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let load = |name: &str| load_checkpoint(&dir.join(name));
        Ok(Model::Fused(Box::new(FusedModel::new(
            load(&manifest.members[0])?,
            load(&manifest.members[1])?,
        )?)))
    }

    fn meta(&self) -> &CheckpointMeta {
        match self {
            Model::Single(c) => &c.meta,
            Model::Fused(f) => &f.a.meta,
        }
    }

    fn data(&self, path: &Path) -> Result<Vec<FeatureSequence>> {
        load_features(path, &self.meta().window, &self.meta().features)
    }

    fn predict_proba(&self, seqs: &[FeatureSequence]) -> Result<Array2<f32>> {
        match self {
            Model::Single(c) => c.predict_proba(seqs),
            Model::Fused(f) => f.predict_proba(seqs),
        }
    }

    fn evaluate(&self, seqs: &[FeatureSequence]) -> Result<EvalReport> {
        match self {
            Model::Single(c) => c.evaluate(seqs),
            Model::Fused(f) => f.evaluate(seqs),
        }
    }
}

fn write_report(out: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    write(out, &format!("{stem}.txt"), report.to_text())?;
    write(out, &format!("{stem}.json"), report.to_json())?;
    Ok(())
}

fn eval(model: &Path, data: &Path, out: &Path) -> Result<()> {
    let model = Model::load(model)?;
    let report = model.evaluate(&model.data(data)?)?;
    write_report(out, "report", &report)?;
    print!("{}", report.to_text());
    Ok(())
}

fn transfer(
    cfg: &RunConfig,
    model: &Path,
    val: &Path,
    test: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let base = load_checkpoint(model)?;
    let load = |p: &Path| load_features(p, &base.meta.window, &base.meta.features);
    let val_set = load(val)?;
    let eval_set = match test {
        Some(p) => load(p)?,
        None => val_set.clone(),
    };
    let o = transfer_and_fuse(&base, &val_set, &eval_set, &cfg.transfer, cfg.seed)?;
    save_checkpoint(&out.join("transfer_a.ckpt"), &o.fused.a)?;
    save_checkpoint(&out.join("transfer_b.ckpt"), &o.fused.b)?;
    let manifest = FusedManifest {
        members: ["transfer_a.ckpt".into(), "transfer_b.ckpt".into()],
    };
    write(
        out,
        FUSED_MANIFEST,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    write(out, "history_a.csv", o.history_a.to_csv())?;
    write(out, "history_b.csv", o.history_b.to_csv())?;
    write(
        out,
        "splits.json",
        serde_json::to_string(&[&o.split_a, &o.split_b]).expect("splits serialize"),
    )?;
    for (stem, r) in [
        ("report_base", &o.report_base),
        ("report_transfer_a", &o.report_a),
        ("report_transfer_b", &o.report_b),
        ("report_fused", &o.report_fused),
    ] {
        write_report(out, stem, r)?;
        println!("{stem:<18} macro F1 {:.4}", r.macro_f1);
    }
    Ok(())
}

fn predict(model: &Path, data: &Path, out: &Path) -> Result<()> {
    let model = Model::load(model)?;
    let seqs = model.data(data)?;
    let task: Task = model.meta().task;
    let mut lines = String::new();
    for c in argmax_rows(model.predict_proba(&seqs)?.view()) {
        lines.push_str(task.class_name(c));
        lines.push('\n');
    }
    write(out, "predictions.txt", lines)?;
    println!("wrote {} predictions", seqs.len());
    Ok(())
}

fn locate(model: &Path, data: &Path, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(model)?;
    let seqs = load_features(data, &ckpt.meta.window, &ckpt.meta.features)?;
    let decision = recognize_location_group(&ckpt, &seqs)?;
    write(
        out,
        "location.json",
        serde_json::to_string_pretty(&decision).expect("decision serializes"),
    )?;
    write(out, "location.txt", format!("{}\n", decision.group.name()))?;
    println!(
        "{} ({} {}, {} {})",
        decision.group.name(),
        decision.counts[0],
        LocationGroup::BagHand.name(),
        decision.counts[1],
        LocationGroup::HipsTorso.name()
    );
    Ok(())
}
