//! Ingestion, synthesis, training, evaluation, location grouping and the
//! stratified transfer-and-fuse protocol.

mod dataset;
mod location;
mod metrics;
mod synth;
mod train;
mod transfer;

use rand::SeedableRng;

use crate::nn::HarRng;

pub use dataset::{
    ingest, majority_vote, read_matrix, write_dataset, Dataset, Role, CHANNEL_FILES, LABEL_FILE,
    LOCATION_FILE, USER_FILE,
};
pub use location::{recognize_location_group, vote_group, LocationDecision};
pub use metrics::{argmax_rows, evaluate, predict_proba, EvalReport};
pub use synth::{
    default_classes, synthesize, ClassRecipe, LocationProfile, SyntheticSpec, UserProfile,
};
pub use train::{
    fit, labels_for, train, EpochRecord, FitOutput, History, TrainConfig, TrainOutcome,
};
pub use transfer::{
    fuse_probs, stratified_split, transfer_and_fuse, FusedModel, TransferConfig, TransferOutcome,
    TransferSplit, Variant,
};

/// Independent random streams derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Synth = 1,
    Init = 2,
    Shuffle = 3,
    Dropout = 4,
    TransferA = 5,
    TransferB = 6,
}

/// Deterministic generator for `(seed, stage, index)`.
pub fn stage_rng(seed: u64, stage: Stage, index: u64) -> HarRng {
    let mut rng = HarRng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << 48) | index);
    rng
}
