use serde::{Deserialize, Serialize};

use super::metrics::argmax_rows;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::nn::Checkpoint;
use crate::sensor::{LocationGroup, Task};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationDecision {
    pub per_sample: Vec<LocationGroup>,
    /// Votes per group, indexed by [`LocationGroup::index`].
    pub counts: [usize; 2],
    pub group: LocationGroup,
}

/// Majority group; ties go to [`LocationGroup::BagHand`], the first group in
/// name order.
pub fn vote_group(groups: &[LocationGroup]) -> Option<LocationGroup> {
    super::majority_vote(groups)
}

/// Per-sample group predictions and the dataset-level majority decision.
pub fn recognize_location_group(
    model: &Checkpoint,
    seqs: &[FeatureSequence],
) -> Result<LocationDecision> {
    if model.meta.task != Task::LocationGroup {
        return Err(Error::BadConfig(format!(
            "location recognition needs a location_group model, got {:?}",
            model.meta.task
        )));
    }
    if seqs.is_empty() {
        return Err(Error::EmptyDataset("no samples to locate".into()));
    }
    let per_sample: Vec<LocationGroup> = argmax_rows(model.predict_proba(seqs)?.view())
        .into_iter()
        .map(|c| LocationGroup::from_index(c).expect("two-class output"))
        .collect();
    let mut counts = [0; 2];
    for g in &per_sample {
        counts[g.index()] += 1;
    }
    let group = vote_group(&per_sample).expect("nonempty");
    Ok(LocationDecision {
        per_sample,
        counts,
        group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use LocationGroup::{BagHand as A, HipsTorso as B};

    #[test]
    fn majority_and_ties() {
        assert_eq!(vote_group(&[A, A, B]), Some(A));
        assert_eq!(vote_group(&[B, A, B]), Some(B));
        assert_eq!(vote_group(&[B, A, B, A]), Some(A));
        assert_eq!(vote_group(&[]), None);
    }
}
