//! Logistic scoring on representations or tabular profiles.

mod finetune;
mod logistic;
mod scores;

pub use finetune::{finetune, FinetuneConfig, FinetuneOutput};
pub use logistic::{regularized_loss, sigmoid, tabular_baseline, train_head_frozen, HeadTrainConfig, LogisticHead};
pub use scores::ScoreSet;

use crate::dataio::LabeledDataset;
use crate::encoder::TransformerEncoder;
use crate::error::Result;

/// Scores every account of `data` with `head` applied to its representation.
pub fn score_dataset(encoder: &TransformerEncoder, head: &LogisticHead, data: &LabeledDataset) -> Result<ScoreSet> {
    let u = encoder.encode(&data.series, false, 0)?;
    ScoreSet::new(
        data.series.iter().map(|s| s.account_id.clone()).collect(),
        head.score_all(&u)?,
        data.labels.clone(),
    )
}
