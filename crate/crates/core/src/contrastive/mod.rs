//! Contrastive pre-training: memory bank, sampling, InfoNCE and the trainer.

mod bank;
mod loss;
mod sampling;
mod trainer;

pub use bank::{BankEntry, MemoryBank};
pub use loss::{info_nce, info_nce_node, LossMode};
pub use sampling::{perturb, sample_negatives, sample_positive, Negatives};
pub use trainer::{pretrain, pretrain_with, ContrastiveConfig, EpochStats, PretrainOutput};
