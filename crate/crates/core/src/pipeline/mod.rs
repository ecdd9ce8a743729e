//! Orchestration shared by the command-line tool: configuration, the
//! per-seed experiment, evaluation metrics and reports.

mod config;
mod experiment;
mod metrics;
mod report;

pub use config::{CalibrationConfig, CalibrationMode, Paths, PipelineConfig, ReportConfig};
pub use experiment::{
    baseline_head, calibrate_scores, cr_head, heldout_split, prepare, pretrain_stage, run_seed, score_profiles,
    ModelRun, Prepared, SeedRun,
};
pub use metrics::{pca_project, rankme, Detection, Projection};
pub use report::{
    detection_table, read_records, records_of, table_tsv, write_records, EvalRecord, Histogram, TableRow, EVAL_HEADER,
    TABLE_HEADER,
};
