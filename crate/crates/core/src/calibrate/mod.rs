//! Empirical p-values, Benjamini-Hochberg thresholds on both score tails,
//! and Monte-Carlo checks of the realized false-discovery proportion.

mod bh;
mod pvalues;
mod simulate;

pub use bh::{
    adjust_alpha_low, bh_index, decide, decision_row, realized_fdp, thresholds, thresholds_heldout, thresholds_with,
    write_decisions, AdjustedLevel, ThresholdDecision, DECISION_HEADER,
};
pub use pvalues::{pvalues, pvalues_against, pvalues_high, pvalues_low, pvalues_with, Estimator, PValueSet, Side};
pub use simulate::{simulate_fdr, FdrSimulation, SimulationSpec};
