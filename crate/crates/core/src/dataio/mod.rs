//! Transaction records, encodings, windows, profiles and the synthetic generator.

mod aggregate;
mod event;
mod io;
mod schema;
mod series;
mod synth;

pub use aggregate::{aggregate_events, compute_aggregates, Standardizer, TabularProfile, AGGREGATE_NAMES};
pub use event::{weekday, Account, Direction, RawDataset, Split, TransactionEvent, SECONDS_PER_DAY};
pub use io::{
    load_transactions, read_accounts, read_dataset, read_transactions, write_accounts, write_dataset,
    write_transactions, DatasetManifest,
};
pub use schema::{fit_numeric, fit_schema, CategoricalColumn, EncodingSchema, NumericColumn};
pub use series::{window_series, AccountSeries, LabeledDataset, WindowConfig};
pub use synth::{fraud_count, generate_synthetic, regimes, Regime, SynthConfig, KEYWORDS};
