//! Dataset ingestion, configuration and result files.
//!
//! Numbers are written with 17 significant digits so that reruns can be
//! compared byte for byte and values reload exactly.

pub mod config;
pub mod dataset;
pub mod output;

pub use config::{RunConfig, Scale};
pub use dataset::{load_dataset, load_dataset_with, parse_dataset, write_dataset, ColumnMapping, Dataset};
pub use output::{chain_table, read_chain, write_chain, Cell, ChainFile, Manifest, OutputDir, Table, MANIFEST_FILE};

/// Scientific notation with 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}
