//! Pipeline commands behind the `dipls` binary.
//!
//! Each command is a plain function so it can be driven from tests as well
//! as from the argument parser in `main.rs`.

mod compare;
mod evaluate;
mod extract;
mod generate;

use std::path::PathBuf;

use dipls_core::{Error, ErrorClass};

pub use compare::{cmd_compare, compare_reports, render_comparison, Comparison, COMPARISON_SCHEMA_VERSION};
pub use evaluate::{cmd_evaluate, geometric_sweep, load_datasets, EvaluateOptions, SweepReport};
pub use extract::{cmd_extract, ExtractSettings};
pub use generate::{cmd_generate, suite_manifest, GenerateOptions, GenerateSummary};

pub const TOOL_NAME: &str = concat!("dipls ", env!("CARGO_PKG_VERSION"));

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Validation | ErrorClass::Io => 2,
        ErrorClass::Mismatch => 3,
        ErrorClass::Numerical => 4,
    }
}

/// `<dir>/<stem><suffix>` for an output path.
pub(crate) fn sibling(path: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}
