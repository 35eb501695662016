//! Workbook and manifest loaders: XLSX containers and the plain-text
//! fixture format used by the test corpus.

mod fixture;
mod manifest;
mod xlsx;

pub use fixture::{load_fixture, load_fixture_str};
pub use manifest::{load_manifest, parse_manifest, Manifest, SectionRecord};
pub use xlsx::load_xlsx;

use thiserror::Error;

use crate::formula::FormulaError;
use crate::model::CellAddr;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a ZIP container")]
    NotAZipFile,
    #[error("missing workbook part (xl/workbook.xml)")]
    MissingWorkbookPart,
    #[error("formula in {sheet}!{addr} failed to parse: {source}")]
    FormulaParse {
        sheet: String,
        addr: CellAddr,
        source: FormulaError,
    },
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("fixture syntax error on line {line}: {reason}")]
    FixtureSyntax { line: usize, reason: String },
    #[error("duplicate cell {sheet}!{addr}")]
    DuplicateCell { sheet: String, addr: CellAddr },
    #[error("manifest syntax error on line {line}: {reason}")]
    ManifestSyntax { line: usize, reason: String },
    #[error("inconsistent manifest record for section `{section}`: {reason}")]
    InconsistentRecord { section: String, reason: String },
}
