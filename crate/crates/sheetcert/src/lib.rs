//! Workbook compliance checking against a code of good and bad spreadsheet
//! practice, plus issuing and verifying structural-fingerprint certificates
//! that survive data-only edits.

pub mod certify;
pub mod cli;
pub mod formula;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod regions;
pub mod rules;

/// Version of the rule catalog embedded in reports and certificates.
pub const RULESET_VERSION: &str = "1.0.0";

/// Tool version recorded in certificates.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
