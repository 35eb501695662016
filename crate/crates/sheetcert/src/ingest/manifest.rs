//! Sidecar compliance manifest: per-section authorship/checking records,
//! the specification pointer and optional declared regions.
//!
//! ```text
//! spec = model-spec.md
//! region.input = Model!B2:B9
//!
//! [section Revenue]
//! description = Quarterly revenue build-up
//! author = A. Example
//! drafted = 2026-01-05
//! checked_by = B. Reviewer
//! checked = 2026-01-06
//! fingerprint = <64 hex digits>
//! ```

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::regions::{parse_region_decl, RegionDecl};

use super::IngestError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectionRecord {
    pub section_name: String,
    pub description: String,
    pub author: String,
    pub drafted_date: Option<NaiveDate>,
    pub checked_by: Option<String>,
    pub checked_date: Option<NaiveDate>,
    pub section_fingerprint_at_check: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub spec_path: Option<String>,
    pub sections: Vec<SectionRecord>,
    pub regions: Vec<RegionDecl>,
    /// Directory the manifest was loaded from; spec_path resolves against it.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn section(&self, name: &str) -> Option<&SectionRecord> {
        self.sections.iter().find(|s| s.section_name == name)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_manifest(&text, base_dir)
}

pub fn parse_manifest(text: &str, base_dir: PathBuf) -> Result<Manifest, IngestError> {
    let mut manifest = Manifest {
        base_dir,
        ..Manifest::default()
    };
    let mut current: Option<SectionRecord> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |reason: String| IngestError::ManifestSyntax {
            line: line_no,
            reason,
        };

        if let Some(header) = line.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| syntax("unterminated `[section ...]` header".into()))?;
            let name = header
                .strip_prefix("section")
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| syntax("expected `[section <name>]`".into()))?;
            if let Some(done) = current.take() {
                finish_record(done, &mut manifest)?;
            }
            if manifest.sections.iter().any(|s| s.section_name == name) {
                return Err(syntax(format!("duplicate section `{name}`")));
            }
            current = Some(SectionRecord {
                section_name: name.to_string(),
                ..SectionRecord::default()
            });
            continue;
        }

        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| syntax("expected `key = value`".into()))?;

        match &mut current {
            None => {
                if key == "spec" {
                    if manifest.spec_path.is_some() {
                        return Err(syntax("duplicate `spec` key".into()));
                    }
                    manifest.spec_path = Some(value.to_string());
                } else if let Some(class) = key.strip_prefix("region.") {
                    let decl = parse_region_decl(class, value)
                        .map_err(|reason| syntax(format!("bad region declaration: {reason}")))?;
                    manifest.regions.push(decl);
                } else {
                    return Err(syntax(format!("unknown top-level key `{key}`")));
                }
            }
            Some(record) => match key {
                "description" => {
                    record.description = value.to_string();
                }
                "author" => {
                    record.author = value.to_string();
                }
                "drafted" => {
                    record.drafted_date = Some(parse_date(value).map_err(syntax)?);
                }
                "checked_by" => {
                    if !value.is_empty() {
                        record.checked_by = Some(value.to_string());
                    }
                }
                "checked" => {
                    record.checked_date = Some(parse_date(value).map_err(syntax)?);
                }
                "fingerprint" => {
                    if value.len() != 64 || !value.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()) {
                        return Err(syntax("fingerprint must be 64 lower-case hex digits".into()));
                    }
                    record.section_fingerprint_at_check = Some(value.to_string());
                }
                other => return Err(syntax(format!("unknown section key `{other}`"))),
            },
        }
    }
    if let Some(done) = current.take() {
        finish_record(done, &mut manifest)?;
    }
    Ok(manifest)
}

fn parse_date(value: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .map_err(|_| format!("bad date `{value}` (expected YYYY-MM-DD)"))
}

fn finish_record(record: SectionRecord, manifest: &mut Manifest) -> Result<(), IngestError> {
    let inconsistent = |reason: &str| IngestError::InconsistentRecord {
        section: record.section_name.clone(),
        reason: reason.to_string(),
    };
    if record.checked_by.is_some() && record.checked_date.is_none() {
        return Err(inconsistent("checked_by given without a checked date"));
    }
    if record.checked_by.is_none() && record.checked_date.is_some() {
        return Err(inconsistent("checked date given without checked_by"));
    }
    if let (Some(drafted), Some(checked)) = (record.drafted_date, record.checked_date) {
        if checked < drafted {
            return Err(inconsistent("checked date precedes drafted date"));
        }
    }
    manifest.sections.push(record);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Manifest, IngestError> {
        parse_manifest(text, PathBuf::new())
    }

    #[test]
    fn empty_manifest_is_valid() {
        let m = parse("").unwrap();
        assert!(m.sections.is_empty());
        assert!(m.spec_path.is_none());
    }

    #[test]
    fn full_record() {
        let m = parse(
            "spec = spec.md\n\n[section Revenue]\ndescription = Revenue lines\nauthor = A\ndrafted = 2026-01-05\nchecked_by = B\nchecked = 2026-01-06\n",
        )
        .unwrap();
        assert_eq!(m.spec_path.as_deref(), Some("spec.md"));
        let r = m.section("Revenue").unwrap();
        assert_eq!(r.author, "A");
        assert_eq!(r.checked_by.as_deref(), Some("B"));
        assert_eq!(
            r.drafted_date,
            Some(NaiveDate::from_ymd_opt(2026, 1, 5).unwrap())
        );
    }

    #[test]
    fn checked_by_without_date_is_inconsistent() {
        let err = parse("[section S]\nchecked_by = B\n").unwrap_err();
        assert!(matches!(err, IngestError::InconsistentRecord { .. }));
    }

    #[test]
    fn checked_before_drafted_is_inconsistent() {
        let err = parse(
            "[section S]\ndrafted = 2026-02-01\nchecked_by = B\nchecked = 2026-01-01\n",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::InconsistentRecord { .. }));
    }

    #[test]
    fn duplicate_section_rejected() {
        let err = parse("[section Revenue]\n[section Revenue]\n").unwrap_err();
        assert!(matches!(err, IngestError::ManifestSyntax { .. }));
    }

    #[test]
    fn region_declarations() {
        let m = parse("region.input = Model!A1:B10\nregion.check = Checks!A1:Z99\n").unwrap();
        assert_eq!(m.regions.len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse("bogus = 1\n").is_err());
        assert!(parse("[section S]\nbogus = 1\n").is_err());
        assert!(parse("region.bogus = S!A1:A2\n").is_err());
    }

    #[test]
    fn bad_fingerprint_rejected() {
        assert!(parse("[section S]\nfingerprint = xyz\n").is_err());
        assert!(parse(&format!("[section S]\nfingerprint = {}\n", "A".repeat(64))).is_err());
        assert!(parse(&format!("[section S]\nfingerprint = {}\n", "a".repeat(64))).is_ok());
    }
}
