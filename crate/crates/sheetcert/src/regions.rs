//! Region inference: classify every non-empty cell as Input / Calculation /
//! Output / Label / Check and group rows into blank-row-delimited sections.
//!
//! Priority order: declared ranges win; then sheet-name conventions
//! (`input*`, `output*`/`print*`, `check*`); then dependency heuristics
//! (formulas calculate, referenced constants are inputs, unreferenced text
//! labels, other unreferenced constants are outputs). Calculation cells in
//! sections titled `*check*` become Check cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::formula::{normalize, render};
use crate::graph::{DepGraph, QualifiedAddr};
use crate::model::{addr_from_a1, content_line, CellAddr, CellContent, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellClass {
    Input,
    Calculation,
    Output,
    Label,
    Check,
}

impl CellClass {
    pub fn name(&self) -> &'static str {
        match self {
            CellClass::Input => "input",
            CellClass::Calculation => "calculation",
            CellClass::Output => "output",
            CellClass::Label => "label",
            CellClass::Check => "check",
        }
    }

    pub fn from_name(name: &str) -> Option<CellClass> {
        match name {
            "input" => Some(CellClass::Input),
            "calculation" => Some(CellClass::Calculation),
            "output" => Some(CellClass::Output),
            "label" => Some(CellClass::Label),
            "check" => Some(CellClass::Check),
            _ => None,
        }
    }
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A declared region: `<class>` over `<Sheet>!<A1>:<A1>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionDecl {
    pub class: CellClass,
    pub sheet: String,
    pub start: CellAddr,
    pub end: CellAddr,
}

impl fmt::Display for RegionDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}!{}:{}", self.class, self.sheet, self.start, self.end)
    }
}

/// Parse a declaration like class `input`, value `Model!A1:B10`.
/// A single-cell value `Model!A1` covers one cell.
pub fn parse_region_decl(class: &str, value: &str) -> Result<RegionDecl, String> {
    let class = CellClass::from_name(class).ok_or_else(|| format!("unknown class `{class}`"))?;
    let (sheet, range) = value
        .split_once('!')
        .ok_or_else(|| format!("`{value}` lacks a `Sheet!` qualifier"))?;
    let sheet = sheet.trim().trim_matches('\'');
    if sheet.is_empty() {
        return Err("empty sheet name".to_string());
    }
    let (a, b) = match range.split_once(':') {
        Some((a, b)) => (a, b),
        None => (range, range),
    };
    let a = addr_from_a1(a.trim()).map_err(|e| e.to_string())?.addr;
    let b = addr_from_a1(b.trim()).map_err(|e| e.to_string())?.addr;
    Ok(RegionDecl {
        class,
        sheet: sheet.to_string(),
        start: CellAddr::new(a.row.min(b.row), a.col.min(b.col)),
        end: CellAddr::new(a.row.max(b.row), a.col.max(b.col)),
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegionError {
    #[error("declared regions assign both {first} and {second} to {addr}")]
    OverrideConflict {
        addr: QualifiedAddr,
        first: CellClass,
        second: CellClass,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionKind {
    InputSection,
    CalcSection,
    OutputSection,
    CheckSection,
}

/// A blank-row-delimited block of rows on one sheet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub sheet: String,
    pub first_row: u32,
    pub last_row: u32,
    pub title: Option<String>,
    pub kind: SectionKind,
}

impl Section {
    /// Title when present, else a synthetic `rows N-M` designation.
    pub fn display_name(&self) -> String {
        match &self.title {
            Some(t) => t.clone(),
            None => format!("rows {}-{}", self.first_row, self.last_row),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionMap {
    pub class_of: BTreeMap<QualifiedAddr, CellClass>,
    pub sections: Vec<Section>,
    /// Workbook sheet order, kept for deterministic reporting.
    pub sheet_order: Vec<String>,
}

impl RegionMap {
    pub fn class(&self, qa: &QualifiedAddr) -> Option<CellClass> {
        self.class_of.get(qa).copied()
    }

    pub fn sheet_pos(&self, name: &str) -> Option<usize> {
        self.sheet_order.iter().position(|s| s == name)
    }

    /// Cells of a given class, in (sheet order, address) order.
    pub fn cells_of_class(&self, class: CellClass) -> Vec<QualifiedAddr> {
        let mut v: Vec<QualifiedAddr> = self
            .class_of
            .iter()
            .filter(|(_, c)| **c == class)
            .map(|(qa, _)| qa.clone())
            .collect();
        v.sort_by_key(|qa| (self.sheet_pos(&qa.sheet), qa.addr));
        v
    }
}

/// Sheet-name conventions: what class a name like `Inputs` or `Check_FX`
/// implies for the sheet's non-label cells.
fn sheet_name_class(name: &str) -> Option<CellClass> {
    let lower = name.trim().to_ascii_lowercase();
    if lower.starts_with("input") {
        Some(CellClass::Input)
    } else if lower.starts_with("output") || lower.starts_with("print") {
        Some(CellClass::Output)
    } else if lower.starts_with("check") {
        Some(CellClass::Check)
    } else {
        None
    }
}

/// Classify every non-empty cell and compute sections.
pub fn infer(
    wb: &Workbook,
    g: &DepGraph,
    overrides: &[RegionDecl],
) -> Result<RegionMap, RegionError> {
    // declared ranges, with conflict detection over non-empty cells
    let mut declared: BTreeMap<QualifiedAddr, CellClass> = BTreeMap::new();
    for decl in overrides {
        let sheet = match wb.sheet_ci(&decl.sheet) {
            Some(s) => s,
            None => continue,
        };
        for (addr, _) in sheet
            .cells
            .range(CellAddr::new(decl.start.row, 1)..=CellAddr::new(decl.end.row, crate::model::MAX_COL))
        {
            if addr.col < decl.start.col || addr.col > decl.end.col {
                continue;
            }
            let qa = QualifiedAddr::new(sheet.name.clone(), *addr);
            if let Some(prev) = declared.get(&qa) {
                if *prev != decl.class {
                    return Err(RegionError::OverrideConflict {
                        addr: qa,
                        first: *prev,
                        second: decl.class,
                    });
                }
            } else {
                declared.insert(qa, decl.class);
            }
        }
    }

    let mut class_of: BTreeMap<QualifiedAddr, CellClass> = BTreeMap::new();
    for sheet in &wb.sheets {
        let name_class = sheet_name_class(&sheet.name);
        for (addr, cell) in &sheet.cells {
            let qa = QualifiedAddr::new(sheet.name.clone(), *addr);
            let is_formula = cell.content.is_formula();

            // formula cells are always Calculation or Check; declarations of
            // other classes on them fall through to the heuristics
            if let Some(&c) = declared.get(&qa) {
                if !is_formula || matches!(c, CellClass::Calculation | CellClass::Check) {
                    class_of.insert(qa, c);
                    continue;
                }
            }

            let has_dependents = !g.direct_dependents(&qa).is_empty();
            let is_label = cell.content.is_text() && !has_dependents;
            let class = if is_label {
                CellClass::Label
            } else if let Some(c) = name_class {
                if is_formula {
                    if c == CellClass::Check {
                        CellClass::Check
                    } else {
                        CellClass::Calculation
                    }
                } else {
                    c
                }
            } else if is_formula {
                CellClass::Calculation
            } else if has_dependents {
                CellClass::Input
            } else {
                CellClass::Output
            };
            class_of.insert(qa, class);
        }
    }

    let mut sections = sectionize_classes(wb, &class_of);

    // calculation cells inside sections titled *check* become checks,
    // unless a declaration pinned them
    for section in &sections {
        let title_is_check = section
            .title
            .as_deref()
            .map(|t| t.to_ascii_lowercase().contains("check"))
            .unwrap_or(false);
        if !title_is_check {
            continue;
        }
        let keys: Vec<QualifiedAddr> = class_of
            .range(
                QualifiedAddr::new(section.sheet.clone(), CellAddr::new(section.first_row, 1))
                    ..=QualifiedAddr::new(
                        section.sheet.clone(),
                        CellAddr::new(section.last_row, crate::model::MAX_COL),
                    ),
            )
            .filter(|(qa, c)| {
                qa.sheet == section.sheet
                    && **c == CellClass::Calculation
                    && !declared.contains_key(qa)
            })
            .map(|(qa, _)| qa.clone())
            .collect();
        for qa in keys {
            class_of.insert(qa, CellClass::Check);
        }
    }

    // section kinds reflect the final classes
    for section in &mut sections {
        section.kind = section_kind(section, &class_of);
    }

    Ok(RegionMap {
        class_of,
        sections,
        sheet_order: wb.sheets.iter().map(|s| s.name.clone()).collect(),
    })
}

/// Group each sheet's populated rows into maximal runs separated by fully
/// blank rows. A section's title is the text of the leftmost Label cell in
/// its first row.
pub fn sectionize(wb: &Workbook, rm: &RegionMap) -> Vec<Section> {
    let mut sections = sectionize_classes(wb, &rm.class_of);
    for section in &mut sections {
        section.kind = section_kind(section, &rm.class_of);
    }
    sections
}

fn sectionize_classes(
    wb: &Workbook,
    class_of: &BTreeMap<QualifiedAddr, CellClass>,
) -> Vec<Section> {
    let mut sections = Vec::new();
    for sheet in &wb.sheets {
        let rows: BTreeSet<u32> = sheet.cells.keys().map(|a| a.row).collect();
        let mut run_start: Option<u32> = None;
        let mut prev: Option<u32> = None;
        for &row in rows.iter() {
            match prev {
                Some(p) if row == p + 1 => {}
                Some(p) => {
                    sections.push(make_section(sheet, run_start.unwrap(), p, class_of));
                    run_start = Some(row);
                }
                None => run_start = Some(row),
            }
            prev = Some(row);
        }
        if let (Some(start), Some(end)) = (run_start, prev) {
            sections.push(make_section(sheet, start, end, class_of));
        }
    }
    sections
}

fn make_section(
    sheet: &crate::model::Sheet,
    first_row: u32,
    last_row: u32,
    class_of: &BTreeMap<QualifiedAddr, CellClass>,
) -> Section {
    // leftmost Label cell of the first row provides the title
    let title = sheet
        .cells
        .range(CellAddr::new(first_row, 1)..=CellAddr::new(first_row, crate::model::MAX_COL))
        .find_map(|(addr, cell)| {
            let qa = QualifiedAddr::new(sheet.name.clone(), *addr);
            match (&cell.content, class_of.get(&qa)) {
                (CellContent::Text(t), Some(CellClass::Label)) => Some(t.clone()),
                _ => None,
            }
        });
    let mut section = Section {
        sheet: sheet.name.clone(),
        first_row,
        last_row,
        title,
        kind: SectionKind::OutputSection,
    };
    section.kind = section_kind(&section, class_of);
    section
}

/// Majority non-label class decides the kind; a `*check*` title forces
/// CheckSection; label-only sections count as presentation (output).
fn section_kind(section: &Section, class_of: &BTreeMap<QualifiedAddr, CellClass>) -> SectionKind {
    if let Some(t) = &section.title {
        if t.to_ascii_lowercase().contains("check") {
            return SectionKind::CheckSection;
        }
    }
    let mut counts: BTreeMap<CellClass, usize> = BTreeMap::new();
    for (qa, c) in class_of.range(
        QualifiedAddr::new(section.sheet.clone(), CellAddr::new(section.first_row, 1))
            ..=QualifiedAddr::new(
                section.sheet.clone(),
                CellAddr::new(section.last_row, crate::model::MAX_COL),
            ),
    ) {
        if qa.sheet == section.sheet && *c != CellClass::Label {
            *counts.entry(*c).or_insert(0) += 1;
        }
    }
    let pick = [
        (CellClass::Calculation, SectionKind::CalcSection),
        (CellClass::Input, SectionKind::InputSection),
        (CellClass::Output, SectionKind::OutputSection),
        (CellClass::Check, SectionKind::CheckSection),
    ];
    let mut best = SectionKind::OutputSection;
    let mut best_count = 0usize;
    for (class, kind) in pick {
        let n = counts.get(&class).copied().unwrap_or(0);
        if n > best_count {
            best = kind;
            best_count = n;
        }
    }
    best
}

/// A spot where regions fail to separate: a row mixing inputs with
/// calculations, or a section mixing classes across its rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaving {
    pub sheet: String,
    pub row: u32,
    pub description: String,
}

/// Rows that contain both Input and Calculation cells, plus sections whose
/// rows mix ≥ 2 of {Input, Calculation, Output} without any single row
/// already reported. Label and Check cells never count.
pub fn interleavings(rm: &RegionMap) -> Vec<Interleaving> {
    let mut row_classes: BTreeMap<(String, u32), BTreeSet<CellClass>> = BTreeMap::new();
    for (qa, c) in &rm.class_of {
        row_classes
            .entry((qa.sheet.clone(), qa.addr.row))
            .or_default()
            .insert(*c);
    }

    let mut out = Vec::new();
    let mut row_hits: BTreeSet<(String, u32)> = BTreeSet::new();
    for ((sheet, row), classes) in &row_classes {
        if classes.contains(&CellClass::Input) && classes.contains(&CellClass::Calculation) {
            row_hits.insert((sheet.clone(), *row));
            out.push(Interleaving {
                sheet: sheet.clone(),
                row: *row,
                description: format!("row {row} mixes input and calculation cells"),
            });
        }
    }

    for section in &rm.sections {
        let already = row_hits
            .range((section.sheet.clone(), section.first_row)..=(section.sheet.clone(), section.last_row))
            .next()
            .is_some();
        if already {
            continue;
        }
        let mut mixed: BTreeSet<CellClass> = BTreeSet::new();
        for row in section.first_row..=section.last_row {
            if let Some(classes) = row_classes.get(&(section.sheet.clone(), row)) {
                for c in classes {
                    if matches!(c, CellClass::Input | CellClass::Calculation | CellClass::Output) {
                        mixed.insert(*c);
                    }
                }
            }
        }
        if mixed.len() >= 2 {
            let names: Vec<&str> = mixed.iter().map(|c| c.name()).collect();
            out.push(Interleaving {
                sheet: section.sheet.clone(),
                row: section.first_row,
                description: format!(
                    "section `{}` mixes {} cells",
                    section.display_name(),
                    names.join(" and ")
                ),
            });
        }
    }

    out.sort_by_key(|i| (rm.sheet_pos(&i.sheet), i.row, i.description.clone()));
    out
}

/// Hash of a section's structure: addresses and classes of all cells,
/// offset-normalized formulas, labels and other literals — but input cell
/// values excluded, so data-only edits leave the fingerprint unchanged.
pub fn section_fingerprint(wb: &Workbook, rm: &RegionMap, section: &Section) -> String {
    let mut text = format!("section {}\n", section.sheet.replace('\n', " "));
    if let Some(sheet) = wb.sheet(&section.sheet) {
        for (addr, cell) in sheet
            .cells
            .range(CellAddr::new(section.first_row, 1)..=CellAddr::new(section.last_row, crate::model::MAX_COL))
        {
            let qa = QualifiedAddr::new(sheet.name.clone(), *addr);
            let class = rm.class(&qa).unwrap_or(CellClass::Output);
            if class == CellClass::Input {
                text.push_str(&format!("cell {} {} input\n", addr.row, addr.col));
                continue;
            }
            let body = match &cell.content {
                CellContent::Formula { ast, .. } => {
                    let shown = normalize(ast, *addr)
                        .map(|n| render(&n))
                        .unwrap_or_else(|_| render(ast));
                    format!("formula {shown}")
                }
                other => content_line(other),
            };
            text.push_str(&format!("cell {} {} {} {}\n", addr.row, addr.col, class, body));
        }
    }
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}
