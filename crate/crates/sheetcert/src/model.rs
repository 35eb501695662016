//! Immutable in-memory workbook model and canonical cell addressing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::formula::{render, Expr};

/// XLSX grid limits; addresses outside this range are ingestion errors.
pub const MAX_ROW: u32 = 1_048_576;
pub const MAX_COL: u32 = 16_384;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddrError {
    #[error("malformed cell address `{0}`")]
    MalformedAddress(String),
}

/// 1-based cell coordinate. Ordering is (row, col) lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellAddr {
    pub row: u32,
    pub col: u32,
}

impl CellAddr {
    pub fn new(row: u32, col: u32) -> Self {
        debug_assert!(row >= 1 && col >= 1);
        CellAddr { row, col }
    }

    pub fn in_grid(&self) -> bool {
        (1..=MAX_ROW).contains(&self.row) && (1..=MAX_COL).contains(&self.col)
    }
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", addr_to_a1(*self))
    }
}

/// A parsed A1-style address with per-axis absolute markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct A1Ref {
    pub addr: CellAddr,
    pub abs_row: bool,
    pub abs_col: bool,
}

/// Decode column letters as bijective base-26 (A=1 .. XFD=16384).
pub fn col_from_letters(letters: &str) -> Option<u32> {
    if letters.is_empty() {
        return None;
    }
    let mut col: u64 = 0;
    for ch in letters.chars() {
        let v = match ch {
            'A'..='Z' => ch as u64 - 'A' as u64 + 1,
            'a'..='z' => ch as u64 - 'a' as u64 + 1,
            _ => return None,
        };
        col = col * 26 + v;
        if col > MAX_COL as u64 {
            return None;
        }
    }
    Some(col as u32)
}

/// Encode a 1-based column number as letters.
pub fn col_to_letters(mut col: u32) -> String {
    debug_assert!(col >= 1);
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push((b'A' + rem as u8) as char);
        col = (col - 1) / 26;
    }
    out.iter().rev().collect()
}

/// Parse an A1-style address like `B2`, `$B$2` or `$AA10`.
pub fn addr_from_a1(text: &str) -> Result<A1Ref, AddrError> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let abs_col = bytes.first() == Some(&b'$');
    if abs_col {
        i += 1;
    }
    let col_start = i;
    while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
        i += 1;
    }
    let col_str = &text[col_start..i];
    let abs_row = bytes.get(i) == Some(&b'$');
    if abs_row {
        i += 1;
    }
    let row_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let row_str = &text[row_start..i];
    if i != bytes.len() || col_str.is_empty() || row_str.is_empty() {
        return Err(AddrError::MalformedAddress(text.to_string()));
    }
    let col = col_from_letters(col_str).ok_or_else(|| AddrError::MalformedAddress(text.to_string()))?;
    let row: u32 = row_str
        .parse()
        .ok()
        .filter(|r| (1..=MAX_ROW).contains(r))
        .ok_or_else(|| AddrError::MalformedAddress(text.to_string()))?;
    Ok(A1Ref {
        addr: CellAddr::new(row, col),
        abs_row,
        abs_col,
    })
}

/// Render a CellAddr in relative A1 form.
pub fn addr_to_a1(addr: CellAddr) -> String {
    format!("{}{}", col_to_letters(addr.col), addr.row)
}

/// Numeric literal held as canonical decimal text so that AST comparison
/// and allow-list matching never go through floating point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NumberLit(String);

impl NumberLit {
    /// Canonicalize a decimal literal: strip leading/trailing zeros, fold
    /// exponents into plain decimal form when the result stays short.
    pub fn parse(text: &str) -> Option<NumberLit> {
        let t = text.trim();
        let mut chars = t.chars().peekable();
        let mut neg = false;
        match chars.peek() {
            Some('+') => {
                chars.next();
            }
            Some('-') => {
                neg = true;
                chars.next();
            }
            _ => {}
        }
        let mut int_part = String::new();
        let mut frac_part = String::new();
        while let Some(c) = chars.peek() {
            if c.is_ascii_digit() {
                int_part.push(*c);
                chars.next();
            } else {
                break;
            }
        }
        if chars.peek() == Some(&'.') {
            chars.next();
            while let Some(c) = chars.peek() {
                if c.is_ascii_digit() {
                    frac_part.push(*c);
                    chars.next();
                } else {
                    break;
                }
            }
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        let mut exp: i64 = 0;
        if matches!(chars.peek(), Some('e') | Some('E')) {
            chars.next();
            let mut exp_neg = false;
            match chars.peek() {
                Some('+') => {
                    chars.next();
                }
                Some('-') => {
                    exp_neg = true;
                    chars.next();
                }
                _ => {}
            }
            let mut digits = String::new();
            while let Some(c) = chars.peek() {
                if c.is_ascii_digit() {
                    digits.push(*c);
                    chars.next();
                } else {
                    break;
                }
            }
            if digits.is_empty() {
                return None;
            }
            exp = digits.parse().ok()?;
            if exp_neg {
                exp = -exp;
            }
        }
        if chars.next().is_some() {
            return None;
        }

        // digits = int_part ++ frac_part, value = digits * 10^(exp - frac_len)
        let mut digits: String = format!("{int_part}{frac_part}");
        let mut scale = exp - frac_part.len() as i64;
        let lead = digits.len() - digits.trim_start_matches('0').len();
        digits.drain(..lead);
        while digits.ends_with('0') {
            digits.pop();
            scale += 1;
        }
        if digits.is_empty() {
            return Some(NumberLit("0".to_string()));
        }

        let point = digits.len() as i64 + scale; // decimal point position from the left
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        if scale >= 0 && point <= 21 {
            out.push_str(&digits);
            for _ in 0..scale {
                out.push('0');
            }
        } else if point > 0 && point <= 21 {
            out.push_str(&digits[..point as usize]);
            out.push('.');
            out.push_str(&digits[point as usize..]);
        } else if point <= 0 && point > -6 {
            out.push_str("0.");
            for _ in 0..(-point) {
                out.push('0');
            }
            out.push_str(&digits);
        } else {
            // keep exponent form for extreme magnitudes
            out.push_str(&digits[..1]);
            if digits.len() > 1 {
                out.push('.');
                out.push_str(&digits[1..]);
            }
            out.push('e');
            out.push_str(&(point - 1).to_string());
        }
        Some(NumberLit(out))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Canonical text of the negated value.
    pub fn negated(&self) -> NumberLit {
        if self.0 == "0" {
            self.clone()
        } else if let Some(rest) = self.0.strip_prefix('-') {
            NumberLit(rest.to_string())
        } else {
            NumberLit(format!("-{}", self.0))
        }
    }
}

impl fmt::Display for NumberLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Content of a stored (non-empty) cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellContent {
    Number(NumberLit),
    Text(String),
    Bool(bool),
    /// Error code text such as `#REF!`.
    Error(String),
    /// Formula source (with leading `=`) plus its parsed AST. Parse failures
    /// are ingestion errors and never stored.
    Formula { source: String, ast: Expr },
}

impl CellContent {
    pub fn is_formula(&self) -> bool {
        matches!(self, CellContent::Formula { .. })
    }

    pub fn is_text(&self) -> bool {
        matches!(self, CellContent::Text(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub addr: CellAddr,
    pub content: CellContent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheetVisibility {
    Visible,
    Hidden,
    VeryHidden,
}

#[derive(Debug, Clone)]
pub struct Sheet {
    pub name: String,
    pub visibility: SheetVisibility,
    pub cells: BTreeMap<CellAddr, Cell>,
    pub hidden_rows: BTreeSet<u32>,
    pub hidden_cols: BTreeSet<u32>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Sheet {
            name: name.into(),
            visibility: SheetVisibility::Visible,
            cells: BTreeMap::new(),
            hidden_rows: BTreeSet::new(),
            hidden_cols: BTreeSet::new(),
        }
    }

    pub fn cell(&self, addr: CellAddr) -> Option<&Cell> {
        self.cells.get(&addr)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkbookSettings {
    pub iteration_enabled: bool,
    /// Absent when the source format cannot express the option.
    pub accept_labels_in_formulas: Option<bool>,
}

/// The immutable analysis subject. Sheet order is preserved from the source
/// file; sheet names are unique.
#[derive(Debug, Clone)]
pub struct Workbook {
    pub sheets: Vec<Sheet>,
    pub settings: WorkbookSettings,
    pub source_path: String,
}

impl Workbook {
    pub fn new(source_path: impl Into<String>) -> Self {
        Workbook {
            sheets: Vec::new(),
            settings: WorkbookSettings::default(),
            source_path: source_path.into(),
        }
    }

    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets.iter().find(|s| s.name == name)
    }

    /// Case-insensitive lookup, the way formula references resolve sheet names.
    pub fn sheet_ci(&self, name: &str) -> Option<&Sheet> {
        self.sheets
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn sheet_index(&self, name: &str) -> Option<usize> {
        self.sheets
            .iter()
            .position(|s| s.name.eq_ignore_ascii_case(name))
    }
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(ch),
        }
    }
    out
}

pub(crate) fn content_line(content: &CellContent) -> String {
    match content {
        CellContent::Number(n) => format!("num {n}"),
        CellContent::Text(t) => format!("text {}", escape_text(t)),
        CellContent::Bool(b) => format!("bool {b}"),
        CellContent::Error(e) => format!("err {e}"),
        CellContent::Formula { ast, .. } => format!("formula ={}", render(ast)),
    }
}

/// Deterministic byte serialization of workbook content. Identical model
/// content yields identical bytes regardless of the source file's byte
/// layout; the source path is excluded.
pub fn canonical_serialize(wb: &Workbook) -> Vec<u8> {
    canonical_serialize_filtered(wb, |_, _| true)
}

/// Canonical serialization where cells rejected by `include_value` contribute
/// their address only (tagged `data`). Used for structural fingerprints that
/// must survive data-only edits.
pub fn canonical_serialize_filtered<F>(wb: &Workbook, include_value: F) -> Vec<u8>
where
    F: Fn(&str, CellAddr) -> bool,
{
    let mut out = String::new();
    for (i, sheet) in wb.sheets.iter().enumerate() {
        let vis = match sheet.visibility {
            SheetVisibility::Visible => "visible",
            SheetVisibility::Hidden => "hidden",
            SheetVisibility::VeryHidden => "veryhidden",
        };
        out.push_str(&format!("sheet {i} {vis} {}\n", escape_text(&sheet.name)));
        if !sheet.hidden_rows.is_empty() {
            let rows: Vec<String> = sheet.hidden_rows.iter().map(|r| r.to_string()).collect();
            out.push_str(&format!("hiddenrows {}\n", rows.join(",")));
        }
        if !sheet.hidden_cols.is_empty() {
            let cols: Vec<String> = sheet.hidden_cols.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("hiddencols {}\n", cols.join(",")));
        }
        for (addr, cell) in &sheet.cells {
            if include_value(&sheet.name, *addr) {
                out.push_str(&format!(
                    "cell {} {} {}\n",
                    addr.row,
                    addr.col,
                    content_line(&cell.content)
                ));
            } else {
                out.push_str(&format!("cell {} {} data\n", addr.row, addr.col));
            }
        }
    }
    let labels = match wb.settings.accept_labels_in_formulas {
        None => "none",
        Some(true) => "1",
        Some(false) => "0",
    };
    out.push_str(&format!(
        "settings iteration={} labels={}\n",
        if wb.settings.iteration_enabled { "1" } else { "0" },
        labels
    ));
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a1_first_cell() {
        let r = addr_from_a1("A1").unwrap();
        assert_eq!(r.addr, CellAddr::new(1, 1));
        assert!(!r.abs_row && !r.abs_col);
    }

    #[test]
    fn a1_absolute_markers() {
        let r = addr_from_a1("$B$2").unwrap();
        assert_eq!(r.addr, CellAddr::new(2, 2));
        assert!(r.abs_row && r.abs_col);
        let r = addr_from_a1("$AA10").unwrap();
        assert!(r.abs_col && !r.abs_row);
    }

    #[test]
    fn a1_bijective_base26() {
        // oracle: AA = 26*1 + 1 = 27
        assert_eq!(addr_from_a1("AA10").unwrap().addr, CellAddr::new(10, 27));
        // AZ = 26*1 + 26 = 52
        assert_eq!(addr_to_a1(CellAddr::new(5, 52)), "AZ5");
        assert_eq!(addr_to_a1(CellAddr::new(1, 1)), "A1");
        assert_eq!(addr_to_a1(CellAddr::new(10, 27)), "AA10");
        assert_eq!(col_from_letters("XFD"), Some(MAX_COL));
        assert_eq!(col_to_letters(MAX_COL), "XFD");
    }

    #[test]
    fn a1_rejects_garbage() {
        for bad in ["", "1A", "A", "12", "A0", "XFE1", "A1048577", "A1B", "$", "A$"] {
            assert!(addr_from_a1(bad).is_err(), "{bad} should be rejected");
        }
    }

    #[test]
    fn number_canonicalization() {
        for (input, want) in [
            ("5", "5"),
            ("5.0", "5"),
            ("05", "5"),
            ("1.050", "1.05"),
            (".5", "0.5"),
            ("0.50", "0.5"),
            ("1e2", "100"),
            ("1.5e1", "15"),
            ("1.5e-2", "0.015"),
            ("-0", "0"),
            ("-1.20", "-1.2"),
            ("100", "100"),
            ("2e30", "2e30"),
        ] {
            assert_eq!(NumberLit::parse(input).unwrap().as_str(), want, "input {input}");
        }
        assert!(NumberLit::parse("abc").is_none());
        assert!(NumberLit::parse("1e").is_none());
        assert!(NumberLit::parse("").is_none());
    }

    #[test]
    fn canonical_serialize_excludes_path() {
        let mut a = Workbook::new("one.xlsx");
        let mut b = Workbook::new("other/two.xlsx");
        let mut sheet = Sheet::new("S1");
        sheet.cells.insert(
            CellAddr::new(1, 1),
            Cell {
                addr: CellAddr::new(1, 1),
                content: CellContent::Number(NumberLit::parse("5").unwrap()),
            },
        );
        a.sheets.push(sheet.clone());
        b.sheets.push(sheet);
        assert_eq!(canonical_serialize(&a), canonical_serialize(&b));
    }

    #[test]
    fn canonical_serialize_sensitive_to_content() {
        let mut a = Workbook::new("w");
        let mut sheet = Sheet::new("S1");
        sheet.cells.insert(
            CellAddr::new(1, 1),
            Cell {
                addr: CellAddr::new(1, 1),
                content: CellContent::Text("x".into()),
            },
        );
        a.sheets.push(sheet);
        let mut b = a.clone();
        b.sheets[0].cells.get_mut(&CellAddr::new(1, 1)).unwrap().content =
            CellContent::Text("y".into());
        assert_ne!(canonical_serialize(&a), canonical_serialize(&b));
    }
}
