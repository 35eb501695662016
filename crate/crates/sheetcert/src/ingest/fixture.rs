//! Plain-text workbook fixtures, one statement per line:
//!
//! ```text
//! # comment
//! !sheet Model
//! !hidden
//! !hidden-rows 3,4
//! !hidden-cols B,C
//! !iteration on
//! !labels-in-formulas off
//! A1: 5
//! B2: =A2*2
//! C1: "label text"
//! D1: true
//! E1: #REF!
//! ```

use std::path::Path;

use crate::formula::parse;
use crate::model::{
    addr_from_a1, col_from_letters, Cell, CellContent, NumberLit, Sheet, SheetVisibility, Workbook,
};

use super::IngestError;

const ERROR_CODES: &[&str] = &[
    "#VALUE!", "#DIV/0!", "#NAME?", "#NULL!", "#REF!", "#NUM!", "#N/A",
];

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Workbook, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    load_fixture_str(&text, &path.display().to_string())
}

pub fn load_fixture_str(text: &str, source_path: &str) -> Result<Workbook, IngestError> {
    let mut wb = Workbook::new(source_path);

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |reason: String| IngestError::FixtureSyntax {
            line: line_no,
            reason,
        };

        if let Some(directive) = line.strip_prefix('!') {
            let (name, arg) = match directive.split_once(char::is_whitespace) {
                Some((n, a)) => (n, a.trim()),
                None => (directive, ""),
            };
            match name {
                "sheet" => {
                    if arg.is_empty() {
                        return Err(syntax("sheet name required".into()));
                    }
                    if wb.sheets.iter().any(|s| s.name == arg) {
                        return Err(syntax(format!("duplicate sheet name `{arg}`")));
                    }
                    wb.sheets.push(Sheet::new(arg));
                }
                "hidden" => {
                    let sheet = wb
                        .sheets
                        .last_mut()
                        .ok_or_else(|| syntax("!hidden before any !sheet".into()))?;
                    sheet.visibility = SheetVisibility::Hidden;
                }
                "hidden-rows" => {
                    let sheet = wb
                        .sheets
                        .last_mut()
                        .ok_or_else(|| syntax("!hidden-rows before any !sheet".into()))?;
                    for part in arg.split(',') {
                        let row: u32 = part
                            .trim()
                            .parse()
                            .ok()
                            .filter(|r| *r >= 1)
                            .ok_or_else(|| syntax(format!("bad row number `{part}`")))?;
                        sheet.hidden_rows.insert(row);
                    }
                }
                "hidden-cols" => {
                    let sheet = wb
                        .sheets
                        .last_mut()
                        .ok_or_else(|| syntax("!hidden-cols before any !sheet".into()))?;
                    for part in arg.split(',') {
                        let col = col_from_letters(part.trim())
                            .ok_or_else(|| syntax(format!("bad column letters `{part}`")))?;
                        sheet.hidden_cols.insert(col);
                    }
                }
                "iteration" => {
                    wb.settings.iteration_enabled = parse_on_off(arg)
                        .ok_or_else(|| syntax("expected `on` or `off`".into()))?;
                }
                "labels-in-formulas" => {
                    wb.settings.accept_labels_in_formulas = Some(
                        parse_on_off(arg).ok_or_else(|| syntax("expected `on` or `off`".into()))?,
                    );
                }
                other => return Err(syntax(format!("unknown directive `!{other}`"))),
            }
            continue;
        }

        // cell statement: <addr>: <content>
        let (addr_text, content_text) = line
            .split_once(':')
            .ok_or_else(|| syntax("expected `<addr>: <content>`".into()))?;
        let addr = addr_from_a1(addr_text.trim())
            .map_err(|e| syntax(e.to_string()))?
            .addr;
        let content = parse_content(content_text.trim(), line_no)?;

        let sheet = wb
            .sheets
            .last_mut()
            .ok_or_else(|| syntax("cell statement before any !sheet".into()))?;
        if sheet.cells.contains_key(&addr) {
            return Err(IngestError::DuplicateCell {
                sheet: sheet.name.clone(),
                addr,
            });
        }
        sheet.cells.insert(addr, Cell { addr, content });
    }

    Ok(wb)
}

fn parse_on_off(arg: &str) -> Option<bool> {
    match arg {
        "on" => Some(true),
        "off" => Some(false),
        _ => None,
    }
}

fn parse_content(text: &str, line_no: usize) -> Result<CellContent, IngestError> {
    let syntax = |reason: String| IngestError::FixtureSyntax {
        line: line_no,
        reason,
    };
    if text.is_empty() {
        return Err(syntax("empty cell content (leave the cell out instead)".into()));
    }
    if text.starts_with('=') {
        let ast = parse(text).map_err(|e| syntax(format!("formula: {e}")))?;
        return Ok(CellContent::Formula {
            source: text.to_string(),
            ast,
        });
    }
    if let Some(body) = text.strip_prefix('"') {
        let mut out = String::new();
        let mut chars = body.chars().peekable();
        loop {
            match chars.next() {
                Some('"') if chars.peek() == Some(&'"') => {
                    out.push('"');
                    chars.next();
                }
                Some('"') => {
                    if chars.next().is_some() {
                        return Err(syntax("trailing characters after closing quote".into()));
                    }
                    return Ok(CellContent::Text(out));
                }
                Some(c) => out.push(c),
                None => return Err(syntax("unterminated string literal".into())),
            }
        }
    }
    if text.eq_ignore_ascii_case("true") {
        return Ok(CellContent::Bool(true));
    }
    if text.eq_ignore_ascii_case("false") {
        return Ok(CellContent::Bool(false));
    }
    if text.starts_with('#') {
        let upper = text.to_ascii_uppercase();
        if ERROR_CODES.contains(&upper.as_str()) {
            return Ok(CellContent::Error(upper));
        }
        return Err(syntax(format!("unknown error literal `{text}`")));
    }
    match NumberLit::parse(text) {
        Some(n) => Ok(CellContent::Number(n)),
        None => Err(syntax(format!("unrecognized cell content `{text}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CellAddr;

    #[test]
    fn minimal_sheet_and_number() {
        let wb = load_fixture_str("!sheet S1\nA1: 5\n", "t").unwrap();
        assert_eq!(wb.sheets.len(), 1);
        let cell = wb.sheets[0].cell(CellAddr::new(1, 1)).unwrap();
        assert!(matches!(cell.content, CellContent::Number(ref n) if n.as_str() == "5"));
    }

    #[test]
    fn formula_cell_has_parsed_ast() {
        let wb = load_fixture_str("!sheet S1\nB2: =A2*2\n", "t").unwrap();
        let cell = wb.sheets[0].cell(CellAddr::new(2, 2)).unwrap();
        assert!(cell.content.is_formula());
    }

    #[test]
    fn iteration_directive() {
        let wb = load_fixture_str("!sheet S1\n!iteration on\n", "t").unwrap();
        assert!(wb.settings.iteration_enabled);
        let wb = load_fixture_str("!sheet S1\n", "t").unwrap();
        assert!(!wb.settings.iteration_enabled);
    }

    #[test]
    fn labels_directive_sets_optional_flag() {
        let wb = load_fixture_str("!sheet S1\n", "t").unwrap();
        assert_eq!(wb.settings.accept_labels_in_formulas, None);
        let wb = load_fixture_str("!labels-in-formulas on\n!sheet S1\n", "t").unwrap();
        assert_eq!(wb.settings.accept_labels_in_formulas, Some(true));
    }

    #[test]
    fn hidden_markers() {
        let wb = load_fixture_str(
            "!sheet S1\n!hidden\n!hidden-rows 3,4\n!hidden-cols B,C\n",
            "t",
        )
        .unwrap();
        let s = &wb.sheets[0];
        assert_eq!(s.visibility, SheetVisibility::Hidden);
        assert_eq!(s.hidden_rows.iter().copied().collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(s.hidden_cols.iter().copied().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn all_content_kinds() {
        let wb = load_fixture_str(
            "!sheet S1\nA1: 5\nB1: \"he said \"\"hi\"\"\"\nC1: true\nD1: #REF!\nE1: =A1\n",
            "t",
        )
        .unwrap();
        let s = &wb.sheets[0];
        assert!(matches!(
            s.cell(CellAddr::new(1, 2)).unwrap().content,
            CellContent::Text(ref t) if t == "he said \"hi\""
        ));
        assert!(matches!(s.cell(CellAddr::new(1, 3)).unwrap().content, CellContent::Bool(true)));
        assert!(matches!(
            s.cell(CellAddr::new(1, 4)).unwrap().content,
            CellContent::Error(ref e) if e == "#REF!"
        ));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            load_fixture_str("A1: 5\n", "t"),
            Err(IngestError::FixtureSyntax { line: 1, .. })
        ));
        assert!(matches!(
            load_fixture_str("!sheet S1\nA1: 5\nA1: 6\n", "t"),
            Err(IngestError::DuplicateCell { .. })
        ));
        assert!(matches!(
            load_fixture_str("!sheet S1\n!sheet S1\n", "t"),
            Err(IngestError::FixtureSyntax { line: 2, .. })
        ));
        assert!(matches!(
            load_fixture_str("!sheet S1\nA1: =((\n", "t"),
            Err(IngestError::FixtureSyntax { .. })
        ));
        assert!(matches!(
            load_fixture_str("!sheet S1\nZZZZZ1: 5\n", "t"),
            Err(IngestError::FixtureSyntax { .. })
        ));
        assert!(matches!(
            load_fixture_str("!bogus\n", "t"),
            Err(IngestError::FixtureSyntax { .. })
        ));
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let wb = load_fixture_str("# header\n\n!sheet S1\n  # indented comment\nA1: 1\n", "t").unwrap();
        assert_eq!(wb.sheets[0].cells.len(), 1);
    }
}
