//! XLSX (OPC ZIP) workbook loader. Only the workbook part, worksheet parts,
//! shared strings and the workbook relationships are read; cached formula
//! values are discarded and shared formula groups are expanded per cell.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::formula::{parse, render, translate, Expr};
use crate::model::{
    addr_from_a1, Cell, CellAddr, CellContent, NumberLit, Sheet, SheetVisibility, Workbook,
};

use super::IngestError;

pub fn load_xlsx(path: impl AsRef<Path>) -> Result<Workbook, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut archive = zip::ZipArchive::new(file).map_err(zip_error)?;

    let workbook_xml = read_entry(&mut archive, "xl/workbook.xml")?
        .ok_or(IngestError::MissingWorkbookPart)?;
    let (sheet_metas, iteration_enabled) = parse_workbook_part(&workbook_xml)?;

    let rels_xml = read_entry(&mut archive, "xl/_rels/workbook.xml.rels")?;
    let rels = match rels_xml {
        Some(xml) => parse_rels(&xml)?,
        None => HashMap::new(),
    };

    let shared_strings = match read_entry(&mut archive, "xl/sharedStrings.xml")? {
        Some(xml) => parse_shared_strings(&xml)?,
        None => Vec::new(),
    };

    let mut wb = Workbook::new(path.display().to_string());
    wb.settings.iteration_enabled = iteration_enabled;
    wb.settings.accept_labels_in_formulas = None; // not expressible in XLSX

    for meta in &sheet_metas {
        if wb.sheets.iter().any(|s| s.name == meta.name) {
            return Err(IngestError::Unsupported(format!(
                "duplicate sheet name `{}`",
                meta.name
            )));
        }
        let target = rels.get(&meta.rel_id).ok_or_else(|| {
            IngestError::Unsupported(format!(
                "no relationship target for sheet `{}` (id {})",
                meta.name, meta.rel_id
            ))
        })?;
        let part = resolve_target(target);
        let xml = read_entry(&mut archive, &part)?.ok_or_else(|| {
            IngestError::Unsupported(format!("missing worksheet part `{part}`"))
        })?;
        let mut sheet = Sheet::new(meta.name.clone());
        sheet.visibility = meta.visibility;
        parse_worksheet(&xml, &mut sheet, &shared_strings)?;
        wb.sheets.push(sheet);
    }

    Ok(wb)
}

fn zip_error(err: zip::result::ZipError) -> IngestError {
    match err {
        zip::result::ZipError::Io(e) => IngestError::Io(e),
        _ => IngestError::NotAZipFile,
    }
}

fn read_entry<R: Read + std::io::Seek>(
    archive: &mut zip::ZipArchive<R>,
    name: &str,
) -> Result<Option<String>, IngestError> {
    match archive.by_name(name) {
        Ok(mut entry) => {
            let mut text = String::new();
            entry.read_to_string(&mut text)?;
            Ok(Some(text))
        }
        Err(zip::result::ZipError::FileNotFound) => Ok(None),
        Err(e) => Err(zip_error(e)),
    }
}

fn xml_error(e: quick_xml::Error) -> IngestError {
    IngestError::Unsupported(format!("malformed XML: {e}"))
}

fn attr_value(tag: &BytesStart<'_>, name: &[u8]) -> Result<Option<String>, IngestError> {
    for attr in tag.attributes() {
        let attr = attr.map_err(|e| IngestError::Unsupported(format!("malformed XML attribute: {e}")))?;
        if attr.key.local_name().as_ref() == name {
            let v = attr
                .unescape_value()
                .map_err(|e| IngestError::Unsupported(format!("malformed XML attribute: {e}")))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn truthy(value: &Option<String>) -> bool {
    matches!(value.as_deref(), Some("1") | Some("true"))
}

struct SheetMeta {
    name: String,
    rel_id: String,
    visibility: SheetVisibility,
}

fn parse_workbook_part(xml: &str) -> Result<(Vec<SheetMeta>, bool), IngestError> {
    let mut reader = Reader::from_str(xml);
    let mut sheets = Vec::new();
    let mut iteration = false;
    loop {
        match reader.read_event().map_err(xml_error)? {
            Event::Start(tag) | Event::Empty(tag) => match tag.local_name().as_ref() {
                b"sheet" => {
                    let name = attr_value(&tag, b"name")?.ok_or_else(|| {
                        IngestError::Unsupported("sheet element without name".into())
                    })?;
                    let rel_id = attr_value(&tag, b"id")?.ok_or_else(|| {
                        IngestError::Unsupported(format!("sheet `{name}` without relationship id"))
                    })?;
                    let visibility = match attr_value(&tag, b"state")?.as_deref() {
                        Some("hidden") => SheetVisibility::Hidden,
                        Some("veryHidden") => SheetVisibility::VeryHidden,
                        _ => SheetVisibility::Visible,
                    };
                    sheets.push(SheetMeta {
                        name,
                        rel_id,
                        visibility,
                    });
                }
                b"calcPr" => {
                    iteration = truthy(&attr_value(&tag, b"iterate")?);
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    Ok((sheets, iteration))
}

fn parse_rels(xml: &str) -> Result<HashMap<String, String>, IngestError> {
    let mut reader = Reader::from_str(xml);
    let mut rels = HashMap::new();
    loop {
        match reader.read_event().map_err(xml_error)? {
            Event::Start(tag) | Event::Empty(tag) => {
                if tag.local_name().as_ref() == b"Relationship" {
                    if attr_value(&tag, b"TargetMode")?.as_deref() == Some("External") {
                        continue;
                    }
                    if let (Some(id), Some(target)) =
                        (attr_value(&tag, b"Id")?, attr_value(&tag, b"Target")?)
                    {
                        rels.insert(id, target);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(rels)
}

fn resolve_target(target: &str) -> String {
    if let Some(abs) = target.strip_prefix('/') {
        abs.to_string()
    } else {
        format!("xl/{target}")
    }
}

fn parse_shared_strings(xml: &str) -> Result<Vec<String>, IngestError> {
    let mut reader = Reader::from_str(xml);
    let mut strings = Vec::new();
    let mut current = String::new();
    let mut in_si = false;
    let mut in_t = false;
    let mut phonetic_depth = 0usize;
    loop {
        match reader.read_event().map_err(xml_error)? {
            Event::Start(tag) => match tag.local_name().as_ref() {
                b"si" => {
                    in_si = true;
                    current.clear();
                }
                b"rPh" => phonetic_depth += 1,
                b"t" if in_si && phonetic_depth == 0 => in_t = true,
                _ => {}
            },
            Event::End(tag) => match tag.local_name().as_ref() {
                b"si" => {
                    in_si = false;
                    strings.push(current.clone());
                }
                b"rPh" => phonetic_depth = phonetic_depth.saturating_sub(1),
                b"t" => in_t = false,
                _ => {}
            },
            Event::Text(t) => {
                if in_t {
                    current.push_str(&t.unescape().map_err(xml_error)?);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(strings)
}

#[derive(Default)]
struct PendingCell {
    addr: Option<CellAddr>,
    cell_type: Option<String>,
    value: Option<String>,
    formula: Option<String>,
    formula_shared: bool,
    formula_si: Option<String>,
    inline: Option<String>,
}

fn parse_worksheet(
    xml: &str,
    sheet: &mut Sheet,
    shared_strings: &[String],
) -> Result<(), IngestError> {
    let mut reader = Reader::from_str(xml);
    let mut current_row: u32 = 0;
    let mut current_col: u32 = 0;
    let mut pending: Option<PendingCell> = None;
    // where text events should accumulate
    let mut capture: Option<&'static str> = None;
    let mut in_is = false;
    // shared formula masters: si → (host address, ast)
    let mut shared_masters: HashMap<String, (CellAddr, Expr)> = HashMap::new();

    loop {
        let event = reader.read_event().map_err(xml_error)?;
        match event {
            Event::Start(ref tag) | Event::Empty(ref tag) => {
                let is_empty = matches!(event, Event::Empty(_));
                match tag.local_name().as_ref() {
                    b"col" => {
                        if truthy(&attr_value(tag, b"hidden")?) {
                            let min: u32 = attr_value(tag, b"min")?
                                .and_then(|v| v.parse().ok())
                                .ok_or_else(|| {
                                    IngestError::Unsupported("col element without min".into())
                                })?;
                            let max: u32 = attr_value(tag, b"max")?
                                .and_then(|v| v.parse().ok())
                                .unwrap_or(min);
                            for c in min..=max.min(crate::model::MAX_COL) {
                                sheet.hidden_cols.insert(c);
                            }
                        }
                    }
                    b"row" => {
                        current_row = match attr_value(tag, b"r")? {
                            Some(r) => r.parse().map_err(|_| {
                                IngestError::Unsupported(format!("bad row number `{r}`"))
                            })?,
                            None => current_row + 1,
                        };
                        current_col = 0;
                        if truthy(&attr_value(tag, b"hidden")?) {
                            sheet.hidden_rows.insert(current_row);
                        }
                    }
                    b"c" => {
                        let addr = match attr_value(tag, b"r")? {
                            Some(r) => {
                                addr_from_a1(&r)
                                    .map_err(|e| IngestError::Unsupported(e.to_string()))?
                                    .addr
                            }
                            None => CellAddr::new(current_row.max(1), current_col + 1),
                        };
                        current_col = addr.col;
                        let cell = PendingCell {
                            addr: Some(addr),
                            cell_type: attr_value(tag, b"t")?,
                            ..PendingCell::default()
                        };
                        if is_empty {
                            // no children: nothing stored
                        } else {
                            pending = Some(cell);
                        }
                    }
                    b"v" if pending.is_some() => {
                        if !is_empty {
                            capture = Some("v");
                        }
                    }
                    b"f" if pending.is_some() => {
                        let p = pending.as_mut().unwrap();
                        p.formula = Some(String::new());
                        p.formula_shared =
                            attr_value(tag, b"t")?.as_deref() == Some("shared");
                        p.formula_si = attr_value(tag, b"si")?;
                        if !is_empty {
                            capture = Some("f");
                        }
                    }
                    b"is" if pending.is_some() => {
                        in_is = true;
                        pending.as_mut().unwrap().inline = Some(String::new());
                    }
                    b"t" if in_is => {
                        if !is_empty {
                            capture = Some("is");
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                if let (Some(which), Some(p)) = (capture, pending.as_mut()) {
                    let text = t.unescape().map_err(xml_error)?;
                    match which {
                        "v" => {
                            p.value.get_or_insert_with(String::new).push_str(&text);
                        }
                        "f" => {
                            p.formula.get_or_insert_with(String::new).push_str(&text);
                        }
                        "is" => {
                            p.inline.get_or_insert_with(String::new).push_str(&text);
                        }
                        _ => {}
                    }
                }
            }
            Event::End(tag) => match tag.local_name().as_ref() {
                b"v" | b"f" => capture = None,
                b"t" => capture = None,
                b"is" => in_is = false,
                b"c" => {
                    if let Some(p) = pending.take() {
                        finish_cell(p, sheet, shared_strings, &mut shared_masters)?;
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(())
}

fn finish_cell(
    p: PendingCell,
    sheet: &mut Sheet,
    shared_strings: &[String],
    shared_masters: &mut HashMap<String, (CellAddr, Expr)>,
) -> Result<(), IngestError> {
    let addr = p.addr.expect("pending cell without address");
    let formula_err = |e| IngestError::FormulaParse {
        sheet: sheet.name.clone(),
        addr,
        source: e,
    };

    let content = if let Some(ftext) = p.formula.clone() {
        if !ftext.is_empty() {
            let source = format!("={ftext}");
            let ast = parse(&source).map_err(formula_err)?;
            if p.formula_shared {
                if let Some(si) = p.formula_si.clone() {
                    shared_masters.insert(si, (addr, ast.clone()));
                }
            }
            Some(CellContent::Formula { source, ast })
        } else if p.formula_shared {
            let si = p.formula_si.clone().ok_or_else(|| {
                IngestError::Unsupported(format!("shared formula in {addr} without si"))
            })?;
            let (master_addr, master_ast) = shared_masters.get(&si).cloned().ok_or_else(|| {
                IngestError::Unsupported(format!(
                    "shared formula in {addr} references unknown group {si}"
                ))
            })?;
            let drow = addr.row as i64 - master_addr.row as i64;
            let dcol = addr.col as i64 - master_addr.col as i64;
            let ast = translate(&master_ast, drow, dcol).map_err(formula_err)?;
            let source = format!("={}", render(&ast));
            Some(CellContent::Formula { source, ast })
        } else {
            // empty non-shared <f/>: fall back to the cached value if any
            literal_content(&p, shared_strings, addr, &sheet.name)?
        }
    } else {
        literal_content(&p, shared_strings, addr, &sheet.name)?
    };

    if let Some(content) = content {
        sheet.cells.insert(addr, Cell { addr, content });
    }
    Ok(())
}

fn literal_content(
    p: &PendingCell,
    shared_strings: &[String],
    addr: CellAddr,
    sheet_name: &str,
) -> Result<Option<CellContent>, IngestError> {
    if let Some(inline) = &p.inline {
        return Ok(if inline.is_empty() {
            None
        } else {
            Some(CellContent::Text(inline.clone()))
        });
    }
    let value = match &p.value {
        Some(v) => v,
        None => return Ok(None),
    };
    let content = match p.cell_type.as_deref() {
        Some("s") => {
            let idx: usize = value.parse().map_err(|_| {
                IngestError::Unsupported(format!("bad shared string index `{value}` in {addr}"))
            })?;
            let text = shared_strings.get(idx).ok_or_else(|| {
                IngestError::Unsupported(format!(
                    "shared string index {idx} out of range in {sheet_name}!{addr}"
                ))
            })?;
            if text.is_empty() {
                return Ok(None);
            }
            CellContent::Text(text.clone())
        }
        Some("str") | Some("inlineStr") => {
            if value.is_empty() {
                return Ok(None);
            }
            CellContent::Text(value.clone())
        }
        Some("b") => CellContent::Bool(value == "1" || value == "true"),
        Some("e") => CellContent::Error(value.clone()),
        Some("n") | None => CellContent::Number(NumberLit::parse(value).ok_or_else(|| {
            IngestError::Unsupported(format!("unparseable number `{value}` in {sheet_name}!{addr}"))
        })?),
        Some(other) => {
            return Err(IngestError::Unsupported(format!(
                "cell type `{other}` in {sheet_name}!{addr}"
            )))
        }
    };
    Ok(Some(content))
}
