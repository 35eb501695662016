//! The check operations behind each rule, and `run_all` tying them together.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::formula::{constant_literals, metrics, normalize, render, Expr};
use crate::graph::{build, find_cycles, reading_order_breaches, BreachKind, DepGraph, GraphError, QualifiedAddr};
use crate::ingest::Manifest;
use crate::model::{Cell, CellContent, Sheet, SheetVisibility, Workbook};
use crate::regions::{infer, interleavings, section_fingerprint, CellClass, RegionError, RegionMap, SectionKind};

use super::{Location, RuleConfig, RuleId, Violation};

fn rule(item: u8) -> RuleId {
    RuleId::new(item).expect("catalog rule id")
}

/// A maximal horizontal run of adjacent non-empty cells in one row.
fn row_runs(sheet: &Sheet) -> Vec<Vec<&Cell>> {
    let mut runs: Vec<Vec<&Cell>> = Vec::new();
    let mut current: Vec<&Cell> = Vec::new();
    for cell in sheet.cells.values() {
        match current.last() {
            Some(prev) if prev.addr.row == cell.addr.row && prev.addr.col + 1 == cell.addr.col => {
                current.push(cell);
            }
            Some(_) => {
                runs.push(std::mem::take(&mut current));
                current.push(cell);
            }
            None => current.push(cell),
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs
}

fn normalized_ast(cell: &Cell) -> Option<Expr> {
    match &cell.content {
        CellContent::Formula { ast, .. } => normalize(ast, cell.addr).ok(),
        _ => None,
    }
}

fn run_span(run: &[&Cell]) -> String {
    format!("{}:{}", run[0].addr, run[run.len() - 1].addr)
}

/// R01 and R18: within each run of at least `run_min_length` cells, formulas
/// must share one normalized shape (R01 flags deviations from the majority)
/// and no literal may interrupt a consistent pair of neighbours (R18).
pub fn check_consistency(wb: &Workbook, rm: &RegionMap, cfg: &RuleConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    for sheet in &wb.sheets {
        for run in row_runs(sheet) {
            if run.len() < cfg.run_min_length as usize {
                continue;
            }
            // only runs inside calculation territory concern these rules
            let touches_calc = run.iter().any(|c| {
                matches!(
                    rm.class(&QualifiedAddr::new(sheet.name.clone(), c.addr)),
                    Some(CellClass::Calculation) | Some(CellClass::Check)
                )
            });
            if !touches_calc {
                continue;
            }

            let norm: Vec<Option<Expr>> = run.iter().map(|c| normalized_ast(c)).collect();

            // R01: majority shape among the run's formulas
            let mut counts: BTreeMap<&Expr, usize> = BTreeMap::new();
            for ast in norm.iter().flatten() {
                *counts.entry(ast).or_insert(0) += 1;
            }
            if counts.len() >= 2 {
                let best_count = counts.values().copied().max().unwrap_or(0);
                // leftmost formula whose shape reaches the maximum wins ties
                let majority = norm
                    .iter()
                    .flatten()
                    .find(|ast| counts[*ast] == best_count)
                    .cloned()
                    .expect("non-empty count table");
                for (cell, ast) in run.iter().zip(&norm) {
                    if let Some(ast) = ast {
                        if *ast != majority {
                            out.push(
                                Violation::new(
                                    rule(1),
                                    sheet.name.clone(),
                                    Location::Cell(cell.addr),
                                    "formula is not consistent with the rest of its run",
                                )
                                .with_detail("run", run_span(&run))
                                .with_detail("expected", render(&majority))
                                .with_detail("found", render(ast)),
                            );
                        }
                    }
                }
            }

            // R18: literal flanked by two formulas of identical shape
            for i in 1..run.len() - 1 {
                if norm[i].is_some() {
                    continue;
                }
                if let (Some(left), Some(right)) = (&norm[i - 1], &norm[i + 1]) {
                    if left == right {
                        out.push(
                            Violation::new(
                                rule(18),
                                sheet.name.clone(),
                                Location::Cell(run[i].addr),
                                "hardcoded constant in place of a formula within a run",
                            )
                            .with_detail("run", run_span(&run))
                            .with_detail("value", crate::model::content_line(&run[i].content))
                            .with_detail("surrounding", render(left)),
                        );
                    }
                }
            }
        }
    }
    out
}

/// R02 and R08: region interleavings, plus the workbook-level readability
/// aggregate (any interleaving, or an untitled calculation section).
pub fn check_regions(_wb: &Workbook, rm: &RegionMap) -> Vec<Violation> {
    let mut out = Vec::new();
    let mixed = interleavings(rm);
    for i in &mixed {
        out.push(
            Violation::new(
                rule(2),
                i.sheet.clone(),
                Location::Rows(i.row, i.row),
                i.description.clone(),
            ),
        );
    }
    let untitled_calc = rm
        .sections
        .iter()
        .filter(|s| s.kind == SectionKind::CalcSection && s.title.is_none())
        .count();
    if !mixed.is_empty() || untitled_calc > 0 {
        let mut v = Violation::new(
            rule(8),
            "",
            Location::Workbook,
            "layout is not readable at a glance",
        )
        .with_detail("interleavings", mixed.len().to_string());
        if untitled_calc > 0 {
            v = v.with_detail("untitled_calc_sections", untitled_calc.to_string());
        }
        out.push(v);
    }
    out
}

/// R03: every calculation or input section needs a title.
pub fn check_sections(_wb: &Workbook, rm: &RegionMap) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in &rm.sections {
        if matches!(s.kind, SectionKind::CalcSection | SectionKind::InputSection)
            && s.title.is_none()
        {
            out.push(
                Violation::new(
                    rule(3),
                    s.sheet.clone(),
                    Location::Rows(s.first_row, s.last_row),
                    "section has no title label in its first row",
                ),
            );
        }
    }
    out
}

/// R04: reading-order breaches, with the check-cell exemption and the
/// same-row switch applied.
pub fn check_reading_order(
    wb: &Workbook,
    g: &DepGraph,
    rm: &RegionMap,
    cfg: &RuleConfig,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for b in reading_order_breaches(g, wb) {
        if b.kind == BreachKind::SameRowRight && !cfg.same_row_right_is_breach {
            continue;
        }
        // check cells legitimately look down at the results they verify
        if rm.class(&b.from) == Some(CellClass::Check) {
            continue;
        }
        let direction = match b.kind {
            BreachKind::Below => "below",
            BreachKind::SameRowRight => "to the right",
            BreachKind::CrossSheetLater => "on a later sheet",
        };
        out.push(
            Violation::new(
                rule(4),
                b.from.sheet.clone(),
                Location::Cell(b.from.addr),
                format!("references {} which lies {direction}", b.to),
            )
            .with_detail("target", b.to.to_string())
            .with_detail("direction", direction),
        );
    }
    out
}

/// R05, R06, R07, R09, R11: the manifest-backed documentation rules.
/// Applies to calculation and input sections; record matching is by title.
pub fn check_manifest(
    wb: &Workbook,
    rm: &RegionMap,
    manifest: Option<&Manifest>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let manifest = match manifest {
        None => {
            out.push(Violation::new(
                rule(5),
                "",
                Location::Workbook,
                "no compliance manifest: section treatment is undocumented",
            ));
            out.push(Violation::new(
                rule(7),
                "",
                Location::Workbook,
                "no compliance manifest: independent checking is unrecorded",
            ));
            out.push(Violation::new(
                rule(9),
                "",
                Location::Workbook,
                "no compliance manifest: authorship is unrecorded",
            ));
            out.push(Violation::new(
                rule(11),
                "",
                Location::Workbook,
                "no compliance manifest: workbook lacks a specification",
            ));
            return out;
        }
        Some(m) => m,
    };

    match &manifest.spec_path {
        None => out.push(Violation::new(
            rule(11),
            "",
            Location::Workbook,
            "manifest names no specification document",
        )),
        Some(p) => {
            let path = std::path::Path::new(p);
            let resolved = if path.is_absolute() {
                path.to_path_buf()
            } else {
                manifest.base_dir.join(path)
            };
            if !resolved.exists() {
                out.push(
                    Violation::new(
                        rule(11),
                        "",
                        Location::Workbook,
                        format!("specification document `{p}` not found"),
                    )
                    .with_detail("spec_path", p.clone()),
                );
            }
        }
    }

    for section in &rm.sections {
        if !matches!(section.kind, SectionKind::CalcSection | SectionKind::InputSection) {
            continue;
        }
        let loc = Location::Section(section.display_name());
        let record = section.title.as_deref().and_then(|t| manifest.section(t));
        match record {
            None => {
                out.push(Violation::new(
                    rule(5),
                    section.sheet.clone(),
                    loc.clone(),
                    "section treatment is undocumented (no manifest record)",
                ));
                out.push(Violation::new(
                    rule(7),
                    section.sheet.clone(),
                    loc.clone(),
                    "section has never been independently checked",
                ));
                out.push(Violation::new(
                    rule(9),
                    section.sheet.clone(),
                    loc.clone(),
                    "no record of who drafted the section and when",
                ));
            }
            Some(rec) => {
                if rec.description.trim().is_empty() {
                    out.push(Violation::new(
                        rule(5),
                        section.sheet.clone(),
                        loc.clone(),
                        "section record has an empty description",
                    ));
                    out.push(Violation::new(
                        rule(6),
                        section.sheet.clone(),
                        loc.clone(),
                        "no descriptive text drafted for the section",
                    ));
                }
                if rec.author.trim().is_empty() || rec.drafted_date.is_none() {
                    out.push(Violation::new(
                        rule(9),
                        section.sheet.clone(),
                        loc.clone(),
                        "drafting record is missing author or date",
                    ));
                }
                match &rec.checked_by {
                    None => out.push(Violation::new(
                        rule(7),
                        section.sheet.clone(),
                        loc.clone(),
                        "section has not been independently checked",
                    )),
                    Some(_) => {
                        if let Some(recorded) = &rec.section_fingerprint_at_check {
                            let current = section_fingerprint(wb, rm, section);
                            if *recorded != current {
                                out.push(
                                    Violation::new(
                                        rule(7),
                                        section.sheet.clone(),
                                        loc.clone(),
                                        "section changed since its last independent check",
                                    )
                                    .with_detail("recorded", recorded.clone())
                                    .with_detail("current", current),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// R13: each input cell wants exactly one importing formula.
pub fn check_single_import(_wb: &Workbook, g: &DepGraph, rm: &RegionMap) -> Vec<Violation> {
    let mut out = Vec::new();
    for qa in rm.cells_of_class(CellClass::Input) {
        let deps = g.direct_dependents(&qa);
        if deps.is_empty() {
            out.push(
                Violation::new(
                    rule(13),
                    qa.sheet.clone(),
                    Location::Cell(qa.addr),
                    "input cell is never brought into the calculations",
                )
                .with_detail("flavor", "unused-input"),
            );
        } else if deps.len() >= 2 {
            let names: Vec<String> = deps.iter().map(|d| d.to_string()).collect();
            out.push(
                Violation::new(
                    rule(13),
                    qa.sheet.clone(),
                    Location::Cell(qa.addr),
                    format!("input cell is imported by {} formulas", deps.len()),
                )
                .with_detail("flavor", "multiple-import")
                .with_detail("dependents", names.join(", ")),
            );
        }
    }
    out
}

/// R14: a workbook that calculates must carry at least `min_check_cells`
/// check cells.
pub fn check_self_checks(_wb: &Workbook, rm: &RegionMap, cfg: &RuleConfig) -> Vec<Violation> {
    let calc_cells = rm
        .class_of
        .values()
        .filter(|c| **c == CellClass::Calculation)
        .count();
    let check_cells = rm
        .class_of
        .values()
        .filter(|c| **c == CellClass::Check)
        .count();
    if calc_cells >= 1 && (check_cells as u32) < cfg.min_check_cells {
        return vec![Violation::new(
            rule(14),
            "",
            Location::Workbook,
            "workbook calculates without self checks",
        )
        .with_detail("check_cells", check_cells.to_string())
        .with_detail("required_minimum", cfg.min_check_cells.to_string())];
    }
    Vec::new()
}

/// R15: one violation per dependency cycle.
pub fn check_circularity(wb: &Workbook, g: &DepGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for cycle in find_cycles(g) {
        let first = &cycle.members[0];
        let members: Vec<String> = cycle.members.iter().map(|m| m.to_string()).collect();
        let mut v = Violation::new(
            rule(15),
            first.sheet.clone(),
            Location::Cell(first.addr),
            format!("circular dependency through {} cell(s)", cycle.members.len()),
        )
        .with_detail("members", members.join(" -> "))
        .with_detail("size", cycle.members.len().to_string());
        if !wb.settings.iteration_enabled {
            // a cycle that cannot even converge
            v = v.with_detail("uncontrolled", "true");
        }
        out.push(v);
    }
    out
}

/// R16: calculation formulas containing literals outside the allow-list.
pub fn check_constants(wb: &Workbook, rm: &RegionMap, cfg: &RuleConfig) -> Vec<Violation> {
    let policy = cfg.constant_policy();
    let mut out = Vec::new();
    for sheet in &wb.sheets {
        for (addr, cell) in &sheet.cells {
            let qa = QualifiedAddr::new(sheet.name.clone(), *addr);
            if rm.class(&qa) != Some(CellClass::Calculation) {
                continue;
            }
            if let CellContent::Formula { ast, .. } = &cell.content {
                let found = constant_literals(ast, &policy);
                if !found.is_empty() {
                    let values: Vec<String> =
                        found.iter().map(|l| l.value.as_str().to_string()).collect();
                    out.push(
                        Violation::new(
                            rule(16),
                            sheet.name.clone(),
                            Location::Cell(*addr),
                            format!("formula embeds {} hardcoded constant(s)", found.len()),
                        )
                        .with_detail("literals", values.join(", ")),
                    );
                }
            }
        }
    }
    out
}

/// R17: formulas beyond the configured node-count or depth limits.
pub fn check_complexity(wb: &Workbook, _rm: &RegionMap, cfg: &RuleConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    for sheet in &wb.sheets {
        for (addr, cell) in &sheet.cells {
            if let CellContent::Formula { ast, .. } = &cell.content {
                let m = metrics(ast);
                if m.node_count > cfg.complexity_node_limit || m.depth > cfg.complexity_depth_limit {
                    out.push(
                        Violation::new(
                            rule(17),
                            sheet.name.clone(),
                            Location::Cell(*addr),
                            "formula is too complex; split it across rows",
                        )
                        .with_detail("node_count", m.node_count.to_string())
                        .with_detail("depth", m.depth.to_string())
                        .with_detail("node_limit", cfg.complexity_node_limit.to_string())
                        .with_detail("depth_limit", cfg.complexity_depth_limit.to_string()),
                    );
                }
            }
        }
    }
    out
}

/// R19 and R20: workbook calculation settings.
pub fn check_settings(wb: &Workbook) -> Vec<Violation> {
    let mut out = Vec::new();
    if wb.settings.iteration_enabled {
        out.push(Violation::new(
            rule(19),
            "",
            Location::Workbook,
            "iterative calculation is switched on",
        ));
    }
    if wb.settings.accept_labels_in_formulas == Some(true) {
        out.push(Violation::new(
            rule(20),
            "",
            Location::Workbook,
            "accept-labels-in-formulas is switched on",
        ));
    }
    out
}

/// R21: hidden sheets, rows and columns, each located precisely.
pub fn check_hidden(wb: &Workbook) -> Vec<Violation> {
    let mut out = Vec::new();
    for sheet in &wb.sheets {
        match sheet.visibility {
            SheetVisibility::Visible => {}
            SheetVisibility::Hidden => out.push(
                Violation::new(rule(21), sheet.name.clone(), Location::Sheet, "sheet is hidden")
                    .with_detail("state", "hidden"),
            ),
            SheetVisibility::VeryHidden => out.push(
                Violation::new(rule(21), sheet.name.clone(), Location::Sheet, "sheet is very hidden")
                    .with_detail("state", "veryhidden"),
            ),
        }
        for &row in &sheet.hidden_rows {
            out.push(Violation::new(
                rule(21),
                sheet.name.clone(),
                Location::Rows(row, row),
                "row is hidden",
            ));
        }
        for &col in &sheet.hidden_cols {
            out.push(Violation::new(
                rule(21),
                sheet.name.clone(),
                Location::Column(col),
                "column is hidden",
            ));
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

/// Everything one compliance run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub violations: Vec<Violation>,
    pub regions: RegionMap,
    pub graph: DepGraph,
    /// Rules that cannot be assessed: process properties (R10, R12) and,
    /// when the source format cannot express the setting, R20.
    pub not_assessable: Vec<RuleId>,
}

/// Build the graph, infer regions, run every enabled check and sort the
/// findings deterministically.
pub fn run_all(
    wb: &Workbook,
    manifest: Option<&Manifest>,
    cfg: &RuleConfig,
) -> Result<RunOutput, RunError> {
    let graph = build(wb)?;
    let mut overrides = manifest.map(|m| m.regions.clone()).unwrap_or_default();
    overrides.extend(cfg.declared_regions.iter().cloned());
    let regions = infer(wb, &graph, &overrides)?;

    let mut violations = Vec::new();
    violations.extend(check_consistency(wb, &regions, cfg));
    violations.extend(check_regions(wb, &regions));
    violations.extend(check_sections(wb, &regions));
    violations.extend(check_reading_order(wb, &graph, &regions, cfg));
    violations.extend(check_manifest(wb, &regions, manifest));
    violations.extend(check_single_import(wb, &graph, &regions));
    violations.extend(check_self_checks(wb, &regions, cfg));
    violations.extend(check_circularity(wb, &graph));
    violations.extend(check_constants(wb, &regions, cfg));
    violations.extend(check_complexity(wb, &regions, cfg));
    violations.extend(check_settings(wb));
    violations.extend(check_hidden(wb));

    violations.retain(|v| !cfg.disabled_rules.contains(&v.rule));

    violations.sort_by(|a, b| {
        let key = |v: &Violation| {
            let sheet_key = if v.sheet.is_empty() {
                0
            } else {
                regions.sheet_pos(&v.sheet).map(|p| p + 1).unwrap_or(usize::MAX)
            };
            (
                v.severity.rank(),
                v.rule.item(),
                sheet_key,
                v.location.sort_key(),
                v.message.clone(),
            )
        };
        key(a).cmp(&key(b))
    });

    let mut not_assessable = vec![rule(10), rule(12)];
    if wb.settings.accept_labels_in_formulas.is_none() {
        not_assessable.push(rule(20));
    }

    Ok(RunOutput {
        violations,
        regions,
        graph,
        not_assessable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_fixture_str, parse_manifest};
    use crate::model::addr_from_a1;
    use std::path::PathBuf;

    fn wb(src: &str) -> Workbook {
        load_fixture_str(src, "test").unwrap()
    }

    fn analyze(src: &str) -> (Workbook, DepGraph, RegionMap) {
        let w = wb(src);
        let g = build(&w).unwrap();
        let rm = infer(&w, &g, &[]).unwrap();
        (w, g, rm)
    }

    fn rules_of(violations: &[Violation]) -> Vec<String> {
        violations.iter().map(|v| v.rule.to_string()).collect()
    }

    fn cell_loc(v: &Violation) -> String {
        v.location.to_string()
    }

    const CLEAN_ROW_RUN: &str = "!sheet Model\nC5: =C4*2\nD5: =D4*2\nE5: =E4*2\nF5: =F4*2\n";

    #[test]
    fn consistent_run_passes() {
        let (w, _, rm) = analyze(CLEAN_ROW_RUN);
        assert!(check_consistency(&w, &rm, &RuleConfig::default()).is_empty());
    }

    #[test]
    fn constant_in_run_is_r18() {
        let (w, _, rm) = analyze("!sheet Model\nC5: =C4*2\nD5: =D4*2\nE5: 42\nF5: =F4*2\n");
        let v = check_consistency(&w, &rm, &RuleConfig::default());
        assert_eq!(rules_of(&v), vec!["R18"]);
        assert_eq!(cell_loc(&v[0]), "E5");
    }

    #[test]
    fn deviant_formula_is_r01() {
        let (w, _, rm) = analyze("!sheet Model\nC5: =C4*2\nD5: =D4*2\nE5: =E4*2\nF5: =F4*2+1\n");
        let v = check_consistency(&w, &rm, &RuleConfig::default());
        assert_eq!(rules_of(&v), vec!["R01"]);
        assert_eq!(cell_loc(&v[0]), "F5");
    }

    #[test]
    fn short_runs_are_ignored() {
        let (w, _, rm) = analyze("!sheet Model\nC5: =C4*2\nD5: =D4*99\n");
        assert!(check_consistency(&w, &rm, &RuleConfig::default()).is_empty());
    }

    #[test]
    fn copied_formulas_compare_by_offset_not_text() {
        // each formula references the cell above: same normalized shape
        let (w, _, rm) = analyze("!sheet Model\nC5: =C4\nD5: =D4\nE5: =E4\n");
        assert!(check_consistency(&w, &rm, &RuleConfig::default()).is_empty());
    }

    #[test]
    fn interleaved_row_yields_r02_and_r08() {
        let (w, _, rm) = analyze("!sheet S1\nA1: 5\nB1: =A1\n");
        let v = check_regions(&w, &rm);
        assert_eq!(rules_of(&v), vec!["R02", "R08"]);
        assert_eq!(v[0].location, Location::Rows(1, 1));
        assert_eq!(v[1].location, Location::Workbook);
    }

    #[test]
    fn untitled_calc_section_yields_r08_only_in_regions_check() {
        let (w, _, rm) = analyze("!sheet S1\nA1: \"In\"\nA2: 5\n\nB4: =A2*2\n");
        let v = check_regions(&w, &rm);
        assert_eq!(rules_of(&v), vec!["R08"]);
    }

    #[test]
    fn separated_titled_sections_pass_r02_r08() {
        let (w, _, rm) = analyze(
            "!sheet S1\nA1: \"In\"\nA2: 5\n\nA4: \"Calc\"\nA5: =A2*2\n",
        );
        assert!(check_regions(&w, &rm).is_empty());
    }

    #[test]
    fn untitled_sections_yield_r03() {
        let (w, _, rm) = analyze("!sheet S1\nA1: 5\nB1: 6\n\nA3: \"Calc\"\nA4: =A1+B1\n\nA6: =A4*2\n");
        let v = check_sections(&w, &rm);
        // rows 1 (input, untitled) and row 6 (calc, untitled); rows 3-4 titled
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.rule.to_string() == "R03"));
    }

    #[test]
    fn reading_order_examples() {
        let cfg = RuleConfig::default();
        let (w, g, rm) = analyze("!sheet S1\nA1: 1\nB2: =A1\n");
        assert!(check_reading_order(&w, &g, &rm, &cfg).is_empty());

        let (w, g, rm) = analyze("!sheet S1\nA1: =A2\nA2: 1\n");
        let v = check_reading_order(&w, &g, &rm, &cfg);
        assert_eq!(rules_of(&v), vec!["R04"]);
        assert_eq!(cell_loc(&v[0]), "A1");
    }

    #[test]
    fn check_cells_exempt_from_reading_order() {
        // B5 sits under a *check* title and looks down at B7
        let (w, g, rm) = analyze(
            "!sheet S1\nA1: 2\nB1: =A1\n\nA4: \"Sanity check\"\nB5: =B7-1\n\nB7: =B1*3\n",
        );
        let cfg = RuleConfig::default();
        assert_eq!(rm.class(&QualifiedAddr::new("S1", addr_from_a1("B5").unwrap().addr)), Some(CellClass::Check));
        assert!(check_reading_order(&w, &g, &rm, &cfg).is_empty());
    }

    #[test]
    fn same_row_right_is_configurable() {
        let (w, g, rm) = analyze("!sheet S1\nA1: =B1\nB1: 1\n");
        let mut cfg = RuleConfig::default();
        assert_eq!(check_reading_order(&w, &g, &rm, &cfg).len(), 1);
        cfg.same_row_right_is_breach = false;
        assert!(check_reading_order(&w, &g, &rm, &cfg).is_empty());
    }

    const SECTIONED: &str = "!sheet Model\nA1: \"Ins\"\nB2: 10\n\nA4: \"Calc\"\nB5: =B2*2\n";

    #[test]
    fn absent_manifest_fires_the_documentation_family() {
        let (w, _, rm) = analyze(SECTIONED);
        let v = check_manifest(&w, &rm, None);
        assert_eq!(rules_of(&v), vec!["R05", "R07", "R09", "R11"]);
        assert!(v.iter().all(|x| x.location == Location::Workbook));
    }

    fn complete_manifest(dir: &std::path::Path) -> Manifest {
        std::fs::write(dir.join("spec.md"), "the spec").unwrap();
        parse_manifest(
            "spec = spec.md\n[section Ins]\ndescription = inputs\nauthor = A\ndrafted = 2026-01-01\nchecked_by = B\nchecked = 2026-01-02\n[section Calc]\ndescription = calc\nauthor = A\ndrafted = 2026-01-01\nchecked_by = B\nchecked = 2026-01-02\n",
            dir.to_path_buf(),
        )
        .unwrap()
    }

    #[test]
    fn complete_manifest_passes() {
        let dir = tempfile::tempdir().unwrap();
        let m = complete_manifest(dir.path());
        let (w, _, rm) = analyze(SECTIONED);
        assert!(check_manifest(&w, &rm, Some(&m)).is_empty());
    }

    #[test]
    fn missing_spec_path_and_missing_file_fire_r11() {
        let (w, _, rm) = analyze(SECTIONED);
        let dir = tempfile::tempdir().unwrap();
        let mut m = complete_manifest(dir.path());
        m.spec_path = None;
        assert_eq!(rules_of(&check_manifest(&w, &rm, Some(&m))), vec!["R11"]);
        m.spec_path = Some("nope.md".into());
        assert_eq!(rules_of(&check_manifest(&w, &rm, Some(&m))), vec!["R11"]);
    }

    #[test]
    fn empty_description_fires_r05_and_r06() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = complete_manifest(dir.path());
        m.sections[1].description = String::new();
        let (w, _, rm) = analyze(SECTIONED);
        let v = check_manifest(&w, &rm, Some(&m));
        assert_eq!(rules_of(&v), vec!["R05", "R06"]);
        assert_eq!(v[0].location, Location::Section("Calc".into()));
    }

    #[test]
    fn unchecked_section_fires_r07() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = complete_manifest(dir.path());
        m.sections[0].checked_by = None;
        m.sections[0].checked_date = None;
        let (w, _, rm) = analyze(SECTIONED);
        assert_eq!(rules_of(&check_manifest(&w, &rm, Some(&m))), vec!["R07"]);
    }

    #[test]
    fn stale_fingerprint_fires_r07() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = complete_manifest(dir.path());
        m.sections[1].section_fingerprint_at_check = Some("0".repeat(64));
        let (w, _, rm) = analyze(SECTIONED);
        let v = check_manifest(&w, &rm, Some(&m));
        assert_eq!(rules_of(&v), vec!["R07"]);
        assert!(v[0].details.contains_key("current"));
    }

    #[test]
    fn matching_fingerprint_is_quiet() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = complete_manifest(dir.path());
        let (w, _, rm) = analyze(SECTIONED);
        let calc = rm.sections.iter().find(|s| s.title.as_deref() == Some("Calc")).unwrap();
        m.sections[1].section_fingerprint_at_check = Some(section_fingerprint(&w, &rm, calc));
        assert!(check_manifest(&w, &rm, Some(&m)).is_empty());
    }

    #[test]
    fn missing_record_fires_r05_r07_r09() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = complete_manifest(dir.path());
        m.sections.retain(|s| s.section_name != "Calc");
        let (w, _, rm) = analyze(SECTIONED);
        let v = check_manifest(&w, &rm, Some(&m));
        assert_eq!(rules_of(&v), vec!["R05", "R07", "R09"]);
    }

    #[test]
    fn single_import_examples() {
        // used once: quiet
        let (w, g, rm) = analyze("!sheet Inputs\nA1: 5\n!sheet M\nB1: =Inputs!A1\n");
        assert!(check_single_import(&w, &g, &rm).is_empty());

        // never used (input by sheet convention): unused-input
        let (w, g, rm) = analyze("!sheet Inputs\nA1: 5\n");
        let v = check_single_import(&w, &g, &rm);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].details["flavor"], "unused-input");

        // read by two formulas: multiple-import
        let (w, g, rm) = analyze("!sheet S1\nA1: 5\nB1: =A1\nC1: =A1*2\n");
        let v = check_single_import(&w, &g, &rm);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].details["flavor"], "multiple-import");
    }

    #[test]
    fn self_check_examples() {
        let cfg = RuleConfig::default();
        // a check formula satisfies the minimum
        let (w, _, rm) = analyze("!sheet M\nA1: 2\nB2: =A1\n\n!sheet Checks\nA1: =M!B2-M!A1\n");
        assert!(check_self_checks(&w, &rm, &cfg).is_empty());

        // calculations without checks
        let (w, _, rm) = analyze("!sheet M\nA1: 2\nB2: =A1\n");
        let v = check_self_checks(&w, &rm, &cfg);
        assert_eq!(rules_of(&v), vec!["R14"]);
        assert_eq!(v[0].details["check_cells"], "0");

        // nothing calculates, nothing to check
        let (w, _, rm) = analyze("!sheet M\nA1: 2\n");
        assert!(check_self_checks(&w, &rm, &cfg).is_empty());
    }

    #[test]
    fn circularity_examples() {
        let (w, g, _) = analyze("!sheet S1\nA1: 1\nB1: =A1\n");
        assert!(check_circularity(&w, &g).is_empty());

        let (w, g, _) = analyze("!sheet S1\nA1: =B1\nB1: =A1\n");
        let v = check_circularity(&w, &g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].details["size"], "2");
        assert_eq!(v[0].details.get("uncontrolled").map(|s| s.as_str()), Some("true"));

        // iteration on: cycle still flagged, but controlled
        let (w, g, _) = analyze("!iteration on\n!sheet S1\nA1: =B1\nB1: =A1\n");
        let v = check_circularity(&w, &g);
        assert_eq!(v.len(), 1);
        assert!(!v[0].details.contains_key("uncontrolled"));

        // two disjoint cycles
        let (w, g, _) = analyze("!sheet S1\nA1: =B1\nB1: =A1\nD4: =E4\nE4: =D4\n");
        assert_eq!(check_circularity(&w, &g).len(), 2);
    }

    #[test]
    fn constants_examples() {
        let cfg = RuleConfig::default();
        let (w, _, rm) = analyze("!sheet S1\nA1: 1\nB1: 2\nC2: =A1+B1\n");
        assert!(check_constants(&w, &rm, &cfg).is_empty());

        let (w, _, rm) = analyze("!sheet S1\nA1: 1\nC2: =A1*1.05\n");
        let v = check_constants(&w, &rm, &cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].details["literals"], "1.05");

        // allow-listed
        let (w, _, rm) = analyze("!sheet S1\nA1: 1\nC2: =A1*100\n");
        assert!(check_constants(&w, &rm, &cfg).is_empty());
    }

    #[test]
    fn constants_skip_non_calculation_cells() {
        // the check formula's tolerance literal is not a calc-region constant
        let (w, _, rm) = analyze("!sheet M\nA1: 2\nB2: =A1\n!sheet Checks\nA1: =M!B2-2.5\n");
        let cfg = RuleConfig::default();
        assert!(check_constants(&w, &rm, &cfg).is_empty());
    }

    #[test]
    fn complexity_examples() {
        let mut cfg = RuleConfig::default();
        let (w, _, rm) = analyze("!sheet S1\nC2: =A1+B1\n");
        assert!(check_complexity(&w, &rm, &cfg).is_empty());

        // SUM with 30 arguments: 31 nodes, depth 2 — over the node limit
        let args: Vec<String> = (1..=30).map(|r| format!("A{r}")).collect();
        let big = format!("!sheet S1\nC2: =SUM({})\n", args.join(","));
        let (w, _, rm) = analyze(&big);
        let v = check_complexity(&w, &rm, &cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].details["node_count"], "31");

        // raising the limit clears it
        cfg.complexity_node_limit = 40;
        assert!(check_complexity(&w, &rm, &cfg).is_empty());
    }

    #[test]
    fn depth_limit_triggers() {
        // left-leaning chain: depth = operand count
        let chain = format!("!sheet S1\nC2: ={}\n", (1..=9).map(|r| format!("A{r}")).collect::<Vec<_>>().join("+"));
        let (w, _, rm) = analyze(&chain);
        let cfg = RuleConfig::default();
        let v = check_complexity(&w, &rm, &cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].details["depth"], "9");
    }

    #[test]
    fn settings_examples() {
        let w = wb("!sheet S1\n");
        assert!(check_settings(&w).is_empty());

        let w = wb("!iteration on\n!sheet S1\n");
        assert_eq!(rules_of(&check_settings(&w)), vec!["R19"]);

        let w = wb("!labels-in-formulas on\n!sheet S1\n");
        assert_eq!(rules_of(&check_settings(&w)), vec!["R20"]);

        // explicitly off: quiet
        let w = wb("!labels-in-formulas off\n!sheet S1\n");
        assert!(check_settings(&w).is_empty());
    }

    #[test]
    fn hidden_examples() {
        let w = wb("!sheet S1\nA1: 1\n");
        assert!(check_hidden(&w).is_empty());

        let w = wb("!sheet S1\n!hidden\n");
        let v = check_hidden(&w);
        assert_eq!(rules_of(&v), vec!["R21"]);
        assert_eq!(v[0].location, Location::Sheet);

        let w = wb("!sheet S1\n!hidden-rows 3,4\n!hidden-cols B\n");
        let v = check_hidden(&w);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn run_all_on_empty_workbook() {
        let w = wb("!sheet S1\n");
        let out = run_all(&w, None, &RuleConfig::default()).unwrap();
        assert_eq!(rules_of(&out.violations), vec!["R05", "R07", "R09", "R11"]);
        assert_eq!(
            out.not_assessable.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            vec!["R10", "R12", "R20"]
        );
    }

    #[test]
    fn run_all_is_deterministic() {
        let src = "!sheet S1\nA1: 5\nB1: =A1\nC1: =A1\n!sheet Hidden2\n!hidden\n";
        let w = wb(src);
        let a = run_all(&w, None, &RuleConfig::default()).unwrap();
        let b = run_all(&w, None, &RuleConfig::default()).unwrap();
        assert_eq!(a.violations, b.violations);
    }

    #[test]
    fn run_all_sorts_forbidden_first() {
        // R21 (forbidden) must precede R05 (required) despite higher item number
        let w = wb("!sheet S1\n!hidden\nA1: 1\n");
        let out = run_all(&w, None, &RuleConfig::default()).unwrap();
        assert_eq!(out.violations[0].rule.to_string(), "R21");
    }

    #[test]
    fn disabling_removes_exactly_that_rule() {
        let src = "!sheet S1\nA1: 5\nB1: =A1\n";
        let w = wb(src);
        let base = run_all(&w, None, &RuleConfig::default()).unwrap();
        let mut cfg = RuleConfig::default();
        cfg.disabled_rules.insert("R14".parse().unwrap());
        let reduced = run_all(&w, None, &cfg).unwrap();
        let removed: Vec<_> = base
            .violations
            .iter()
            .filter(|v| !reduced.violations.contains(v))
            .collect();
        assert!(removed.iter().all(|v| v.rule.to_string() == "R14"));
        assert_eq!(base.violations.len(), reduced.violations.len() + removed.len());
        assert!(reduced.violations.iter().all(|v| v.rule.to_string() != "R14"));
    }

    #[test]
    fn labels_flag_state_controls_not_assessable() {
        let w = wb("!labels-in-formulas off\n!sheet S1\n");
        let out = run_all(&w, None, &RuleConfig::default()).unwrap();
        assert!(!out.not_assessable.iter().any(|r| r.to_string() == "R20"));
    }
}
