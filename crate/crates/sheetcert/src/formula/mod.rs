//! Formula tokenizer/parser, reference normalization and complexity metrics.
//!
//! Parsed references carry grid positions with per-axis absolute flags;
//! [`normalize`] rewrites relative axes as signed offsets from a host cell so
//! that copied formulas compare structurally equal.

mod parse;

pub use parse::parse;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{addr_from_a1, col_to_letters, CellAddr, NumberLit, MAX_COL, MAX_ROW};

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum FormulaError {
    #[error("unknown token at offset {pos}")]
    UnknownToken { pos: usize },
    #[error("unbalanced parentheses at offset {pos}")]
    UnbalancedParens { pos: usize },
    #[error("syntax error at offset {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    #[error("reference leaves the grid when resolved against {host}")]
    OffsetOutOfGrid { host: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
            BinOp::Concat => "&",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnOp {
    Neg,
    Plus,
    /// Postfix percent.
    Percent,
}

/// One reference axis: a source coordinate with an absolute flag, or a
/// normalized signed offset from the host cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Abs(u32),
    Rel(u32),
    Offset(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellPos {
    pub row: Axis,
    pub col: Axis,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellRef {
    pub sheet: Option<String>,
    pub pos: CellPos,
}

/// Rectangular range; both endpoints share the sheet qualifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RangeRef {
    pub sheet: Option<String>,
    pub start: CellPos,
    pub end: CellPos,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Number(NumberLit),
    Text(String),
    Bool(bool),
    ErrorLit(String),
    CellRef(CellRef),
    RangeRef(RangeRef),
    NameRef(String),
    /// Function name stored upper-case.
    Call(String, Vec<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Paren(Box<Expr>),
}

fn sheet_prefix(sheet: &Option<String>) -> String {
    match sheet {
        None => String::new(),
        Some(name) => {
            let plain = !name.is_empty()
                && name.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false)
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
            if plain {
                format!("{name}!")
            } else {
                format!("'{}'!", name.replace('\'', "''"))
            }
        }
    }
}

fn render_pos(pos: &CellPos) -> String {
    let a1 = !matches!(pos.row, Axis::Offset(_)) && !matches!(pos.col, Axis::Offset(_));
    if a1 {
        let (col_abs, col) = match pos.col {
            Axis::Abs(v) => (true, v),
            Axis::Rel(v) => (false, v),
            Axis::Offset(_) => unreachable!(),
        };
        let (row_abs, row) = match pos.row {
            Axis::Abs(v) => (true, v),
            Axis::Rel(v) => (false, v),
            Axis::Offset(_) => unreachable!(),
        };
        format!(
            "{}{}{}{}",
            if col_abs { "$" } else { "" },
            col_to_letters(col),
            if row_abs { "$" } else { "" },
            row
        )
    } else {
        // offset form, only used in fingerprint serializations
        let row = match pos.row {
            Axis::Abs(v) => format!("R{v}"),
            Axis::Rel(v) => format!("R{v}?"),
            Axis::Offset(d) => format!("R[{d}]"),
        };
        let col = match pos.col {
            Axis::Abs(v) => format!("C{v}"),
            Axis::Rel(v) => format!("C{v}?"),
            Axis::Offset(d) => format!("C[{d}]"),
        };
        format!("{row}{col}")
    }
}

/// Render an AST to canonical source text (without the leading `=`).
/// Reparsing the output of a parsed AST yields a structurally equal AST.
pub fn render(expr: &Expr) -> String {
    match expr {
        Expr::Number(n) => n.to_string(),
        Expr::Text(t) => format!("\"{}\"", t.replace('"', "\"\"")),
        Expr::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        Expr::ErrorLit(e) => e.clone(),
        Expr::CellRef(r) => format!("{}{}", sheet_prefix(&r.sheet), render_pos(&r.pos)),
        Expr::RangeRef(r) => format!(
            "{}{}:{}",
            sheet_prefix(&r.sheet),
            render_pos(&r.start),
            render_pos(&r.end)
        ),
        Expr::NameRef(n) => n.clone(),
        Expr::Call(name, args) => {
            let rendered: Vec<String> = args.iter().map(render).collect();
            format!("{name}({})", rendered.join(","))
        }
        Expr::Binary(op, l, r) => format!("{}{}{}", render(l), op.symbol(), render(r)),
        Expr::Unary(UnOp::Percent, inner) => format!("{}%", render(inner)),
        Expr::Unary(UnOp::Neg, inner) => format!("-{}", render(inner)),
        Expr::Unary(UnOp::Plus, inner) => format!("+{}", render(inner)),
        Expr::Paren(inner) => format!("({})", render(inner)),
    }
}

fn normalize_axis(axis: Axis, host: u32, max: u32, host_addr: CellAddr) -> Result<Axis, FormulaError> {
    match axis {
        Axis::Abs(v) => Ok(Axis::Abs(v)),
        Axis::Rel(v) => {
            if v < 1 || v > max {
                return Err(FormulaError::OffsetOutOfGrid {
                    host: host_addr.to_string(),
                });
            }
            Ok(Axis::Offset(v as i64 - host as i64))
        }
        Axis::Offset(d) => {
            let resolved = host as i64 + d;
            if resolved < 1 || resolved > max as i64 {
                return Err(FormulaError::OffsetOutOfGrid {
                    host: host_addr.to_string(),
                });
            }
            Ok(Axis::Offset(d))
        }
    }
}

fn normalize_pos(pos: &CellPos, host: CellAddr) -> Result<CellPos, FormulaError> {
    Ok(CellPos {
        row: normalize_axis(pos.row, host.row, MAX_ROW, host)?,
        col: normalize_axis(pos.col, host.col, MAX_COL, host)?,
    })
}

/// Rewrite every relative reference axis as a signed offset from `host`.
/// Absolute axes keep their coordinates. Structural equality of normalized
/// ASTs is what "same formula" means for the consistency rules.
pub fn normalize(expr: &Expr, host: CellAddr) -> Result<Expr, FormulaError> {
    let out = match expr {
        Expr::CellRef(r) => Expr::CellRef(CellRef {
            sheet: r.sheet.clone(),
            pos: normalize_pos(&r.pos, host)?,
        }),
        Expr::RangeRef(r) => Expr::RangeRef(RangeRef {
            sheet: r.sheet.clone(),
            start: normalize_pos(&r.start, host)?,
            end: normalize_pos(&r.end, host)?,
        }),
        Expr::Call(name, args) => Expr::Call(
            name.clone(),
            args.iter()
                .map(|a| normalize(a, host))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Expr::Binary(op, l, r) => Expr::Binary(
            *op,
            Box::new(normalize(l, host)?),
            Box::new(normalize(r, host)?),
        ),
        Expr::Unary(op, inner) => Expr::Unary(*op, Box::new(normalize(inner, host)?)),
        Expr::Paren(inner) => Expr::Paren(Box::new(normalize(inner, host)?)),
        leaf => leaf.clone(),
    };
    Ok(out)
}

fn translate_axis(axis: Axis, delta: i64, max: u32) -> Result<Axis, FormulaError> {
    match axis {
        Axis::Rel(v) => {
            let moved = v as i64 + delta;
            if moved < 1 || moved > max as i64 {
                Err(FormulaError::OffsetOutOfGrid {
                    host: String::new(),
                })
            } else {
                Ok(Axis::Rel(moved as u32))
            }
        }
        other => Ok(other),
    }
}

/// Shift every relative reference by (`drow`, `dcol`), the way a formula
/// moves when copied. Used to expand shared formula groups.
pub fn translate(expr: &Expr, drow: i64, dcol: i64) -> Result<Expr, FormulaError> {
    let tr_pos = |pos: &CellPos| -> Result<CellPos, FormulaError> {
        Ok(CellPos {
            row: translate_axis(pos.row, drow, MAX_ROW)?,
            col: translate_axis(pos.col, dcol, MAX_COL)?,
        })
    };
    let out = match expr {
        Expr::CellRef(r) => Expr::CellRef(CellRef {
            sheet: r.sheet.clone(),
            pos: tr_pos(&r.pos)?,
        }),
        Expr::RangeRef(r) => Expr::RangeRef(RangeRef {
            sheet: r.sheet.clone(),
            start: tr_pos(&r.start)?,
            end: tr_pos(&r.end)?,
        }),
        Expr::Call(name, args) => Expr::Call(
            name.clone(),
            args.iter()
                .map(|a| translate(a, drow, dcol))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Expr::Binary(op, l, r) => Expr::Binary(
            *op,
            Box::new(translate(l, drow, dcol)?),
            Box::new(translate(r, drow, dcol)?),
        ),
        Expr::Unary(op, inner) => Expr::Unary(*op, Box::new(translate(inner, drow, dcol)?)),
        Expr::Paren(inner) => Expr::Paren(Box::new(translate(inner, drow, dcol)?)),
        leaf => leaf.clone(),
    };
    Ok(out)
}

/// A reference resolved to concrete grid coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ResolvedRef {
    Cell {
        sheet: Option<String>,
        addr: CellAddr,
    },
    /// `start` is the top-left corner, `end` the bottom-right.
    Range {
        sheet: Option<String>,
        start: CellAddr,
        end: CellAddr,
    },
}

impl ResolvedRef {
    /// Number of cells the reference covers.
    pub fn cell_count(&self) -> u64 {
        match self {
            ResolvedRef::Cell { .. } => 1,
            ResolvedRef::Range { start, end, .. } => {
                (end.row - start.row + 1) as u64 * (end.col - start.col + 1) as u64
            }
        }
    }
}

/// References and unresolved defined names found in a formula.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct References {
    pub refs: Vec<ResolvedRef>,
    pub names: Vec<String>,
}

fn resolve_axis(axis: Axis, host: u32, max: u32) -> u32 {
    match axis {
        Axis::Abs(v) | Axis::Rel(v) => v,
        Axis::Offset(d) => (host as i64 + d).clamp(1, max as i64) as u32,
    }
}

fn resolve_pos(pos: &CellPos, host: CellAddr) -> CellAddr {
    CellAddr::new(
        resolve_axis(pos.row, host.row, MAX_ROW),
        resolve_axis(pos.col, host.col, MAX_COL),
    )
}

/// Collect every cell/range reference in the tree, resolved against `host`,
/// in left-to-right source order. Each reference token appears exactly once.
pub fn references(expr: &Expr, host: CellAddr) -> References {
    let mut out = References::default();
    collect_refs(expr, host, &mut out);
    out
}

fn collect_refs(expr: &Expr, host: CellAddr, out: &mut References) {
    match expr {
        Expr::CellRef(r) => out.refs.push(ResolvedRef::Cell {
            sheet: r.sheet.clone(),
            addr: resolve_pos(&r.pos, host),
        }),
        Expr::RangeRef(r) => {
            let a = resolve_pos(&r.start, host);
            let b = resolve_pos(&r.end, host);
            out.refs.push(ResolvedRef::Range {
                sheet: r.sheet.clone(),
                start: CellAddr::new(a.row.min(b.row), a.col.min(b.col)),
                end: CellAddr::new(a.row.max(b.row), a.col.max(b.col)),
            });
        }
        Expr::NameRef(n) => out.names.push(n.clone()),
        Expr::Call(_, args) => {
            for a in args {
                collect_refs(a, host, out);
            }
        }
        Expr::Binary(_, l, r) => {
            collect_refs(l, host, out);
            collect_refs(r, host, out);
        }
        Expr::Unary(_, inner) | Expr::Paren(inner) => collect_refs(inner, host, out),
        _ => {}
    }
}

/// Size and shape measurements of a formula tree. Parentheses are
/// transparent: they count toward neither node count nor depth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComplexityMetrics {
    pub node_count: u32,
    pub depth: u32,
    pub function_count: u32,
    pub distinct_functions: u32,
}

pub fn metrics(expr: &Expr) -> ComplexityMetrics {
    let mut functions = BTreeSet::new();
    let mut m = ComplexityMetrics::default();
    measure(expr, 0, &mut m, &mut functions);
    m.distinct_functions = functions.len() as u32;
    m
}

fn measure(expr: &Expr, depth_above: u32, m: &mut ComplexityMetrics, functions: &mut BTreeSet<String>) {
    if let Expr::Paren(inner) = expr {
        measure(inner, depth_above, m, functions);
        return;
    }
    let here = depth_above + 1;
    m.node_count += 1;
    m.depth = m.depth.max(here);
    match expr {
        Expr::Call(name, args) => {
            m.function_count += 1;
            functions.insert(name.clone());
            for a in args {
                measure(a, here, m, functions);
            }
        }
        Expr::Binary(_, l, r) => {
            measure(l, here, m, functions);
            measure(r, here, m, functions);
        }
        Expr::Unary(_, inner) => measure(inner, here, m, functions),
        _ => {}
    }
}

/// Functions whose non-first arguments legitimately take bare numbers
/// (digit counts, divisors, exponents).
pub const EXEMPT_ARG_FUNCTIONS: &[&str] = &["ROUND", "ROUNDUP", "ROUNDDOWN", "MOD", "POWER"];

/// Allow-list and exemption switches for [`constant_literals`].
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    /// Canonical decimal texts that never count as hardcoded.
    pub allow: BTreeSet<String>,
    /// Exempt literals appearing as non-first arguments of
    /// [`EXEMPT_ARG_FUNCTIONS`].
    pub exempt_function_args: bool,
}

impl Default for ConstantPolicy {
    fn default() -> Self {
        ConstantPolicy {
            allow: ["0", "1", "-1", "100"].iter().map(|s| s.to_string()).collect(),
            exempt_function_args: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantLiteral {
    pub value: NumberLit,
    /// Child-index path from the root.
    pub path: Vec<usize>,
}

/// Numeric literals in the tree that are neither allow-listed nor exempted.
/// A literal directly under unary minus counts as one negative literal.
pub fn constant_literals(expr: &Expr, policy: &ConstantPolicy) -> Vec<ConstantLiteral> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    collect_constants(expr, policy, false, &mut path, &mut out);
    out
}

/// Strip parens and a single sign layer; Some(lit) when the node is a bare
/// (possibly negated) numeric literal.
fn as_signed_literal(expr: &Expr) -> Option<NumberLit> {
    match expr {
        Expr::Number(n) => Some(n.clone()),
        Expr::Unary(UnOp::Neg, inner) => match inner.as_ref() {
            Expr::Number(n) => Some(n.negated()),
            _ => None,
        },
        Expr::Unary(UnOp::Plus, inner) => match inner.as_ref() {
            Expr::Number(n) => Some(n.clone()),
            _ => None,
        },
        Expr::Paren(inner) => as_signed_literal(inner),
        _ => None,
    }
}

fn collect_constants(
    expr: &Expr,
    policy: &ConstantPolicy,
    exempt_here: bool,
    path: &mut Vec<usize>,
    out: &mut Vec<ConstantLiteral>,
) {
    if let Some(lit) = as_signed_literal(expr) {
        if !exempt_here && !policy.allow.contains(lit.as_str()) {
            out.push(ConstantLiteral {
                value: lit,
                path: path.clone(),
            });
        }
        return;
    }
    match expr {
        Expr::Call(name, args) => {
            let exempt_args = policy.exempt_function_args && EXEMPT_ARG_FUNCTIONS.contains(&name.as_str());
            for (i, a) in args.iter().enumerate() {
                path.push(i);
                collect_constants(a, policy, exempt_args && i >= 1, path, out);
                path.pop();
            }
        }
        Expr::Binary(_, l, r) => {
            path.push(0);
            collect_constants(l, policy, false, path, out);
            path.pop();
            path.push(1);
            collect_constants(r, policy, false, path, out);
            path.pop();
        }
        Expr::Unary(_, inner) | Expr::Paren(inner) => {
            path.push(0);
            collect_constants(inner, policy, false, path, out);
            path.pop();
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Expr {
        parse(src).unwrap()
    }

    fn host(a1: &str) -> CellAddr {
        addr_from_a1(a1).unwrap().addr
    }

    #[test]
    fn parse_number() {
        assert_eq!(p("=1"), Expr::Number(NumberLit::parse("1").unwrap()));
    }

    #[test]
    fn parse_binary_refs() {
        let e = p("=B1+C1");
        match e {
            Expr::Binary(BinOp::Add, l, r) => {
                assert!(matches!(*l, Expr::CellRef(_)));
                assert!(matches!(*r, Expr::CellRef(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_function_and_abs_ref() {
        let e = p("=SUM(A1:A10)*$C$1");
        match e {
            Expr::Binary(BinOp::Mul, l, r) => {
                match *l {
                    Expr::Call(ref name, ref args) => {
                        assert_eq!(name, "SUM");
                        assert_eq!(args.len(), 1);
                        assert!(matches!(args[0], Expr::RangeRef(_)));
                    }
                    ref other => panic!("unexpected {other:?}"),
                }
                match *r {
                    Expr::CellRef(ref c) => {
                        assert_eq!(c.pos.row, Axis::Abs(1));
                        assert_eq!(c.pos.col, Axis::Abs(3));
                    }
                    ref other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_offsets() {
        // host B2, =A2 → (Δrow 0, Δcol −1)
        let n = normalize(&p("=A2"), host("B2")).unwrap();
        match n {
            Expr::CellRef(c) => {
                assert_eq!(c.pos.row, Axis::Offset(0));
                assert_eq!(c.pos.col, Axis::Offset(-1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_copy_invariance_trivial() {
        let a = normalize(&p("=A2"), host("B2")).unwrap();
        let b = normalize(&p("=A3"), host("B3")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalize_mixed_abs_rel() {
        // host B2, =$A$1+A1 → Abs(1,1) plus offsets (−1, −1)
        let n = normalize(&p("=$A$1+A1"), host("B2")).unwrap();
        match n {
            Expr::Binary(BinOp::Add, l, r) => {
                match *l {
                    Expr::CellRef(ref c) => {
                        assert_eq!(c.pos.row, Axis::Abs(1));
                        assert_eq!(c.pos.col, Axis::Abs(1));
                    }
                    ref other => panic!("unexpected {other:?}"),
                }
                match *r {
                    Expr::CellRef(ref c) => {
                        assert_eq!(c.pos.row, Axis::Offset(-1));
                        assert_eq!(c.pos.col, Axis::Offset(-1));
                    }
                    ref other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn references_examples() {
        assert!(references(&p("=1+2"), host("C1")).refs.is_empty());

        let r = references(&p("=A1+B1"), host("C1"));
        assert_eq!(
            r.refs,
            vec![
                ResolvedRef::Cell { sheet: None, addr: host("A1") },
                ResolvedRef::Cell { sheet: None, addr: host("B1") },
            ]
        );

        // rectangle A1:B2 covers 4 cells
        let r = references(&p("=SUM(A1:B2)"), host("D4"));
        assert_eq!(r.refs.len(), 1);
        assert_eq!(r.refs[0].cell_count(), 4);

        let r = references(&p("=rate*A1"), host("D4"));
        assert_eq!(r.names, vec!["rate".to_string()]);
        assert_eq!(r.refs.len(), 1);
    }

    #[test]
    fn reversed_range_is_normalized_to_rectangle() {
        let r = references(&p("=SUM(B2:A1)"), host("D4"));
        assert_eq!(
            r.refs[0],
            ResolvedRef::Range {
                sheet: None,
                start: host("A1"),
                end: host("B2"),
            }
        );
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(&p("=1"));
        assert_eq!((m.node_count, m.depth, m.function_count), (1, 1, 0));

        // hand count: Binary + two refs = 3 nodes, depth 2
        let m = metrics(&p("=A1+B1"));
        assert_eq!((m.node_count, m.depth), (3, 2));

        // hand count: IF, >, A1, 0, SUM, range, 0 = 7 nodes
        let m = metrics(&p("=IF(A1>0,SUM(B1:B9),0)"));
        assert_eq!(m.function_count, 2);
        assert_eq!(m.distinct_functions, 2);
        assert_eq!(m.node_count, 7);
        assert_eq!(m.depth, 3);
    }

    #[test]
    fn metrics_parens_transparent() {
        let with = metrics(&p("=(A1+B1)"));
        let without = metrics(&p("=A1+B1"));
        assert_eq!(with.node_count, without.node_count);
        assert_eq!(with.depth, without.depth);
    }

    #[test]
    fn constants_examples() {
        let policy = ConstantPolicy::default();
        assert!(constant_literals(&p("=A1*B1"), &policy).is_empty());

        let found = constant_literals(&p("=A1*1.05"), &policy);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].value.as_str(), "1.05");

        // 2 is the digit-count argument of ROUND: exempt
        assert!(constant_literals(&p("=ROUND(A1,2)"), &policy).is_empty());

        // first argument of ROUND is not exempt
        let found = constant_literals(&p("=ROUND(42,A1)"), &policy);
        assert_eq!(found.len(), 1);

        // allow-listed values never count
        assert!(constant_literals(&p("=A1*100"), &policy).is_empty());
        assert!(constant_literals(&p("=A1*0+1"), &policy).is_empty());

        // negated literal folds to -1 which is allow-listed
        assert!(constant_literals(&p("=A1*-1"), &policy).is_empty());
        let found = constant_literals(&p("=A1*-2"), &policy);
        assert_eq!(found[0].value.as_str(), "-2");
    }

    #[test]
    fn constants_exemption_off() {
        let policy = ConstantPolicy {
            exempt_function_args: false,
            ..ConstantPolicy::default()
        };
        let found = constant_literals(&p("=ROUND(A1,2)"), &policy);
        assert_eq!(found.len(), 1);
    }

    #[test]
    fn render_parse_round_trip() {
        for src in [
            "=1",
            "=B1+C1",
            "=SUM(A1:A10)*$C$1",
            "=IF(A1>0,SUM(B1:B9),0)",
            "=-A1%",
            "=\"a\"\"b\"&C3",
            "='My Sheet'!A1:B2+Sheet2!C3",
            "=(1+2)*3^2",
            "=2^-3",
            "=rate*months",
            "=#REF!+1",
            "=TRUE",
            "=A1<=B1",
            "=NOW()",
        ] {
            let ast = p(src);
            let rendered = format!("={}", render(&ast));
            let reparsed = parse(&rendered).unwrap();
            assert_eq!(ast, reparsed, "round trip failed for {src} → {rendered}");
        }
    }

    #[test]
    fn translate_moves_relative_only() {
        let t = translate(&p("=$A$1+A1"), 1, 1).unwrap();
        assert_eq!(render(&t), "$A$1+B2");
        // wrap past the top edge is a corrupt reference
        assert!(translate(&p("=A1"), -1, 0).is_err());
    }

    #[test]
    fn normalize_then_translate_commutes() {
        // direct instance of the copy-invariance property
        let src = "=SUM(A1:A3)+$B$2";
        let at = host("C4");
        let moved = translate(&p(src), 2, 3).unwrap();
        let lhs = normalize(&p(src), at).unwrap();
        let rhs = normalize(&moved, CellAddr::new(at.row + 2, at.col + 3)).unwrap();
        assert_eq!(lhs, rhs);
    }
}
