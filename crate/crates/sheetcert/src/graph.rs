//! Cell dependency graph: construction, cycle detection and reading-order
//! analysis.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formula::{references, ResolvedRef};
use crate::model::{CellAddr, CellContent, Workbook};

/// Upper bound on cells a single range reference may expand to.
pub const DEFAULT_RANGE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("range {range} in {sheet}!{addr} expands to {cells} cells (budget {budget})")]
    RangeTooLarge {
        sheet: String,
        addr: CellAddr,
        range: String,
        cells: u64,
        budget: u64,
    },
}

/// Sheet-qualified cell address. `sheet` holds the workbook's canonical
/// sheet name (or the verbatim name for references to unknown sheets).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualifiedAddr {
    pub sheet: String,
    pub addr: CellAddr,
}

impl QualifiedAddr {
    pub fn new(sheet: impl Into<String>, addr: CellAddr) -> Self {
        QualifiedAddr { sheet: sheet.into(), addr }
    }
}

impl fmt::Display for QualifiedAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", self.sheet, self.addr)
    }
}

pub type NodeId = usize;

/// Directed dependency graph: an edge runs from each formula cell to every
/// cell it references, with ranges expanded to their member cells.
#[derive(Debug)]
pub struct DepGraph {
    nodes: Vec<QualifiedAddr>,
    index: HashMap<QualifiedAddr, NodeId>,
    /// Outgoing edges per node, with multiplicity (a cell referenced both
    /// directly and via a range contributes twice to the edge count).
    out_edges: Vec<Vec<NodeId>>,
    /// Deduplicated reverse adjacency.
    in_edges: Vec<BTreeSet<NodeId>>,
    formula_node: Vec<bool>,
    /// Workbook sheet order, for cross-sheet reading-order queries.
    sheet_order: Vec<String>,
}

/// A strongly connected set of mutually-referencing cells (size ≥ 2), or a
/// single self-referencing cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub members: Vec<QualifiedAddr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreachKind {
    /// Referenced cell is strictly below the formula on the same sheet.
    Below,
    /// Referenced cell is on the same row, strictly to the right.
    SameRowRight,
    /// Referenced sheet comes later in workbook sheet order.
    CrossSheetLater,
}

/// A formula reference that reads against left-to-right, top-to-bottom order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breach {
    pub from: QualifiedAddr,
    pub to: QualifiedAddr,
    pub kind: BreachKind,
}

impl DepGraph {
    fn intern(&mut self, qa: QualifiedAddr) -> NodeId {
        if let Some(&id) = self.index.get(&qa) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(qa.clone());
        self.index.insert(qa, id);
        self.out_edges.push(Vec::new());
        self.in_edges.push(BTreeSet::new());
        self.formula_node.push(false);
        id
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Total edge count including multiplicity: equals the sum over formulas
    /// of their resolved reference cell counts.
    pub fn edge_count(&self) -> u64 {
        self.out_edges.iter().map(|e| e.len() as u64).sum()
    }

    pub fn node(&self, id: NodeId) -> &QualifiedAddr {
        &self.nodes[id]
    }

    pub fn node_id(&self, qa: &QualifiedAddr) -> Option<NodeId> {
        self.index.get(qa).copied()
    }

    pub fn is_formula_node(&self, id: NodeId) -> bool {
        self.formula_node[id]
    }

    /// Formula cells that reference `target`, deduplicated: a formula
    /// referencing the target both directly and via a range counts once.
    pub fn direct_dependents(&self, target: &QualifiedAddr) -> BTreeSet<QualifiedAddr> {
        match self.index.get(target) {
            None => BTreeSet::new(),
            Some(&id) => self.in_edges[id]
                .iter()
                .map(|&src| self.nodes[src].clone())
                .collect(),
        }
    }

    fn sheet_pos(&self, name: &str) -> Option<usize> {
        self.sheet_order
            .iter()
            .position(|s| s.eq_ignore_ascii_case(name))
    }
}

/// Build the dependency graph for a workbook with parsed formulas.
/// References to empty cells create nodes with no content.
pub fn build(wb: &Workbook) -> Result<DepGraph, GraphError> {
    build_with_budget(wb, DEFAULT_RANGE_BUDGET)
}

pub fn build_with_budget(wb: &Workbook, budget: u64) -> Result<DepGraph, GraphError> {
    let mut g = DepGraph {
        nodes: Vec::new(),
        index: HashMap::new(),
        out_edges: Vec::new(),
        in_edges: Vec::new(),
        formula_node: Vec::new(),
        sheet_order: wb.sheets.iter().map(|s| s.name.clone()).collect(),
    };

    for sheet in &wb.sheets {
        for (addr, cell) in &sheet.cells {
            let ast = match &cell.content {
                CellContent::Formula { ast, .. } => ast,
                _ => continue,
            };
            let src = g.intern(QualifiedAddr::new(sheet.name.clone(), *addr));
            g.formula_node[src] = true;
            let found = references(ast, *addr);
            for r in &found.refs {
                // resolve the optional sheet qualifier to a canonical name
                let target_sheet = match r {
                    ResolvedRef::Cell { sheet: s, .. } | ResolvedRef::Range { sheet: s, .. } => {
                        match s {
                            None => sheet.name.clone(),
                            Some(name) => wb
                                .sheet_ci(name)
                                .map(|s| s.name.clone())
                                .unwrap_or_else(|| name.clone()),
                        }
                    }
                };
                match r {
                    ResolvedRef::Cell { addr: target, .. } => {
                        let dst = g.intern(QualifiedAddr::new(target_sheet, *target));
                        g.out_edges[src].push(dst);
                        g.in_edges[dst].insert(src);
                    }
                    ResolvedRef::Range { start, end, .. } => {
                        let cells = r.cell_count();
                        if cells > budget {
                            return Err(GraphError::RangeTooLarge {
                                sheet: sheet.name.clone(),
                                addr: *addr,
                                range: format!("{start}:{end}"),
                                cells,
                                budget,
                            });
                        }
                        for row in start.row..=end.row {
                            for col in start.col..=end.col {
                                let dst = g.intern(QualifiedAddr::new(
                                    target_sheet.clone(),
                                    CellAddr::new(row, col),
                                ));
                                g.out_edges[src].push(dst);
                                g.in_edges[dst].insert(src);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(g)
}

/// Strongly connected components of size ≥ 2, plus self-loops, each reported
/// as one [`Cycle`]. Members and cycles are ordered by smallest address.
pub fn find_cycles(g: &DepGraph) -> Vec<Cycle> {
    let sccs = tarjan_scc(g.node_count(), &g.out_edges);
    let mut cycles = Vec::new();
    for comp in sccs {
        let is_cycle = comp.len() >= 2
            || (comp.len() == 1 && g.out_edges[comp[0]].contains(&comp[0]));
        if !is_cycle {
            continue;
        }
        let mut members: Vec<QualifiedAddr> = comp.iter().map(|&id| g.nodes[id].clone()).collect();
        members.sort_by_key(|qa| sort_key(g, qa));
        cycles.push(Cycle { members });
    }
    cycles.sort_by_key(|c| sort_key(g, &c.members[0]));
    cycles
}

fn sort_key(g: &DepGraph, qa: &QualifiedAddr) -> (usize, String, u32, u32) {
    (
        g.sheet_pos(&qa.sheet).unwrap_or(usize::MAX),
        qa.sheet.clone(),
        qa.addr.row,
        qa.addr.col,
    )
}

/// Iterative Tarjan so that long dependency chains cannot overflow the stack.
fn tarjan_scc(n: usize, adj: &[Vec<NodeId>]) -> Vec<Vec<NodeId>> {
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0usize;
    let mut comps = Vec::new();
    // work stack frames: (node, next child offset)
    let mut work: Vec<(NodeId, usize)> = Vec::new();

    for start in 0..n {
        if index[start] != UNSET {
            continue;
        }
        work.push((start, 0));
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let mut advanced = false;
            while *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == UNSET {
                    work.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

/// All references that read against left-to-right, top-to-bottom order:
/// same-sheet targets strictly below the formula or strictly to its right on
/// the same row, and cross-sheet targets on later sheets. Pairs are
/// deduplicated; references to sheets outside the workbook are skipped.
pub fn reading_order_breaches(g: &DepGraph, _wb: &Workbook) -> Vec<Breach> {
    let mut out = Vec::new();
    let mut ids: Vec<NodeId> = (0..g.node_count()).filter(|&id| g.formula_node[id]).collect();
    ids.sort_by_key(|&id| sort_key(g, &g.nodes[id]));
    for src in ids {
        let from = g.nodes[src].clone();
        let from_sheet = match g.sheet_pos(&from.sheet) {
            Some(p) => p,
            None => continue,
        };
        let mut targets: Vec<NodeId> = g.out_edges[src].clone();
        targets.sort_unstable();
        targets.dedup();
        targets.sort_by_key(|&id| sort_key(g, &g.nodes[id]));
        for dst in targets {
            let to = &g.nodes[dst];
            let to_sheet = match g.sheet_pos(&to.sheet) {
                Some(p) => p,
                None => continue,
            };
            let kind = if to_sheet > from_sheet {
                BreachKind::CrossSheetLater
            } else if to_sheet < from_sheet {
                continue;
            } else if to.addr.row > from.addr.row {
                BreachKind::Below
            } else if to.addr.row == from.addr.row && to.addr.col > from.addr.col {
                BreachKind::SameRowRight
            } else {
                continue;
            };
            out.push(Breach {
                from: from.clone(),
                to: to.clone(),
                kind,
            });
        }
    }
    out
}
