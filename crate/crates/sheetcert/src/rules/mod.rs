//! The rule catalog (R01–R21), violation records and the rule engine
//! configuration.

mod checks;
mod config;

pub use checks::{
    check_circularity, check_complexity, check_consistency, check_constants, check_hidden,
    check_manifest, check_reading_order, check_regions, check_sections, check_self_checks,
    check_settings, check_single_import, run_all, RunError, RunOutput,
};
pub use config::{load_config, parse_config, ConfigError};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::model::CellAddr;
use crate::regions::RegionDecl;

/// Rule identifier R01–R21, numbered after the code-of-practice items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(u8);

impl RuleId {
    pub fn new(item: u8) -> Option<RuleId> {
        (1..=21).contains(&item).then_some(RuleId(item))
    }

    pub fn item(&self) -> u8 {
        self.0
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{:02}", self.0)
    }
}

impl FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('R')
            .or_else(|| s.strip_prefix('r'))
            .ok_or_else(|| format!("bad rule id `{s}`"))?;
        let n: u8 = digits.parse().map_err(|_| format!("bad rule id `{s}`"))?;
        RuleId::new(n).ok_or_else(|| format!("rule id `{s}` out of range (R01-R21)"))
    }
}

/// The four practice categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Required,
    Encouraged,
    Discouraged,
    Forbidden,
}

impl Severity {
    pub fn name(&self) -> &'static str {
        match self {
            Severity::Required => "required",
            Severity::Encouraged => "encouraged",
            Severity::Discouraged => "discouraged",
            Severity::Forbidden => "forbidden",
        }
    }

    /// Report order: banned practice first, then missing requirements,
    /// then discouraged and encouraged characteristics.
    pub fn rank(&self) -> u8 {
        match self {
            Severity::Forbidden => 0,
            Severity::Required => 1,
            Severity::Discouraged => 2,
            Severity::Encouraged => 3,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a rule can be assessed from a finished workbook.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checkability {
    /// Decidable from workbook structure alone.
    Automatic,
    /// Needs the sidecar compliance manifest.
    ManifestBased,
    /// Depends on region inference heuristics.
    Heuristic,
    /// A development-process property invisible in the finished file.
    NotCheckable,
}

impl Checkability {
    pub fn name(&self) -> &'static str {
        match self {
            Checkability::Automatic => "automatic",
            Checkability::ManifestBased => "manifest-based",
            Checkability::Heuristic => "heuristic",
            Checkability::NotCheckable => "not-checkable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMeta {
    pub id: RuleId,
    pub severity: Severity,
    pub title: &'static str,
    pub appendix_item: u8,
    pub checkable: Checkability,
}

/// Category assignment is fixed by item number: 1–7 required, 8–15
/// encouraged, 16–17 discouraged, 18–21 forbidden.
pub fn severity_for_item(item: u8) -> Severity {
    match item {
        1..=7 => Severity::Required,
        8..=15 => Severity::Encouraged,
        16..=17 => Severity::Discouraged,
        _ => Severity::Forbidden,
    }
}

/// The full rule catalog, one entry per code-of-practice item.
pub fn catalog() -> Vec<RuleMeta> {
    use Checkability::*;
    let titles: [(&str, Checkability); 21] = [
        ("Formula rows copy consistently left to right", Automatic),
        ("Input, calculation and output regions separated", Heuristic),
        ("Sections modular and clearly titled", Heuristic),
        ("References read left to right, top to bottom", Heuristic),
        ("Treatment and assumptions documented per section", ManifestBased),
        ("Section descriptions drafted with the sections", ManifestBased),
        ("Sections independently checked after every change", ManifestBased),
        ("Layout readable at a brief glance", Heuristic),
        ("Section authorship and drafting dates recorded", ManifestBased),
        ("Proven logic reused across workbooks", NotCheckable),
        ("Workbook accompanied by a detailed specification", ManifestBased),
        ("Global parameters entered at the end, kept variable", NotCheckable),
        ("Each input imported into calculations exactly once", Heuristic),
        ("Extensive self-checking built in", Heuristic),
        ("Circular dependencies avoided or controlled", Automatic),
        ("No hardcoded constants inside formulas", Automatic),
        ("No formulas of excessive complexity", Automatic),
        ("No constants in place of formulas within runs", Automatic),
        ("Iterative calculation setting off", Automatic),
        ("Label-in-formula setting off", Automatic),
        ("No hidden rows, columns or sheets", Automatic),
    ];
    titles
        .iter()
        .enumerate()
        .map(|(i, (title, checkable))| {
            let item = (i + 1) as u8;
            RuleMeta {
                id: RuleId(item),
                severity: severity_for_item(item),
                title,
                appendix_item: item,
                checkable: *checkable,
            }
        })
        .collect()
}

pub fn rule_meta(id: RuleId) -> RuleMeta {
    catalog()
        .into_iter()
        .find(|m| m.id == id)
        .expect("rule id in range")
}

/// Where a violation points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Workbook,
    /// The sheet named by the violation's `sheet` field.
    Sheet,
    Cell(CellAddr),
    /// Inclusive row interval.
    Rows(u32, u32),
    Column(u32),
    Section(String),
}

impl Location {
    /// (kind rank, numeric keys, name) — a deterministic total order.
    fn sort_key(&self) -> (u8, u32, u32, String) {
        match self {
            Location::Workbook => (0, 0, 0, String::new()),
            Location::Sheet => (1, 0, 0, String::new()),
            Location::Section(name) => (2, 0, 0, name.clone()),
            Location::Rows(a, b) => (3, *a, *b, String::new()),
            Location::Column(c) => (4, *c, 0, String::new()),
            Location::Cell(addr) => (5, addr.row, addr.col, String::new()),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Workbook => f.write_str("workbook"),
            Location::Sheet => f.write_str("sheet"),
            Location::Cell(addr) => write!(f, "{addr}"),
            Location::Rows(a, b) if a == b => write!(f, "row {a}"),
            Location::Rows(a, b) => write!(f, "rows {a}-{b}"),
            Location::Column(c) => write!(f, "col {}", crate::model::col_to_letters(*c)),
            Location::Section(name) => write!(f, "section {name}"),
        }
    }
}

/// One rule breach. `sheet` is empty for workbook-level findings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: RuleId,
    pub severity: Severity,
    pub sheet: String,
    pub location: Location,
    pub message: String,
    pub details: BTreeMap<String, String>,
}

impl Violation {
    pub fn new(rule: RuleId, sheet: impl Into<String>, location: Location, message: impl Into<String>) -> Self {
        Violation {
            rule,
            severity: severity_for_item(rule.item()),
            sheet: sheet.into(),
            location,
            message: message.into(),
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: impl Into<String>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }
}

/// Tunable thresholds and switches for the checks. The declared regions ride
/// along because they change what counts as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleConfig {
    pub complexity_node_limit: u32,
    pub complexity_depth_limit: u32,
    /// Canonical decimal texts exempt from the hardcoded-constant rule.
    pub constant_allow_list: std::collections::BTreeSet<String>,
    pub exempt_function_args: bool,
    pub run_min_length: u32,
    pub min_check_cells: u32,
    pub disabled_rules: std::collections::BTreeSet<RuleId>,
    pub same_row_right_is_breach: bool,
    pub declared_regions: Vec<RegionDecl>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            complexity_node_limit: 25,
            complexity_depth_limit: 7,
            constant_allow_list: ["0", "1", "-1", "100"].iter().map(|s| s.to_string()).collect(),
            exempt_function_args: true,
            run_min_length: 3,
            min_check_cells: 1,
            disabled_rules: std::collections::BTreeSet::new(),
            same_row_right_is_breach: true,
            declared_regions: Vec::new(),
        }
    }
}

impl RuleConfig {
    pub fn constant_policy(&self) -> crate::formula::ConstantPolicy {
        crate::formula::ConstantPolicy {
            allow: self.constant_allow_list.clone(),
            exempt_function_args: self.exempt_function_args,
        }
    }

    /// Deterministic rendering of every field, the input to the config
    /// digest stored in certificates.
    pub fn canonical_text(&self) -> String {
        let allow: Vec<&str> = self.constant_allow_list.iter().map(|s| s.as_str()).collect();
        let disabled: Vec<String> = self.disabled_rules.iter().map(|r| r.to_string()).collect();
        let regions: Vec<String> = self.declared_regions.iter().map(|d| d.to_string()).collect();
        format!(
            "complexity_node_limit={}\ncomplexity_depth_limit={}\nconstant_allow_list={}\nexempt_function_args={}\nrun_min_length={}\nmin_check_cells={}\ndisabled_rules={}\nsame_row_right_is_breach={}\nregions={}\n",
            self.complexity_node_limit,
            self.complexity_depth_limit,
            allow.join(","),
            self.exempt_function_args,
            self.run_min_length,
            self.min_check_cells,
            disabled.join(","),
            self.same_row_right_is_breach,
            regions.join(";"),
        )
    }
}
