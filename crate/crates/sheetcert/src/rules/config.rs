//! Rule configuration file: `key = value` lines, one key per field.
//!
//! ```text
//! complexity_node_limit = 25
//! complexity_depth_limit = 7
//! constant_allow_list = 0,1,-1,100
//! exempt_function_args = true
//! run_min_length = 3
//! min_check_cells = 1
//! disabled_rules = R04,R14
//! same_row_right_is_breach = true
//! ```

use std::path::Path;

use thiserror::Error;

use crate::model::NumberLit;

use super::RuleConfig;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config error on line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("cannot read config file: {0}")]
    Io(String),
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RuleConfig, ConfigError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RuleConfig, ConfigError> {
    let mut cfg = RuleConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |reason: String| ConfigError::Syntax {
            line: line_no,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| syntax("expected `key = value`".into()))?;
        match key {
            "complexity_node_limit" => {
                cfg.complexity_node_limit = parse_positive(value).map_err(syntax)?;
            }
            "complexity_depth_limit" => {
                cfg.complexity_depth_limit = parse_positive(value).map_err(syntax)?;
            }
            "constant_allow_list" => {
                cfg.constant_allow_list = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        NumberLit::parse(s)
                            .map(|n| n.as_str().to_string())
                            .ok_or_else(|| format!("bad decimal `{s}` in allow list"))
                    })
                    .collect::<Result<_, _>>()
                    .map_err(syntax)?;
            }
            "exempt_function_args" => {
                cfg.exempt_function_args = parse_bool(value).map_err(syntax)?;
            }
            "run_min_length" => {
                let n = parse_positive(value).map_err(syntax)?;
                if n < 2 {
                    return Err(syntax("run_min_length must be at least 2".into()));
                }
                cfg.run_min_length = n;
            }
            "min_check_cells" => {
                cfg.min_check_cells = parse_positive(value).map_err(syntax)?;
            }
            "disabled_rules" => {
                cfg.disabled_rules = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse())
                    .collect::<Result<_, _>>()
                    .map_err(syntax)?;
            }
            "same_row_right_is_breach" => {
                cfg.same_row_right_is_breach = parse_bool(value).map_err(syntax)?;
            }
            other => return Err(syntax(format!("unknown config key `{other}`"))),
        }
    }
    Ok(cfg)
}

fn parse_positive(value: &str) -> Result<u32, String> {
    value
        .parse::<u32>()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| format!("expected a positive integer, got `{value}`"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        other => Err(format!("expected true/false, got `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_catalog() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RuleConfig::default());
        assert_eq!(cfg.complexity_node_limit, 25);
        assert_eq!(cfg.complexity_depth_limit, 7);
        assert_eq!(cfg.run_min_length, 3);
        assert_eq!(cfg.min_check_cells, 1);
        assert!(cfg.same_row_right_is_breach);
        assert!(cfg.exempt_function_args);
        let allow: Vec<&str> = cfg.constant_allow_list.iter().map(|s| s.as_str()).collect();
        assert_eq!(allow, vec!["-1", "0", "1", "100"]);
    }

    #[test]
    fn full_config_round() {
        let cfg = parse_config(
            "# tuned\ncomplexity_node_limit = 40\nconstant_allow_list = 0, 12, 1.50\ndisabled_rules = R04,R14\nsame_row_right_is_breach = false\n",
        )
        .unwrap();
        assert_eq!(cfg.complexity_node_limit, 40);
        assert!(cfg.constant_allow_list.contains("1.5"));
        assert_eq!(cfg.disabled_rules.len(), 2);
        assert!(!cfg.same_row_right_is_breach);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_config("complexity_node_limit = zero\n").is_err());
        assert!(parse_config("run_min_length = 1\n").is_err());
        assert!(parse_config("disabled_rules = R99\n").is_err());
        assert!(parse_config("mystery = 1\n").is_err());
        assert!(parse_config("no equals\n").is_err());
    }
}
