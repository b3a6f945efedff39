//! Line-oriented `key = value` configuration.
//!
//! ```text
//! # participants
//! adapter.nnenum.run = ./run_nnenum.sh {onnx} {vnnlib} {timeout} {result}
//! adapter.nnenum.prepare = ./prepare.sh
//! adapter.eran.mode = gpu
//! mode_override.eran.acasxu = cpu
//! baseline = randgen
//! budget.samples = 100
//! seed = 0
//! grace_seconds = 10
//! strict_witness = true
//! unscored = cifar2020
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use super::runner::ToolAdapter;
use super::{io_err, HarnessError};
use crate::verifier::Budget;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Sorted by id.
    pub adapters: Vec<ToolAdapter>,
    /// (tool, benchmark) → mode.
    pub mode_overrides: BTreeMap<(String, String), String>,
    /// Falsifier budget of the baseline participant.
    pub budget: Budget,
    pub grace: Duration,
    pub strict_witness: bool,
    /// Tool id under which the built-in baseline runs, if at all.
    pub baseline: Option<String>,
    pub unscored: BTreeSet<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            adapters: Vec::new(),
            mode_overrides: BTreeMap::new(),
            budget: Budget::easy(),
            grace: Duration::from_secs(10),
            strict_witness: true,
            baseline: None,
            unscored: ["cifar2020".to_string()].into_iter().collect(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Config::default();
        let mut adapters: BTreeMap<String, ToolAdapter> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| HarnessError::Config { line: n + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let parts: Vec<&str> = key.split('.').collect();
            let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite() && *x > 0.0);
            let count = |v: &str| v.parse::<usize>().ok().filter(|x| *x > 0);
            match parts.as_slice() {
                ["adapter", id, field] => {
                    let a = adapters.entry(id.to_string()).or_insert_with(|| ToolAdapter {
                        id: id.to_string(),
                        prepare: None,
                        run: String::new(),
                        mode: "default".into(),
                    });
                    match *field {
                        "run" => a.run = value.to_string(),
                        "prepare" => a.prepare = Some(value.to_string()),
                        "mode" => a.mode = value.to_string(),
                        other => return Err(err(format!("unknown adapter field {other:?}"))),
                    }
                }
                ["mode_override", tool, bench] => {
                    cfg.mode_overrides.insert((tool.to_string(), bench.to_string()), value.to_string());
                }
                ["budget", field] => {
                    let bad = || err(format!("budget.{field} must be positive, got {value:?}"));
                    match *field {
                        "samples" => cfg.budget.samples = count(value).ok_or_else(bad)?,
                        "pgd_restarts" => cfg.budget.pgd_restarts = count(value).ok_or_else(bad)?,
                        "pgd_steps" => cfg.budget.pgd_steps = count(value).ok_or_else(bad)?,
                        "max_subproblems" => cfg.budget.max_subproblems = count(value).ok_or_else(bad)?,
                        "step_fraction" => cfg.budget.step_fraction = num(value).ok_or_else(bad)?,
                        "time_limit" => cfg.budget.time_limit = Duration::from_secs_f64(num(value).ok_or_else(bad)?),
                        other => return Err(err(format!("unknown budget field {other:?}"))),
                    }
                }
                ["seed"] => cfg.budget.seed = value.parse().map_err(|_| err(format!("bad seed {value:?}")))?,
                ["grace_seconds"] => {
                    let g: f64 = value.parse().ok().filter(|g: &f64| *g >= 0.0 && g.is_finite()).ok_or_else(|| {
                        err(format!("grace_seconds must be a non-negative number, got {value:?}"))
                    })?;
                    cfg.grace = Duration::from_secs_f64(g);
                }
                ["strict_witness"] => {
                    cfg.strict_witness = value.parse().map_err(|_| err(format!("expected true/false, got {value:?}")))?
                }
                ["baseline"] => cfg.baseline = (!value.is_empty()).then(|| value.to_string()),
                ["unscored"] => {
                    cfg.unscored =
                        value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
                }
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        for a in adapters.values() {
            if a.run.is_empty() {
                return Err(HarnessError::Config { line: 0, msg: format!("adapter {} has no run command", a.id) });
            }
        }
        cfg.adapters = adapters.into_values().collect();
        Ok(cfg)
    }
}
