//! The scoring rules as standalone functions.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::Serialize;

use super::{RunRecord, ScoringError};
use crate::Status;

/// Adjusted runtimes within this many seconds of each other count as equal.
pub const TIE_WINDOW: f64 = 0.2;

/// Absorbs binary rounding in differences such as `6.6 - 6.4`.
const TIE_EPS: f64 = 1e-9;

/// Runtimes below this after overhead correction are rounded up to it.
const RUNTIME_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OverheadMode {
    /// One overhead per tool, the minimum over all its records.
    Single,
    /// One overhead per (tool, execution mode).
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AdjudicationMode {
    /// The majority answer is correct; an exact tie ignores the instance.
    Voting,
    /// A result is incorrect only when it is the single dissenter.
    OddOneOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Label {
    Correct,
    Incorrect,
    Ignored,
    Unsolved,
}

/// Minimum raw runtime over `records`, skipping timeouts and errors (their
/// times reflect the cap or a crash, not startup cost).
pub fn measure_overhead<'a, I>(records: I) -> Result<f64, ScoringError>
where
    I: IntoIterator<Item = &'a RunRecord>,
{
    records
        .into_iter()
        .filter(|r| !matches!(r.status, Status::Timeout | Status::Error))
        .map(|r| r.seconds)
        .min_by(f64::total_cmp)
        .ok_or(ScoringError::EmptyRecordSet)
}

pub fn adjusted_runtime(raw: f64, overhead: f64) -> f64 {
    (raw - overhead).max(RUNTIME_FLOOR)
}

/// Overheads keyed by (tool, mode). In single mode every mode of a tool
/// shares one value.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OverheadModel {
    pub mode: Option<OverheadMode>,
    pub entries: BTreeMap<(String, String), f64>,
    pub warnings: Vec<String>,
}

impl OverheadModel {
    pub fn measure(records: &[RunRecord], mode: OverheadMode) -> Self {
        let mut groups: BTreeMap<(&str, &str), Vec<&RunRecord>> = BTreeMap::new();
        let mut per_tool: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
        for r in records {
            groups.entry((r.tool.as_str(), r.mode.as_str())).or_default().push(r);
            per_tool.entry(r.tool.as_str()).or_default().push(r);
        }
        let mut warnings = Vec::new();
        let mut measure = |what: String, recs: &[&RunRecord]| {
            measure_overhead(recs.iter().copied()).unwrap_or_else(|_| {
                let msg = format!("no usable runtimes for {what}; overhead taken as 0");
                warn!("{msg}");
                warnings.push(msg);
                0.0
            })
        };
        let mut entries = BTreeMap::new();
        match mode {
            OverheadMode::Single => {
                for (tool, recs) in &per_tool {
                    let v = measure(tool.to_string(), recs);
                    for (t, m) in groups.keys().filter(|(t, _)| t == tool) {
                        entries.insert((t.to_string(), m.to_string()), v);
                    }
                }
            }
            OverheadMode::Multi => {
                for ((tool, m), recs) in &groups {
                    let v = measure(format!("{tool} in mode {m}"), recs);
                    entries.insert((tool.to_string(), m.to_string()), v);
                }
            }
        }
        OverheadModel { mode: Some(mode), entries, warnings }
    }

    pub fn get(&self, tool: &str, mode: &str) -> f64 {
        self.entries.get(&(tool.to_string(), mode.to_string())).copied().unwrap_or(0.0)
    }
}

/// Labels every tool's answer on one instance. `witness_validated` means a
/// checked counterexample exists, which makes `violated` the ground truth
/// under either mode.
pub fn adjudicate(
    outcomes: &BTreeMap<String, Status>,
    witness_validated: bool,
    mode: AdjudicationMode,
) -> BTreeMap<String, Label> {
    let holds: BTreeSet<&str> =
        outcomes.iter().filter(|(_, s)| **s == Status::Holds).map(|(t, _)| t.as_str()).collect();
    let violated: BTreeSet<&str> =
        outcomes.iter().filter(|(_, s)| **s == Status::Violated).map(|(t, _)| t.as_str()).collect();

    // Which answer is right: Some(status) for a decided instance, None when
    // the solvers' answers are ignored.
    let truth = if witness_validated {
        Some(Status::Violated)
    } else if holds.is_empty() || violated.is_empty() {
        // Unanimous (or nobody solved it).
        Some(if holds.is_empty() { Status::Violated } else { Status::Holds })
    } else {
        match mode {
            AdjudicationMode::Voting => match holds.len().cmp(&violated.len()) {
                std::cmp::Ordering::Greater => Some(Status::Holds),
                std::cmp::Ordering::Less => Some(Status::Violated),
                std::cmp::Ordering::Equal => None,
            },
            AdjudicationMode::OddOneOut => {
                if violated.len() == 1 && holds.len() >= 2 {
                    Some(Status::Holds)
                } else if holds.len() == 1 && violated.len() >= 2 {
                    Some(Status::Violated)
                } else {
                    None
                }
            }
        }
    };

    outcomes
        .iter()
        .map(|(tool, status)| {
            let label = if !status.is_solved() {
                Label::Unsolved
            } else {
                match truth {
                    None => Label::Ignored,
                    Some(t) if t == *status => Label::Correct,
                    Some(_) => Label::Incorrect,
                }
            };
            (tool.clone(), label)
        })
        .collect()
}

/// Base points for one tool on one instance.
pub fn score_instance(label: Label, status: Status, easy_violated: bool) -> i64 {
    match (label, status) {
        (Label::Correct, Status::Holds) => 10,
        (Label::Correct, Status::Violated) => {
            if easy_violated {
                1
            } else {
                10
            }
        }
        (Label::Incorrect, _) => -100,
        _ => 0,
    }
}

/// Time bonus: eligible tools sorted by adjusted runtime are chained into
/// classes whenever neighbours are within [`TIE_WINDOW`]; the fastest class
/// gets +2 each and the next class +1 each.
pub fn time_bonus(adjusted: &BTreeMap<String, f64>, eligible: &BTreeSet<String>) -> BTreeMap<String, i64> {
    let mut times: Vec<(&str, f64)> = adjusted
        .iter()
        .filter(|(t, _)| eligible.contains(*t))
        .map(|(t, v)| (t.as_str(), *v))
        .collect();
    times.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    let mut out: BTreeMap<String, i64> = adjusted.keys().map(|t| (t.clone(), 0)).collect();
    let mut class = 0;
    for (i, (tool, t)) in times.iter().enumerate() {
        if i > 0 && t - times[i - 1].1 > TIE_WINDOW + TIE_EPS {
            class += 1;
        }
        let bonus = match class {
            0 => 2,
            1 => 1,
            _ => break,
        };
        out.insert(tool.to_string(), bonus);
    }
    out
}

/// Percent of the best tool's point sum, floored at 0. Returns the
/// percentages and a warning when no tool has a positive sum.
pub fn benchmark_percent(sums: &BTreeMap<String, i64>) -> (BTreeMap<String, f64>, Option<String>) {
    let best = sums.values().copied().max().unwrap_or(0);
    if best <= 0 {
        let msg = "no tool has a positive point sum; all percentages are 0".to_string();
        return (sums.keys().map(|t| (t.clone(), 0.0)).collect(), Some(msg));
    }
    let pct = sums
        .iter()
        .map(|(t, &s)| {
            let p = if s == best { 100.0 } else { (100.0 * s as f64 / best as f64).max(0.0) };
            (t.clone(), p)
        })
        .collect();
    (pct, None)
}

/// Sums each tool's unrounded percentages over the scored benchmarks and
/// ranks them, best first, ties broken by tool name.
pub fn overall_table(
    percentages: &BTreeMap<String, BTreeMap<String, f64>>,
    scored: &BTreeSet<String>,
) -> Vec<(String, f64)> {
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for (bench, pct) in percentages {
        for (tool, p) in pct {
            let entry = totals.entry(tool.clone()).or_insert(0.0);
            if scored.contains(bench) {
                *entry += p;
            }
        }
    }
    let mut ranked: Vec<(String, f64)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Formats `v` with one decimal, rounding half away from zero. The value is
/// first printed to 12 decimals so binary noise (`779.65` stored as
/// `779.64999…`) does not decide the rounding direction.
pub fn round_half_away(v: f64) -> String {
    let s = format!("{:.12}", v.abs());
    let (int, frac) = s.split_once('.').expect("fixed format has a point");
    let first = frac.as_bytes()[0] - b'0';
    let round_up = frac.as_bytes()[1] >= b'5';
    let mut tenths: u64 = int.parse::<u64>().expect("finite value") * 10 + first as u64;
    if round_up {
        tenths += 1;
    }
    let sign = if v < 0.0 && tenths != 0 { "-" } else { "" };
    format!("{sign}{}.{}", tenths / 10, tenths % 10)
}
