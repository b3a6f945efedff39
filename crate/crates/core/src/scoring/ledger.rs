//! The full scoring pipeline from run records to a [`ScoreLedger`].

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::Serialize;

use super::rules::{
    adjudicate, adjusted_runtime, benchmark_percent, overall_table, score_instance, time_bonus, AdjudicationMode, Label,
    OverheadMode, OverheadModel,
};
use super::{RunRecord, ScoringError, TRIVIAL_BENCHMARK};
use crate::Status;

/// (benchmark, instance) pair.
pub type InstanceKey = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOptions {
    pub overhead: OverheadMode,
    pub adjudication: AdjudicationMode,
    /// Tool whose `violated` results mark instances as easy.
    pub easy_tool: Option<String>,
    /// Explicit easy-violated flags; used instead of `easy_tool` when set.
    pub easy_flags: Option<BTreeSet<InstanceKey>>,
    /// Benchmarks reported but left out of the overall sum.
    pub unscored: BTreeSet<String>,
    /// Position of each instance within its benchmark. Instances not listed
    /// follow the listed ones, sorted by id.
    pub instance_order: BTreeMap<InstanceKey, usize>,
    /// Tool order for the per-instance logs; defaults to sorted ids.
    pub tool_order: Option<Vec<String>>,
    /// Execution mode forced for (tool, benchmark).
    pub mode_overrides: BTreeMap<(String, String), String>,
    /// Instances with a checked counterexample.
    pub validated_witnesses: BTreeSet<InstanceKey>,
    /// Description of the falsifier budget behind the easy flags.
    pub baseline_budget: Option<String>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            overhead: OverheadMode::Multi,
            adjudication: AdjudicationMode::OddOneOut,
            easy_tool: Some("randgen".into()),
            easy_flags: None,
            unscored: ["cifar2020".to_string()].into_iter().collect(),
            instance_order: BTreeMap::new(),
            tool_order: None,
            mode_overrides: BTreeMap::new(),
            validated_witnesses: BTreeSet::new(),
            baseline_budget: None,
        }
    }
}

/// One tool's result on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolCell {
    pub status: Status,
    pub adjusted: f64,
    pub label: Label,
    /// Total points, time bonus included.
    pub points: i64,
    pub bonus: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceScore {
    pub benchmark: String,
    pub instance: String,
    pub index: usize,
    pub easy: bool,
    pub witness_validated: bool,
    /// Keyed by tool; tools without a record on the instance are absent.
    pub cells: BTreeMap<String, ToolCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub tool: String,
    pub verified: usize,
    pub falsified: usize,
    pub fastest: usize,
    pub score: i64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkScore {
    pub name: String,
    pub scored: bool,
    pub instances: Vec<InstanceScore>,
    /// Ranked best first.
    pub rows: Vec<BenchmarkRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreLedger {
    pub overhead_mode: OverheadMode,
    pub adjudication: AdjudicationMode,
    pub tools: Vec<String>,
    pub overheads: OverheadModel,
    /// Sorted by name; the trivial benchmark is never included.
    pub benchmarks: Vec<BenchmarkScore>,
    /// Ranked best first, unrounded.
    pub overall: Vec<(String, f64)>,
    /// Methodology notes for report headers.
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

/// Scores a record set. The result does not depend on record order.
pub fn score(records: &[RunRecord], opts: &ScoreOptions) -> Result<ScoreLedger, ScoringError> {
    let mut recs: Vec<RunRecord> = records.to_vec();
    for r in &mut recs {
        if let Some(m) = opts.mode_overrides.get(&(r.tool.clone(), r.benchmark.clone())) {
            r.mode = m.clone();
        }
    }
    // Canonical order: the overhead minimum and every map below are then
    // independent of how the records arrived.
    recs.sort_by(|a, b| {
        (&a.benchmark, &a.instance, &a.tool).cmp(&(&b.benchmark, &b.instance, &b.tool))
    });
    for w in recs.windows(2) {
        if (&w[0].benchmark, &w[0].instance, &w[0].tool) == (&w[1].benchmark, &w[1].instance, &w[1].tool) {
            return Err(ScoringError::DuplicateRecord {
                tool: w[0].tool.clone(),
                benchmark: w[0].benchmark.clone(),
                instance: w[0].instance.clone(),
            });
        }
    }

    let overheads = OverheadModel::measure(&recs, opts.overhead);
    let mut warnings = overheads.warnings.clone();

    let mut tools: Vec<String> = recs.iter().map(|r| r.tool.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if let Some(order) = &opts.tool_order {
        let rank = |t: &String| order.iter().position(|o| o == t).unwrap_or(usize::MAX);
        tools.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    }

    let easy: BTreeSet<InstanceKey> = match (&opts.easy_flags, &opts.easy_tool) {
        (Some(flags), _) => flags.clone(),
        (None, Some(tool)) => recs
            .iter()
            .filter(|r| &r.tool == tool && r.status == Status::Violated)
            .map(|r| (r.benchmark.clone(), r.instance.clone()))
            .collect(),
        (None, None) => BTreeSet::new(),
    };

    let mut by_bench: BTreeMap<&str, BTreeMap<&str, Vec<&RunRecord>>> = BTreeMap::new();
    for r in recs.iter().filter(|r| r.benchmark != TRIVIAL_BENCHMARK) {
        by_bench.entry(&r.benchmark).or_default().entry(&r.instance).or_default().push(r);
    }

    let mut benchmarks = Vec::new();
    let mut percentages: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (bench, instances) in &by_bench {
        let mut ids: Vec<&str> = instances.keys().copied().collect();
        let pos = |id: &str| opts.instance_order.get(&(bench.to_string(), id.to_string())).copied();
        ids.sort_by(|a, b| match (pos(a), pos(b)) {
            (Some(x), Some(y)) => x.cmp(&y).then(a.cmp(b)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(b),
        });

        let mut scored_instances = Vec::with_capacity(ids.len());
        for (index, id) in ids.iter().enumerate() {
            let key = (bench.to_string(), id.to_string());
            let rs = &instances[id];
            let is_easy = easy.contains(&key);
            let validated = opts.validated_witnesses.contains(&key);
            scored_instances.push(score_one(bench, id, index, rs, is_easy, validated, &overheads, opts));
        }

        let participants: BTreeSet<&str> =
            instances.values().flatten().map(|r| r.tool.as_str()).collect();
        let mut sums: BTreeMap<String, i64> = BTreeMap::new();
        let mut rows: Vec<BenchmarkRow> = Vec::new();
        for tool in &participants {
            let cells = scored_instances.iter().filter_map(|i| i.cells.get(*tool));
            let mut row = BenchmarkRow {
                tool: tool.to_string(),
                verified: 0,
                falsified: 0,
                fastest: 0,
                score: 0,
                percent: 0.0,
            };
            for c in cells {
                row.verified += usize::from(c.status == Status::Holds);
                row.falsified += usize::from(c.status == Status::Violated);
                row.fastest += usize::from(c.bonus == 2);
                row.score += c.points;
            }
            sums.insert(tool.to_string(), row.score);
            rows.push(row);
        }
        let (pct, warning) = benchmark_percent(&sums);
        let mut bench_warnings = Vec::new();
        if let Some(w) = warning {
            warn!("{bench}: {w}");
            bench_warnings.push(w.clone());
            warnings.push(format!("{bench}: {w}"));
        }
        for row in &mut rows {
            row.percent = pct[&row.tool];
        }
        rows.sort_by(|a, b| b.score.cmp(&a.score).then(a.tool.cmp(&b.tool)));
        percentages.insert(bench.to_string(), pct);
        benchmarks.push(BenchmarkScore {
            name: bench.to_string(),
            scored: !opts.unscored.contains(*bench),
            instances: scored_instances,
            rows,
            warnings: bench_warnings,
        });
    }

    let scored: BTreeSet<String> = benchmarks.iter().filter(|b| b.scored).map(|b| b.name.clone()).collect();
    let mut overall = overall_table(&percentages, &scored);
    for t in &tools {
        if !overall.iter().any(|(o, _)| o == t) {
            overall.push((t.clone(), 0.0));
        }
    }
    overall.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    Ok(ScoreLedger {
        overhead_mode: opts.overhead,
        adjudication: opts.adjudication,
        tools,
        overheads,
        notes: notes(opts),
        benchmarks,
        overall,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn score_one(
    bench: &str,
    id: &str,
    index: usize,
    rs: &[&RunRecord],
    easy: bool,
    validated: bool,
    overheads: &OverheadModel,
    opts: &ScoreOptions,
) -> InstanceScore {
    let outcomes: BTreeMap<String, Status> = rs.iter().map(|r| (r.tool.clone(), r.status)).collect();
    let adjusted: BTreeMap<String, f64> = rs
        .iter()
        .map(|r| (r.tool.clone(), adjusted_runtime(r.seconds, overheads.get(&r.tool, &r.mode))))
        .collect();
    let labels = adjudicate(&outcomes, validated, opts.adjudication);
    let eligible: BTreeSet<String> =
        labels.iter().filter(|(_, l)| **l == Label::Correct).map(|(t, _)| t.clone()).collect();
    let bonus = time_bonus(&adjusted, &eligible);
    let cells = outcomes
        .iter()
        .map(|(tool, &status)| {
            let label = labels[tool];
            let b = bonus[tool];
            let cell = ToolCell {
                status,
                adjusted: adjusted[tool],
                label,
                points: score_instance(label, status, easy) + b,
                bonus: b,
            };
            (tool.clone(), cell)
        })
        .collect();
    InstanceScore {
        benchmark: bench.to_string(),
        instance: id.to_string(),
        index,
        easy,
        witness_validated: validated,
        cells,
    }
}

fn notes(opts: &ScoreOptions) -> Vec<String> {
    let mut notes = vec![
        match opts.overhead {
            OverheadMode::Single => "overhead: single (one value per tool)".to_string(),
            OverheadMode::Multi => "overhead: multi (one value per tool and execution mode)".to_string(),
        },
        match opts.adjudication {
            AdjudicationMode::Voting => "adjudication: voting".to_string(),
            AdjudicationMode::OddOneOut => "adjudication: odd-one-out".to_string(),
        },
        "overhead minima exclude timeout and error records".to_string(),
        "the +1 bonus goes to the second runtime class even when the fastest class has several tools".to_string(),
    ];
    let source = match (&opts.easy_flags, &opts.easy_tool) {
        (Some(f), _) => format!("easy-violated flags: {} instances from a flags file", f.len()),
        (None, Some(t)) => format!("easy-violated flags: violated results of {t}"),
        (None, None) => "easy-violated flags: none".to_string(),
    };
    notes.push(source);
    if let Some(b) = &opts.baseline_budget {
        notes.push(format!("baseline falsifier budget: {b}"));
    }
    if !opts.unscored.is_empty() {
        let list: Vec<&str> = opts.unscored.iter().map(String::as_str).collect();
        notes.push(format!("unscored benchmarks: {}", list.join(", ")));
    }
    notes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(tool: &str, inst: &str, bench: &str, status: Status, secs: f64) -> RunRecord {
        RunRecord {
            tool: tool.into(),
            instance: inst.into(),
            benchmark: bench.into(),
            status,
            seconds: secs,
            mode: "default".into(),
            witness: None,
        }
    }

    #[test]
    fn small_pipeline() {
        let records = vec![
            rec("a", "i1", "b", Status::Holds, 2.0),
            rec("b", "i1", "b", Status::Holds, 5.0),
            rec("c", "i1", "b", Status::Violated, 1.0),
            rec("a", "t", TRIVIAL_BENCHMARK, Status::Violated, 1.0),
            rec("b", "t", TRIVIAL_BENCHMARK, Status::Violated, 0.5),
            rec("c", "t", TRIVIAL_BENCHMARK, Status::Violated, 0.1),
        ];
        let ledger = score(&records, &ScoreOptions::default()).unwrap();
        assert_eq!(ledger.benchmarks.len(), 1);
        let inst = &ledger.benchmarks[0].instances[0];
        // a: 2.0-1.0 -> 1.0; b: 5.0-0.5 -> 4.5; c is the odd one out.
        assert_eq!(inst.cells["a"].points, 12);
        assert_eq!(inst.cells["b"].points, 11);
        assert_eq!(inst.cells["c"].points, -100);
        assert_eq!(ledger.overall[0], ("a".to_string(), 100.0));
        assert_eq!(ledger.overall[2], ("c".to_string(), 0.0));
    }

    #[test]
    fn duplicates_rejected() {
        let records = vec![rec("a", "i", "b", Status::Holds, 1.0), rec("a", "i", "b", Status::Violated, 1.0)];
        assert!(matches!(score(&records, &ScoreOptions::default()), Err(ScoringError::DuplicateRecord { .. })));
    }
}
