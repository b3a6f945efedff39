//! Competition scoring: overhead correction, adjudication of disagreeing
//! results, instance points with time bonuses, benchmark percentages and the
//! overall ranking.

mod ledger;
mod record;
mod report;
mod rules;

use std::path::PathBuf;

pub use ledger::{score, BenchmarkRow, BenchmarkScore, InstanceScore, ScoreLedger, ScoreOptions, ToolCell};
pub use record::{read_records, read_tool_csv, write_records, write_tool_csv, RunRecord};
pub use report::{render_report, ReportFile};
pub use rules::{
    adjudicate, adjusted_runtime, benchmark_percent, measure_overhead, overall_table, round_half_away, score_instance,
    time_bonus, AdjudicationMode, Label, OverheadMode, OverheadModel, TIE_WINDOW,
};

/// Benchmark id used for the trivial overhead-measurement instances. Records
/// under it count towards overheads but are never scored.
pub const TRIVIAL_BENCHMARK: &str = "trivial";

#[derive(Debug, thiserror::Error)]
pub enum ScoringError {
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context} line {line}: {msg}")]
    BadRow { context: String, line: u64, msg: String },
    #[error("duplicate record for tool {tool} on {benchmark}/{instance}")]
    DuplicateRecord { tool: String, benchmark: String, instance: String },
    #[error("no records with a usable runtime")]
    EmptyRecordSet,
}
