//! Rendering a [`ScoreLedger`] into report files.
//!
//! - `overall.csv`, `overall.txt`: rank, tool, overall score.
//! - `overhead.csv`, `overhead.txt`: measured overhead per tool and mode.
//! - `<benchmark>.csv`, `<benchmark>.txt`: rank, tool, verified, falsified,
//!   fastest, score, percent.
//! - `<benchmark>.log`: one `Row: [...]` line per instance with each tool's
//!   adjusted time, followed by each tool's points.
//!
//! The `.txt` files start with `note:` lines describing the methodology. No
//! timestamps are written, so a ledger always renders to the same bytes.

use std::fmt::Write as _;

use super::ledger::{BenchmarkScore, InstanceScore, ScoreLedger};
use super::rules::round_half_away;
use crate::Status;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFile {
    pub name: String,
    pub contents: String,
}

pub fn render_report(ledger: &ScoreLedger) -> Vec<ReportFile> {
    let mut files = Vec::new();
    let header = notes_block(ledger);

    let mut csv = String::from("rank,tool,score\n");
    let mut table = vec![vec!["#".to_string(), "Tool".to_string(), "Score".to_string()]];
    for (i, (tool, score)) in ledger.overall.iter().enumerate() {
        let s = round_half_away(*score);
        writeln!(csv, "{},{},{}", i + 1, csv_field(tool), s).unwrap();
        table.push(vec![(i + 1).to_string(), tool.clone(), s]);
    }
    files.push(ReportFile { name: "overall.csv".into(), contents: csv });
    files.push(ReportFile {
        name: "overall.txt".into(),
        contents: format!("{header}{}", align(&table, &[false, false, true])),
    });

    let mut csv = String::from("tool,mode,seconds\n");
    let mut table = vec![vec!["Tool".to_string(), "Mode".to_string(), "Seconds".to_string()]];
    for ((tool, mode), secs) in &ledger.overheads.entries {
        writeln!(csv, "{},{},{:.6}", csv_field(tool), csv_field(mode), secs).unwrap();
        table.push(vec![tool.clone(), mode.clone(), round_half_away(*secs)]);
    }
    files.push(ReportFile { name: "overhead.csv".into(), contents: csv });
    files.push(ReportFile {
        name: "overhead.txt".into(),
        contents: format!("{header}{}", align(&table, &[false, false, true])),
    });

    for b in &ledger.benchmarks {
        files.extend(render_benchmark(ledger, b, &header));
    }
    files
}

fn render_benchmark(ledger: &ScoreLedger, b: &BenchmarkScore, header: &str) -> Vec<ReportFile> {
    let mut csv = String::from("rank,tool,verified,falsified,fastest,score,percent\n");
    let mut table = vec![["#", "Tool", "Verified", "Falsified", "Fastest", "Score", "Percent"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for (i, r) in b.rows.iter().enumerate() {
        let pct = round_half_away(r.percent);
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            i + 1,
            csv_field(&r.tool),
            r.verified,
            r.falsified,
            r.fastest,
            r.score,
            pct
        )
        .unwrap();
        let shown = if r.percent == 0.0 { "0%".to_string() } else { format!("{pct}%") };
        table.push(vec![
            (i + 1).to_string(),
            r.tool.clone(),
            r.verified.to_string(),
            r.falsified.to_string(),
            r.fastest.to_string(),
            r.score.to_string(),
            shown,
        ]);
    }
    let mut txt = header.to_string();
    writeln!(txt, "note: benchmark {}{}", b.name, if b.scored { "" } else { " (unscored)" }).unwrap();
    for w in &b.warnings {
        writeln!(txt, "note: warning: {w}").unwrap();
    }
    txt.push_str(&align(&table, &[false, false, true, true, true, true, true]));

    let mut log = String::new();
    for inst in &b.instances {
        render_instance(&mut log, ledger, inst);
    }

    vec![
        ReportFile { name: format!("{}.csv", b.name), contents: csv },
        ReportFile { name: format!("{}.txt", b.name), contents: txt },
        ReportFile { name: format!("{}.log", b.name), contents: log },
    ]
}

fn render_instance(out: &mut String, ledger: &ScoreLedger, inst: &InstanceScore) {
    let mut cells = vec![quote(&inst.instance)];
    for tool in &ledger.tools {
        let cell = match inst.cells.get(tool) {
            Some(c) => match c.status {
                Status::Holds => format!("{} (h)", round_half_away(c.adjusted)),
                Status::Violated => format!("{} (v)", round_half_away(c.adjusted)),
                Status::Timeout => "timeout".to_string(),
                Status::Error | Status::Unknown => "-".to_string(),
            },
            None => "-".to_string(),
        };
        cells.push(quote(&cell));
    }
    writeln!(out, "Row: [{}]", cells.join(", ")).unwrap();
    for tool in &ledger.tools {
        let points = inst.cells.get(tool).map_or(0, |c| c.points);
        writeln!(out, "{}: {tool} score: {points}", inst.index).unwrap();
    }
}

fn notes_block(ledger: &ScoreLedger) -> String {
    let mut s = String::new();
    for n in &ledger.notes {
        writeln!(s, "note: {n}").unwrap();
    }
    s
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Column-aligned text, two spaces between columns, trailing spaces trimmed.
fn align(rows: &[Vec<String>], right: &[bool]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let pad = widths[c] - cell.chars().count();
            if right[c] {
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            } else {
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
