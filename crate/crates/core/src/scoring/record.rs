//! Per-tool results CSVs.
//!
//! One file per tool, named after the tool, with header
//! `instance_id,benchmark,status,time_seconds,mode,witness_path`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::Status;

/// One tool's outcome on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub tool: String,
    pub instance: String,
    pub benchmark: String,
    pub status: Status,
    /// Raw wall-clock seconds, before overhead correction.
    pub seconds: f64,
    /// Execution mode label such as `default`, `cpu` or `gpu`.
    pub mode: String,
    pub witness: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    instance_id: String,
    benchmark: String,
    status: String,
    time_seconds: String,
    mode: String,
    witness_path: String,
}

/// Reads records for `tool` from CSV text. `context` names the source in
/// error messages.
pub fn read_records<R: Read>(reader: R, tool: &str, context: &str) -> Result<Vec<RunRecord>, ScoringError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| ScoringError::Csv { path: PathBuf::from(context), source: e })?;
        let line = out.len() as u64 + 2;
        let bad = |msg: String| ScoringError::BadRow { context: context.to_string(), line, msg };
        let status: Status = row.status.parse().map_err(|e| bad(format!("{e}")))?;
        let seconds: f64 = row.time_seconds.parse().map_err(|_| bad(format!("bad time {:?}", row.time_seconds)))?;
        if !(seconds >= 0.0 && seconds.is_finite()) {
            return Err(bad(format!("time must be a non-negative number, got {seconds}")));
        }
        if row.instance_id.is_empty() {
            return Err(bad("empty instance id".into()));
        }
        out.push(RunRecord {
            tool: tool.to_string(),
            instance: row.instance_id,
            benchmark: row.benchmark,
            status,
            seconds,
            mode: if row.mode.is_empty() { "default".into() } else { row.mode },
            witness: (!row.witness_path.is_empty()).then(|| PathBuf::from(row.witness_path)),
        });
    }
    Ok(out)
}

/// Reads a tool's CSV; the tool id is the file stem.
pub fn read_tool_csv(path: &Path) -> Result<Vec<RunRecord>, ScoringError> {
    let tool = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = std::fs::File::open(path).map_err(|e| ScoringError::Io { path: path.to_path_buf(), source: e })?;
    read_records(file, &tool, &path.display().to_string())
}

/// Writes records in the per-tool CSV schema. The `tool` field is not part
/// of the schema; callers write one file per tool.
pub fn write_records<W: Write>(writer: W, records: &[RunRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    // An empty file still gets its header.
    if records.is_empty() {
        w.write_record(["instance_id", "benchmark", "status", "time_seconds", "mode", "witness_path"])?;
    }
    for r in records {
        w.serialize(Row {
            instance_id: r.instance.clone(),
            benchmark: r.benchmark.clone(),
            status: r.status.as_str().to_string(),
            time_seconds: format!("{}", r.seconds),
            mode: r.mode.clone(),
            witness_path: r.witness.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<dir>/<tool>.csv` for every tool present in `records`, keeping
/// record order within each file. Returns the files written.
pub fn write_tool_csv(dir: &Path, records: &[RunRecord]) -> Result<Vec<PathBuf>, ScoringError> {
    let mut tools: Vec<&str> = records.iter().map(|r| r.tool.as_str()).collect();
    tools.sort_unstable();
    tools.dedup();
    let mut written = Vec::new();
    for tool in tools {
        let path = dir.join(format!("{tool}.csv"));
        let mine: Vec<RunRecord> = records.iter().filter(|r| r.tool == tool).cloned().collect();
        let file = std::fs::File::create(&path).map_err(|e| ScoringError::Io { path: path.clone(), source: e })?;
        write_records(file, &mine).map_err(|e| ScoringError::Csv { path: path.clone(), source: e })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "instance_id,benchmark,status,time_seconds,mode,witness_path\n\
                    a-b,acasxu,holds,7.4,default,\n\
                    c-d,acasxu,sat,0.25,cpu,w/c.txt\n";
        let recs = read_records(text.as_bytes(), "nnenum", "test").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].status, Status::Violated);
        assert_eq!(recs[1].witness.as_deref(), Some(Path::new("w/c.txt")));
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let again = read_records(buf.as_slice(), "nnenum", "test").unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn bad_rows() {
        let hdr = "instance_id,benchmark,status,time_seconds,mode,witness_path\n";
        assert!(read_records(format!("{hdr}a,b,maybe,1,,\n").as_bytes(), "t", "x").is_err());
        assert!(read_records(format!("{hdr}a,b,holds,-1,,\n").as_bytes(), "t", "x").is_err());
        assert!(read_records(format!("{hdr}a,b,holds,nan,,\n").as_bytes(), "t", "x").is_err());
        let ok = read_records(format!("{hdr}a,b,holds,1,,\n").as_bytes(), "t", "x").unwrap();
        assert_eq!(ok[0].mode, "default");
    }
}
