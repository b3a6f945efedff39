//! Running participants on instances.
//!
//! An external tool is a shell command template. `{onnx}`, `{vnnlib}`,
//! `{timeout}` and `{result}` are replaced by the (quoted) instance paths,
//! the timeout in seconds and the result file path. The tool writes its
//! verdict to the result file: the first line is a status token (`holds`,
//! `violated`, `timeout`, `error`, `unknown`, or `unsat`/`sat`), the optional
//! second line a path to a witness file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::Serialize;

use super::baseline::run_baseline;
use super::manifest::Instance;
use crate::network::load_network;
use crate::scoring::RunRecord;
use crate::spec::{parse_vnnlib, to_dnf, DnfOptions, Tolerance};
use crate::verifier::{parse_witness, validate_witness, Budget};
use crate::Status;

/// How much of a tool's captured output is attached to an error record.
const CAPTURE_LIMIT: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolAdapter {
    pub id: String,
    /// Run once before any instance.
    pub prepare: Option<String>,
    pub run: String,
    pub mode: String,
}

/// Anything that can be run on an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Participant {
    External(ToolAdapter),
    /// The built-in falsifier + verifier under the given tool id.
    Baseline { id: String, budget: Budget },
}

impl Participant {
    pub fn id(&self) -> &str {
        match self {
            Participant::External(a) => &a.id,
            Participant::Baseline { id, .. } => id,
        }
    }

    pub fn run(&self, inst: &Instance, ctx: &RunContext) -> RunOutcome {
        match self {
            Participant::External(a) => run_tool(a, inst, ctx),
            Participant::Baseline { id, budget } => run_baseline(id, inst, budget, ctx),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    /// Result, log and witness files go to `<work_dir>/<tool>/`.
    pub work_dir: PathBuf,
    /// Time allowed past the instance timeout before the tool is killed.
    pub grace: Duration,
    /// Turn `violated` answers whose witness fails validation into errors.
    pub strict_witness: bool,
}

impl RunContext {
    pub(crate) fn tool_dir(&self, tool: &str) -> PathBuf {
        self.work_dir.join(file_safe(tool))
    }
}

/// A run record plus what the harness learned while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// Diagnostics: captured output on errors, validation messages.
    pub detail: Option<String>,
    /// Result of checking the witness, when one was checked.
    pub witness_valid: Option<bool>,
}

impl RunOutcome {
    pub(crate) fn new(tool: &str, inst: &Instance, mode: &str, status: Status, seconds: f64) -> Self {
        RunOutcome {
            record: RunRecord {
                tool: tool.to_string(),
                instance: inst.id.clone(),
                benchmark: inst.benchmark.clone(),
                status,
                seconds,
                mode: mode.to_string(),
                witness: None,
            },
            detail: None,
            witness_valid: None,
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

pub(crate) fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "'\\''"))
}

fn substitute(template: &str, inst: &Instance, result: &Path) -> String {
    template
        .replace("{onnx}", &shell_quote(&inst.network.display().to_string()))
        .replace("{vnnlib}", &shell_quote(&inst.spec.display().to_string()))
        .replace("{timeout}", &format!("{}", inst.timeout))
        .replace("{result}", &shell_quote(&result.display().to_string()))
}

fn kill_group(pgid: u32) {
    // SAFETY: plain syscall on a process group we created; ESRCH is ignored.
    unsafe {
        libc::kill(-(pgid as libc::pid_t), libc::SIGKILL);
    }
}

/// Runs an external tool's command once, in its own process group, and
/// interprets its result file.
///
/// A run still going at `timeout + grace` is killed along with everything
/// it spawned. Any run that took longer than the timeout is recorded as
/// `timeout` with its time capped at the timeout.
pub fn run_tool(adapter: &ToolAdapter, inst: &Instance, ctx: &RunContext) -> RunOutcome {
    let outcome = |status, secs| RunOutcome::new(&adapter.id, inst, &adapter.mode, status, secs);
    let dir = ctx.tool_dir(&adapter.id);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return outcome(Status::Error, 0.0).with_detail(format!("{}: {e}", dir.display()));
    }
    let stem = file_safe(&inst.id);
    let result = dir.join(format!("{stem}.result"));
    let log_path = dir.join(format!("{stem}.log"));
    let _ = std::fs::remove_file(&result);

    let log = match File::create(&log_path).and_then(|f| Ok((f.try_clone()?, f))) {
        Ok(pair) => pair,
        Err(e) => return outcome(Status::Error, 0.0).with_detail(format!("{}: {e}", log_path.display())),
    };
    let cmd = substitute(&adapter.run, inst, &result);
    info!("{} on {}: {cmd}", adapter.id, inst.id);
    let start = Instant::now();
    let mut child = match Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(log.0)
        .stderr(log.1)
        .process_group(0)
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return outcome(Status::Error, 0.0).with_detail(format!("failed to launch: {e}")),
    };
    let pgid = child.id();
    let limit = Duration::from_secs_f64(inst.timeout) + ctx.grace;
    let mut pause = Duration::from_millis(1);
    let exit: Option<ExitStatus> = loop {
        match child.try_wait() {
            Ok(Some(st)) => break Some(st),
            Ok(None) if start.elapsed() >= limit => {
                kill_group(pgid);
                let _ = child.wait();
                break None;
            }
            Ok(None) => {
                std::thread::sleep(pause);
                pause = (pause * 2).min(Duration::from_millis(20));
            }
            Err(e) => {
                kill_group(pgid);
                let _ = child.wait();
                return outcome(Status::Error, start.elapsed().as_secs_f64()).with_detail(format!("wait failed: {e}"));
            }
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    // Stragglers left in the group by a tool that exited on its own.
    kill_group(pgid);

    if exit.is_none() || elapsed > inst.timeout {
        return outcome(Status::Timeout, inst.timeout.min(elapsed));
    }
    let exit = exit.expect("checked above");
    let captured = || {
        let text = std::fs::read_to_string(&log_path).unwrap_or_default();
        let cut = text.char_indices().nth(CAPTURE_LIMIT).map_or(text.len(), |(i, _)| i);
        text[..cut].to_string()
    };

    let Ok(text) = std::fs::read_to_string(&result) else {
        let why = if exit.success() { "exited without a result file".to_string() } else { format!("{exit} without a result file") };
        return outcome(Status::Error, elapsed).with_detail(format!("{why}; output:\n{}", captured()));
    };
    let mut lines = text.lines();
    let token = lines.next().unwrap_or("").trim();
    let status: Status = match token.parse() {
        Ok(s) => s,
        Err(_) => {
            return outcome(Status::Error, elapsed)
                .with_detail(format!("unparseable result {token:?}; output:\n{}", captured()))
        }
    };
    let mut out = outcome(status, elapsed);
    let witness = lines.next().map(str::trim).filter(|l| !l.is_empty()).map(PathBuf::from);
    out.record.witness = witness.clone();
    if status != Status::Violated {
        return out;
    }
    let Some(wpath) = witness else {
        return out.with_detail("violated without a witness; left unvalidated");
    };
    match check_witness(inst, &wpath) {
        Check::Valid => out.witness_valid = Some(true),
        Check::Invalid(msg) => {
            out.witness_valid = Some(false);
            if ctx.strict_witness {
                warn!("{} on {}: {msg}", adapter.id, inst.id);
                out.record.status = Status::Error;
            }
            out.detail = Some(msg);
        }
        Check::Unverifiable(msg) => out.detail = Some(format!("witness not checked: {msg}")),
    }
    out
}

enum Check {
    Valid,
    Invalid(String),
    Unverifiable(String),
}

fn check_witness(inst: &Instance, wpath: &Path) -> Check {
    let problem = match load_problem(inst) {
        Ok(p) => p,
        Err(e) => return Check::Unverifiable(e),
    };
    let w = match std::fs::read_to_string(wpath).map_err(|e| e.to_string()).and_then(|t| parse_witness(&t).map_err(|e| e.to_string())) {
        Ok(w) => w,
        Err(e) => return Check::Invalid(format!("unreadable witness {}: {e}", wpath.display())),
    };
    match validate_witness(&problem.0, &problem.1, &w, Tolerance::WITNESS) {
        Ok(c) if c.valid => Check::Valid,
        Ok(c) => Check::Invalid(c.diagnostic.unwrap_or_else(|| "witness rejected".into())),
        Err(e) => Check::Invalid(e.to_string()),
    }
}

pub(crate) fn load_problem(inst: &Instance) -> Result<(crate::network::Network, crate::spec::NormalizedSpec), String> {
    let bytes = std::fs::read(&inst.network).map_err(|e| format!("{}: {e}", inst.network.display()))?;
    let net = load_network(&bytes).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&inst.spec).map_err(|e| format!("{}: {e}", inst.spec.display()))?;
    let ast = parse_vnnlib(&text).map_err(|e| e.to_string())?;
    let spec = to_dnf(&ast, &DnfOptions::default()).map_err(|e| e.to_string())?;
    Ok((net, spec))
}

/// Instances on which some `violated` record carries a witness that checks
/// out against the instance's network and spec. Records on instances not in
/// `instances` are skipped.
pub fn validated_witnesses(records: &[RunRecord], instances: &[Instance]) -> BTreeSet<(String, String)> {
    let by_key: BTreeMap<(&str, &str), &Instance> =
        instances.iter().map(|i| ((i.benchmark.as_str(), i.id.as_str()), i)).collect();
    let mut out = BTreeSet::new();
    for r in records.iter().filter(|r| r.status == Status::Violated) {
        let (Some(inst), Some(w)) = (by_key.get(&(r.benchmark.as_str(), r.instance.as_str())), &r.witness) else {
            continue;
        };
        match check_witness(inst, w) {
            Check::Valid => {
                out.insert((r.benchmark.clone(), r.instance.clone()));
            }
            Check::Invalid(msg) | Check::Unverifiable(msg) => warn!("{} on {}: {msg}", r.tool, r.instance),
        }
    }
    out
}

fn prepare(adapter: &ToolAdapter, ctx: &RunContext) -> Result<(), String> {
    let Some(cmd) = &adapter.prepare else { return Ok(()) };
    let dir = ctx.tool_dir(&adapter.id);
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let out = Command::new("sh").arg("-c").arg(cmd).stdin(Stdio::null()).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("prepare command {}: {}", out.status, String::from_utf8_lossy(&out.stderr)))
    }
}

/// Runs every participant on every instance, strictly one run at a time.
/// A participant whose prepare step fails gets `error` records instead of
/// stopping the batch.
pub fn run_all(participants: &[Participant], instances: &[Instance], ctx: &RunContext) -> Vec<RunOutcome> {
    let mut out = Vec::with_capacity(participants.len() * instances.len());
    for p in participants {
        let prepared = match p {
            Participant::External(a) => prepare(a, ctx),
            Participant::Baseline { .. } => Ok(()),
        };
        for inst in instances {
            match &prepared {
                Ok(()) => out.push(p.run(inst, ctx)),
                Err(e) => {
                    let mode = match p {
                        Participant::External(a) => a.mode.as_str(),
                        Participant::Baseline { .. } => "default",
                    };
                    out.push(RunOutcome::new(p.id(), inst, mode, Status::Error, 0.0).with_detail(e.clone()));
                }
            }
        }
    }
    out
}
