//! The built-in baseline participant: falsify with a small fixed budget,
//! then verify within the rest of the instance timeout.

use std::time::{Duration, Instant};

use log::info;

use super::manifest::Instance;
use super::runner::{file_safe, RunContext, RunOutcome};
use crate::network::{load_network, NetworkError};
use crate::spec::{parse_vnnlib, to_dnf, DnfOptions, Witness};
use crate::verifier::{falsify, format_witness, verify, Budget};
use crate::Status;

/// Runs the baseline on one instance and records the result under `tool`.
///
/// Networks the loader cannot represent (unsupported operators or graph
/// shapes) yield `unknown`, like a tool that skips a benchmark.
pub fn run_baseline(tool: &str, inst: &Instance, budget: &Budget, ctx: &RunContext) -> RunOutcome {
    let start = Instant::now();
    let done = |status: Status, detail: Option<String>| {
        let secs = start.elapsed().as_secs_f64();
        let secs = if status == Status::Timeout { secs.min(inst.timeout) } else { secs };
        let mut o = RunOutcome::new(tool, inst, "default", status, secs);
        o.detail = detail;
        o
    };

    let bytes = match std::fs::read(&inst.network) {
        Ok(b) => b,
        Err(e) => return done(Status::Error, Some(format!("{}: {e}", inst.network.display()))),
    };
    let net = match load_network(&bytes) {
        Ok(n) => n,
        Err(
            e @ (NetworkError::UnsupportedOperator { .. } | NetworkError::Topology(_) | NetworkError::NonFloatTensor { .. }),
        ) => return done(Status::Unknown, Some(e.to_string())),
        Err(e) => return done(Status::Error, Some(e.to_string())),
    };
    let spec = match std::fs::read_to_string(&inst.spec)
        .map_err(|e| format!("{}: {e}", inst.spec.display()))
        .and_then(|t| parse_vnnlib(&t).map_err(|e| e.to_string()))
        .and_then(|ast| to_dnf(&ast, &DnfOptions::default()).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => return done(Status::Error, Some(e)),
    };

    let timeout = Duration::from_secs_f64(inst.timeout);
    let easy = budget.clone().with_time_limit(budget.time_limit.min(timeout));
    let found = match falsify(&net, &spec, &easy) {
        Ok(w) => w,
        Err(e) => return done(Status::Error, Some(e.to_string())),
    };
    if let Some(w) = found {
        info!("{tool} on {}: falsified within the easy budget", inst.id);
        return finish_violated(done(Status::Violated, None), &w, ctx);
    }

    let remaining = timeout.saturating_sub(start.elapsed());
    if remaining.is_zero() {
        return done(Status::Timeout, None);
    }
    let outcome = verify(&net, &spec, &budget.clone().with_time_limit(remaining));
    let o = done(outcome.status, outcome.message);
    match (outcome.status, outcome.witness) {
        (Status::Violated, Some(w)) => finish_violated(o, &w, ctx),
        _ => o,
    }
}

fn finish_violated(mut o: RunOutcome, w: &Witness, ctx: &RunContext) -> RunOutcome {
    o.witness_valid = Some(true);
    let dir = ctx.tool_dir(&o.record.tool);
    let path = dir.join(format!("{}.witness", file_safe(&o.record.instance)));
    let text = format_witness(&w.x, w.y_claimed.as_deref());
    match std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(&path, text)) {
        Ok(()) => o.record.witness = Some(path),
        Err(e) => o.detail = Some(format!("witness not written: {e}")),
    }
    o
}
