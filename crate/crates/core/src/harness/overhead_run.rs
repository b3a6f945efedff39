//! Trivial instances for measuring per-tool startup overhead.

use std::path::Path;

use log::warn;

use super::manifest::Instance;
use super::runner::{run_all, Participant, RunContext, RunOutcome};
use super::{io_err, HarnessError};
use crate::network::{gen_trivial_network, trivial_spec_text, write_network};
use crate::scoring::TRIVIAL_BENCHMARK;

/// Timeout given to each trivial instance.
const TRIVIAL_TIMEOUT: f64 = 60.0;

/// Writes `n` trivial instances (identity networks with 1 to 5 inputs and
/// an always-satisfiable spec) into `dir`.
pub fn trivial_instances(n: usize, dir: &Path) -> Result<Vec<Instance>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let width = 1 + i % 5;
        let onnx = dir.join(format!("trivial_{i}.onnx"));
        let vnnlib = dir.join(format!("trivial_{i}.vnnlib"));
        std::fs::write(&onnx, write_network(&gen_trivial_network(width))).map_err(io_err(&onnx))?;
        std::fs::write(&vnnlib, trivial_spec_text(width)).map_err(io_err(&vnnlib))?;
        out.push(Instance::new(TRIVIAL_BENCHMARK, onnx, vnnlib, TRIVIAL_TIMEOUT));
    }
    Ok(out)
}

/// Runs every participant on `n_trivial` fresh trivial instances and appends
/// the outcomes to `records`.
pub fn measure_overhead_run(
    records: &mut Vec<RunOutcome>,
    participants: &[Participant],
    n_trivial: usize,
    ctx: &RunContext,
) -> Result<(), HarnessError> {
    if n_trivial == 0 {
        warn!("no trivial instances requested; overheads come from the real instances only");
        return Ok(());
    }
    let instances = trivial_instances(n_trivial, &ctx.work_dir.join(TRIVIAL_BENCHMARK))?;
    records.extend(run_all(participants, &instances, ctx));
    Ok(())
}
