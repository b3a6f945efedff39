//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when the input data is bad
//! or a counterexample fails validation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use vnn_harness::harness::{
    attack_oracle, calibrate_epsilon, certify_oracle, emit_report, load_manifest, measure_overhead_run, run_all,
    validated_witnesses, CalibrationRequest, Config, Instance, Participant, RunContext,
};
use vnn_harness::network::load_network;
use vnn_harness::scoring::{
    read_tool_csv, score, write_tool_csv, AdjudicationMode, OverheadMode, RunRecord, ScoreOptions,
};
use vnn_harness::spec::{parse_vnnlib, to_dnf, DnfOptions, NormalizedSpec, Tolerance};
use vnn_harness::verifier::{falsify, format_witness, parse_witness, validate_witness, verify, Budget};
use vnn_harness::{format_g17, Error, Status};

#[derive(Parser)]
#[command(name = "vnn-harness", version, about = "Run, check and score neural-network verification tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a VNNLIB file and print its normalized form as JSON.
    Parse {
        spec: PathBuf,
        /// Replace missing input bounds by +-1e30 instead of failing.
        #[arg(long)]
        allow_unbounded: bool,
    },
    /// Evaluate a network on one input.
    Eval {
        onnx: PathBuf,
        /// Input values; alternatively use --input.
        #[arg(allow_negative_numbers = true)]
        values: Vec<f64>,
        /// File with whitespace- or comma-separated input values.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Decide an instance with the built-in verifier.
    Verify(SolveArgs),
    /// Search for a counterexample only.
    Falsify(SolveArgs),
    /// Check a counterexample file against a network and spec.
    ValidateCe {
        onnx: PathBuf,
        spec: PathBuf,
        witness: PathBuf,
        #[arg(long, default_value_t = Tolerance::WITNESS.abs)]
        tol_abs: f64,
        #[arg(long, default_value_t = Tolerance::WITNESS.rel)]
        tol_rel: f64,
    },
    /// Run the configured tools on every manifest instance.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the per-tool result CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Directory for logs, result files and witnesses [default: <out>/work].
        #[arg(long)]
        work: Option<PathBuf>,
        /// Benchmark name for all manifests [default: each manifest's directory name].
        #[arg(long)]
        benchmark: Option<String>,
        /// Also run this many trivial overhead instances.
        #[arg(long, default_value_t = 0)]
        trivial: usize,
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Run the configured tools on trivial instances and print their overheads.
    MeasureOverhead {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        work: Option<PathBuf>,
        #[arg(short, long, default_value_t = 5)]
        n: usize,
    },
    /// Score result CSVs and write the report.
    Score(ScoreArgs),
    /// Pick a robustness radius between what an attack and a certifier manage.
    CalibrateEps {
        onnx: PathBuf,
        /// Comma-separated centre point.
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        #[arg(long)]
        eps_max: f64,
        #[arg(long)]
        eps_tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct SolveArgs {
    onnx: PathBuf,
    spec: PathBuf,
    /// Time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Take the falsifier budget from this config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the counterexample here when one is found.
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Write a tool result file (status line, then the witness path).
    #[arg(long)]
    result: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OverheadArg {
    Single,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdjudicationArg {
    Voting,
    OddOneOut,
}

#[derive(clap::Args)]
struct ScoreArgs {
    /// Result CSVs, or directories whose `*.csv` files are read.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "multi")]
    overhead: OverheadArg,
    #[arg(long, value_enum, default_value = "odd-one-out")]
    adjudication: AdjudicationArg,
    #[arg(long)]
    out: PathBuf,
    /// Tool whose violated results mark instances as easy.
    #[arg(long, default_value = "randgen")]
    easy_tool: String,
    /// CSV of `benchmark,instance` rows marked easy; overrides --easy-tool.
    #[arg(long)]
    easy_flags: Option<PathBuf>,
    /// Comma-separated benchmarks left out of the overall sum.
    #[arg(long, default_value = "cifar2020")]
    unscored: String,
    /// Manifests giving instance order and the files to check witnesses against.
    #[arg(long)]
    manifest: Vec<PathBuf>,
    /// Comma-separated tool order for the per-instance logs.
    #[arg(long)]
    tool_order: Option<String>,
    /// Config file supplying per-benchmark mode overrides and, when its
    /// baseline is the easy tool, the falsifier budget noted in the report.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// A failed command: wrong usage or bad data.
enum Failure {
    Usage(String),
    Data(String),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into().to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Parse { spec, allow_unbounded } => {
            let opts = DnfOptions { allow_unbounded, ..DnfOptions::default() };
            let ast = parse_vnnlib(&read_text(&spec)?)?;
            for w in &ast.warnings {
                warn!("{w}");
            }
            println!("{}", to_dnf(&ast, &opts)?.to_json());
        }
        Command::Eval { onnx, values, input } => {
            let x = match (input, values.is_empty()) {
                (Some(path), true) => parse_values(&read_text(&path)?)
                    .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?,
                (None, false) => values,
                _ => return Err(Failure::Usage("give the input either as values or with --input".into())),
            };
            let net = load_network(&read_bytes(&onnx)?)?;
            for y in net.forward(&x)? {
                println!("{}", format_g17(y));
            }
        }
        Command::Verify(args) => solve(args, true)?,
        Command::Falsify(args) => solve(args, false)?,
        Command::ValidateCe { onnx, spec, witness, tol_abs, tol_rel } => {
            let net = load_network(&read_bytes(&onnx)?)?;
            let spec = load_spec(&spec)?;
            let w = parse_witness(&read_text(&witness)?)?;
            let check = validate_witness(&net, &spec, &w, Tolerance { abs: tol_abs, rel: tol_rel })?;
            if check.valid {
                println!("ok");
            } else {
                println!("fail");
                return Err(Failure::Data(check.diagnostic.unwrap_or_else(|| "witness rejected".into())));
            }
        }
        Command::Run { config, out, work, benchmark, trivial, manifests } => {
            let cfg = Config::load(&config)?;
            let mut instances: Vec<Instance> = Vec::new();
            for m in &manifests {
                instances.extend(load_manifest(m, benchmark.as_deref())?.instances);
            }
            let (participants, ctx) = setup(&cfg, &out, work)?;
            let mut outcomes = Vec::new();
            measure_overhead_run(&mut outcomes, &participants, trivial, &ctx)?;
            outcomes.extend(run_all(&participants, &instances, &ctx));
            report_runs(&outcomes.iter().map(|o| (&o.record, o.detail.as_deref())).collect::<Vec<_>>());
            let records: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
            for p in write_tool_csv(&out, &records)? {
                println!("{}", p.display());
            }
        }
        Command::MeasureOverhead { config, out, work, n } => {
            let cfg = Config::load(&config)?;
            let (participants, ctx) = setup(&cfg, &out, work)?;
            let mut outcomes = Vec::new();
            measure_overhead_run(&mut outcomes, &participants, n, &ctx)?;
            let records: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
            write_tool_csv(&out, &records)?;
            let model = vnn_harness::scoring::OverheadModel::measure(&records, OverheadMode::Multi);
            for w in &model.warnings {
                warn!("{w}");
            }
            for ((tool, mode), secs) in &model.entries {
                println!("{tool},{mode},{secs:.6}");
            }
        }
        Command::Score(args) => run_score(args)?,
        Command::CalibrateEps { onnx, center, eps_max, eps_tol, seed } => {
            let net = load_network(&read_bytes(&onnx)?)?;
            let center = parse_values(&center).map_err(Failure::Usage)?;
            if center.len() != net.n_inputs {
                return Err(Failure::Data(format!(
                    "centre has {} values, network takes {}",
                    center.len(),
                    net.n_inputs
                )));
            }
            let budget = Budget::easy().with_seed(seed);
            let req = CalibrationRequest { eps_max, eps_tol };
            let c = calibrate_epsilon(&req, attack_oracle(&net, &center, &budget), certify_oracle(&net, &center))?;
            println!("{}", serde_json::to_string_pretty(&c).expect("calibration serializes"));
        }
    }
    Ok(())
}

fn solve(args: SolveArgs, complete: bool) -> Result<(), Failure> {
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(Failure::Usage(format!("--timeout must be positive, got {}", args.timeout)));
    }
    let base = match &args.config {
        Some(path) => Config::load(path)?.budget,
        None => Budget::easy(),
    };
    let budget = base.with_time_limit(Duration::from_secs_f64(args.timeout)).with_seed(args.seed);
    let net = load_network(&read_bytes(&args.onnx)?)?;
    let spec = load_spec(&args.spec)?;
    let (status, witness) = if complete {
        let o = verify(&net, &spec, &budget);
        info!("{} subproblems in {:.3} s", o.stats.subproblems, o.stats.seconds);
        if let Some(m) = &o.message {
            info!("{m}");
        }
        (o.status, o.witness)
    } else {
        match falsify(&net, &spec, &budget)? {
            Some(w) => (Status::Violated, Some(w)),
            None => (Status::Unknown, None),
        }
    };
    println!("{status}");
    let mut witness_path = None;
    if let (Some(w), Some(path)) = (&witness, &args.witness) {
        write_file(path, format_witness(&w.x, w.y_claimed.as_deref()))?;
        witness_path = Some(path.clone());
    } else if let Some(w) = &witness {
        print!("{}", format_witness(&w.x, w.y_claimed.as_deref()));
    }
    if let Some(result) = &args.result {
        let mut text = format!("{status}\n");
        if let Some(p) = &witness_path {
            text.push_str(&format!("{}\n", p.display()));
        }
        write_file(result, text)?;
    }
    Ok(())
}

fn setup(cfg: &Config, out: &Path, work: Option<PathBuf>) -> Result<(Vec<Participant>, RunContext), Failure> {
    let mut participants: Vec<Participant> = cfg.adapters.iter().cloned().map(Participant::External).collect();
    if let Some(id) = &cfg.baseline {
        participants.push(Participant::Baseline { id: id.clone(), budget: cfg.budget.clone() });
    }
    if participants.is_empty() {
        return Err(Failure::Data("config defines no adapters and no baseline".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    let ctx = RunContext {
        work_dir: work.unwrap_or_else(|| out.join("work")),
        grace: cfg.grace,
        strict_witness: cfg.strict_witness,
    };
    Ok((participants, ctx))
}

fn report_runs(runs: &[(&RunRecord, Option<&str>)]) {
    for (r, detail) in runs {
        info!("{} {} {}: {} in {:.3} s", r.tool, r.benchmark, r.instance, r.status, r.seconds);
        if let (Status::Error, Some(d)) = (r.status, detail) {
            warn!("{} on {}: {d}", r.tool, r.instance);
        }
    }
}

fn run_score(args: ScoreArgs) -> Result<(), Failure> {
    let mut files = Vec::new();
    for input in &args.inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?;
            let mut csvs: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            csvs.sort();
            files.extend(csvs);
        } else {
            files.push(input.clone());
        }
    }
    let mut records = Vec::new();
    for f in &files {
        records.extend(read_tool_csv(f)?);
    }

    let mut opts = ScoreOptions {
        overhead: match args.overhead {
            OverheadArg::Single => OverheadMode::Single,
            OverheadArg::Multi => OverheadMode::Multi,
        },
        adjudication: match args.adjudication {
            AdjudicationArg::Voting => AdjudicationMode::Voting,
            AdjudicationArg::OddOneOut => AdjudicationMode::OddOneOut,
        },
        easy_tool: (!args.easy_tool.is_empty()).then_some(args.easy_tool),
        unscored: split_list(&args.unscored).collect(),
        tool_order: args.tool_order.as_deref().map(|s| split_list(s).collect()),
        ..ScoreOptions::default()
    };
    if let Some(path) = &args.easy_flags {
        opts.easy_flags = Some(read_easy_flags(path)?);
    }
    if let Some(path) = &args.config {
        let cfg = Config::load(path)?;
        if opts.easy_flags.is_none() && cfg.baseline.is_some() && cfg.baseline == opts.easy_tool {
            opts.baseline_budget = Some(cfg.budget.describe());
        }
        opts.mode_overrides = cfg.mode_overrides;
    }
    let mut instances = Vec::new();
    for m in &args.manifest {
        instances.extend(load_manifest(m, None)?.instances);
    }
    let mut position = std::collections::BTreeMap::new();
    for inst in &instances {
        let next = position.len();
        position.entry((inst.benchmark.clone(), inst.id.clone())).or_insert(next);
    }
    opts.instance_order = position;
    opts.validated_witnesses = validated_witnesses(&records, &instances);

    let ledger = score(&records, &opts)?;
    for w in &ledger.warnings {
        warn!("{w}");
    }
    emit_report(&ledger, &args.out)?;
    for (tool, pct) in &ledger.overall {
        println!("{tool},{pct:.1}");
    }
    Ok(())
}

fn read_easy_flags(path: &Path) -> Result<BTreeSet<(String, String)>, Failure> {
    let text = read_text(path)?;
    let mut flags = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (b, i) = line
            .split_once(',')
            .ok_or_else(|| Failure::Data(format!("{} line {}: expected benchmark,instance", path.display(), n + 1)))?;
        flags.insert((b.trim().to_string(), i.trim().to_string()));
    }
    Ok(flags)
}

fn split_list(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from)
}

fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

fn load_spec(path: &Path) -> Result<NormalizedSpec, Failure> {
    Ok(to_dnf(&parse_vnnlib(&read_text(path)?)?, &DnfOptions::default())?)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: String) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}
