//! Benchmark manifests: CSV rows `onnx_path,vnnlib_path,timeout_seconds`
//! with paths relative to the manifest file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Serialize;

use super::{io_err, HarnessError};

/// Per-benchmark runtime cap; manifests above it load with a warning.
pub const MAX_BENCHMARK_SECONDS: f64 = 6.0 * 3600.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    /// `<network-stem>-<spec-stem>`.
    pub id: String,
    pub benchmark: String,
    pub network: PathBuf,
    pub spec: PathBuf,
    pub timeout: f64,
}

impl Instance {
    pub fn new(benchmark: &str, network: PathBuf, spec: PathBuf, timeout: f64) -> Self {
        let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Instance { id: format!("{}-{}", stem(&network), stem(&spec)), benchmark: benchmark.to_string(), network, spec, timeout }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub instances: Vec<Instance>,
    pub warnings: Vec<String>,
}

/// Loads a manifest. The benchmark id defaults to the name of the directory
/// holding the manifest. A header row starting with `onnx` is skipped.
pub fn load_manifest(path: &Path, benchmark: Option<&str>) -> Result<Manifest, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let bench = match benchmark {
        Some(b) => b.to_string(),
        None => dir
            .canonicalize()
            .ok()
            .and_then(|d| d.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "default".into()),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut instances = Vec::new();
    let mut warnings = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let err = |msg: String| HarnessError::Manifest { path: path.to_path_buf(), line: i + 1, msg };
        let row = row.map_err(|e| err(e.to_string()))?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && row.get(0).is_some_and(|f| f.starts_with("onnx")) {
            continue;
        }
        if row.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", row.len())));
        }
        let timeout: f64 = row[2].parse().map_err(|_| err(format!("bad timeout {:?}", &row[2])))?;
        if !(timeout > 0.0 && timeout.is_finite()) {
            return Err(err(format!("timeout must be positive, got {}", &row[2])));
        }
        instances.push(Instance::new(&bench, dir.join(&row[0]), dir.join(&row[1]), timeout));
    }
    if instances.is_empty() {
        let msg = format!("{}: manifest has no instances", path.display());
        warn!("{msg}");
        warnings.push(msg);
    }
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for inst in &instances {
        *totals.entry(&inst.benchmark).or_default() += inst.timeout;
    }
    for (b, total) in totals {
        if total > MAX_BENCHMARK_SECONDS {
            let msg = format!("benchmark {b}: timeouts sum to {total} s, above the 6 hour cap");
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(Manifest { instances, warnings })
}

/// Serializes instances back to manifest rows, with paths relative to
/// `base` where possible.
pub fn manifest_to_csv(instances: &[Instance], base: &Path) -> String {
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for inst in instances {
        w.write_record([rel(&inst.network), rel(&inst.spec), format!("{}", inst.timeout)])
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("UTF-8 paths")
}
