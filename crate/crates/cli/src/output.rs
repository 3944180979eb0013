//! Result directory writes. Files are staged next to the target and moved
//! in only after every one of them was written.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use afdm::analysis::fingerprint;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::experiments::Outputs;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Run record: config echo, fingerprint, seed, tool version, output hashes
/// and wall time. Only the wall time differs between identical runs.
pub fn manifest(r: &Resolved, outputs: &Outputs, threads: Option<u64>, wall_time_s: f64) -> Value {
    let config: Value = serde_json::from_str(&r.config.canonical_json()).expect("config round-trips");
    let files: Vec<Value> = outputs
        .files
        .iter()
        .map(|(name, text)| json!({ "file": name, "sha256": fingerprint(text) }))
        .collect();
    json!({
        "tool": "afdm",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": r.kind().name(),
        "seed": r.seed(),
        "config_sha256": r.fingerprint,
        "config": config,
        "threads": threads,
        "outputs": files,
        "summary": outputs.summary,
        "wall_time_s": wall_time_s,
    })
}

pub fn write_run(
    out: &Path,
    r: &Resolved,
    outputs: Outputs,
    threads: Option<u64>,
    start: Instant,
) -> Result<Vec<PathBuf>, CliError> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| io(&parent, e))?;
    if out.exists() && !out.is_dir() {
        return Err(CliError::Io(format!("{}: exists and is not a directory", out.display())));
    }
    let staging = tempfile::Builder::new()
        .prefix(".afdm-staging-")
        .tempdir_in(&parent)
        .map_err(|e| io(&parent, e))?;

    let mut names: Vec<String> = Vec::new();
    for (name, text) in &outputs.files {
        let p = staging.path().join(name);
        fs::write(&p, text).map_err(|e| io(&p, e))?;
        names.push(name.clone());
    }
    let record = manifest(r, &outputs, threads, start.elapsed().as_secs_f64());
    let text = serde_json::to_string_pretty(&record).expect("manifest serializes") + "\n";
    let p = staging.path().join(MANIFEST);
    fs::write(&p, text).map_err(|e| io(&p, e))?;
    names.push(MANIFEST.to_string());

    if !out.exists() {
        let staged = staging.keep();
        if let Err(e) = fs::rename(&staged, out) {
            let _ = fs::remove_dir_all(&staged);
            return Err(io(out, e));
        }
    } else {
        for name in &names {
            let dst = out.join(name);
            fs::rename(staging.path().join(name), &dst).map_err(|e| io(&dst, e))?;
        }
    }
    Ok(names.iter().map(|n| out.join(n)).collect())
}
