//! Bounded worker pool and artifact emission.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde_json::{json, Value};

use gibbslab::error::{LabError, Result};

use crate::config::ExperimentConfig;
use crate::experiments::{self, Job, PointResult};
use crate::table::write_csv;

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), key = seed, stream = grid index";
pub const MANIFEST_VERSION: u32 = 1;

/// Runs jobs on up to `workers` threads; results come back in job order.
pub fn execute(jobs: Vec<Job>, workers: usize) -> Vec<Result<PointResult>> {
    let n = jobs.len();
    let queue: Vec<Mutex<Option<Job>>> = jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    let results: Vec<Mutex<Option<Result<PointResult>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let job = queue[k].lock().expect("job slot").take().expect("each job runs once");
                *results[k].lock().expect("result slot") = Some(job());
            });
        }
    });
    results.into_iter().map(|m| m.into_inner().expect("result slot").expect("every job ran")).collect()
}

/// Paths of the emitted artifacts.
#[derive(Debug)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
    pub warnings: Vec<String>,
}

pub struct RunOptions {
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunArtifacts> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    run_config(&cfg, opts)
}

pub fn run_config(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    let experiment = experiments::find(&cfg.experiment)?;
    let started = now();
    let hash = cfg.hash()?;
    let plan = (experiment.plan)(cfg)?;
    let points = plan.jobs.len();

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for result in execute(plan.jobs, opts.workers) {
        let point = result?;
        rows.extend(point.rows);
        warnings.extend(point.warnings);
    }
    let summary = match plan.summarize {
        Some(f) => {
            let (s, w) = f(&rows);
            warnings.extend(w);
            s
        }
        None => Value::Null,
    };

    let dir = opts.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&dir)?;
    let stem = cfg.output.stem.clone().unwrap_or_else(|| cfg.experiment.clone());
    let csv = dir.join(format!("{stem}.csv"));
    let manifest = dir.join(format!("{stem}.manifest.json"));
    write_csv(BufWriter::new(File::create(&csv)?), &plan.header, &rows).map_err(|e| LabError::Io(e.into()))?;

    let doc = json!({
        "manifest_version": MANIFEST_VERSION,
        "experiment": experiment.name,
        "anchor": experiment.anchor,
        "description": experiment.description,
        "config": cfg,
        "config_hash": hash,
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
        "versions": { "gibbslab": env!("CARGO_PKG_VERSION") },
        "workers": opts.workers,
        "grid_points": points,
        "rows": rows.len(),
        "csv": csv.file_name().map(|s| s.to_string_lossy().into_owned()),
        "started": started,
        "finished": now(),
        "warnings": warnings,
        "summary": summary,
    });
    fs::write(&manifest, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(RunArtifacts { csv, manifest, rows: rows.len(), warnings })
}

/// 2 for configuration errors, 3 for regime errors, 4 for resource limits.
pub fn exit_code(err: &LabError) -> u8 {
    match err {
        LabError::Config(_) => 2,
        LabError::Regime(_) => 3,
        LabError::Resource { .. } => 4,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_keeps_job_order() {
        let jobs: Vec<Job> = (0..20)
            .map(|k| {
                Box::new(move || {
                    std::thread::sleep(std::time::Duration::from_millis((20 - k) as u64));
                    Ok(PointResult { rows: vec![crate::row![k as usize]], warnings: Vec::new() })
                }) as Job
            })
            .collect();
        let out = execute(jobs, 4);
        for (k, r) in out.into_iter().enumerate() {
            assert_eq!(r.unwrap().rows[0][0].to_string(), k.to_string());
        }
        assert!(execute(Vec::new(), 3).is_empty());
    }

    #[test]
    fn exit_codes_are_distinct() {
        assert_eq!(exit_code(&LabError::Config("x".into())), 2);
        assert_eq!(exit_code(&LabError::Regime("x".into())), 3);
        assert_eq!(exit_code(&LabError::Resource { what: "x".into(), limit: 1 }), 4);
        assert_eq!(exit_code(&LabError::Domain("x".into())), 1);
    }
}
