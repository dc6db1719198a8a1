//! Cartesian parameter sweeps over a template config.

use std::fs;
use std::fmt::Write as _;
use std::path::Path;

use finmc::proposal::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, KEYS};
use crate::error::{CliError, ErrorRecord, Result};
use crate::run::{run_experiment, sweep_run_dir, RunManifest};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.csv";

/// Named axes, each with its candidate values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterGrid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl ParameterGrid {
    /// Parses `key=v1,v2,...` axis specifications.
    pub fn parse(specs: &[String]) -> Result<Self> {
        let mut axes: Vec<(String, Vec<String>)> = Vec::new();
        for spec in specs {
            let (key, values) = spec.split_once('=').ok_or_else(|| CliError::Syntax {
                text: spec.clone(),
                line: 0,
            })?;
            let key = key.trim().to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::UnknownKey { key, line: 0 });
            }
            if matches!(key.as_str(), "seed" | "out") {
                return Err(CliError::Invalid(format!("{key} is set per run and cannot be swept")));
            }
            if axes.iter().any(|(k, _)| *k == key) {
                return Err(CliError::Invalid(format!("axis {key} given twice")));
            }
            let values: Vec<String> = values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(String::from)
                .collect();
            if values.is_empty() {
                return Err(CliError::Invalid(format!("axis {key} has no values")));
            }
            axes.push((key, values));
        }
        Ok(Self { axes })
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Assignments of grid point `index`; the last axis varies fastest.
    pub fn point(&self, mut index: usize) -> Vec<(String, String)> {
        let mut out = vec![(String::new(), String::new()); self.axes.len()];
        for (slot, (key, values)) in out.iter_mut().zip(&self.axes).rev() {
            *slot = (key.clone(), values[index % values.len()].clone());
            index /= values.len();
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub index: usize,
    pub seed: u64,
    pub assignments: Vec<(String, String)>,
    pub error: ErrorRecord,
}

#[derive(Debug, Clone)]
pub struct CompletedRun {
    pub index: usize,
    pub assignments: Vec<(String, String)>,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Completed runs in grid order.
    pub completed: Vec<CompletedRun>,
    pub failures: Vec<SweepFailure>,
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs every grid point under `template.out`, at most `jobs` at a time.
/// Run `i` gets seed `derive_seed(template.seed, i)` and directory `run_i`.
/// Individual failures are recorded and do not stop the sweep.
pub fn sweep(template: &RunConfig, grid: &ParameterGrid, jobs: usize) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(CliError::Invalid("parameter grid is empty".into()));
    }
    let root = template.out.clone();
    fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;

    let outcomes: Vec<_> = pool.install(|| {
        (0..grid.len())
            .into_par_iter()
            .map(|index| {
                let assignments = grid.point(index);
                let seed = derive_seed(template.seed, index as u64);
                let outcome = (|| {
                    let mut cfg = template.clone();
                    for (k, v) in &assignments {
                        cfg.set(k, v)?;
                    }
                    cfg.seed = seed;
                    cfg.out = sweep_run_dir(&root, index);
                    run_experiment(&cfg)
                })();
                (index, seed, assignments, outcome)
            })
            .collect()
    });

    let mut report = SweepReport { completed: Vec::new(), failures: Vec::new() };
    for (index, seed, assignments, outcome) in outcomes {
        match outcome {
            Ok(manifest) => report.completed.push(CompletedRun { index, assignments, manifest }),
            Err(err) => report.failures.push(SweepFailure { index, seed, assignments, error: err.record() }),
        }
    }
    write_summary(&root, grid, &report)?;
    Ok(report)
}

fn write_summary(root: &Path, grid: &ParameterGrid, report: &SweepReport) -> Result<()> {
    let keys: Vec<&str> = grid.axes.iter().map(|(k, _)| k.as_str()).collect();

    let mut summary = format!("index,seed,{},mean_abs,rms,max_abs,acceptance_rate,final_f,dir\n", keys.join(","));
    for CompletedRun { index, assignments, manifest } in &report.completed {
        let values: Vec<String> = assignments.iter().map(|(_, v)| csv_cell(v)).collect();
        let err = manifest.error.expect("complete runs carry error stats");
        let acc = manifest.acceptance.as_ref().expect("complete runs carry acceptance stats");
        let _ = writeln!(
            summary,
            "{index},{},{},{},{},{},{},{},{}",
            manifest.seed,
            values.join(","),
            err.mean_abs,
            err.rms,
            err.max_abs,
            acc.acceptance_rate,
            acc.final_f,
            csv_cell(&manifest.config.out.display().to_string()),
        );
    }
    let path = root.join(SUMMARY_FILE);
    fs::write(&path, summary).map_err(|e| CliError::io(&path, e))?;

    let mut failures = format!("index,seed,{},exit_code,message\n", keys.join(","));
    for f in &report.failures {
        let values: Vec<String> = f.assignments.iter().map(|(_, v)| csv_cell(v)).collect();
        let _ = writeln!(
            failures,
            "{},{},{},{},{}",
            f.index,
            f.seed,
            values.join(","),
            f.error.exit_code,
            csv_cell(&f.error.message)
        );
    }
    let path = root.join(FAILURES_FILE);
    fs::write(&path, failures).map_err(|e| CliError::io(&path, e))?;
    Ok(())
}
