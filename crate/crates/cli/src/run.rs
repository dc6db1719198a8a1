//! Single experiments: synthesize data, run one chain, write artifacts.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use finmc::{
    checkpoint_load, reconstruction_error, synthesize_data, BoundaryTrace, Chain, ChainResult, ChainState,
    Checkpointing, ConductivityField, ErrorStats, RngStream,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, ErrorRecord, Result};

pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_FILE: &str = "error.json";
pub const K_CORRECT_FILE: &str = "K_correct.csv";
pub const K_FINAL_FILE: &str = "K_final.csv";
pub const DATA_FILE: &str = "boundary_data.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Stream index reserved for measurement noise.
const NOISE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceStats {
    pub iterations: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub floor_rejected: u64,
    pub acceptance_rate: f64,
    pub degenerate_slopes: u64,
    pub initial_f: f64,
    pub final_f: f64,
    pub best_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub status: RunStatus,
    pub config: RunConfig,
    pub seed: u64,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub wall_seconds: f64,
    /// Iteration the chain was resumed from, if it was.
    pub resumed_from: Option<u64>,
    pub error: Option<ErrorStats>,
    pub acceptance: Option<AcceptanceStats>,
    pub failure: Option<ErrorRecord>,
    /// Outputs present; on failure these are partial.
    pub files: Vec<FileEntry>,
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> finmc::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out)?;
    out.flush().map_err(|e| CliError::io(path, e))
}

fn read_field(path: &Path) -> Result<ConductivityField> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(ConductivityField::read_csv(BufReader::new(file))?)
}

fn read_trace(path: &Path) -> Result<BoundaryTrace> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(BoundaryTrace::read_csv(BufReader::new(file))?)
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok((bytes.len() as u64, format!("{:x}", Sha256::digest(&bytes))))
}

/// Checksums of every regular file under `dir`, sorted by relative path.
fn inventory(dir: &Path) -> Result<Vec<FileEntry>> {
    let mut stack = vec![dir.to_path_buf()];
    let mut out = Vec::new();
    while let Some(current) = stack.pop() {
        let entries = fs::read_dir(&current).map_err(|e| CliError::io(&current, e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(&current, e))?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).expect("under dir").to_string_lossy().replace('\\', "/");
            if rel == MANIFEST_FILE || rel.ends_with(".tmp") {
                continue;
            }
            let (bytes, sha256) = sha256_file(&path)?;
            out.push(FileEntry { path: rel, bytes, sha256 });
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes the true field and the synthetic boundary data into `dir`.
pub fn generate(cfg: &RunConfig, dir: &Path) -> Result<(ConductivityField, BoundaryTrace)> {
    cfg.validate()?;
    create_dir(dir)?;
    let mesh = cfg.mesh()?;
    let truth = cfg.trial.field(&mesh)?;
    let mut noise_rng = RngStream::for_chain(cfg.seed, NOISE_STREAM);
    let data = synthesize_data(&truth, &mesh, &cfg.physics(), cfg.noise_std, &mut noise_rng)?;
    write_file(&dir.join(K_CORRECT_FILE), |out| truth.write_csv(out))?;
    write_file(&dir.join(DATA_FILE), |out| data.write_csv(out))?;
    Ok((truth, data))
}

fn write_trace(path: &Path, result: &ChainResult) -> Result<()> {
    write_file(path, |out| {
        writeln!(out, "iter,f,best_f,acceptance_rate")?;
        for s in &result.trace {
            writeln!(out, "{},{},{},{}", s.iter, s.f, s.best_f, s.acceptance_rate)?;
        }
        Ok(())
    })
}

fn write_outputs(dir: &Path, result: &ChainResult) -> Result<()> {
    write_file(&dir.join(K_FINAL_FILE), |out| result.final_k().write_csv(out))?;
    write_trace(&dir.join(TRACE_FILE), result)?;
    let snap_dir = dir.join(SNAPSHOT_DIR);
    create_dir(&snap_dir)?;
    for (iter, k) in &result.snapshots {
        write_file(&snap_dir.join(format!("K_{iter:010}.csv")), |out| k.write_csv(out))?;
    }
    Ok(())
}

fn acceptance_stats(state: &ChainState, initial_f: f64) -> AcceptanceStats {
    AcceptanceStats {
        iterations: state.iter,
        accepted: state.accepted,
        rejected: state.rejected(),
        floor_rejected: state.floor_rejected,
        acceptance_rate: state.acceptance_rate(),
        degenerate_slopes: state.degenerate,
        initial_f,
        final_f: state.f,
        best_f: state.best_f,
    }
}

struct Session<'a> {
    cfg: &'a RunConfig,
    dir: &'a Path,
    started: DateTime<Utc>,
    resumed_from: Option<u64>,
}

impl Session<'_> {
    fn manifest(
        &self,
        status: RunStatus,
        error: Option<ErrorStats>,
        acceptance: Option<AcceptanceStats>,
        failure: Option<ErrorRecord>,
    ) -> Result<RunManifest> {
        let finished = Utc::now();
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status,
            config: self.cfg.clone(),
            seed: self.cfg.seed,
            started: self.started,
            finished,
            wall_seconds: (finished - self.started).num_milliseconds() as f64 / 1000.0,
            resumed_from: self.resumed_from,
            error,
            acceptance,
            failure,
            files: inventory(self.dir)?,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }

    /// Records `err` next to the partial outputs and hands it back.
    fn fail(&self, err: CliError) -> CliError {
        let record = err.record();
        let path = self.dir.join(ERROR_FILE);
        let json = serde_json::to_string_pretty(&record).expect("record serializes");
        if fs::write(&path, json + "\n").is_ok() {
            let _ = self.manifest(RunStatus::Failed, None, None, Some(record));
        }
        err
    }

    fn finish(
        &self,
        chain: &mut Chain<'_>,
        truth: &ConductivityField,
        initial_f: f64,
    ) -> Result<RunManifest> {
        let checkpointing = Checkpointing {
            path: self.dir.join(CHECKPOINT_FILE),
            every: self.cfg.checkpoint_every,
        };
        let result = chain.run(Some(&checkpointing)).map_err(|e| self.fail(e.into()))?;
        write_outputs(self.dir, &result).map_err(|e| self.fail(e))?;
        let error = reconstruction_error(result.final_k(), truth)?;
        let stats = acceptance_stats(&result.final_state, initial_f);
        let _ = fs::remove_file(self.dir.join(ERROR_FILE));
        self.manifest(RunStatus::Complete, Some(error), Some(stats), None)
    }
}

/// Runs `cfg` end to end, writing every artifact under `cfg.out`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let dir = cfg.out.as_path();
    let session = Session {
        cfg,
        dir,
        started: Utc::now(),
        resumed_from: None,
    };
    create_dir(dir)?;
    let config_path = dir.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_text()).map_err(|e| CliError::io(&config_path, e))?;
    let (truth, data) = generate(cfg, dir).map_err(|e| session.fail(e))?;

    let mut chain = Chain::new(&data, cfg.mesh()?, &cfg.physics(), cfg.mcmc()).map_err(|e| session.fail(e.into()))?;
    let initial_f = chain.state().f;
    session.finish(&mut chain, &truth, initial_f)
}

/// Continues the run stored in `dir` from its checkpoint. `overrides` may
/// extend `iterations` or change output settings; the trace and snapshots
/// written afterwards cover only the resumed segment.
pub fn resume_experiment(dir: &Path, overrides: &[(String, String)]) -> Result<RunManifest> {
    let mut cfg = RunConfig::load(Some(&dir.join(CONFIG_FILE)), overrides)?;
    cfg.out = dir.to_path_buf();
    let state = checkpoint_load(&dir.join(CHECKPOINT_FILE))?;
    let truth = read_field(&dir.join(K_CORRECT_FILE))?;
    let data = read_trace(&dir.join(DATA_FILE))?;
    state.k.mesh().ensure_same(&cfg.mesh()?)?;

    let session = Session {
        cfg: &cfg,
        dir,
        started: Utc::now(),
        resumed_from: Some(state.iter),
    };
    let initial_f = previous_initial_f(dir).unwrap_or(state.f);
    let mut chain = Chain::resume(&data, &cfg.physics(), cfg.mcmc(), state).map_err(|e| session.fail(e.into()))?;
    session.finish(&mut chain, &truth, initial_f)
}

/// Misfit of `K_0` as recorded by the first trace sample of an earlier segment.
fn previous_initial_f(dir: &Path) -> Option<f64> {
    let text = fs::read_to_string(dir.join(TRACE_FILE)).ok()?;
    let first = text.lines().nth(1)?;
    let mut cells = first.split(',');
    if cells.next()? != "0" {
        return None;
    }
    cells.next()?.parse().ok()
}

/// Output directory of run `index` within a sweep rooted at `root`.
pub fn sweep_run_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("run_{index:04}"))
}
