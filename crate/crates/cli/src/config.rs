//! Flat `key = value` run configuration.
//!
//! A config file holds one assignment per line (or several separated by
//! commas); `#` starts a comment. Later assignments win, so command-line
//! flags applied after the file override it, and the file overrides the
//! defaults. Unknown keys are errors.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use finmc::{Kernel, McmcConfig, MeshSpec, PhysicalParams, PriorWeights, ProposalConfig, TrialKind, TrialSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub m: usize,
    pub n: usize,
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
    pub delta: f64,
    pub q: f64,
    pub contact_fraction: f64,
    pub trial: TrialKind,
    pub noise_std: f64,
    pub lambda: f64,
    pub mu: f64,
    pub w: f64,
    pub sigma: f64,
    pub epsilon0: f64,
    pub kernel: Kernel,
    pub omega_bound: f64,
    pub kappa_min: f64,
    pub iterations: u64,
    pub k0: f64,
    pub seed: u64,
    pub thin: Option<u64>,
    pub snapshots: usize,
    pub checkpoint_every: u64,
    pub out: PathBuf,
}

/// Every accepted key, in the order `to_text` writes them.
pub const KEYS: &[&str] = &[
    "m",
    "n",
    "lx",
    "ly",
    "h",
    "delta",
    "q",
    "contact_fraction",
    "trial",
    "noise_std",
    "lambda",
    "mu",
    "w",
    "sigma",
    "epsilon0",
    "kernel",
    "omega_bound",
    "kappa_min",
    "iterations",
    "k0",
    "seed",
    "thin",
    "snapshots",
    "checkpoint_every",
    "out",
];

impl Default for RunConfig {
    fn default() -> Self {
        let phys = PhysicalParams::default();
        let mcmc = McmcConfig::default();
        Self {
            m: 10,
            n: 10,
            lx: 4.0,
            ly: 4.0,
            h: phys.h,
            delta: phys.delta,
            q: phys.q,
            contact_fraction: phys.contact_fraction,
            trial: TrialKind::Constant { value: 1.68 },
            noise_std: 0.0,
            lambda: mcmc.weights.lambda,
            mu: mcmc.weights.mu,
            w: mcmc.weights.w,
            sigma: mcmc.weights.sigma,
            epsilon0: mcmc.weights.epsilon0,
            kernel: mcmc.proposal.kernel,
            omega_bound: mcmc.proposal.omega_bound,
            kappa_min: mcmc.proposal.kappa_min,
            iterations: mcmc.iterations,
            k0: mcmc.initial,
            seed: mcmc.seed,
            thin: mcmc.thin,
            snapshots: mcmc.snapshot_count,
            checkpoint_every: 0,
            out: PathBuf::from("run"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| CliError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

impl RunConfig {
    /// Assigns one key; the value is parsed but not range-checked.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().to_ascii_lowercase().as_str() {
            "m" => self.m = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "lx" => self.lx = parse(key, v)?,
            "ly" => self.ly = parse(key, v)?,
            "h" => self.h = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "q" => self.q = parse(key, v)?,
            "contact_fraction" => self.contact_fraction = parse(key, v)?,
            "trial" => self.trial = parse(key, v)?,
            "noise_std" => self.noise_std = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "mu" => self.mu = parse(key, v)?,
            "w" => self.w = parse(key, v)?,
            "sigma" => self.sigma = parse(key, v)?,
            "epsilon0" => self.epsilon0 = parse(key, v)?,
            "kernel" => self.kernel = parse(key, v)?,
            "omega_bound" => self.omega_bound = parse(key, v)?,
            "kappa_min" => self.kappa_min = parse(key, v)?,
            "iterations" => self.iterations = parse(key, v)?,
            "k0" => self.k0 = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "thin" => {
                self.thin = match v {
                    "auto" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "snapshots" => self.snapshots = parse(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => {
                return Err(CliError::UnknownKey {
                    key: key.trim().to_string(),
                    line: 0,
                })
            }
        }
        Ok(())
    }

    /// Applies the assignments in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            for item in content.split(',') {
                if item.trim().is_empty() {
                    continue;
                }
                let (key, value) = item.split_once('=').ok_or_else(|| CliError::Syntax {
                    text: item.trim().to_string(),
                    line,
                })?;
                self.set(key, value).map_err(|e| match e {
                    CliError::UnknownKey { key, .. } => CliError::UnknownKey { key, line },
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    /// Defaults overridden by `text`, validated.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the file at `path` (if any), then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            cfg.apply_text(&text)?;
        }
        for (key, value) in overrides {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh()?;
        self.physics().validate()?;
        self.trial.validate()?;
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(CliError::Invalid(format!("noise_std >= 0 required, got {}", self.noise_std)));
        }
        if self.snapshots == 0 {
            return Err(CliError::Invalid("snapshots >= 1 required".into()));
        }
        self.mcmc().validate()?;
        Ok(())
    }

    pub fn mesh(&self) -> Result<MeshSpec> {
        Ok(MeshSpec::new(self.m, self.n, self.lx, self.ly)?)
    }

    pub fn physics(&self) -> PhysicalParams {
        PhysicalParams {
            h: self.h,
            delta: self.delta,
            q: self.q,
            contact_fraction: self.contact_fraction,
        }
    }

    pub fn weights(&self) -> PriorWeights {
        PriorWeights {
            lambda: self.lambda,
            mu: self.mu,
            w: self.w,
            sigma: self.sigma,
            epsilon0: self.epsilon0,
        }
    }

    pub fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            weights: self.weights(),
            proposal: ProposalConfig {
                omega_bound: self.omega_bound,
                kernel: self.kernel,
                kappa_min: self.kappa_min,
            },
            initial: self.k0,
            thin: self.thin,
            snapshot_count: self.snapshots,
            seed: self.seed,
        }
    }

    pub fn trial_spec(&self) -> Result<TrialSpec> {
        Ok(TrialSpec {
            kind: self.trial,
            mesh: self.mesh()?,
            noise_std: self.noise_std,
        })
    }

    /// Config file text that parses back to exactly `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "m" => self.m.to_string(),
            "n" => self.n.to_string(),
            "lx" => self.lx.to_string(),
            "ly" => self.ly.to_string(),
            "h" => self.h.to_string(),
            "delta" => self.delta.to_string(),
            "q" => self.q.to_string(),
            "contact_fraction" => self.contact_fraction.to_string(),
            "trial" => self.trial.to_string(),
            "noise_std" => self.noise_std.to_string(),
            "lambda" => self.lambda.to_string(),
            "mu" => self.mu.to_string(),
            "w" => self.w.to_string(),
            "sigma" => self.sigma.to_string(),
            "epsilon0" => self.epsilon0.to_string(),
            "kernel" => self.kernel.to_string(),
            "omega_bound" => self.omega_bound.to_string(),
            "kappa_min" => self.kappa_min.to_string(),
            "iterations" => self.iterations.to_string(),
            "k0" => self.k0.to_string(),
            "seed" => self.seed.to_string(),
            "thin" => self.thin.map_or_else(|| "auto".to_string(), |t| t.to_string()),
            "snapshots" => self.snapshots.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "out" => self.out.display().to_string(),
            _ => unreachable!("key list and accessor disagree"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = RunConfig::parse_text("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sigma, 0.1);
        assert_eq!(cfg.omega_bound, 0.005);
        assert_eq!(cfg.epsilon0, 0.00005);
        assert_eq!(cfg.k0, 1.0);
    }

    #[test]
    fn negative_lambda_names_the_invariant() {
        let err = RunConfig::parse_text("lambda = -1").unwrap_err();
        assert_eq!(err.kind().exit_code(), 1);
        assert!(err.to_string().contains("lambda >= 0"), "{err}");
    }

    #[test]
    fn comma_separated_assignments() {
        let cfg = RunConfig::parse_text("kernel = gridwise, m = 20, n = 20, k0 = 2.0").unwrap();
        assert_eq!(cfg.kernel, Kernel::Gridwise);
        assert_eq!((cfg.m, cfg.n, cfg.k0), (20, 20, 2.0));
    }

    #[test]
    fn unknown_key_is_an_error_with_its_line() {
        let err = RunConfig::parse_text("m = 10\n# comment\nlamda = 3\n").unwrap_err();
        match err {
            CliError::UnknownKey { key, line } => assert_eq!((key.as_str(), line), ("lamda", 3)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn malformed_lines_and_values_are_rejected() {
        assert!(matches!(RunConfig::parse_text("m 10"), Err(CliError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse_text("m = ten"), Err(CliError::BadValue { .. })));
        assert!(RunConfig::parse_text("kernel = diagonal").is_err());
        assert!(RunConfig::parse_text("m = 2").is_err());
        assert!(RunConfig::parse_text("sigma = 0").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "lambda = 5\nmu = 10\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &[("mu".into(), "7.5".into())]).unwrap();
        assert_eq!(cfg.lambda, 5.0);
        assert_eq!(cfg.mu, 7.5);
        assert_eq!(cfg.w, 0.0);
    }

    #[test]
    fn text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("trial = well, lambda = 0.1, thin = 7, omega_bound = 0.0031, out = /tmp/x")
            .unwrap();
        let back = RunConfig::parse_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::parse_text(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }
}
