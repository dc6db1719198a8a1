//! Metropolis-Hastings chain over conductivity fields.
//!
//! Each step draws one move from the configured kernel, rejects it outright
//! if any entry would fall below the positivity floor, and otherwise solves
//! the forward problem for the candidate only. The current state's misfit
//! and smoothness term are cached, so one forward solve is needed per step.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, ConductivityField, MeshSpec};
use crate::priors::{log_acceptance, misfit_values, slope_values, smoothness_values, PriorWeights};
use crate::proposal::{draw_move, Move, ProposalConfig, RngStream};
use crate::solver::{ForwardSolver, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: u64,
    pub weights: PriorWeights,
    pub proposal: ProposalConfig,
    /// Constant initial conductivity `K_0`.
    pub initial: f64,
    /// Trace sampling stride; `None` means `max(1, iterations / 1000)`.
    pub thin: Option<u64>,
    /// Evenly spaced snapshots of `K`, the last one at the final iteration.
    pub snapshot_count: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            weights: PriorWeights::default(),
            proposal: ProposalConfig::default(),
            initial: 1.0,
            thin: None,
            snapshot_count: 10,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("iterations", "iterations >= 1 required"));
        }
        if self.thin == Some(0) {
            return Err(Error::param("thin", "thin >= 1 required"));
        }
        self.weights.validate()?;
        self.proposal.validate()?;
        if !(self.initial.is_finite() && self.initial > self.proposal.kappa_min) {
            return Err(Error::param(
                "k0",
                format!(
                    "initial conductivity {} must exceed kappa_min {}",
                    self.initial, self.proposal.kappa_min
                ),
            ));
        }
        Ok(())
    }

    pub fn thin(&self) -> u64 {
        self.thin.unwrap_or_else(|| (self.iterations / 1000).max(1))
    }

    /// Iterations at which snapshots are taken.
    pub fn snapshot_iterations(&self) -> Vec<u64> {
        let count = self.snapshot_count as u64;
        let mut out: Vec<u64> = (1..=count)
            .map(|s| (s * self.iterations).div_ceil(count))
            .collect();
        out.dedup();
        out
    }
}

/// Everything needed to continue a chain bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub k: ConductivityField,
    /// Misfit of `k` against the data.
    pub f: f64,
    /// Smoothness term of `k`.
    pub t: f64,
    pub iter: u64,
    pub accepted: u64,
    pub floor_rejected: u64,
    /// Slope summands that needed the doubled regularizer.
    pub degenerate: u64,
    /// Smallest misfit seen so far.
    pub best_f: f64,
    /// Accepted changes per node.
    pub update_counts: Vec<u64>,
    pub rng: RngStream,
}

impl ChainState {
    pub fn acceptance_rate(&self) -> f64 {
        if self.iter == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iter as f64
        }
    }

    pub fn rejected(&self) -> u64 {
        self.iter - self.accepted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Accepted,
    Rejected,
    /// Candidate fell below the positivity floor; no solve was done.
    FloorRejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub iter: u64,
    pub f: f64,
    pub best_f: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub final_state: ChainState,
    pub trace: Vec<TraceSample>,
    pub snapshots: Vec<(u64, ConductivityField)>,
    pub config: McmcConfig,
    pub wall_time: Duration,
}

impl ChainResult {
    pub fn final_k(&self) -> &ConductivityField {
        &self.final_state.k
    }
}

/// Equality of everything except wall time.
impl PartialEq for ChainResult {
    fn eq(&self, other: &Self) -> bool {
        self.final_state == other.final_state
            && self.trace == other.trace
            && self.snapshots == other.snapshots
            && self.config == other.config
    }
}

/// Where and how often a running chain writes checkpoints.
#[derive(Debug, Clone)]
pub struct Checkpointing {
    pub path: std::path::PathBuf,
    /// Save every this many iterations; 0 saves only at the end or on failure.
    pub every: u64,
}

/// A chain bound to its data, physics and reusable solver workspace.
pub struct Chain<'a> {
    data: &'a BoundaryTrace,
    mesh: MeshSpec,
    cfg: McmcConfig,
    solver: ForwardSolver,
    candidate: Vec<f64>,
    simulated: Vec<f64>,
    state: ChainState,
}

impl<'a> Chain<'a> {
    /// Starts from the constant `cfg.initial` with the stream seeded by `cfg.seed`.
    pub fn new(data: &'a BoundaryTrace, mesh: MeshSpec, phys: &PhysicalParams, cfg: McmcConfig) -> Result<Self> {
        Self::with_rng(data, mesh, phys, cfg, RngStream::from_seed(cfg.seed))
    }

    pub fn with_rng(
        data: &'a BoundaryTrace,
        mesh: MeshSpec,
        phys: &PhysicalParams,
        cfg: McmcConfig,
        rng: RngStream,
    ) -> Result<Self> {
        cfg.validate()?;
        let k0 = ConductivityField::constant(mesh, cfg.initial, cfg.proposal.kappa_min)?;
        Self::from_field(data, phys, cfg, k0, rng)
    }

    /// Starts from an arbitrary conductivity.
    pub fn from_field(
        data: &'a BoundaryTrace,
        phys: &PhysicalParams,
        cfg: McmcConfig,
        k0: ConductivityField,
        rng: RngStream,
    ) -> Result<Self> {
        cfg.validate()?;
        let mesh = *k0.mesh();
        check_data(data, &mesh)?;
        if !k0.all_above(cfg.proposal.kappa_min) {
            return Err(Error::param("k0", "initial conductivity violates the floor"));
        }
        let mut solver = ForwardSolver::new(mesh, phys)?;
        let mut simulated = vec![0.0; mesh.boundary_len()];
        solver.boundary_into(k0.values(), &mut simulated)?;
        let f = misfit_values(data.values(), &simulated, cfg.weights.sigma);
        let t = smoothness_values(k0.values(), mesh.m(), mesh.n());
        let state = ChainState {
            f,
            t,
            iter: 0,
            accepted: 0,
            floor_rejected: 0,
            degenerate: 0,
            best_f: f,
            update_counts: vec![0; mesh.node_count()],
            rng,
            k: k0,
        };
        Ok(Self {
            data,
            mesh,
            cfg,
            solver,
            candidate: vec![0.0; mesh.node_count()],
            simulated,
            state,
        })
    }

    /// Continues from a saved state; the caches are trusted as stored.
    pub fn resume(data: &'a BoundaryTrace, phys: &PhysicalParams, cfg: McmcConfig, state: ChainState) -> Result<Self> {
        cfg.validate()?;
        let mesh = *state.k.mesh();
        check_data(data, &mesh)?;
        if state.update_counts.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch("update counts".into()));
        }
        Ok(Self {
            data,
            mesh,
            cfg,
            solver: ForwardSolver::new(mesh, phys)?,
            candidate: vec![0.0; mesh.node_count()],
            simulated: vec![0.0; mesh.boundary_len()],
            state,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn into_state(self) -> ChainState {
        self.state
    }

    pub fn config(&self) -> &McmcConfig {
        &self.cfg
    }

    /// One Metropolis-Hastings step.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let mv = draw_move(self.cfg.proposal.kernel, &self.mesh, self.cfg.proposal.omega_bound, &mut self.state.rng);
        self.step_with_move(mv)
    }

    /// Step with a given move; the acceptance draw still comes from the chain's stream.
    pub fn step_with_move(&mut self, mv: Move) -> Result<StepOutcome> {
        let floor = self.cfg.proposal.kappa_min;
        self.candidate.copy_from_slice(self.state.k.values());
        mv.apply(&self.mesh, &mut self.candidate);

        let mut below_floor = false;
        mv.for_each_node(&self.mesh, |k| below_floor |= self.candidate[k] < floor);
        self.state.iter += 1;
        if below_floor {
            self.state.floor_rejected += 1;
            return Ok(StepOutcome::FloorRejected);
        }

        if let Err(source) = self.solver.boundary_into(&self.candidate, &mut self.simulated) {
            return Err(Error::StepFailed {
                iteration: self.state.iter,
                candidate_hash: hash_values(&self.candidate),
                source: Box::new(source),
            });
        }
        let weights = &self.cfg.weights;
        let (m, n) = (self.mesh.m(), self.mesh.n());
        let f_c = misfit_values(self.data.values(), &self.simulated, weights.sigma);
        let t_c = smoothness_values(&self.candidate, m, n);
        let (px, py) = if weights.needs_slopes() {
            let slopes = slope_values(&self.candidate, m, n, weights.epsilon0);
            self.state.degenerate += slopes.degenerate;
            (slopes.px, slopes.py)
        } else {
            (0.0, 0.0)
        };
        let log_alpha = log_acceptance(self.state.f, f_c, self.state.t, t_c, px, py, weights);

        if metropolis_accept(&mut self.state.rng, log_alpha) {
            let state = &mut self.state;
            state.k.values_mut().copy_from_slice(&self.candidate);
            state.f = f_c;
            state.t = t_c;
            state.accepted += 1;
            state.best_f = state.best_f.min(f_c);
            let counts = &mut state.update_counts;
            mv.for_each_node(&self.mesh, |k| counts[k] += 1);
            Ok(StepOutcome::Accepted)
        } else {
            Ok(StepOutcome::Rejected)
        }
    }

    /// Runs until `cfg.iterations`, recording the trace and snapshots.
    pub fn run(&mut self, checkpointing: Option<&Checkpointing>) -> Result<ChainResult> {
        let started = Instant::now();
        let thin = self.cfg.thin();
        let snapshot_at = self.cfg.snapshot_iterations();
        let mut next_snapshot = snapshot_at.iter().position(|&s| s > self.state.iter).unwrap_or(snapshot_at.len());
        let mut trace = vec![self.sample()];
        let mut snapshots = Vec::with_capacity(snapshot_at.len());

        while self.state.iter < self.cfg.iterations {
            if let Err(err) = self.step() {
                if let Some(ck) = checkpointing {
                    // best effort; the step error is what gets reported
                    let _ = crate::checkpoint::save(&self.state, &ck.path);
                }
                return Err(err);
            }
            let iter = self.state.iter;
            if iter.is_multiple_of(thin) || iter == self.cfg.iterations {
                trace.push(self.sample());
            }
            if next_snapshot < snapshot_at.len() && snapshot_at[next_snapshot] == iter {
                snapshots.push((iter, self.state.k.clone()));
                next_snapshot += 1;
            }
            if let Some(ck) = checkpointing {
                if ck.every > 0 && iter.is_multiple_of(ck.every) {
                    crate::checkpoint::save(&self.state, &ck.path)?;
                }
            }
        }
        if let Some(ck) = checkpointing {
            crate::checkpoint::save(&self.state, &ck.path)?;
        }
        Ok(ChainResult {
            final_state: self.state.clone(),
            trace,
            snapshots,
            config: self.cfg,
            wall_time: started.elapsed(),
        })
    }

    fn sample(&self) -> TraceSample {
        TraceSample {
            iter: self.state.iter,
            f: self.state.f,
            best_f: self.state.best_f,
            acceptance_rate: self.state.acceptance_rate(),
        }
    }
}

fn check_data(data: &BoundaryTrace, mesh: &MeshSpec) -> Result<()> {
    if data.len() != mesh.boundary_len() {
        return Err(Error::DimensionMismatch(format!(
            "data trace has {} entries, a {mesh} mesh has {} boundary nodes",
            data.len(),
            mesh.boundary_len()
        )));
    }
    Ok(())
}

/// Draws `u ~ U[0, 1)` and accepts when `u < alpha`.
pub fn metropolis_accept(rng: &mut RngStream, log_alpha: f64) -> bool {
    rng.uniform() < log_alpha.exp()
}

fn hash_values(values: &[f64]) -> u64 {
    // FNV-1a over the bit patterns
    values.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
        v.to_bits()
            .to_le_bytes()
            .iter()
            .fold(h, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
    })
}

/// Advances `state` by one step. Builds a fresh solver, so prefer
/// [`Chain::step`] in loops.
pub fn mh_step(
    state: ChainState,
    data: &BoundaryTrace,
    phys: &PhysicalParams,
    cfg: &McmcConfig,
) -> Result<(ChainState, StepOutcome)> {
    let mut chain = Chain::resume(data, phys, *cfg, state)?;
    let outcome = chain.step()?;
    Ok((chain.into_state(), outcome))
}

/// Runs one chain from `K_0 = cfg.initial` seeded with `cfg.seed`.
pub fn run_chain(data: &BoundaryTrace, mesh: &MeshSpec, phys: &PhysicalParams, cfg: &McmcConfig) -> Result<ChainResult> {
    Chain::new(data, *mesh, phys, *cfg)?.run(None)
}

/// Runs `count` independent chains in parallel. Chain `c` uses the stream
/// [`RngStream::for_chain`]`(cfg.seed, c)`; results come back in chain order.
pub fn run_chains(
    data: &BoundaryTrace,
    mesh: &MeshSpec,
    phys: &PhysicalParams,
    cfg: &McmcConfig,
    count: usize,
) -> Result<Vec<ChainResult>> {
    (0..count)
        .into_par_iter()
        .map(|c| {
            let rng = RngStream::for_chain(cfg.seed, c as u64);
            Chain::with_rng(data, *mesh, phys, *cfg, rng)?.run(None)
        })
        .collect()
}
