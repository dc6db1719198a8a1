//! Reconstruction of the heat conductivity of a 2-D cooling fin from its
//! boundary temperatures with a Metropolis-Hastings chain.
//!
//! The pieces, bottom up:
//!
//! * [`grid`]: mesh, node fields and boundary traces;
//! * [`solver`]: finite-difference forward solve of the fin equation;
//! * [`priors`]: data misfit, smoothness/slope/flatness priors and the
//!   combined acceptance probability;
//! * [`proposal`]: uniform, pointwise and gridwise candidate moves;
//! * [`chain`] and [`checkpoint`]: the sampler and its resumable state;
//! * [`trials`]: trial conductivities and synthetic data.

pub mod band;
pub mod chain;
pub mod checkpoint;
pub mod error;
pub mod grid;
pub mod priors;
pub mod proposal;
pub mod solver;
pub mod trials;

pub use chain::{mh_step, run_chain, run_chains, Chain, ChainResult, ChainState, Checkpointing, McmcConfig, StepOutcome, TraceSample};
pub use checkpoint::{load as checkpoint_load, save as checkpoint_save};
pub use error::{CheckpointError, Error, Result};
pub use grid::{extract_boundary, BoundaryTrace, ConductivityField, MeshSpec, TemperatureField};
pub use priors::{acceptance_probability, data_misfit, slope_terms, smoothness_term, PriorEvaluation, PriorWeights, SlopeTerms};
pub use proposal::{propose, propose_gridwise, propose_pointwise, propose_uniform, Kernel, Move, ProposalConfig, RngStream};
pub use solver::{assemble_system, boundary_of_solution, solve_forward, ForwardSolver, LinearSystem, PhysicalParams};
pub use trials::{gaussian_well, reconstruction_error, synthesize_data, tilted_plane, ErrorStats, TrialKind, TrialSpec};
