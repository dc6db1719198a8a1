//! Candidate generation: uniform, pointwise and gridwise shifts by a single
//! random offset `omega ~ U(-omega_bound, omega_bound)`.
//!
//! All three kernels are symmetric. The reverse of a move touches the same
//! nodes with `-omega`, which has the same density, and sites are chosen
//! uniformly, so the Hastings correction is identically one.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ConductivityField, MeshSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Shift every node.
    Uniform,
    /// Shift one node chosen uniformly.
    Pointwise,
    /// Shift the four corners of one mesh cell chosen uniformly.
    Gridwise,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Uniform => "uniform",
            Kernel::Pointwise => "pointwise",
            Kernel::Gridwise => "gridwise",
        })
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Kernel::Uniform),
            "pointwise" => Ok(Kernel::Pointwise),
            "gridwise" => Ok(Kernel::Gridwise),
            other => Err(Error::param(
                "kernel",
                format!("expected uniform, pointwise or gridwise, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub omega_bound: f64,
    pub kernel: Kernel,
    /// Candidates with any entry below this are rejected outright.
    pub kappa_min: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            omega_bound: 0.005,
            kernel: Kernel::Uniform,
            kappa_min: 1e-6,
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_bound.is_finite() && self.omega_bound > 0.0) {
            return Err(Error::param(
                "omega_bound",
                format!("omega_bound > 0 required, got {}", self.omega_bound),
            ));
        }
        if !(self.kappa_min.is_finite() && self.kappa_min > 0.0) {
            return Err(Error::param(
                "kappa_min",
                format!("kappa_min > 0 required, got {}", self.kappa_min),
            ));
        }
        Ok(())
    }
}

/// Serializable position of an [`RngStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

/// Seedable, platform-independent random stream (ChaCha8).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for chain `index` of a run seeded with `master`.
    pub fn for_chain(master: u64, index: u64) -> Self {
        Self::from_seed(derive_seed(master, index))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n as u64) as usize
    }

    /// Uniform on `[-bound, bound)`; exactly zero when `bound == 0`.
    pub fn symmetric(&mut self, bound: f64) -> f64 {
        bound * (2.0 * self.uniform() - 1.0)
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.inner.get_seed(),
            stream: self.inner.get_stream(),
            word_pos: self.inner.get_word_pos(),
        }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut inner = ChaCha8Rng::from_seed(state.seed);
        inner.set_stream(state.stream);
        inner.set_word_pos(state.word_pos);
        Self { inner }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `splitmix64(master ^ splitmix64(index))`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One proposed change to the conductivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Move {
    Uniform { omega: f64 },
    /// Flat node index, see [`MeshSpec::index`].
    Point { node: usize, omega: f64 },
    /// Cell with lower-left corner `(i, j)`.
    Cell { i: usize, j: usize, omega: f64 },
}

impl Move {
    pub fn omega(&self) -> f64 {
        match *self {
            Move::Uniform { omega } | Move::Point { omega, .. } | Move::Cell { omega, .. } => omega,
        }
    }

    /// The move that undoes this one.
    pub fn reverse(&self) -> Move {
        match *self {
            Move::Uniform { omega } => Move::Uniform { omega: -omega },
            Move::Point { node, omega } => Move::Point { node, omega: -omega },
            Move::Cell { i, j, omega } => Move::Cell { i, j, omega: -omega },
        }
    }

    /// Probability of choosing this move's site under its kernel.
    pub fn site_probability(&self, mesh: &MeshSpec) -> f64 {
        match self {
            Move::Uniform { .. } => 1.0,
            Move::Point { .. } => 1.0 / mesh.node_count() as f64,
            Move::Cell { .. } => 1.0 / ((mesh.m() - 1) * (mesh.n() - 1)) as f64,
        }
    }

    /// Calls `f` with the flat index of every node the move changes.
    pub fn for_each_node(&self, mesh: &MeshSpec, mut f: impl FnMut(usize)) {
        match *self {
            Move::Uniform { .. } => (0..mesh.node_count()).for_each(f),
            Move::Point { node, .. } => f(node),
            Move::Cell { i, j, .. } => {
                let base = mesh.index(i, j);
                f(base);
                f(base + 1);
                f(base + mesh.m());
                f(base + mesh.m() + 1);
            }
        }
    }

    /// Adds omega to the affected entries of `values`.
    pub fn apply(&self, mesh: &MeshSpec, values: &mut [f64]) {
        let omega = self.omega();
        match *self {
            Move::Uniform { .. } => values.iter_mut().for_each(|v| *v += omega),
            _ => self.for_each_node(mesh, |k| values[k] += omega),
        }
    }
}

/// Draws a move for `kernel`; the site is drawn before omega.
pub fn draw_move(kernel: Kernel, mesh: &MeshSpec, omega_bound: f64, rng: &mut RngStream) -> Move {
    match kernel {
        Kernel::Uniform => Move::Uniform {
            omega: rng.symmetric(omega_bound),
        },
        Kernel::Pointwise => {
            let node = rng.index(mesh.node_count());
            Move::Point {
                node,
                omega: rng.symmetric(omega_bound),
            }
        }
        Kernel::Gridwise => {
            let cells_x = mesh.m() - 1;
            let cell = rng.index(cells_x * (mesh.n() - 1));
            Move::Cell {
                i: cell % cells_x,
                j: cell / cells_x,
                omega: rng.symmetric(omega_bound),
            }
        }
    }
}

fn propose_with(kernel: Kernel, k: &ConductivityField, cfg: &ProposalConfig, rng: &mut RngStream) -> ConductivityField {
    let mv = draw_move(kernel, k.mesh(), cfg.omega_bound, rng);
    let mut candidate = k.clone();
    mv.apply(k.mesh(), candidate.values_mut());
    candidate
}

/// Adds one shared omega to every entry.
pub fn propose_uniform(k: &ConductivityField, cfg: &ProposalConfig, rng: &mut RngStream) -> ConductivityField {
    propose_with(Kernel::Uniform, k, cfg, rng)
}

/// Adds omega to one node chosen uniformly.
pub fn propose_pointwise(k: &ConductivityField, cfg: &ProposalConfig, rng: &mut RngStream) -> ConductivityField {
    propose_with(Kernel::Pointwise, k, cfg, rng)
}

/// Adds omega to the four corners of one mesh cell chosen uniformly.
pub fn propose_gridwise(k: &ConductivityField, cfg: &ProposalConfig, rng: &mut RngStream) -> ConductivityField {
    propose_with(Kernel::Gridwise, k, cfg, rng)
}

/// Dispatches on `cfg.kernel`.
pub fn propose(k: &ConductivityField, cfg: &ProposalConfig, rng: &mut RngStream) -> ConductivityField {
    propose_with(cfg.kernel, k, cfg, rng)
}
