//! Trial conductivities and synthetic boundary data.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, ConductivityField, MeshSpec};
use crate::proposal::RngStream;
use crate::solver::{boundary_of_solution, PhysicalParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialKind {
    Constant { value: f64 },
    /// `K(i, j) = (i + j) / divisor + 1`, one-based indices.
    TiltedPlane { divisor: f64 },
    /// `K = amplitude / (1 + suppression * exp(-r^2 / width))`, `r` the
    /// distance to `center`.
    GaussianWell {
        amplitude: f64,
        suppression: f64,
        center: (f64, f64),
        width: f64,
    },
}

impl TrialKind {
    pub const GAUSSIAN_WELL: TrialKind = TrialKind::GaussianWell {
        amplitude: 2.0,
        suppression: 50.0,
        center: (2.0, 2.0),
        width: 0.2,
    };

    pub fn validate(&self) -> Result<()> {
        match *self {
            TrialKind::Constant { value } if !(value.is_finite() && value > 0.0) => {
                Err(Error::param("trial", format!("constant {value} must be positive")))
            }
            TrialKind::TiltedPlane { divisor } if !(divisor.is_finite() && divisor > 0.0) => {
                Err(Error::param("trial", format!("divisor {divisor} must be positive")))
            }
            TrialKind::GaussianWell {
                amplitude,
                suppression,
                width,
                ..
            } if !(amplitude > 0.0 && suppression >= 0.0 && width > 0.0) => Err(Error::param(
                "trial",
                "well needs amplitude > 0, suppression >= 0, width > 0",
            )),
            _ => Ok(()),
        }
    }

    pub fn field(&self, mesh: &MeshSpec) -> Result<ConductivityField> {
        self.validate()?;
        Ok(match *self {
            TrialKind::Constant { value } => ConductivityField::filled(*mesh, value),
            TrialKind::TiltedPlane { divisor } => tilted_plane(mesh, divisor)?,
            TrialKind::GaussianWell {
                amplitude,
                suppression,
                center,
                width,
            } => ConductivityField::from_fn(*mesh, |i, j| {
                let r2 = (mesh.x(i) - center.0).powi(2) + (mesh.y(j) - center.1).powi(2);
                amplitude / (1.0 + suppression * (-r2 / width).exp())
            }),
        })
    }
}

impl fmt::Display for TrialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TrialKind::Constant { value } => write!(f, "constant:{value}"),
            TrialKind::TiltedPlane { divisor } => write!(f, "tilted:{divisor}"),
            TrialKind::GaussianWell { .. } if *self == Self::GAUSSIAN_WELL => f.write_str("well"),
            TrialKind::GaussianWell {
                amplitude,
                suppression,
                center,
                width,
            } => write!(f, "well:{amplitude}:{suppression}:{}:{}:{width}", center.0, center.1),
        }
    }
}

/// Parses `constant:1.68`, `tilted:20`, `well` or
/// `well:amplitude:suppression:cx:cy:width`.
impl FromStr for TrialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let num = |k: usize| -> Result<f64> {
            parts
                .get(k)
                .ok_or_else(|| Error::param("trial", format!("{s:?} is missing a parameter")))?
                .parse::<f64>()
                .map_err(|_| Error::param("trial", format!("bad number in {s:?}")))
        };
        let kind = match (parts[0], parts.len()) {
            ("constant", 2) => TrialKind::Constant { value: num(1)? },
            ("tilted", 2) => TrialKind::TiltedPlane { divisor: num(1)? },
            ("well", 1) => Self::GAUSSIAN_WELL,
            ("well", 6) => TrialKind::GaussianWell {
                amplitude: num(1)?,
                suppression: num(2)?,
                center: (num(3)?, num(4)?),
                width: num(5)?,
            },
            _ => {
                return Err(Error::param(
                    "trial",
                    format!("expected constant:<c>, tilted:<divisor> or well[:a:s:cx:cy:w], got {s:?}"),
                ))
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub kind: TrialKind,
    pub mesh: MeshSpec,
    /// Standard deviation of Gaussian noise added to the synthetic trace.
    pub noise_std: f64,
}

/// `K(i, j) = (i + j) / divisor + 1` with one-based `i, j`.
pub fn tilted_plane(mesh: &MeshSpec, divisor: f64) -> Result<ConductivityField> {
    if !(divisor.is_finite() && divisor > 0.0) {
        return Err(Error::param("divisor", format!("must be positive, got {divisor}")));
    }
    Ok(ConductivityField::from_fn(*mesh, |i, j| {
        (i + 1 + j + 1) as f64 / divisor + 1.0
    }))
}

/// Radial well of depth `2/51` at `(2, 2)` on a plateau of 2.
pub fn gaussian_well(mesh: &MeshSpec) -> ConductivityField {
    TrialKind::GAUSSIAN_WELL
        .field(mesh)
        .expect("default well parameters are valid")
}

/// Boundary trace of the forward solution plus i.i.d. `N(0, noise_std^2)`
/// noise per entry. No random numbers are consumed when `noise_std == 0`.
pub fn synthesize_data(
    k_correct: &ConductivityField,
    mesh: &MeshSpec,
    phys: &PhysicalParams,
    noise_std: f64,
    rng: &mut RngStream,
) -> Result<BoundaryTrace> {
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::param("noise_std", format!("must be >= 0, got {noise_std}")));
    }
    let mut trace = boundary_of_solution(k_correct, mesh, phys)?;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("positive std");
        for v in trace.values_mut() {
            *v += normal.sample(rng);
        }
    }
    Ok(trace)
}

/// Entrywise error statistics of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean_abs: f64,
    pub rms: f64,
    pub max_abs: f64,
}

pub fn reconstruction_error(k_hat: &ConductivityField, k_correct: &ConductivityField) -> Result<ErrorStats> {
    k_hat.mesh().ensure_same(k_correct.mesh())?;
    let count = k_hat.values().len() as f64;
    let (mut abs_sum, mut sq_sum, mut max_abs) = (0.0, 0.0, 0.0f64);
    for (a, b) in k_hat.values().iter().zip(k_correct.values()) {
        let e = (a - b).abs();
        abs_sum += e;
        sq_sum += e * e;
        max_abs = max_abs.max(e);
    }
    Ok(ErrorStats {
        mean_abs: abs_sum / count,
        rms: (sq_sum / count).sqrt(),
        max_abs,
    })
}
