//! Finite-difference forward solver for the steady fin equation
//!
//! ```text
//! u_xx + u_yy = 2H / (K delta) * u
//! ```
//!
//! with convective Robin boundaries `K du/dn = -H u` (outward normal) and a
//! prescribed inward flux `K du/dn = q` on the CPU contact segment, the
//! lower part of the left edge.
//!
//! Each row of the assembled system is the negated five-point Laplacian plus
//! the reaction term. Boundary rows eliminate the ghost node outside the fin
//! with a centered difference of the normal derivative, which keeps the
//! boundary closure second order. The resulting matrix is strictly row
//! diagonally dominant whenever `H > 0` and `K > 0`.

use serde::{Deserialize, Serialize};

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{extract_boundary_into, BoundaryTrace, ConductivityField, MeshSpec, TemperatureField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Convection coefficient H.
    pub h: f64,
    /// Fin thickness.
    pub delta: f64,
    /// Inward heat-flux density on the contact segment.
    pub q: f64,
    /// Contact segment is the left edge up to `contact_fraction * Ly`.
    pub contact_fraction: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            h: 0.005,
            delta: 0.1,
            q: 50.0,
            contact_fraction: 0.5,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::param("H", format!("H > 0 required, got {}", self.h)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::param(
                "delta",
                format!("delta > 0 required, got {}", self.delta),
            ));
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(Error::param("q", format!("q >= 0 required, got {}", self.q)));
        }
        if !(self.contact_fraction > 0.0 && self.contact_fraction <= 1.0) {
            return Err(Error::param(
                "contact_fraction",
                format!("must lie in (0, 1], got {}", self.contact_fraction),
            ));
        }
        Ok(())
    }

    /// Left-edge rows `j` in contact with the CPU.
    pub fn contact_rows(&self, mesh: &MeshSpec) -> Vec<usize> {
        let limit = self.contact_fraction * mesh.ly() * (1.0 + 1e-12);
        (0..mesh.n()).filter(|&j| mesh.y(j) <= limit).collect()
    }

    /// Boundary conditions induced by these parameters.
    pub fn edge_conditions(&self, mesh: &MeshSpec) -> EdgeConditions {
        let convective = RobinCondition {
            coeff: self.h,
            flux: 0.0,
        };
        let mut edges = EdgeConditions::uniform(mesh, convective);
        for j in self.contact_rows(mesh) {
            edges.left[j] = RobinCondition {
                coeff: 0.0,
                flux: self.q,
            };
        }
        edges
    }
}

/// `K du/dn = -coeff * u + flux` with `n` the outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinCondition {
    pub coeff: f64,
    pub flux: f64,
}

/// Per-node conditions along each side; left/right are indexed by `j`,
/// bottom/top by `i`. Corner nodes take one condition from each side.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConditions {
    pub left: Vec<RobinCondition>,
    pub right: Vec<RobinCondition>,
    pub bottom: Vec<RobinCondition>,
    pub top: Vec<RobinCondition>,
}

impl EdgeConditions {
    pub fn uniform(mesh: &MeshSpec, cond: RobinCondition) -> Self {
        Self {
            left: vec![cond; mesh.n()],
            right: vec![cond; mesh.n()],
            bottom: vec![cond; mesh.m()],
            top: vec![cond; mesh.m()],
        }
    }

    fn check(&self, mesh: &MeshSpec) -> Result<()> {
        if self.left.len() != mesh.n()
            || self.right.len() != mesh.n()
            || self.bottom.len() != mesh.m()
            || self.top.len() != mesh.m()
        {
            return Err(Error::DimensionMismatch(format!(
                "edge conditions do not fit a {mesh} mesh"
            )));
        }
        Ok(())
    }
}

/// Assembled fin system `A u = b`, node `(i, j)` in row `j * m + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: BandMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn bandwidth(&self) -> usize {
        self.matrix.width()
    }

    /// `max_r |(A u - b)_r|`.
    pub fn residual_inf(&self, u: &[f64]) -> f64 {
        let mut au = vec![0.0; self.dim()];
        self.matrix.matvec(u, &mut au);
        au.iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Assembles the fin system for conductivity `k`.
pub fn assemble_system(k: &ConductivityField, mesh: &MeshSpec, phys: &PhysicalParams) -> Result<LinearSystem> {
    phys.validate()?;
    let edges = phys.edge_conditions(mesh);
    assemble_general(k, mesh, phys.h, phys.delta, &edges, None)
}

/// Assembly with arbitrary Robin data and an optional volume source `s`,
/// discretizing `-(u_xx + u_yy) + 2H/(K delta) u = s`.
pub fn assemble_general(
    k: &ConductivityField,
    mesh: &MeshSpec,
    h: f64,
    delta: f64,
    edges: &EdgeConditions,
    source: Option<&[f64]>,
) -> Result<LinearSystem> {
    mesh.ensure_same(k.mesh())?;
    edges.check(mesh)?;
    if let Some(s) = source {
        if s.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch("volume source length".into()));
        }
    }
    check_positive(k)?;
    let mut matrix = BandMatrix::zeros(mesh.node_count(), mesh.m());
    let mut rhs = vec![0.0; mesh.node_count()];
    fill_system(k.values(), mesh, h, delta, edges, source, &mut matrix, &mut rhs);
    Ok(LinearSystem { matrix, rhs })
}

fn check_positive(k: &ConductivityField) -> Result<()> {
    if let Some(idx) = k.values().iter().position(|&v| !(v.is_finite() && v > 0.0)) {
        let (i, j) = k.mesh().node(idx);
        return Err(Error::param(
            "conductivity",
            format!("K({i}, {j}) = {} is not positive", k.values()[idx]),
        ));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fill_system(
    k: &[f64],
    mesh: &MeshSpec,
    h: f64,
    delta: f64,
    edges: &EdgeConditions,
    source: Option<&[f64]>,
    matrix: &mut BandMatrix,
    rhs: &mut [f64],
) {
    let (m, n) = (mesh.m(), mesh.n());
    let (dx, dy) = (mesh.dx(), mesh.dy());
    let (ax, ay) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    let reaction = 2.0 * h / delta;
    matrix.clear();

    for j in 0..n {
        for i in 0..m {
            let row = j * m + i;
            let kij = k[row];
            let mut diag = 2.0 * ax + 2.0 * ay + reaction / kij;
            let mut b = source.map_or(0.0, |s| s[row]);

            // ghost elimination: u_ghost = u_inner + 2 d (flux - coeff u) / K
            let mut robin = |cond: &RobinCondition, spacing: f64| {
                diag += 2.0 * cond.coeff / (kij * spacing);
                b += 2.0 * cond.flux / (kij * spacing);
            };

            if i == 0 {
                matrix.set(row, row + 1, -2.0 * ax);
                robin(&edges.left[j], dx);
            } else if i + 1 == m {
                matrix.set(row, row - 1, -2.0 * ax);
                robin(&edges.right[j], dx);
            } else {
                matrix.set(row, row - 1, -ax);
                matrix.set(row, row + 1, -ax);
            }

            if j == 0 {
                matrix.set(row, row + m, -2.0 * ay);
                robin(&edges.bottom[i], dy);
            } else if j + 1 == n {
                matrix.set(row, row - m, -2.0 * ay);
                robin(&edges.top[i], dy);
            } else {
                matrix.set(row, row - m, -ay);
                matrix.set(row, row + m, -ay);
            }

            matrix.set(row, row, diag);
            rhs[row] = b;
        }
    }
}

/// Reusable forward solver holding the factorization workspace for one mesh.
///
/// Repeated solves reuse the same buffers; nothing is allocated per call.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    mesh: MeshSpec,
    h: f64,
    delta: f64,
    edges: EdgeConditions,
    work: BandMatrix,
    solution: Vec<f64>,
}

impl ForwardSolver {
    pub fn new(mesh: MeshSpec, phys: &PhysicalParams) -> Result<Self> {
        phys.validate()?;
        let edges = phys.edge_conditions(&mesh);
        Ok(Self {
            mesh,
            h: phys.h,
            delta: phys.delta,
            edges,
            work: BandMatrix::zeros(mesh.node_count(), mesh.m()),
            solution: vec![0.0; mesh.node_count()],
        })
    }

    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    /// Solves for raw conductivity values laid out as in [`ConductivityField`].
    pub fn solve_values(&mut self, k: &[f64]) -> Result<&[f64]> {
        if k.len() != self.mesh.node_count() {
            return Err(Error::DimensionMismatch("conductivity length".into()));
        }
        if let Some(idx) = k.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            let (i, j) = self.mesh.node(idx);
            return Err(Error::param(
                "conductivity",
                format!("K({i}, {j}) = {} is not positive", k[idx]),
            ));
        }
        fill_system(
            k,
            &self.mesh,
            self.h,
            self.delta,
            &self.edges,
            None,
            &mut self.work,
            &mut self.solution,
        );
        self.work.factor_in_place()?;
        self.work.solve_factored(&mut self.solution);
        Ok(&self.solution)
    }

    pub fn solve(&mut self, k: &ConductivityField) -> Result<TemperatureField> {
        self.mesh.ensure_same(k.mesh())?;
        let u = self.solve_values(k.values())?.to_vec();
        Ok(TemperatureField::from_values_unchecked(self.mesh, u))
    }

    /// Boundary temperatures for `k`, written into `out` in canonical order.
    pub fn boundary_into(&mut self, k: &[f64], out: &mut [f64]) -> Result<()> {
        if out.len() != self.mesh.boundary_len() {
            return Err(Error::DimensionMismatch("boundary trace length".into()));
        }
        self.solve_values(k)?;
        extract_boundary_into(&self.mesh, &self.solution, out);
        Ok(())
    }
}

/// Solves the fin equation for conductivity `k`.
pub fn solve_forward(k: &ConductivityField, mesh: &MeshSpec, phys: &PhysicalParams) -> Result<TemperatureField> {
    ForwardSolver::new(*mesh, phys)?.solve(k)
}

/// Boundary trace of the solution for conductivity `k`.
pub fn boundary_of_solution(k: &ConductivityField, mesh: &MeshSpec, phys: &PhysicalParams) -> Result<BoundaryTrace> {
    mesh.ensure_same(k.mesh())?;
    let mut solver = ForwardSolver::new(*mesh, phys)?;
    let mut trace = BoundaryTrace::zeros(mesh.boundary_len());
    solver.boundary_into(k.values(), trace.values_mut())?;
    Ok(trace)
}

/// Solves a general system from [`assemble_general`].
pub fn solve_system(system: &LinearSystem) -> Result<Vec<f64>> {
    let mut lu = system.matrix.clone();
    lu.factor_in_place()?;
    let mut u = system.rhs.clone();
    lu.solve_factored(&mut u);
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::extract_boundary;

    fn mesh10() -> MeshSpec {
        MeshSpec::new(10, 10, 4.0, 4.0).unwrap()
    }

    fn bumpy(mesh: MeshSpec) -> ConductivityField {
        ConductivityField::from_fn(mesh, |i, j| 1.0 + 0.3 * ((i as f64) * 0.7).sin() * ((j as f64) * 0.4).cos().abs())
    }

    #[test]
    fn homogeneous_source_gives_zero_rhs_and_solution() {
        let mesh = mesh10();
        let phys = PhysicalParams { q: 0.0, ..Default::default() };
        let k = bumpy(mesh);
        let sys = assemble_system(&k, &mesh, &phys).unwrap();
        assert!(sys.rhs.iter().all(|&b| b == 0.0));
        let u = solve_forward(&k, &mesh, &phys).unwrap();
        assert!(u.values().iter().all(|&v| v.abs() <= 1e-10));
        let trace = boundary_of_solution(&k, &mesh, &phys).unwrap();
        assert_eq!(trace.len(), 36);
        assert!(trace.values().iter().all(|&v| v.abs() <= 1e-10));
    }

    #[test]
    fn system_shape() {
        let mesh = mesh10();
        let k = ConductivityField::filled(mesh, 1.0);
        let sys = assemble_system(&k, &mesh, &PhysicalParams::default()).unwrap();
        assert_eq!(sys.dim(), 100);
        assert_eq!(sys.bandwidth(), 10);
        // the coupling to the row above actually uses the full bandwidth
        assert!(sys.matrix.get(0, 10) != 0.0);
    }

    #[test]
    fn rhs_nonzero_only_on_contact_rows() {
        let mesh = mesh10();
        let phys = PhysicalParams::default();
        let k = ConductivityField::filled(mesh, 1.3);
        let sys = assemble_system(&k, &mesh, &phys).unwrap();
        let contact = phys.contact_rows(&mesh);
        // y(j) = 4j/9 <= 2 for j = 0..=4
        assert_eq!(contact, vec![0, 1, 2, 3, 4]);
        for (row, &b) in sys.rhs.iter().enumerate() {
            let (i, j) = mesh.node(row);
            assert_eq!(b != 0.0, i == 0 && contact.contains(&j), "row {row}");
        }
    }

    #[test]
    fn strictly_diagonally_dominant() {
        let mesh = mesh10();
        for k in [ConductivityField::filled(mesh, 1.68), bumpy(mesh)] {
            let sys = assemble_system(&k, &mesh, &PhysicalParams::default()).unwrap();
            for r in 0..sys.dim() {
                let diag = sys.matrix.get(r, r);
                let off: f64 = sys.matrix.row(r).filter(|&(c, _)| c != r).map(|(_, a)| a.abs()).sum();
                assert!(diag > off, "row {r}: {diag} <= {off}");
            }
        }
    }

    #[test]
    fn rejects_nonpositive_conductivity() {
        let mesh = mesh10();
        let mut k = ConductivityField::filled(mesh, 1.0);
        k.values_mut()[17] = 0.0;
        assert!(assemble_system(&k, &mesh, &PhysicalParams::default()).is_err());
        assert!(solve_forward(&k, &mesh, &PhysicalParams::default()).is_err());
    }

    #[test]
    fn residual_is_small_and_solve_is_deterministic() {
        let mesh = mesh10();
        let phys = PhysicalParams::default();
        let k = bumpy(mesh);
        let sys = assemble_system(&k, &mesh, &phys).unwrap();
        let u = solve_forward(&k, &mesh, &phys).unwrap();
        let bmax = sys.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(sys.residual_inf(u.values()) <= 1e-10 * (1.0 + bmax));
        assert_eq!(u, solve_forward(&k, &mesh, &phys).unwrap());
        assert_eq!(sys, assemble_system(&k, &mesh, &phys).unwrap());
    }

    #[test]
    fn full_contact_edge_gives_midline_symmetry() {
        let mesh = mesh10();
        let phys = PhysicalParams { contact_fraction: 1.0, ..Default::default() };
        let n = mesh.n();
        let k = ConductivityField::from_fn(mesh, |i, j| {
            let jj = j.min(n - 1 - j) as f64;
            1.0 + 0.1 * i as f64 + 0.05 * jj * jj
        });
        let u = solve_forward(&k, &mesh, &phys).unwrap();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..mesh.m() {
                worst = worst.max((u.get(i, j) - u.get(i, n - 1 - j)).abs());
            }
        }
        assert!(worst <= 1e-8, "asymmetry {worst}");
    }

    #[test]
    fn trace_is_linear_in_flux() {
        let mesh = mesh10();
        let k = bumpy(mesh);
        let p1 = PhysicalParams { q: 0.7, ..Default::default() };
        let p2 = PhysicalParams { q: 1.4, ..Default::default() };
        let t1 = boundary_of_solution(&k, &mesh, &p1).unwrap();
        let t2 = boundary_of_solution(&k, &mesh, &p2).unwrap();
        for (a, b) in t1.values().iter().zip(t2.values()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn temperatures_nonnegative_under_positive_flux() {
        let mesh = MeshSpec::new(12, 9, 4.0, 3.0).unwrap();
        let k = bumpy(mesh);
        let u = solve_forward(&k, &mesh, &PhysicalParams::default()).unwrap();
        assert!(u.min() >= -1e-8);
        assert!(u.max() > 0.0);
    }

    #[test]
    fn reusable_solver_matches_one_shot() {
        let mesh = mesh10();
        let phys = PhysicalParams::default();
        let mut solver = ForwardSolver::new(mesh, &phys).unwrap();
        for c in [1.0, 1.68, 0.3] {
            let k = ConductivityField::filled(mesh, c);
            let mut out = vec![0.0; mesh.boundary_len()];
            solver.boundary_into(k.values(), &mut out).unwrap();
            let u = solve_forward(&k, &mesh, &phys).unwrap();
            assert_eq!(out, extract_boundary(&u).values());
        }
    }
}
