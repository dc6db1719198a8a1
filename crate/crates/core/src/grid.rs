//! Mesh geometry, node-valued fields and boundary traces.
//!
//! Nodes are addressed with zero-based `(i, j)` where `i` runs along x
//! (`0..m`) and `j` along y (`0..n`). Storage is row-major in `j`, so the
//! flat index of a node is `j * m + i`. Formulas written with one-based
//! indices elsewhere in the crate map `K(i, j)` to `field.get(i - 1, j - 1)`.

use std::fmt;
use std::io::{BufRead, Write};
use std::marker::PhantomData;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest node count per direction; the slope prior compares three
/// consecutive slopes and needs four nodes.
pub const MIN_NODES: usize = 4;

/// Uniform rectangular mesh on `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    m: usize,
    n: usize,
    lx: f64,
    ly: f64,
}

impl MeshSpec {
    pub fn new(m: usize, n: usize, lx: f64, ly: f64) -> Result<Self> {
        if m < MIN_NODES || n < MIN_NODES {
            return Err(Error::InvalidMesh(format!(
                "need at least {MIN_NODES} nodes per direction, got {m}x{n}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "fin dimensions must be positive, got Lx={lx}, Ly={ly}"
            )));
        }
        Ok(Self { m, n, lx, ly })
    }

    /// Node count along x.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Node count along y.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn dx(&self) -> f64 {
        self.lx / (self.m - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / (self.n - 1) as f64
    }

    /// x-coordinate of column `i`; the last column sits exactly on `lx`.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.m {
            self.lx
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.n {
            self.ly
        } else {
            j as f64 * self.dy()
        }
    }

    pub fn node_count(&self) -> usize {
        self.m * self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.m && j < self.n);
        j * self.m + i
    }

    /// Inverse of [`MeshSpec::index`].
    #[inline]
    pub fn node(&self, k: usize) -> (usize, usize) {
        (k % self.m, k / self.m)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.m || j + 1 == self.n
    }

    /// Length of a boundary trace, `2(m + n) - 4`.
    pub fn boundary_len(&self) -> usize {
        2 * (self.m + self.n) - 4
    }

    /// Boundary nodes in canonical order: counterclockwise from the origin.
    ///
    /// Bottom row left to right, right column upward, top row right to left,
    /// left column downward. Every corner appears once.
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        let (m, n) = (self.m, self.n);
        let mut nodes = Vec::with_capacity(self.boundary_len());
        nodes.extend((0..m).map(|i| (i, 0)));
        nodes.extend((1..n).map(|j| (m - 1, j)));
        nodes.extend((0..m - 1).rev().map(|i| (i, n - 1)));
        nodes.extend((1..n - 1).rev().map(|j| (0, j)));
        nodes
    }

    pub fn ensure_same(&self, other: &MeshSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "mesh {self} does not match mesh {other}"
            )))
        }
    }
}

impl fmt::Display for MeshSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} on [0,{}]x[0,{}]", self.m, self.n, self.lx, self.ly)
    }
}

/// Marker for conductivity-valued fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conductivity {}

/// Marker for temperature-valued fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Temperature {}

/// A scalar value at every mesh node.
#[derive(Debug)]
pub struct Field<Kind> {
    mesh: MeshSpec,
    values: Vec<f64>,
    _kind: PhantomData<Kind>,
}

pub type ConductivityField = Field<Conductivity>;
pub type TemperatureField = Field<Temperature>;

impl<Kind> Clone for Field<Kind> {
    fn clone(&self) -> Self {
        Self {
            mesh: self.mesh,
            values: self.values.clone(),
            _kind: PhantomData,
        }
    }

    fn clone_from(&mut self, source: &Self) {
        self.mesh = source.mesh;
        self.values.clone_from(&source.values);
    }
}

impl<Kind> PartialEq for Field<Kind> {
    fn eq(&self, other: &Self) -> bool {
        self.mesh == other.mesh && self.values == other.values
    }
}

impl<Kind> Field<Kind> {
    /// Wraps `values` (flat, `j * m + i`). Entries must be finite.
    pub fn from_values(mesh: MeshSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {} mesh",
                values.len(),
                mesh
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = mesh.node(k);
            return Err(Error::InvalidParameter {
                name: "field",
                reason: format!("non-finite value at node ({i}, {j})"),
            });
        }
        Ok(Self::from_values_unchecked(mesh, values))
    }

    pub(crate) fn from_values_unchecked(mesh: MeshSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), mesh.node_count());
        Self {
            mesh,
            values,
            _kind: PhantomData,
        }
    }

    /// Evaluates `f(i, j)` at every node.
    pub fn from_fn(mesh: MeshSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.node_count());
        for j in 0..mesh.n() {
            for i in 0..mesh.m() {
                values.push(f(i, j));
            }
        }
        Self::from_values_unchecked(mesh, values)
    }

    pub fn filled(mesh: MeshSpec, value: f64) -> Self {
        Self::from_values_unchecked(mesh, vec![value; mesh.node_count()])
    }

    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Node holding the smallest value (first one on ties).
    pub fn argmin(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, &v)| {
                if v < best.1 {
                    (k, v)
                } else {
                    best
                }
            })
            .0;
        self.mesh.node(k)
    }

    /// Writes the grid CSV: a `m,n,Lx,Ly` line followed by `n` rows of `m`
    /// values, row `j = 0` first.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mesh = &self.mesh;
        writeln!(out, "{},{},{},{}", mesh.m, mesh.n, mesh.lx, mesh.ly)?;
        for row in self.values.chunks(mesh.m) {
            write_csv_row(&mut out, row)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field file".into()))??;
        let dims: Vec<&str> = header.trim().split(',').collect();
        if dims.len() != 4 {
            return Err(Error::Parse(format!("bad field header {header:?}")));
        }
        let m = parse_usize(dims[0])?;
        let n = parse_usize(dims[1])?;
        let mesh = MeshSpec::new(m, n, parse_f64(dims[2])?, parse_f64(dims[3])?)?;
        let mut values = Vec::with_capacity(mesh.node_count());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for cell in line.trim().split(',') {
                values.push(parse_f64(cell)?);
            }
            if values.len() - before != m {
                return Err(Error::Parse(format!(
                    "row {row} has {} values, expected {m}",
                    values.len() - before
                )));
            }
        }
        Self::from_values(mesh, values)
    }
}

impl<Kind> Index<(usize, usize)> for Field<Kind> {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[self.mesh.index(i, j)]
    }
}

impl ConductivityField {
    /// Conductivity with every entry above `floor`.
    pub fn new(mesh: MeshSpec, values: Vec<f64>, floor: f64) -> Result<Self> {
        let field = Self::from_values(mesh, values)?;
        if let Some(k) = field.values.iter().position(|&v| v <= floor) {
            let (i, j) = mesh.node(k);
            return Err(Error::InvalidParameter {
                name: "conductivity",
                reason: format!(
                    "value {} at node ({i}, {j}) is not above the floor {floor}",
                    field.values[k]
                ),
            });
        }
        Ok(field)
    }

    /// Constant conductivity `c`; `c` must exceed `floor`.
    pub fn constant(mesh: MeshSpec, c: f64, floor: f64) -> Result<Self> {
        if !(c.is_finite() && c > floor) {
            return Err(Error::InvalidParameter {
                name: "conductivity",
                reason: format!("constant value {c} must exceed the floor {floor}"),
            });
        }
        Ok(Self::filled(mesh, c))
    }

    pub fn all_above(&self, floor: f64) -> bool {
        self.values.iter().all(|&v| v > floor)
    }
}

/// Boundary temperatures in canonical counterclockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    values: Vec<f64>,
}

/// Header line of the single-column trace CSV.
pub const TRACE_CSV_HEADER: &str = "boundary_ccw_from_origin";

impl BoundaryTrace {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trace file".into()))??;
        if header.trim() != TRACE_CSV_HEADER {
            return Err(Error::Parse(format!("unexpected trace header {header:?}")));
        }
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                values.push(parse_f64(&line)?);
            }
        }
        Ok(Self::new(values))
    }
}

/// Restricts a field to its boundary in canonical order.
pub fn extract_boundary<Kind>(field: &Field<Kind>) -> BoundaryTrace {
    let mut trace = BoundaryTrace::zeros(field.mesh.boundary_len());
    extract_boundary_into(field.mesh(), field.values(), trace.values_mut());
    trace
}

/// Allocation-free boundary restriction of raw node values.
pub(crate) fn extract_boundary_into(mesh: &MeshSpec, values: &[f64], out: &mut [f64]) {
    let (m, n) = (mesh.m, mesh.n);
    debug_assert_eq!(out.len(), mesh.boundary_len());
    let mut k = 0;
    let mut push = |v: f64| {
        out[k] = v;
        k += 1;
    };
    for &v in &values[..m] {
        push(v);
    }
    for j in 1..n {
        push(values[j * m + m - 1]);
    }
    for i in (0..m - 1).rev() {
        push(values[(n - 1) * m + i]);
    }
    for j in (1..n - 1).rev() {
        push(values[j * m]);
    }
}

fn write_csv_row<W: Write>(out: &mut W, row: &[f64]) -> Result<()> {
    for (k, v) in row.iter().enumerate() {
        if k > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{v}")?;
    }
    out.write_all(b"\n")?;
    Ok(())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a node count: {s:?}")))
}
