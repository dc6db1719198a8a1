//! Square band matrix with equal lower and upper bandwidth, factored in
//! place by Gaussian elimination without pivoting.
//!
//! The fin discretization is strictly row diagonally dominant, which keeps
//! every Schur complement dominant as well, so no pivoting is needed and the
//! factors never leave the band.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    dim: usize,
    width: usize,
    /// Row-major band: row `r` stores columns `r - width ..= r + width`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(dim: usize, width: usize) -> Self {
        Self {
            dim,
            width,
            data: vec![0.0; dim * (2 * width + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Half-bandwidth: entries with `|r - c| > width` are structurally zero.
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        debug_assert!(r.abs_diff(c) <= self.width);
        r * (2 * self.width + 1) + c + self.width - r
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if r.abs_diff(c) > self.width || r >= self.dim || c >= self.dim {
            0.0
        } else {
            self.data[self.offset(r, c)]
        }
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        let k = self.offset(r, c);
        self.data[k] = value;
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    pub fn copy_from(&mut self, other: &BandMatrix) {
        debug_assert_eq!((self.dim, self.width), (other.dim, other.width));
        self.data.copy_from_slice(&other.data);
    }

    /// Nonzero band entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = r.saturating_sub(self.width);
        let hi = (r + self.width).min(self.dim - 1);
        (lo..=hi).map(move |c| (c, self.data[self.offset(r, c)]))
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.row(r).map(|(c, a)| a * x[c]).sum();
        }
    }

    /// Overwrites the matrix with its LU factors (unit lower triangle stored
    /// below the diagonal).
    pub fn factor_in_place(&mut self) -> Result<()> {
        let w = self.width;
        let stride = 2 * w + 1;
        let n = self.dim;
        for k in 0..n {
            let pivot_at = k * stride + w;
            let pivot = self.data[pivot_at];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem { row: k });
            }
            let last = (k + w).min(n - 1);
            let cols = last - k;
            for r in k + 1..=last {
                // column k of row r sits at r*stride + w - (r - k)
                let lk = r * stride + w + k - r;
                let factor = self.data[lk] / pivot;
                self.data[lk] = factor;
                if factor == 0.0 {
                    continue;
                }
                let (upper, lower) = self.data.split_at_mut(r * stride);
                let src = &upper[pivot_at + 1..pivot_at + 1 + cols];
                let dst_start = w + k + 1 - r;
                let dst = &mut lower[dst_start..dst_start + cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= factor * s;
                }
            }
        }
        Ok(())
    }

    /// Solves with factors from [`BandMatrix::factor_in_place`], overwriting `rhs`.
    pub fn solve_factored(&self, rhs: &mut [f64]) {
        let w = self.width;
        let stride = 2 * w + 1;
        let n = self.dim;
        for r in 0..n {
            let lo = r.saturating_sub(w);
            let base = r * stride + w - r;
            let row = &self.data[base + lo..base + r];
            rhs[r] = row.iter().zip(&rhs[lo..r]).fold(rhs[r], |acc, (a, x)| acc - a * x);
        }
        for r in (0..n).rev() {
            let hi = (r + w).min(n - 1);
            let base = r * stride + w - r;
            let row = &self.data[base + r + 1..=base + hi];
            let acc = row.iter().zip(&rhs[r + 1..=hi]).fold(rhs[r], |acc, (a, x)| acc - a * x);
            rhs[r] = acc / self.data[base + r];
        }
    }
}
