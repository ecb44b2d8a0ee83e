//! Dense complex operator matrices, 3×3 block arrangements of them, and the
//! Hermitian eigensolver every spectrum claim goes through.
//!
//! Storage is dense and row-major. Products skip exact-zero entries of the
//! left factor, which keeps the banded ladder and finite-difference operators
//! cheap without introducing a separate sparse format.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("entries length {len} does not match dim {dim} (expected {expected})")]
    BadEntryCount {
        dim: usize,
        len: usize,
        expected: usize,
    },
    #[error("matrix is not Hermitian: ||M - M^dag||_F = {asymmetry:e} > {tol:e}")]
    NotHermitian { asymmetry: f64, tol: f64 },
    #[error("matrix is not unitary: ||U U^dag - I||_F = {deviation:e} > {tol:e}")]
    NotUnitary { deviation: f64, tol: f64 },
    #[error("block layout mismatch: {0}")]
    BlockLayout(String),
    #[error("dimension must be positive")]
    EmptyDimension,
}

/// Square complex matrix acting on a `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        if entries.len() != dim * dim {
            return Err(LinalgError::BadEntryCount {
                dim,
                len: entries.len(),
                expected: dim * dim,
            });
        }
        Ok(Self { dim, entries })
    }

    /// Builds a matrix from nested rows; panics on ragged input (test helper).
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "ragged row");
            entries.extend_from_slice(row);
        }
        Self { dim, entries }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Single matrix unit |row⟩⟨col|.
    pub fn unit(dim: usize, row: usize, col: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(row, col)] = ONE;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn check_dims(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dims(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dims(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn try_matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_dims(other)?;
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &self.entries[i * n..(i + 1) * n];
            let acc = &mut out[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let other_row = &other.entries[k * n..(k + 1) * n];
                for (c, &b) in acc.iter_mut().zip(other_row) {
                    *c += a * b;
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: out,
        })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "vector length mismatch");
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.entries[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&z| z == ZERO)
    }

    /// ‖M − M†‖_F.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.entries[i * n + j] - self.entries[j * n + i].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// ‖M M† − I‖_F.
    pub fn unitarity_defect(&self) -> f64 {
        (&(self * &self.adjoint()) - &Self::identity(self.dim)).frobenius_norm()
    }

    /// Leading `keep × keep` principal submatrix.
    pub fn leading(&self, keep: usize) -> Self {
        assert!(keep <= self.dim && keep > 0);
        let n = self.dim;
        let mut out = Self::zeros(keep);
        for i in 0..keep {
            out.entries[i * keep..(i + 1) * keep]
                .copy_from_slice(&self.entries[i * n..i * n + keep]);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

impl Index<(usize, usize)> for OperatorMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for OperatorMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

// Operator impls panic on dimension mismatch; the checked forms are `try_*`
// and the free functions below.
impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_matmul(rhs).expect("matmul dimension mismatch")
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_add(rhs).expect("add dimension mismatch")
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_sub(rhs).expect("sub dimension mismatch")
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        self.scale_real(-1.0)
    }
}

pub fn matmul(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix, LinalgError> {
    a.try_matmul(b)
}

/// AB − BA.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix, LinalgError> {
    a.try_matmul(b)?.try_sub(&b.try_matmul(a)?)
}

/// AB + BA.
pub fn anticommutator(
    a: &OperatorMatrix,
    b: &OperatorMatrix,
) -> Result<OperatorMatrix, LinalgError> {
    a.try_matmul(b)?.try_add(&b.try_matmul(a)?)
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: OperatorMatrix,
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending with
/// stable tie order. Input asymmetry above `tol` is rejected.
pub fn hermitian_eigs(m: &OperatorMatrix, tol: f64) -> Result<HermitianEigen, LinalgError> {
    let asymmetry = m.hermiticity_defect();
    if asymmetry > tol {
        return Err(LinalgError::NotHermitian { asymmetry, tol });
    }
    let n = m.dim();
    let sym = {
        let a = m.to_nalgebra();
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    };
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("NaN eigenvalue")
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = OperatorMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only; see [`hermitian_eigs`].
pub fn hermitian_eigenvalues(m: &OperatorMatrix, tol: f64) -> Result<Vec<f64>, LinalgError> {
    hermitian_eigs(m, tol).map(|e| e.values)
}

/// Square arrangement of `blocks × blocks` operator blocks of equal inner
/// dimension. `None` marks a structurally zero block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    blocks: usize,
    inner_dim: usize,
    cells: Vec<Option<OperatorMatrix>>,
}

impl BlockOperator {
    pub fn zeros(blocks: usize, inner_dim: usize) -> Self {
        Self {
            blocks,
            inner_dim,
            cells: vec![None; blocks * blocks],
        }
    }

    pub fn identity(blocks: usize, inner_dim: usize) -> Self {
        let mut b = Self::zeros(blocks, inner_dim);
        for i in 0..blocks {
            b.set(i, i, OperatorMatrix::identity(inner_dim));
        }
        b
    }

    pub fn diagonal(diag: Vec<OperatorMatrix>) -> Result<Self, LinalgError> {
        let inner = diag.first().ok_or(LinalgError::EmptyDimension)?.dim();
        let mut b = Self::zeros(diag.len(), inner);
        for (i, m) in diag.into_iter().enumerate() {
            if m.dim() != inner {
                return Err(LinalgError::DimensionMismatch {
                    left: inner,
                    right: m.dim(),
                });
            }
            b.set(i, i, m);
        }
        Ok(b)
    }

    /// `small ⊗ op`: block (i, j) is `small[i, j] · op`.
    pub fn kron(small: &OperatorMatrix, op: &OperatorMatrix) -> Self {
        let nb = small.dim();
        let mut b = Self::zeros(nb, op.dim());
        for i in 0..nb {
            for j in 0..nb {
                let s = small[(i, j)];
                if s != ZERO {
                    b.set(i, j, op.scale(s));
                }
            }
        }
        b
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn inner_dim(&self) -> usize {
        self.inner_dim
    }

    pub fn total_dim(&self) -> usize {
        self.blocks * self.inner_dim
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&OperatorMatrix> {
        self.cells[i * self.blocks + j].as_ref()
    }

    pub fn block_or_zero(&self, i: usize, j: usize) -> OperatorMatrix {
        self.block(i, j)
            .cloned()
            .unwrap_or_else(|| OperatorMatrix::zeros(self.inner_dim))
    }

    /// Stores `m` at (i, j); panics if its dimension differs from `inner_dim`.
    pub fn set(&mut self, i: usize, j: usize, m: OperatorMatrix) {
        assert_eq!(m.dim(), self.inner_dim, "block dimension mismatch");
        self.cells[i * self.blocks + j] = Some(m);
    }

    pub fn clear(&mut self, i: usize, j: usize) {
        self.cells[i * self.blocks + j] = None;
    }

    fn check_layout(&self, other: &Self) -> Result<(), LinalgError> {
        if self.blocks != other.blocks || self.inner_dim != other.inner_dim {
            return Err(LinalgError::BlockLayout(format!(
                "{}x{} blocks of dim {} vs {}x{} blocks of dim {}",
                self.blocks,
                self.blocks,
                self.inner_dim,
                other.blocks,
                other.blocks,
                other.inner_dim
            )));
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        let nb = self.blocks;
        let mut out = Self::zeros(nb, self.inner_dim);
        for i in 0..nb {
            for j in 0..nb {
                if let Some(m) = self.block(i, j) {
                    out.set(j, i, m.adjoint());
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            blocks: self.blocks,
            inner_dim: self.inner_dim,
            cells: self
                .cells
                .iter()
                .map(|c| c.as_ref().map(|m| m.scale(s)))
                .collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self, LinalgError> {
        self.check_layout(other)?;
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| match (a, b) {
                (None, None) => None,
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.scale_real(sign)),
                (Some(a), Some(b)) => Some(a + &b.scale_real(sign)),
            })
            .collect();
        Ok(Self {
            blocks: self.blocks,
            inner_dim: self.inner_dim,
            cells,
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.combine(other, 1.0)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.combine(other, -1.0)
    }

    /// Block product; structurally zero blocks are skipped and products of
    /// all-zero sums stay structurally zero.
    pub fn try_matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_layout(other)?;
        let nb = self.blocks;
        let mut out = Self::zeros(nb, self.inner_dim);
        for i in 0..nb {
            for j in 0..nb {
                let mut acc: Option<OperatorMatrix> = None;
                for k in 0..nb {
                    if let (Some(a), Some(b)) = (self.block(i, k), other.block(k, j)) {
                        let p = a * b;
                        acc = Some(match acc {
                            None => p,
                            Some(s) => &s + &p,
                        });
                    }
                }
                if let Some(m) = acc {
                    out.set(i, j, m);
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, LinalgError> {
        self.try_matmul(other)?.try_sub(&other.try_matmul(self)?)
    }

    /// Action on a block vector (one inner vector per block component).
    pub fn apply(&self, v: &[Vec<C64>]) -> Vec<Vec<C64>> {
        assert_eq!(v.len(), self.blocks, "block vector length mismatch");
        (0..self.blocks)
            .map(|i| {
                let mut acc = vec![ZERO; self.inner_dim];
                for (j, vj) in v.iter().enumerate() {
                    if let Some(m) = self.block(i, j) {
                        for (a, b) in acc.iter_mut().zip(m.apply(vj)) {
                            *a += b;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn flatten(&self) -> OperatorMatrix {
        let d = self.inner_dim;
        let mut out = OperatorMatrix::zeros(self.total_dim());
        for bi in 0..self.blocks {
            for bj in 0..self.blocks {
                if let Some(m) = self.block(bi, bj) {
                    for i in 0..d {
                        for j in 0..d {
                            out[(bi * d + i, bj * d + j)] = m[(i, j)];
                        }
                    }
                }
            }
        }
        out
    }

    /// Splits a flat matrix into blocks; all-zero blocks become structural zeros.
    pub fn unflatten(blocks: usize, flat: &OperatorMatrix) -> Result<Self, LinalgError> {
        if blocks == 0 || !flat.dim().is_multiple_of(blocks) {
            return Err(LinalgError::BlockLayout(format!(
                "dim {} not divisible into {} blocks",
                flat.dim(),
                blocks
            )));
        }
        let d = flat.dim() / blocks;
        let mut out = Self::zeros(blocks, d);
        for bi in 0..blocks {
            for bj in 0..blocks {
                let mut m = OperatorMatrix::zeros(d);
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] = flat[(bi * d + i, bj * d + j)];
                    }
                }
                if !m.is_zero() {
                    out.set(bi, bj, m);
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .map(|m| m.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .map(OperatorMatrix::max_abs)
            .fold(0.0, f64::max)
    }

    /// True when every block is structurally absent (not merely numerically zero).
    pub fn is_structurally_zero(&self) -> bool {
        self.cells.iter().all(Option::is_none)
    }

    /// Frobenius norm of all off-diagonal blocks.
    pub fn offdiag_norm(&self) -> f64 {
        let nb = self.blocks;
        let mut acc = 0.0;
        for i in 0..nb {
            for j in 0..nb {
                if i != j {
                    if let Some(m) = self.block(i, j) {
                        acc += m.frobenius_norm().powi(2);
                    }
                }
            }
        }
        acc.sqrt()
    }

    pub fn map_blocks(&self, f: impl Fn(&OperatorMatrix) -> OperatorMatrix) -> Self {
        Self {
            blocks: self.blocks,
            inner_dim: self.inner_dim,
            cells: self.cells.iter().map(|c| c.as_ref().map(&f)).collect(),
        }
    }

    /// Connected components of the block graph (i ~ j when block (i, j) or
    /// (j, i) is present), each sorted ascending.
    pub fn block_components(&self) -> Vec<Vec<usize>> {
        let nb = self.blocks;
        let mut label: Vec<usize> = (0..nb).collect();
        fn find(label: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while label[r] != r {
                r = label[r];
            }
            label[x] = r;
            r
        }
        for i in 0..nb {
            for j in 0..nb {
                if i != j && self.block(i, j).is_some_and(|m| !m.is_zero()) {
                    let (a, b) = (find(&mut label, i), find(&mut label, j));
                    if a != b {
                        label[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for i in 0..nb {
            let root = find(&mut label, i);
            match comps.iter_mut().find(|c| c[0] == root) {
                Some(c) => c.push(i),
                None => comps.push(vec![i]),
            }
        }
        comps
    }

    /// Sub-arrangement restricted to the given block indices.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let mut out = Self::zeros(indices.len(), self.inner_dim);
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                if let Some(m) = self.block(i, j) {
                    out.set(a, b, m.clone());
                }
            }
        }
        out
    }
}

impl Mul for &BlockOperator {
    type Output = BlockOperator;
    fn mul(self, rhs: &BlockOperator) -> BlockOperator {
        self.try_matmul(rhs).expect("block layout mismatch")
    }
}

impl Add for &BlockOperator {
    type Output = BlockOperator;
    fn add(self, rhs: &BlockOperator) -> BlockOperator {
        self.try_add(rhs).expect("block layout mismatch")
    }
}

impl Sub for &BlockOperator {
    type Output = BlockOperator;
    fn sub(self, rhs: &BlockOperator) -> BlockOperator {
        self.try_sub(rhs).expect("block layout mismatch")
    }
}

/// U M U† after checking ‖UU† − I‖_F ≤ tol on the flattened U.
pub fn conjugate_by_unitary(
    m: &BlockOperator,
    u: &BlockOperator,
    tol: f64,
) -> Result<BlockOperator, LinalgError> {
    m.check_layout(u)?;
    let deviation =
        (&(u * &u.adjoint()) - &BlockOperator::identity(u.blocks, u.inner_dim)).frobenius_norm();
    if deviation > tol {
        return Err(LinalgError::NotUnitary { deviation, tol });
    }
    Ok(&(u * m) * &u.adjoint())
}

/// Promotes a scalar `blocks × blocks` unitary to act blockwise (U ⊗ I).
pub fn lift_scalar(u: &OperatorMatrix, inner_dim: usize) -> BlockOperator {
    BlockOperator::kron(u, &OperatorMatrix::identity(inner_dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_product() {
        let m = OperatorMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.5, 0.0)],
            vec![c(0.0, -1.0), c(3.0, 0.0)],
        ]);
        assert_eq!(&OperatorMatrix::identity(2) * &m, m);
    }

    #[test]
    fn diagonal_product() {
        let a = OperatorMatrix::from_real_diagonal(&[1.0, 2.0]);
        let b = OperatorMatrix::from_real_diagonal(&[3.0, 4.0]);
        assert_eq!(&a * &b, OperatorMatrix::from_real_diagonal(&[3.0, 8.0]));
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = OperatorMatrix::identity(2);
        let b = OperatorMatrix::identity(3);
        assert!(matches!(
            matmul(&a, &b),
            Err(LinalgError::DimensionMismatch { left: 2, right: 3 })
        ));
        assert!(commutator(&a, &b).is_err());
    }

    #[test]
    fn commutator_with_offdiag() {
        let d = OperatorMatrix::from_real_diagonal(&[1.0, 2.0]);
        let x = OperatorMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let k = commutator(&d, &x).unwrap();
        // [D, X]_{ij} = (d_i - d_j) X_{ij}
        let expected = OperatorMatrix::from_real_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        assert_eq!(k, expected);
        assert!(commutator(&x, &x).unwrap().is_zero());
    }

    #[test]
    fn anticommutator_of_pauli_x_with_itself() {
        let x = OperatorMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(
            anticommutator(&x, &x).unwrap(),
            OperatorMatrix::from_real_diagonal(&[2.0, 2.0])
        );
    }

    #[test]
    fn eigs_of_diagonal_and_pauli() {
        let d = OperatorMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let e = hermitian_eigs(&d, 1e-12).unwrap();
        assert_eq!(e.values.len(), 3);
        for (v, want) in e.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - want).abs() < 1e-14);
        }
        let x = OperatorMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e = hermitian_eigenvalues(&x, 1e-12).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigs_reconstruct_complex_hermitian() {
        let m = OperatorMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)],
            vec![c(0.0, -1.0), c(-1.0, 0.0), c(0.5, 0.0)],
            vec![c(1.0, -1.0), c(0.5, 0.0), c(0.0, 0.0)],
        ]);
        let tol = 1e-12;
        let e = hermitian_eigs(&m, tol).unwrap();
        let lambda = OperatorMatrix::from_real_diagonal(&e.values);
        let rebuilt = &(&e.vectors * &lambda) * &e.vectors.adjoint();
        assert!((&m - &rebuilt).frobenius_norm() <= 10.0 * tol * m.frobenius_norm());
        assert!(e.vectors.unitarity_defect() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected_with_norm() {
        let m = OperatorMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        match hermitian_eigs(&m, 1e-12) {
            Err(LinalgError::NotHermitian { asymmetry, .. }) => {
                assert!((asymmetry - 2f64.sqrt()).abs() < 1e-14)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flatten_round_trip_and_structural_zeros() {
        let mut b = BlockOperator::zeros(3, 2);
        b.set(
            0,
            2,
            OperatorMatrix::from_real_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]),
        );
        b.set(1, 1, OperatorMatrix::identity(2));
        let back = BlockOperator::unflatten(3, &b.flatten()).unwrap();
        assert_eq!(back, b);
        assert!(back.block(2, 0).is_none());
    }

    #[test]
    fn block_product_matches_flat_product() {
        let mut a = BlockOperator::zeros(3, 2);
        a.set(
            0,
            1,
            OperatorMatrix::from_rows(&[
                vec![c(1.0, 1.0), c(0.0, 0.0)],
                vec![c(2.0, 0.0), c(0.0, -1.0)],
            ]),
        );
        a.set(
            2,
            2,
            OperatorMatrix::from_real_rows(&[vec![1.0, 5.0], vec![0.0, 1.0]]),
        );
        let b = a.adjoint();
        let blockwise = (&a * &b).flatten();
        let flat = &a.flatten() * &b.flatten();
        assert!(blockwise.max_abs_diff(&flat) < 1e-15);
    }

    #[test]
    fn permutation_conjugation_swaps_blocks() {
        let u2 = OperatorMatrix::from_real_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let a = OperatorMatrix::from_real_diagonal(&[1.0, 2.0]);
        let b = OperatorMatrix::from_real_diagonal(&[3.0, 4.0]);
        let cc = OperatorMatrix::from_real_diagonal(&[5.0, 6.0]);
        let m = BlockOperator::diagonal(vec![a.clone(), b.clone(), cc.clone()]).unwrap();
        let out = conjugate_by_unitary(&m, &lift_scalar(&u2, 2), 1e-14).unwrap();
        assert_eq!(out.block(0, 0), Some(&a));
        assert_eq!(out.block(1, 1), Some(&cc));
        assert_eq!(out.block(2, 2), Some(&b));
        assert_eq!(out.offdiag_norm(), 0.0);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = BlockOperator::identity(3, 2);
        let u = lift_scalar(&OperatorMatrix::from_real_diagonal(&[1.0, 2.0, 1.0]), 2);
        assert!(matches!(
            conjugate_by_unitary(&m, &u, 1e-12),
            Err(LinalgError::NotUnitary { .. })
        ));
    }

    #[test]
    fn components_of_block_graph() {
        let mut b = BlockOperator::identity(3, 1);
        b.set(0, 1, OperatorMatrix::identity(1));
        assert_eq!(b.block_components(), vec![vec![0, 1], vec![2]]);
    }
}
