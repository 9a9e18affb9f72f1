use faer::Mat;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::fock::basis::Sector;
use crate::linalg::{self, C64};

/// Whether an operator is known to be symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    General,
}

/// Sparse real operator on a truncated Fock basis, stored in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    mat: CsMat<f64>,
    symmetry: Symmetry,
}

impl FockOperator {
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)], symmetry: Symmetry) -> Self {
        let mut tri = TriMat::with_capacity((dim, dim), triplets.len());
        for &(i, j, v) in triplets {
            tri.add_triplet(i, j, v);
        }
        let mut mat: CsMat<f64> = tri.to_csr();
        mat = prune(&mat);
        Self { mat, symmetry }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CsMat::zero((dim, dim)),
            symmetry: Symmetry::Symmetric,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CsMat::eye(dim),
            symmetry: Symmetry::Symmetric,
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let trip: Vec<_> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(values.len(), &trip, Symmetry::Symmetric)
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry == Symmetry::Symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j).copied().unwrap_or(0.0)
    }

    /// Visits every stored entry in row-major order.
    pub fn for_each(&self, mut f: impl FnMut(usize, usize, f64)) {
        for (i, row) in self.mat.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                f(i, j, v);
            }
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (i, row) in self.mat.outer_iterator().enumerate() {
            let mut acc = 0.0;
            for (j, &v) in row.iter() {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn apply_complex(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        for (i, row) in self.mat.outer_iterator().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, &v) in row.iter() {
                acc += x[j] * v;
            }
            y[i] = acc;
        }
        y
    }

    /// `⟨x, A x⟩ / ⟨x, x⟩`.
    pub fn expectation(&self, x: &[f64]) -> f64 {
        linalg::dot(x, &self.apply(x)) / linalg::dot(x, x)
    }

    fn combine(&self, other: &Self) -> Symmetry {
        if self.is_symmetric() && other.is_symmetric() {
            Symmetry::Symmetric
        } else {
            Symmetry::General
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(-1.0, other)
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator dimension mismatch");
        let scaled = other.mat.map(|v| s * v);
        let mat = &self.mat + &scaled;
        Self {
            mat: prune(&mat),
            symmetry: self.combine(other),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: self.mat.map(|v| s * v),
            symmetry: self.symmetry,
        }
    }

    /// `self + c · I`.
    pub fn shift(&self, c: f64) -> Self {
        if c == 0.0 {
            return self.clone();
        }
        self.add_scaled(c, &Self::identity(self.dim()))
    }

    /// Matrix product `self · other` on the truncated basis.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator dimension mismatch");
        let mat = &self.mat * &other.mat;
        Self {
            mat: prune(&mat),
            symmetry: Symmetry::General,
        }
    }

    /// `A²`, symmetric whenever `A` is.
    pub fn square(&self) -> Self {
        let mut sq = self.matmul(self);
        sq.symmetry = self.symmetry;
        sq
    }

    /// Symmetrized product `(AB + BA)/2`.
    pub fn anticommutator_half(&self, other: &Self) -> Self {
        let ab = self.matmul(other);
        let ba = other.matmul(self);
        let mut out = ab.add(&ba).scale(0.5);
        out.symmetry = self.combine(other);
        out
    }

    pub fn transpose(&self) -> Self {
        let t: CsMat<f64> = self.mat.transpose_view().to_other_storage();
        Self {
            mat: t,
            symmetry: self.symmetry,
        }
    }

    /// Marks the operator symmetric after verifying it entrywise.
    pub fn assert_symmetric(mut self, tol: f64) -> Result<Self> {
        let defect = self.symmetry_defect();
        if defect > tol {
            return Err(Error::Precondition(format!(
                "operator symmetry defect {defect:.3e} exceeds {tol:.1e}"
            )));
        }
        self.symmetry = Symmetry::Symmetric;
        Ok(self)
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = self.add_scaled(-1.0, other);
        d.mat.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum; bounds the spectral norm of a symmetric operator.
    pub fn norm_inf(&self) -> f64 {
        self.mat
            .outer_iterator()
            .map(|row| row.iter().map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Compression onto the sector's states.
    pub fn restrict(&self, sector: &Sector) -> Self {
        let mut trip = Vec::new();
        for (p, &s) in sector.indices().iter().enumerate() {
            if let Some(row) = self.mat.outer_view(s) {
                for (j, &v) in row.iter() {
                    if let Some(q) = sector.position(j) {
                        trip.push((p, q, v));
                    }
                }
            }
        }
        Self::from_triplets(sector.len(), &trip, self.symmetry)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::<f64>::zeros(n, n);
        self.for_each(|i, j, v| m.write(i, j, m.read(i, j) + v));
        m
    }

    pub fn from_dense(m: &Mat<f64>, symmetry: Symmetry) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m.read(i, j);
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), &trip, symmetry)
    }

    /// Coordinate-format text dump (`row col value`, 0-based).
    pub fn to_coo_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!("% {} {} {}\n", self.dim(), self.dim(), self.nnz());
        self.for_each(|i, j, v| {
            let _ = writeln!(out, "{i} {j} {v:.17e}");
        });
        out
    }
}

fn prune(mat: &CsMat<f64>) -> CsMat<f64> {
    if mat.data().iter().all(|v| *v != 0.0) {
        return mat.clone();
    }
    let mut tri = TriMat::new((mat.rows(), mat.cols()));
    for (i, row) in mat.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            if v != 0.0 {
                tri.add_triplet(i, j, v);
            }
        }
    }
    tri.to_csr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebra_on_small_matrices() {
        let a = FockOperator::from_triplets(2, &[(0, 1, 2.0), (1, 0, 2.0)], Symmetry::Symmetric);
        let sq = a.square();
        assert_eq!(sq.get(0, 0), 4.0);
        assert_eq!(sq.get(1, 1), 4.0);
        assert_eq!(sq.get(0, 1), 0.0);
        let d = a.shift(1.0);
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(a.apply(&[1.0, 0.0]), vec![0.0, 2.0]);
        assert_eq!(a.sub(&a).nnz(), 0);
    }

    #[test]
    fn transpose_and_symmetry_defect() {
        let a = FockOperator::from_triplets(2, &[(0, 1, 1.0)], Symmetry::General);
        assert_eq!(a.transpose().get(1, 0), 1.0);
        assert_eq!(a.symmetry_defect(), 1.0);
        assert!(a.assert_symmetric(1e-12).is_err());
    }
}
