use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::linalg::C64;

/// Default dimension cap for dense eigendecompositions.
pub const DEFAULT_DENSE_LIMIT: usize = 4000;

/// Full eigendecomposition `A = Q Λ Qᵀ` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

pub fn dense_spectrum(op: &FockOperator, limit: usize) -> Result<DenseSpectrum> {
    let n = op.dim();
    if n > limit {
        return Err(Error::DenseLimit { dim: n, limit });
    }
    if !op.is_symmetric() {
        return Err(Error::Precondition("dense spectrum needs a symmetric operator".into()));
    }
    Ok(DenseSpectrum::from_matrix(&op.to_dense()))
}

/// Dense kernels run single-threaded so results do not depend on the
/// thread count.
pub(crate) fn pin_dense_parallelism() {
    static PIN: std::sync::Once = std::sync::Once::new();
    PIN.call_once(|| faer::set_global_parallelism(faer::Parallelism::None));
}

impl DenseSpectrum {
    pub fn from_matrix(m: &Mat<f64>) -> Self {
        pin_dense_parallelism();
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: Mat::zeros(0, 0),
            };
        }
        let eig = m.selfadjoint_eigendecomposition(Side::Lower);
        let s = eig.s().column_vector();
        let values: Vec<f64> = (0..n).map(|i| s.read(i)).collect();
        Self {
            values,
            vectors: eig.u().to_owned(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|r| self.vectors.read(r, i)).collect()
    }

    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    pub fn ground(&self) -> (f64, Vec<f64>) {
        (self.values[0], self.vector(0))
    }

    pub fn gap(&self) -> f64 {
        if self.dim() < 2 {
            f64::INFINITY
        } else {
            self.values[1] - self.values[0]
        }
    }

    /// `Q diag(f(λ)) Qᵀ` applied to each column of `xs` (real and imaginary
    /// parts handled as separate real columns).
    pub fn apply_functions(&self, fs: &[&dyn Fn(f64) -> C64], xs: &[&[C64]]) -> Vec<Vec<C64>> {
        assert_eq!(fs.len(), xs.len());
        let n = self.dim();
        let k = xs.len();
        let stacked = Mat::<f64>::from_fn(n, 2 * k, |r, c| {
            let z = xs[c / 2][r];
            if c % 2 == 0 {
                z.re
            } else {
                z.im
            }
        });
        let coeffs = self.vectors.transpose() * &stacked;
        let mut scaled = Mat::<f64>::zeros(n, 2 * k);
        for c in 0..k {
            for r in 0..n {
                let w = C64::new(coeffs.read(r, 2 * c), coeffs.read(r, 2 * c + 1)) * fs[c](self.values[r]);
                scaled.write(r, 2 * c, w.re);
                scaled.write(r, 2 * c + 1, w.im);
            }
        }
        let out = &self.vectors * &scaled;
        (0..k)
            .map(|c| (0..n).map(|r| C64::new(out.read(r, 2 * c), out.read(r, 2 * c + 1))).collect())
            .collect()
    }

    /// Eigenbasis coefficients `Qᵀ x`.
    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let col = Mat::<f64>::from_fn(n, 1, |r, _| x[r]);
        let c = self.vectors.transpose() * &col;
        (0..n).map(|r| c.read(r, 0)).collect()
    }

    /// Real spectral function `Q diag(f(λ)) Qᵀ x`.
    pub fn apply_real(&self, f: impl Fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let col = Mat::<f64>::from_fn(n, 1, |r, _| x[r]);
        let mut c = self.vectors.transpose() * &col;
        for r in 0..n {
            c.write(r, 0, c.read(r, 0) * f(self.values[r]));
        }
        let out = &self.vectors * &c;
        (0..n).map(|r| out.read(r, 0)).collect()
    }

    /// Orthogonal projector onto the eigenvalues with `inside(λ)`.
    pub fn spectral_projector_apply(&self, inside: impl Fn(f64) -> bool, x: &[f64]) -> Vec<f64> {
        self.apply_real(|l| if inside(l) { 1.0 } else { 0.0 }, x)
    }

    pub fn count_inside(&self, inside: impl Fn(f64) -> bool) -> usize {
        self.values.iter().filter(|&&l| inside(l)).count()
    }
}
