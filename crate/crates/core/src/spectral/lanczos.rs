use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::linalg;

/// Gap below which a ground state is reported as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Residual target `‖A ψ − E ψ‖` for the ground pair.
    pub tol: f64,
    /// Residual target for the excited Ritz pairs used for the gap.
    pub excited_tol: f64,
    pub max_iter: usize,
    /// Number of lowest pairs tracked.
    pub wanted: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            excited_tol: 1e-8,
            max_iter: 1500,
            wanted: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Lanczos,
    Dense,
}

#[derive(Debug, Clone)]
pub struct GroundStateRecord {
    pub energy: f64,
    pub vector: Vec<f64>,
    /// `E_1 − E_0`; infinite on a one-dimensional space.
    pub gap: f64,
    pub residual: f64,
    pub method: SolverMethod,
    pub degenerate: bool,
    /// Lowest Ritz values, ascending.
    pub lowest: Vec<f64>,
    pub iterations: usize,
}

/// Ground pair by Lanczos with default options.
pub fn ground_state(op: &FockOperator, tol: f64) -> Result<GroundStateRecord> {
    ground_state_with(
        op,
        &LanczosOptions {
            tol,
            ..LanczosOptions::default()
        },
        None,
    )
}

/// Deterministic generic vector; `salt` selects independent copies.
pub fn generic_vector(n: usize, salt: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 + 1.0) * (0.618_033_988_749_895 + 0.1 * salt as f64) + 0.3 * salt as f64;
            1.0 + 0.5 * (x * 12.9898).sin() + 0.25 * (x * 78.233).cos()
        })
        .collect();
    let n = linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn orthogonalize(q: &[Vec<f64>], w: &mut [f64]) {
    for _ in 0..2 {
        for qi in q {
            let c = linalg::dot(qi, w);
            linalg::axpy(-c, qi, w);
        }
    }
}

/// Krylov basis with full reorthogonalization and the projected tridiagonal.
pub(crate) struct Krylov<'a> {
    op: &'a FockOperator,
    pub q: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    restarts: usize,
    scale: f64,
}

impl<'a> Krylov<'a> {
    pub fn new(op: &'a FockOperator, start: &[f64]) -> Result<Self> {
        let n0 = linalg::norm(start);
        if n0 == 0.0 || !n0.is_finite() {
            return Err(Error::Precondition("Krylov start vector must be nonzero and finite".into()));
        }
        Ok(Self {
            op,
            q: vec![linalg::scaled(1.0 / n0, start)],
            alpha: Vec::new(),
            beta: Vec::new(),
            restarts: 0,
            scale: op.norm_inf().max(f64::MIN_POSITIVE),
        })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    /// Adds one Lanczos step. Returns `false` once the space is exhausted.
    /// With `restart`, a breakdown continues from a fresh orthogonal vector,
    /// which recovers degenerate copies.
    pub fn step(&mut self, restart: bool) -> bool {
        let n = self.op.dim();
        let k = self.alpha.len();
        if k >= n || k >= self.q.len() {
            return false;
        }
        let qk = &self.q[k];
        let mut w = self.op.apply(qk);
        let a = linalg::dot(qk, &w);
        orthogonalize(&self.q, &mut w);
        self.alpha.push(a);
        let b = linalg::norm(&w);
        if k + 1 == n {
            self.beta.push(0.0);
            return true;
        }
        if b > 1e-13 * self.scale {
            self.beta.push(b);
            self.q.push(linalg::scaled(1.0 / b, &w));
            return true;
        }
        self.beta.push(0.0);
        if !restart {
            return true;
        }
        // Invariant subspace found; continue in its complement.
        loop {
            self.restarts += 1;
            let mut r = generic_vector(n, self.restarts);
            orthogonalize(&self.q, &mut r);
            let nr = linalg::norm(&r);
            if nr > 1e-8 {
                self.q.push(linalg::scaled(1.0 / nr, &r));
                return true;
            }
            if self.restarts > 8 {
                return true;
            }
        }
    }

    /// Eigenpairs of the projected tridiagonal, ascending.
    pub fn ritz(&self) -> (Vec<f64>, Mat<f64>) {
        let k = self.len();
        let t = Mat::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                self.alpha[i]
            } else if i + 1 == j {
                self.beta[i]
            } else if j + 1 == i {
                self.beta[j]
            } else {
                0.0
            }
        });
        let eig = t.selfadjoint_eigendecomposition(Side::Lower);
        let s = eig.s().column_vector();
        ((0..k).map(|i| s.read(i)).collect(), eig.u().to_owned())
    }

    pub fn last_beta(&self) -> f64 {
        *self.beta.last().unwrap_or(&0.0)
    }

    /// `Σ_i y_i q_i`.
    pub fn combine(&self, y: impl Fn(usize) -> f64) -> Vec<f64> {
        let n = self.op.dim();
        let mut out = vec![0.0; n];
        for i in 0..self.len() {
            linalg::axpy(y(i), &self.q[i], &mut out);
        }
        out
    }

    pub fn exhausted(&self) -> bool {
        self.len() >= self.op.dim()
    }
}

/// Lowest eigenpairs by Lanczos; see [`LanczosOptions`].
pub fn ground_state_with(
    op: &FockOperator,
    opts: &LanczosOptions,
    start: Option<&[f64]>,
) -> Result<GroundStateRecord> {
    if !op.is_symmetric() {
        return Err(Error::Precondition("Lanczos needs a symmetric operator".into()));
    }
    let n = op.dim();
    if n == 0 {
        return Err(Error::Precondition("empty operator".into()));
    }
    let start = match start {
        Some(s) if linalg::norm(s) > 0.0 => s.to_vec(),
        _ => generic_vector(n, 0),
    };
    let mut kr = Krylov::new(op, &start)?;
    let wanted = opts.wanted.max(2).min(n);
    let mut best = f64::INFINITY;
    let mut next_check = 4usize;
    loop {
        let progressed = kr.step(true);
        let k = kr.len();
        let done_space = kr.exhausted() || !progressed;
        if k >= next_check || done_space || k >= opts.max_iter {
            next_check = k + if k < 100 { 4 } else { 10 };
            let (theta, s) = kr.ritz();
            let beta = kr.last_beta();
            let res = |i: usize| (beta * s.read(k - 1, i)).abs();
            let have = wanted.min(k);
            let ground_ok = res(0) <= opts.tol;
            let excited_ok = (1..have).all(|i| res(i) <= opts.excited_tol.max(opts.tol));
            if (ground_ok && excited_ok && k >= wanted) || done_space {
                let psi = linalg::normalized(&kr.combine(|i| s.read(i, 0)));
                let hpsi = op.apply(&psi);
                let energy = linalg::dot(&psi, &hpsi);
                let mut r = hpsi;
                linalg::axpy(-energy, &psi, &mut r);
                let residual = linalg::norm(&r);
                best = best.min(residual);
                if residual <= opts.tol.max(1e-15 * kr.scale) || done_space {
                    let lowest: Vec<f64> = theta[..have].to_vec();
                    let gap = if lowest.len() > 1 { lowest[1] - lowest[0] } else { f64::INFINITY };
                    return Ok(GroundStateRecord {
                        energy,
                        vector: psi,
                        gap,
                        residual,
                        method: SolverMethod::Lanczos,
                        degenerate: gap < DEGENERACY_GAP,
                        lowest,
                        iterations: k,
                    });
                }
            } else {
                best = best.min(res(0));
            }
            if k >= opts.max_iter {
                return Err(Error::NoConvergence {
                    iterations: k,
                    residual: best,
                });
            }
        }
    }
}
