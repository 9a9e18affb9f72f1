//! Operators of the regularized fiber model on a truncated Fock basis.
//!
//! Every vector-valued operator that appears (`P^f`, `A`, `β`, `Π`, `Γ`, the
//! slice operator `L`) has the same shape per component `i`:
//!
//! ```text
//! Σ_m n_i[m] b*_m b_m  +  Σ_m l_i[m] (b_m + b*_m)  +  c_i
//! ```
//!
//! [`VectorOp`] stores exactly those coefficients, which makes Weyl
//! conjugation a coefficient transformation. Quadratic expressions are
//! formed as products of the truncated matrices.

use std::ops::Range;

use crate::bogoliubov::{self, DisplacementField};
use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, FockOperator};
use crate::linalg;
use crate::modes::{CutoffSequence, ModeGrid};
use crate::vec3::{self, Vec3};

/// Physical and discretization parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub c_alpha_assumed: f64,
    pub p: Vec3,
    pub scales: usize,
    pub ir_floor_c: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            alpha: 1e-4,
            epsilon: 0.3,
            mu: 0.2,
            rho_minus: 0.1,
            rho_plus: 0.4,
            c_alpha_assumed: 0.35,
            p: [0.1, 0.0, 0.0],
            scales: 4,
            ir_floor_c: 10.0,
        }
    }
}

impl ModelParams {
    pub fn cutoffs(&self) -> Result<CutoffSequence> {
        CutoffSequence::new(self.lambda, self.epsilon, self.scales)
    }

    pub fn sqrt_alpha(&self) -> f64 {
        self.alpha.sqrt()
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn with_p(&self, p: Vec3) -> Self {
        Self { p, ..self.clone() }
    }
}

/// `δ_P(k̂) = 1 − k̂·∇E`.
pub fn delta_p(khat: Vec3, grad_e: Vec3) -> f64 {
    1.0 - vec3::dot(khat, grad_e)
}

/// Coefficient form of a three-component operator; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorOp {
    pub number: [Vec<f64>; 3],
    pub linear: [Vec<f64>; 3],
    pub constant: Vec3,
}

impl VectorOp {
    pub fn zero(modes: usize) -> Self {
        Self {
            number: std::array::from_fn(|_| vec![0.0; modes]),
            linear: std::array::from_fn(|_| vec![0.0; modes]),
            constant: vec3::ZERO,
        }
    }

    pub fn constant(modes: usize, c: Vec3) -> Self {
        Self {
            constant: c,
            ..Self::zero(modes)
        }
    }

    pub fn mode_count(&self) -> usize {
        self.number[0].len()
    }

    /// Photon momentum `P^f = Σ k_m n_m` over all modes.
    pub fn photon_momentum(grid: &ModeGrid) -> Self {
        let mut op = Self::zero(grid.len());
        for (m, mode) in grid.modes().iter().enumerate() {
            for i in 0..3 {
                op.number[i][m] = mode.k[i];
            }
        }
        op
    }

    /// Vector potential `Σ_{m ∈ modes} √(w/|k|) ε_m (b_m + b*_m)`.
    pub fn field(grid: &ModeGrid, modes: Range<usize>) -> Self {
        let mut op = Self::zero(grid.len());
        for m in modes {
            let mode = grid.mode(m);
            let g = mode.coupling();
            for i in 0..3 {
                op.linear[i][m] = g * mode.eps[i];
            }
        }
        op
    }

    /// `β^{σ_j} = P^f − α^{1/2} A^{σ_j}`.
    pub fn beta(params: &ModelParams, grid: &ModeGrid, j: usize) -> Self {
        Self::photon_momentum(grid).add_scaled(-params.sqrt_alpha(), &Self::field(grid, grid.active_modes(j)))
    }

    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for i in 0..3 {
            linalg::axpy(s, &other.number[i], &mut out.number[i]);
            linalg::axpy(s, &other.linear[i], &mut out.linear[i]);
            out.constant[i] += s * other.constant[i];
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::zero(self.mode_count()).add_scaled(s, self)
    }

    pub fn with_constant(&self, c: Vec3) -> Self {
        Self {
            constant: c,
            ..self.clone()
        }
    }

    /// Result of the substitution `b_m → b_m − d_m`, i.e. conjugation by the
    /// Weyl operator with amplitude `d`.
    pub fn displaced(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.mode_count());
        let mut out = self.clone();
        for i in 0..3 {
            for (m, &dm) in d.iter().enumerate() {
                if dm == 0.0 {
                    continue;
                }
                let n = self.number[i][m];
                let l = self.linear[i][m];
                out.linear[i][m] = l - n * dm;
                out.constant[i] += n * dm * dm - 2.0 * l * dm;
            }
        }
        out
    }

    pub fn assemble(&self, basis: &FockBasis) -> [FockOperator; 3] {
        std::array::from_fn(|i| self.assemble_component(basis, i))
    }

    /// Assembles on a basis over the leading `basis.mode_count()` modes;
    /// terms on later modes are dropped (they act on unoccupied modes).
    pub fn assemble_component(&self, basis: &FockBasis, i: usize) -> FockOperator {
        let m = basis.mode_count();
        fock::number_sum(basis, &self.number[i][..m])
            .add(&fock::field_sum(basis, &self.linear[i][..m]))
            .shift(self.constant[i])
    }

    /// Largest coefficient difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..3 {
            for m in 0..self.mode_count() {
                d = d.max((self.number[i][m] - other.number[i][m]).abs());
                d = d.max((self.linear[i][m] - other.linear[i][m]).abs());
            }
            d = d.max((self.constant[i] - other.constant[i]).abs());
        }
        d
    }
}

/// A basis may cover a prefix of the grid: the sector with no photons in
/// the remaining modes.
fn check_basis(grid: &ModeGrid, basis: &FockBasis) -> Result<()> {
    if basis.mode_count() > grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            actual: basis.mode_count(),
        });
    }
    Ok(())
}

fn check_scale(params: &ModelParams, grid: &ModeGrid, j: usize) -> Result<()> {
    let max = grid.cutoffs().scales().min(params.scales);
    if j > max {
        return Err(Error::Parameter(format!("scale {j} exceeds the number of scales {max}")));
    }
    Ok(())
}

fn check_gradient(grad_e: Vec3) -> Result<()> {
    let g = vec3::norm(grad_e);
    if !(g < 1.0) {
        return Err(Error::Domain(format!("|gradE| = {g} must be below 1")));
    }
    Ok(())
}

/// `A^i` over the given shells.
pub fn assemble_field(grid: &ModeGrid, basis: &FockBasis, shells: Range<usize>) -> Result<[FockOperator; 3]> {
    check_basis(grid, basis)?;
    Ok(VectorOp::field(grid, grid.shell_modes(shells)).assemble(basis))
}

/// `H^f = Σ |k_m| n_m`.
pub fn free_field_energy(grid: &ModeGrid, basis: &FockBasis) -> FockOperator {
    fock::weighted_number_sum(basis, grid, |m| m.knorm)
}

/// `½ Σ_i X_i²` with each square a truncated matrix product.
fn half_square_sum(x: &[FockOperator; 3]) -> FockOperator {
    x.iter()
        .map(FockOperator::square)
        .reduce(|a, b| a.add(&b))
        .expect("three components")
        .scale(0.5)
}

/// `H_P^{σ_j} = ½ Σ_i (P^i − β^i)² + H^f`.
pub fn assemble_h_fiber(params: &ModelParams, grid: &ModeGrid, basis: &FockBasis, j: usize) -> Result<FockOperator> {
    check_basis(grid, basis)?;
    check_scale(params, grid, j)?;
    let x = VectorOp::constant(grid.len(), params.p)
        .add_scaled(-1.0, &VectorOp::beta(params, grid, j))
        .assemble(basis);
    Ok(half_square_sum(&x).add(&free_field_energy(grid, basis)))
}

/// `ΔH = α^{1/2} ½(X·a + a·X) + (α/2) a²` with `X = P − β^{σ_j}` and `a` the
/// shell-`j` field, so that `H^{σ_{j+1}} = H^{σ_j} + ΔH`.
pub fn assemble_slice_interaction(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
) -> Result<FockOperator> {
    check_basis(grid, basis)?;
    check_scale(params, grid, j + 1)?;
    let m = grid.len();
    if params.alpha == 0.0 {
        return Ok(FockOperator::zeros(basis.len()));
    }
    let x = VectorOp::constant(m, params.p)
        .add_scaled(-1.0, &VectorOp::beta(params, grid, j))
        .assemble(basis);
    let a = VectorOp::field(grid, grid.shell_modes(j..j + 1)).assemble(basis);
    let sa = params.sqrt_alpha();
    let mut out = FockOperator::zeros(basis.len());
    for i in 0..3 {
        out = out
            .add(&x[i].anticommutator_half(&a[i]).scale(sa))
            .add(&a[i].square().scale(0.5 * params.alpha));
    }
    Ok(out)
}

/// `Σ_m |k_m| δ_P(k̂_m) n_m` over all modes.
pub fn dressed_field_energy(grid: &ModeGrid, basis: &FockBasis, grad_e: Vec3) -> FockOperator {
    fock::weighted_number_sum(basis, grid, |m| m.knorm * delta_p(m.khat, grad_e))
}

/// `Σ_{m ∈ modes} |k_m| δ_P(k̂_m) f_m²`.
fn dressing_energy(grid: &ModeGrid, field: &DisplacementField, grad_e: Vec3) -> f64 {
    field
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, f)| **f != 0.0)
        .map(|(m, f)| {
            let mode = grid.mode(m);
            mode.knorm * delta_p(mode.khat, grad_e) * f * f
        })
        .sum()
}

/// The c-number `ℰ = P²/2 − (P − ∇E)²/2 − Σ_{active} |k| δ_P f²`.
pub fn script_e(params: &ModelParams, grid: &ModeGrid, j: usize, grad_e: Vec3) -> Result<f64> {
    check_gradient(grad_e)?;
    let field = bogoliubov::displacement_coeffs(grad_e, grid, 0..j, params.alpha)?;
    let p = params.p;
    let pm = vec3::sub(p, grad_e);
    Ok(0.5 * vec3::dot(p, p) - 0.5 * vec3::dot(pm, pm) - dressing_energy(grid, &field, grad_e))
}

/// Canonical form `K = ½ Σ Γ_i² + Σ |k| δ_P n + ℰ` with `Γ = Π − gamma_shift`.
pub fn assemble_k_canonical(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    grad_e: Vec3,
    gamma_shift: Vec3,
) -> Result<(FockOperator, f64)> {
    check_basis(grid, basis)?;
    check_scale(params, grid, j)?;
    check_gradient(grad_e)?;
    let gamma = bogoliubov::pi_operator(params, grid, j, grad_e)?
        .with_constant(vec3::scale(-1.0, gamma_shift))
        .assemble(basis);
    let e = script_e(params, grid, j, grad_e)?;
    let k = half_square_sum(&gamma)
        .add(&dressed_field_energy(grid, basis, grad_e))
        .shift(e);
    Ok((k, e))
}

/// Slice operators for the step from scale `j` to `j+1` with the scale-`j`
/// gradient: `L = −Σ_{shell j} k_m f_m (b_m + b*_m) − α^{1/2} a` and the
/// c-number vector `I = Σ_{shell j} (k_m f_m² + 2 α^{1/2} g_m ε_m f_m)`.
pub fn slice_operators(params: &ModelParams, grid: &ModeGrid, j: usize, grad_prev: Vec3) -> Result<(VectorOp, Vec3)> {
    check_gradient(grad_prev)?;
    let shell = grid.shell_modes(j..j + 1);
    let field = bogoliubov::displacement_coeffs(grad_prev, grid, j..j + 1, params.alpha)?;
    let sa = params.sqrt_alpha();
    let mut l = VectorOp::zero(grid.len());
    let mut iv = vec3::ZERO;
    for m in shell {
        let mode = grid.mode(m);
        let f = field.amplitudes()[m];
        let g = mode.coupling();
        for i in 0..3 {
            l.linear[i][m] = -mode.k[i] * f - sa * g * mode.eps[i];
            iv[i] += mode.k[i] * f * f + 2.0 * sa * g * mode.eps[i] * f;
        }
    }
    Ok((l, iv))
}

/// Intermediate Hamiltonian for the step `j → j+1`:
/// `K̂ = ½ (Γ^{σ_j} + L + I)² + Σ |k| δ^{σ_j} n + Ê`, where `Ê` is the
/// c-number of the canonical form taken over shells `0..=j`.
pub fn assemble_k_hat(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    grad_prev: Vec3,
    gamma_shift_prev: Vec3,
) -> Result<(FockOperator, f64)> {
    check_basis(grid, basis)?;
    check_scale(params, grid, j + 1)?;
    let gamma_hat = gamma_hat_op(params, grid, j, grad_prev, gamma_shift_prev)?.assemble(basis);
    let e_hat = script_e(params, grid, j + 1, grad_prev)?;
    let k = half_square_sum(&gamma_hat)
        .add(&dressed_field_energy(grid, basis, grad_prev))
        .shift(e_hat);
    Ok((k, e_hat))
}

/// `Γ^{σ_j} + L + I` in coefficient form.
pub fn gamma_hat_op(
    params: &ModelParams,
    grid: &ModeGrid,
    j: usize,
    grad_prev: Vec3,
    gamma_shift_prev: Vec3,
) -> Result<VectorOp> {
    let gamma = bogoliubov::pi_operator(params, grid, j, grad_prev)?.with_constant(vec3::scale(-1.0, gamma_shift_prev));
    let (l, iv) = slice_operators(params, grid, j, grad_prev)?;
    Ok(gamma.add(&l).add(&VectorOp::constant(grid.len(), iv)))
}

/// `ΔK = ½(Γ·(L+I) + h.c.) + ½(L+I)²` for the step `j → j+1`.
pub fn assemble_delta_k(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    grad_prev: Vec3,
    gamma_shift_prev: Vec3,
) -> Result<FockOperator> {
    check_basis(grid, basis)?;
    let gamma = bogoliubov::pi_operator(params, grid, j, grad_prev)?
        .with_constant(vec3::scale(-1.0, gamma_shift_prev))
        .assemble(basis);
    let (l, iv) = slice_operators(params, grid, j, grad_prev)?;
    let li = l.add(&VectorOp::constant(grid.len(), iv)).assemble(basis);
    let mut out = FockOperator::zeros(basis.len());
    for i in 0..3 {
        out = out
            .add(&gamma[i].anticommutator_half(&li[i]))
            .add(&li[i].square().scale(0.5));
    }
    Ok(out)
}

/// All scale-`j` operators of the H picture.
#[derive(Debug, Clone)]
pub struct ScaleOperators {
    pub j: usize,
    pub h: FockOperator,
    pub hf_delta: FockOperator,
    pub a: [FockOperator; 3],
    pub pf: [FockOperator; 3],
    pub beta: [FockOperator; 3],
}

impl ScaleOperators {
    pub fn assemble(params: &ModelParams, grid: &ModeGrid, basis: &FockBasis, j: usize, grad_e: Vec3) -> Result<Self> {
        check_gradient(grad_e)?;
        let h = assemble_h_fiber(params, grid, basis, j)?;
        Ok(Self {
            j,
            h,
            hf_delta: dressed_field_energy(grid, basis, grad_e),
            a: VectorOp::field(grid, grid.active_modes(j)).assemble(basis),
            pf: VectorOp::photon_momentum(grid).assemble(basis),
            beta: VectorOp::beta(params, grid, j).assemble(basis),
        })
    }
}
