use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockOperator};
use crate::hamiltonian::{assemble_h_fiber, ModelParams, VectorOp};
use crate::linalg;
use crate::modes::ModeGrid;
use crate::spectral::{ground_state_with, GroundStateRecord, LanczosOptions};
use crate::vec3::{self, Vec3};

/// Relative residual above which a state is rejected as not converged.
pub const STALE_RESIDUAL: f64 = 1e-8;

/// Default step of the central gradient stencil.
pub const DEFAULT_GRADIENT_STEP: f64 = 1e-3;

/// Default step of the five-point curvature stencil.
pub const DEFAULT_CURVATURE_STEP: f64 = 5e-3;

/// `‖Hψ − ⟨H⟩ψ‖ / ‖ψ‖`.
pub fn eigen_residual(h: &FockOperator, psi: &[f64]) -> f64 {
    let n = linalg::norm(psi);
    if n == 0.0 {
        return f64::INFINITY;
    }
    let hpsi = h.apply(psi);
    let e = linalg::dot(psi, &hpsi) / (n * n);
    let mut r = hpsi;
    linalg::axpy(-e, psi, &mut r);
    linalg::norm(&r) / n
}

/// `P − ⟨β⟩_ψ` from assembled `β` components.
pub fn grad_from_beta(beta: &[FockOperator; 3], p: Vec3, psi: &[f64]) -> Vec3 {
    std::array::from_fn(|i| p[i] - beta[i].expectation(psi))
}

/// Feynman–Hellmann gradient `∇E = P − ⟨P^f − α^{1/2} A^{σ_j}⟩_ψ`.
///
/// `psi` must be a converged ground state of `H^{σ_j}` on `basis`; a
/// residual above [`STALE_RESIDUAL`] is rejected.
pub fn grad_e_feynman_hellmann(
    psi: &[f64],
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
) -> Result<Vec3> {
    if psi.len() != basis.len() {
        return Err(Error::Dimension {
            expected: basis.len(),
            actual: psi.len(),
        });
    }
    let h = assemble_h_fiber(params, grid, basis, j)?;
    let r = eigen_residual(&h, psi);
    if !(r <= STALE_RESIDUAL) {
        return Err(Error::Precondition(format!(
            "stale state: eigen-residual {r:.3e} exceeds {STALE_RESIDUAL:.0e}"
        )));
    }
    let beta = VectorOp::beta(params, grid, j).assemble(basis);
    Ok(grad_from_beta(&beta, params.p, psi))
}

/// Ground pair of `H^{σ_j}_P` on `basis`, rejecting degenerate ground states.
pub fn energy_at(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    opts: &LanczosOptions,
) -> Result<GroundStateRecord> {
    let h = assemble_h_fiber(params, grid, basis, j)?;
    let rec = ground_state_with(&h, opts, None)?;
    if rec.degenerate {
        return Err(Error::Degenerate { gap: rec.gap });
    }
    Ok(rec)
}

fn energies(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    opts: &LanczosOptions,
    momenta: &[Vec3],
) -> Result<Vec<f64>> {
    momenta
        .par_iter()
        .map(|&p| energy_at(&params.with_p(p), grid, basis, j, opts).map(|r| r.energy))
        .collect()
}

/// Central three-point differences of `E` in each component of `P`.
pub fn grad_e_finite_difference(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    h: f64,
    opts: &LanczosOptions,
) -> Result<Vec3> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step {h} must be positive")));
    }
    let mut momenta = Vec::with_capacity(6);
    for i in 0..3 {
        let e = vec3::scale(h, vec3::unit(i));
        momenta.push(vec3::add(params.p, e));
        momenta.push(vec3::sub(params.p, e));
    }
    let e = energies(params, grid, basis, j, opts, &momenta)?;
    Ok(std::array::from_fn(|i| (e[2 * i] - e[2 * i + 1]) / (2.0 * h)))
}

/// Five-point second derivative of `E` along `axis`.
pub fn d2e_finite_difference(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    axis: usize,
    h: f64,
    opts: &LanczosOptions,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step {h} must be positive")));
    }
    let e = vec3::unit(axis);
    let momenta: Vec<Vec3> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|&s| vec3::add(params.p, vec3::scale(s * h, e)))
        .collect();
    let v = energies(params, grid, basis, j, opts, &momenta)?;
    Ok((-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{AngularSet, CutoffSequence};

    fn setup(alpha: f64) -> (ModelParams, ModeGrid, FockBasis) {
        let params = ModelParams {
            alpha,
            p: [0.2, 0.0, 0.0],
            scales: 1,
            ..ModelParams::default()
        };
        let grid = ModeGrid::build(CutoffSequence::new(1.0, 0.3, 1).unwrap(), 1, AngularSet::Octahedral6).unwrap();
        let basis = FockBasis::new(grid.len(), 2, 2).unwrap();
        (params, grid, basis)
    }

    #[test]
    fn free_gradient_is_p() {
        let (params, grid, basis) = setup(0.0);
        let g = grad_e_feynman_hellmann(&basis.vacuum(), &params, &grid, &basis, 1).unwrap();
        assert_eq!(g, params.p);
    }

    #[test]
    fn stale_state_is_rejected() {
        let (params, grid, basis) = setup(0.01);
        let err = grad_e_feynman_hellmann(&basis.vacuum(), &params, &grid, &basis, 1).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn feynman_hellmann_matches_differences() {
        let (params, grid, basis) = setup(0.01);
        let opts = LanczosOptions::default();
        let rec = energy_at(&params, &grid, &basis, 1, &opts).unwrap();
        let fh = grad_e_feynman_hellmann(&rec.vector, &params, &grid, &basis, 1).unwrap();
        let fd = grad_e_finite_difference(&params, &grid, &basis, 1, 1e-3, &opts).unwrap();
        assert!(vec3::norm(vec3::sub(fh, fd)) < 1e-6, "{fh:?} {fd:?}");
        assert!(vec3::norm(fh) < 1.0);
    }

    #[test]
    fn free_curvature_is_one() {
        let (params, grid, basis) = setup(0.0);
        let d2 = d2e_finite_difference(&params, &grid, &basis, 1, 0, 5e-3, &LanczosOptions::default()).unwrap();
        assert!((d2 - 1.0).abs() < 1e-10);
    }
}
