//! Second derivative of the ground energy along the momentum axis, by
//! double-resolvent contour integrals in the H and K pictures.

use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockOperator};
use crate::hamiltonian::{assemble_h_fiber, ModelParams, VectorOp};
use crate::linalg::{self, C64};
use crate::modes::ModeGrid;
use crate::spectral::{resolvent_for, Contour, Resolvent, ResolventOptions};
use crate::vec3::Vec3;

/// Bound on `|⟨φ̂, Γ_i φ̂⟩|` required by the K-picture formula.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Axis carrying `P`. A zero momentum maps to axis 0.
pub fn momentum_axis(p: Vec3) -> Result<usize> {
    let nonzero: Vec<usize> = (0..3).filter(|&i| p[i] != 0.0).collect();
    match nonzero.as_slice() {
        [] => Ok(0),
        [i] => Ok(*i),
        _ => Err(Error::Precondition(format!(
            "curvature needs P along a coordinate axis, got {p:?}"
        ))),
    }
}

/// Bilinear (not sesquilinear) pairing `Σ a_n b_n`.
fn pair(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_single_enclosure(res: &dyn Resolvent, contour: &Contour) -> Result<()> {
    if let Some(spec) = res.spectrum() {
        let inside = spec.count_inside(|l| contour.encloses(l));
        if inside != 1 {
            return Err(Error::Contour(format!(
                "curvature contour (center {:.6e}, radius {:.3e}) encloses {inside} eigenvalues",
                contour.center(),
                contour.radius()
            )));
        }
    }
    Ok(())
}

/// One solution vector per contour node.
type NodeSolves = Vec<Vec<C64>>;

/// `1 − 2 (1/2πi)∮ (R u)ᵀ X (R φ) dz` with `u = Xφ`, for normalized `φ`.
fn double_resolvent(res: &dyn Resolvent, x: &FockOperator, phi: &[f64], contour: &Contour) -> Result<(f64, NodeSolves, NodeSolves)> {
    let zs = contour.points();
    let ws = contour.weights();
    let u = x.apply(phi);
    let rphi = res.solve_shifts(&zs, &linalg::to_complex(phi))?;
    let ru = res.solve_shifts(&zs, &linalg::to_complex(&u))?;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..zs.len() {
        acc += ws[k] * pair(&ru[k], &x.apply_complex(&rphi[k]));
    }
    Ok((1.0 - 2.0 * acc.re, rphi, ru))
}

/// `∂²E` at scale `j` from the H picture with `∂_i H = P^i − β^i`.
///
/// `basis` should be the scale-`j` sector so that the contour sees only the
/// isolated ground energy; `psi` is the ground state on it.
pub fn d2e_h_contour(
    psi: &[f64],
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    contour: &Contour,
) -> Result<f64> {
    let axis = momentum_axis(params.p)?;
    let h = assemble_h_fiber(params, grid, basis, j)?;
    let x = VectorOp::constant(grid.len(), params.p)
        .add_scaled(-1.0, &VectorOp::beta(params, grid, j))
        .assemble_component(basis, axis);
    let res = resolvent_for(&h, &ResolventOptions::default())?;
    check_single_enclosure(res.as_ref(), contour)?;
    let phi = linalg::normalized(psi);
    Ok(double_resolvent(res.as_ref(), &x, &phi, contour)?.0)
}

/// Results of the K-picture curvature evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KCurvature {
    /// `1 − 2⟨∮ R Γ R dz φ̂, Γ φ̂⟩`.
    pub value: f64,
    /// `1 + (1/πi)∮ dz̄ (E − z̄)^{-1} ⟨Γ R Γ φ̂, φ̂⟩`.
    pub reduced: f64,
    /// Magnitude of the mixed `∂E·Γ` contour term.
    pub cross_term: f64,
    /// `max_i |⟨φ̂, Γ_i φ̂⟩|`.
    pub orthogonality: f64,
}

/// `∂²E` at scale `j` from the canonical form `k` with vector operator `gamma`.
///
/// `phi` must be an eigenvector of `k` with `⟨φ̂, Γ φ̂⟩ = 0`; `grad_e` enters
/// only the cross-term probe.
pub fn d2e_k_contour(
    phi: &[f64],
    gamma: &[FockOperator; 3],
    k: &FockOperator,
    params: &ModelParams,
    grad_e: Vec3,
    contour: &Contour,
) -> Result<KCurvature> {
    let axis = momentum_axis(params.p)?;
    let phi = linalg::normalized(phi);
    let orthogonality = (0..3).map(|i| gamma[i].expectation(&phi).abs()).fold(0.0, f64::max);
    if !(orthogonality <= ORTHOGONALITY_TOL) {
        return Err(Error::Precondition(format!(
            "⟨φ, Γφ⟩ = {orthogonality:.3e} exceeds {ORTHOGONALITY_TOL:.0e}; cross terms do not cancel"
        )));
    }
    let res = resolvent_for(k, &ResolventOptions::default())?;
    check_single_enclosure(res.as_ref(), contour)?;
    let g = &gamma[axis];
    let (value, a, b) = double_resolvent(res.as_ref(), g, &phi, contour)?;

    let energy = k.expectation(&phi);
    let zs = contour.points();
    let ws = contour.weights();
    let dzbar = contour.conj_differentials();
    let u = linalg::to_complex(&g.apply(&phi));
    let mut reduced = C64::new(0.0, 0.0);
    let mut cross = C64::new(0.0, 0.0);
    for n in 0..zs.len() {
        let s = pair(&u, &b[n]);
        reduced += dzbar[n] * (s / (C64::new(energy, 0.0) - zs[n])).conj();
        cross += ws[n] * (pair(&a[n], &g.apply_complex(&a[n])) + pair(&a[n], &b[n]));
    }
    let reduced = 1.0 + (reduced / C64::new(0.0, std::f64::consts::PI)).re;
    Ok(KCurvature {
        value,
        reduced,
        cross_term: (cross * grad_e[axis]).norm(),
        orthogonality,
    })
}
