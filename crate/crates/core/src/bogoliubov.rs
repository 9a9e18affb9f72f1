//! Weyl displacements `W = exp(Σ f_m (b*_m − b_m))`, for which
//! `W b_m W* = b_m − f_m`, and the observables `Π`, `Γ` built from them.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, FockOperator};
use crate::hamiltonian::{delta_p, ModelParams, VectorOp};
use crate::linalg;
use crate::modes::ModeGrid;
use crate::vec3::{self, Vec3};

/// Per-mode displacement amplitudes; zero outside `active`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    amplitudes: Vec<f64>,
    active: Range<usize>,
}

impl DisplacementField {
    pub fn zero(modes: usize) -> Self {
        Self {
            amplitudes: vec![0.0; modes],
            active: 0..0,
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<f64>, active: Range<usize>) -> Result<Self> {
        if let Some(m) = amplitudes.iter().position(|f| !f.is_finite()) {
            return Err(Error::Domain(format!("non-finite displacement amplitude at mode {m}")));
        }
        if amplitudes
            .iter()
            .enumerate()
            .any(|(m, f)| *f != 0.0 && !active.contains(&m))
        {
            return Err(Error::Domain("displacement amplitude outside the active range".into()));
        }
        Ok(Self { amplitudes, active })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn active(&self) -> Range<usize> {
        self.active.clone()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amplitudes)
    }

    /// `self − other`, active on the union of both ranges.
    pub fn difference(&self, other: &Self) -> Self {
        let start = self.active.start.min(other.active.start);
        let end = self.active.end.max(other.active.end);
        let active = if self.active.is_empty() {
            other.active.clone()
        } else if other.active.is_empty() {
            self.active.clone()
        } else {
            start..end
        };
        Self {
            amplitudes: linalg::sub(&self.amplitudes, &other.amplitudes),
            active,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            amplitudes: linalg::scaled(-1.0, &self.amplitudes),
            active: self.active.clone(),
        }
    }
}

/// `f_m = α^{1/2} √w_m (∇E·ε_m) / (|k_m|^{3/2} δ_P(k̂_m))` on the given shells.
pub fn displacement_coeffs(grad_e: Vec3, grid: &ModeGrid, shells: Range<usize>, alpha: f64) -> Result<DisplacementField> {
    if vec3::norm(grad_e) >= 1.0 {
        return Err(Error::Domain(format!("|gradE| = {} must be below 1", vec3::norm(grad_e))));
    }
    let modes = grid.shell_modes(shells);
    let sa = alpha.sqrt();
    let mut amplitudes = vec![0.0; grid.len()];
    for m in modes.clone() {
        let mode = grid.mode(m);
        let delta = delta_p(mode.khat, grad_e);
        if delta <= 0.0 {
            return Err(Error::Domain(format!("δ_P = {delta} is not positive at mode {m}")));
        }
        amplitudes[m] = sa * mode.weight.sqrt() * vec3::dot(grad_e, mode.eps) / (mode.knorm.powf(1.5) * delta);
    }
    DisplacementField::from_amplitudes(amplitudes, modes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone)]
pub struct WeylOutput {
    pub vector: Vec<f64>,
    /// `‖v‖ − ‖W v‖`.
    pub norm_defect: f64,
    /// Norm of the creation amplitude that the displacement pushes out of the
    /// truncated basis when acting on the result.
    pub truncation_leak: f64,
}

/// Default bound on [`WeylOutput::truncation_leak`].
pub const DEFAULT_LEAK_BOUND: f64 = 1e-2;

/// Applies `W` (or `W*`) to `v` by a scaled Taylor series of the
/// antisymmetric generator.
pub fn weyl_apply(
    basis: &FockBasis,
    field: &DisplacementField,
    v: &[f64],
    direction: Direction,
    leak_bound: f64,
) -> Result<WeylOutput> {
    if v.len() != basis.len() {
        return Err(Error::Dimension {
            expected: basis.len(),
            actual: v.len(),
        });
    }
    let m = basis.mode_count();
    if field.amplitudes()[m.min(field.amplitudes().len())..].iter().any(|f| *f != 0.0) {
        return Err(Error::Precondition(format!(
            "displacement acts on modes beyond the {m} modes of the basis"
        )));
    }
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Inverse => -1.0,
    };
    let amps: Vec<f64> = field.amplitudes()[..m].iter().map(|f| sign * f).collect();
    if amps.iter().all(|f| *f == 0.0) {
        return Ok(WeylOutput {
            vector: v.to_vec(),
            norm_defect: 0.0,
            truncation_leak: 0.0,
        });
    }
    let g = fock::displacement_generator(basis, &amps);
    let vector = expm_antisymmetric(&g, v);
    let norm_defect = linalg::norm(v) - linalg::norm(&vector);
    let truncation_leak = fock::creation_overflow(basis, &amps, &vector);
    if truncation_leak > leak_bound {
        return Err(Error::Truncation {
            defect: truncation_leak,
            bound: leak_bound,
        });
    }
    Ok(WeylOutput {
        vector,
        norm_defect,
        truncation_leak,
    })
}

/// `exp(G) v` for sparse `G`, splitting into `s` steps with `‖G‖/s ≤ ½`.
pub fn expm_antisymmetric(g: &FockOperator, v: &[f64]) -> Vec<f64> {
    let bound = g.norm_inf();
    let steps = ((bound / 0.5).ceil() as usize).max(1);
    let inv = 1.0 / steps as f64;
    let mut x = v.to_vec();
    let mut term = vec![0.0; v.len()];
    for _ in 0..steps {
        let mut acc = x.clone();
        term.copy_from_slice(&x);
        let scale = linalg::norm(&x).max(f64::MIN_POSITIVE);
        for k in 1..60 {
            let next = g.apply(&term);
            let c = inv / k as f64;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = c * n;
            }
            linalg::axpy(1.0, &term, &mut acc);
            if linalg::norm(&term) <= 1e-17 * scale {
                break;
            }
        }
        x = acc;
    }
    x
}

/// `Π = W β^{σ_j} W* − ⟨W β^{σ_j} W*⟩_Ω` in closed form, with the Weyl
/// amplitudes of `∇E` on the active shells.
pub fn pi_operator(params: &ModelParams, grid: &ModeGrid, j: usize, grad_e: Vec3) -> Result<VectorOp> {
    let field = displacement_coeffs(grad_e, grid, 0..j, params.alpha)?;
    Ok(VectorOp::beta(params, grid, j)
        .displaced(field.amplitudes())
        .with_constant(vec3::ZERO))
}

/// `⟨W β^{σ_j} W*⟩_Ω`.
pub fn beta_vacuum_shift(params: &ModelParams, grid: &ModeGrid, j: usize, grad_e: Vec3) -> Result<Vec3> {
    let field = displacement_coeffs(grad_e, grid, 0..j, params.alpha)?;
    Ok(VectorOp::beta(params, grid, j).displaced(field.amplitudes()).constant)
}

/// Assembled `Π^i`.
pub fn pi_operators(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    grad_e: Vec3,
) -> Result<[FockOperator; 3]> {
    Ok(pi_operator(params, grid, j, grad_e)?.assemble(basis))
}

/// `shift_i = ⟨Π_i⟩_φ`, `Γ_i = Π_i − shift_i`.
pub fn gamma_operator(pi_ops: &[FockOperator; 3], phi: &[f64]) -> Result<([FockOperator; 3], Vec3)> {
    let nn = linalg::dot(phi, phi);
    if nn == 0.0 {
        return Err(Error::Precondition("Γ needs a nonzero reference vector".into()));
    }
    let shift: Vec3 = std::array::from_fn(|i| pi_ops[i].expectation(phi));
    let gamma = std::array::from_fn(|i| pi_ops[i].shift(-shift[i]));
    Ok((gamma, shift))
}

/// `⟨φ, Γ_i φ⟩ / ⟨φ, φ⟩`.
pub fn gamma_expectation(gamma: &[FockOperator; 3], phi: &[f64]) -> Vec3 {
    std::array::from_fn(|i| gamma[i].expectation(phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{AngularSet, CutoffSequence};
    use faer::Mat;

    fn grid() -> ModeGrid {
        ModeGrid::build(CutoffSequence::new(1.0, 0.3, 2).unwrap(), 1, AngularSet::Octahedral6).unwrap()
    }

    #[test]
    fn zero_gradient_gives_zero_field() {
        let f = displacement_coeffs(vec3::ZERO, &grid(), 0..2, 0.01).unwrap();
        assert!(f.amplitudes().iter().all(|a| *a == 0.0));
    }

    #[test]
    fn parallel_gradient_on_polar_set_gives_zero_field() {
        let polar = AngularSet::Custom(vec![([0.0, 0.0, 1.0], 0.5), ([0.0, 0.0, -1.0], 0.5)]);
        let g = ModeGrid::build(CutoffSequence::new(1.0, 0.3, 2).unwrap(), 1, polar).unwrap();
        let f = displacement_coeffs([0.0, 0.0, 0.2], &g, 0..2, 0.01).unwrap();
        assert!(f.amplitudes().iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn amplification_ratio_along_gradient() {
        // Same |k|, ε and weight; one mode with k̂ ∥ ∇E, one with k̂ ⟂ ∇E.
        let g = grid();
        let grad = [0.0, 0.0, 0.3];
        let f = displacement_coeffs(grad, &g, 0..1, 0.01).unwrap();
        let pick = |khat: Vec3, eps: Vec3| {
            g.modes()
                .iter()
                .position(|m| m.shell == 0 && vec3::norm(vec3::sub(m.khat, khat)) < 1e-12 && vec3::dot(m.eps, eps).abs() > 0.99)
                .unwrap()
        };
        // k̂ = x̂ has ε = ẑ; compare against the mode with k̂ ∥ ∇E after
        // removing the ∇E·ε factor.
        let perp = pick([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        let mode = g.mode(perp);
        let base = 0.1 * mode.weight.sqrt() * 0.3 / mode.knorm.powf(1.5);
        assert!((f.amplitudes()[perp] / base - 1.0).abs() < 1e-12);
        let delta = delta_p([0.0, 0.0, 1.0], grad);
        assert!((1.0 / delta - 1.0 / (1.0 - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn coherent_state_ratio() {
        let b = FockBasis::new(1, 6, 6).unwrap();
        let field = DisplacementField::from_amplitudes(vec![0.07], 0..1).unwrap();
        let out = weyl_apply(&b, &field, &b.vacuum(), Direction::Forward, 1.0).unwrap();
        let one = b.index_of(&[1]).unwrap();
        assert!((out.vector[one] / out.vector[0] - 0.07).abs() < 1e-12);
        assert!(out.norm_defect.abs() < 1e-14);
    }

    #[test]
    fn zero_field_is_identity() {
        let b = FockBasis::new(3, 2, 2).unwrap();
        let v: Vec<f64> = (0..b.len()).map(|i| (i as f64 + 1.0).ln()).collect();
        let out = weyl_apply(&b, &DisplacementField::zero(3), &v, Direction::Forward, 0.0).unwrap();
        assert_eq!(out.vector, v);
    }

    #[test]
    fn round_trip() {
        let b = FockBasis::new(3, 3, 3).unwrap();
        let field = DisplacementField::from_amplitudes(vec![0.1, -0.05, 0.08], 0..3).unwrap();
        let v = b.vacuum();
        let w = weyl_apply(&b, &field, &v, Direction::Forward, 1.0).unwrap();
        let back = weyl_apply(&b, &field, &w.vector, Direction::Inverse, 1.0).unwrap();
        assert!(linalg::norm(&linalg::sub(&back.vector, &v)) < 1e-9);
    }

    #[test]
    fn truncation_error_when_leak_exceeds_bound() {
        let b = FockBasis::new(1, 1, 1).unwrap();
        let field = DisplacementField::from_amplitudes(vec![0.5], 0..1).unwrap();
        let err = weyl_apply(&b, &field, &b.vacuum(), Direction::Forward, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn free_pi_is_beta() {
        let g = grid();
        let p = ModelParams {
            alpha: 0.01,
            epsilon: 0.3,
            scales: 2,
            ..ModelParams::default()
        };
        let pi = pi_operator(&p, &g, 2, vec3::ZERO).unwrap();
        assert!(pi.max_abs_diff(&VectorOp::beta(&p, &g, 2)) == 0.0);
        let b = FockBasis::new(g.len(), 2, 2).unwrap();
        let ops = pi_operator(&p, &g, 2, [0.1, 0.02, 0.0]).unwrap().assemble(&b);
        for op in &ops {
            assert!(op.get(0, 0).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_is_mean_zero_and_free_at_scale_zero() {
        let g = grid();
        let p = ModelParams {
            alpha: 0.01,
            epsilon: 0.3,
            scales: 2,
            ..ModelParams::default()
        };
        let b = FockBasis::new(g.len(), 2, 2).unwrap();
        let pi = pi_operators(&p, &g, &b, 0, p.p).unwrap();
        let (gamma, shift) = gamma_operator(&pi, &b.vacuum()).unwrap();
        assert_eq!(shift, vec3::ZERO);
        let pf = VectorOp::photon_momentum(&g).assemble(&b);
        for i in 0..3 {
            assert_eq!(gamma[i].max_abs_diff(&pf[i]), 0.0);
        }
        let phi: Vec<f64> = (0..b.len()).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let pi = pi_operators(&p, &g, &b, 2, [0.1, 0.0, 0.05]).unwrap();
        let (gamma, _) = gamma_operator(&pi, &phi).unwrap();
        for e in gamma_expectation(&gamma, &phi) {
            assert!(e.abs() < 1e-12);
        }
        assert!(gamma_operator(&pi, &vec![0.0; b.len()]).is_err());
    }

    #[test]
    fn closed_form_matches_numeric_conjugation() {
        // Two modes, generous truncation; compare W β W* with the
        // coefficient transform on low-occupation matrix elements.
        let b = FockBasis::new(2, 14, 14).unwrap();
        let mut beta = VectorOp::zero(2);
        beta.number[0] = vec![0.4, -0.3];
        beta.linear[0] = vec![0.2, 0.1];
        let amps = vec![0.1, -0.07];
        let field = DisplacementField::from_amplitudes(amps.clone(), 0..2).unwrap();
        let dim = b.len();
        let mut w = Mat::<f64>::zeros(dim, dim);
        for c in 0..dim {
            let mut e = vec![0.0; dim];
            e[c] = 1.0;
            let col = weyl_apply(&b, &field, &e, Direction::Forward, f64::INFINITY).unwrap().vector;
            for (r, v) in col.iter().enumerate() {
                w.write(r, c, *v);
            }
        }
        let op = beta.assemble_component(&b, 0).to_dense();
        let conj = &w * &op * w.transpose();
        let closed = beta.displaced(&amps).assemble_component(&b, 0);
        for s in 0..dim {
            for t in 0..dim {
                if b.total(s) <= 2 && b.total(t) <= 2 {
                    assert!((conj.read(s, t) - closed.get(s, t)).abs() < 1e-9, "({s},{t})");
                }
            }
        }
    }
}
