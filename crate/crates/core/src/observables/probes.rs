use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::bogoliubov;
use crate::cascade::CascadeState;
use crate::error::{Error, Result};
use crate::fock::{annihilate, create_sum, FockBasis};
use crate::hamiltonian::{assemble_h_fiber, assemble_k_canonical, slice_operators, ModelParams, VectorOp};
use crate::linalg::{norm, sub, to_complex};
use crate::modes::ModeGrid;
use crate::spectral::{dense_spectrum, resolvent_apply, Contour, LanczosOptions, ResolventOptions};
use crate::vec3::{self, Vec3};

use super::gradient::energy_at;

/// `max/min` of a list of positive values; infinite when any is zero.
pub fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if xs.is_empty() {
        f64::NAN
    } else if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_vector(basis: &FockBasis, grid: &ModeGrid, j: usize, psi: &[f64]) -> Result<()> {
    if psi.len() != basis.len() {
        return Err(Error::Dimension { expected: basis.len(), actual: psi.len() });
    }
    let need = grid.active_modes(j).end;
    if basis.mode_count() < need {
        return Err(Error::Precondition(format!(
            "basis covers {} modes, scale {j} needs {need}",
            basis.mode_count()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftPhotonRow {
    pub mode: usize,
    pub shell: usize,
    pub knorm: f64,
    pub weight: f64,
    /// `‖b_m ψ‖ / ‖ψ‖`.
    pub b_norm: f64,
    /// `‖b_m ψ‖ |k|^{3/2} / (α^{1/2} √w)`; zero at `α = 0`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftPhotonProbe {
    pub j: usize,
    pub rows: Vec<SoftPhotonRow>,
    /// Empirical soft-photon constant: the largest row constant.
    pub constant: f64,
}

/// Per-mode photon amplitudes of `ψ` against the infrared bound
/// `‖b_m ψ‖ ≤ C α^{1/2} √w_m / |k_m|^{3/2}`.
pub fn soft_photon_probe(
    psi: &[f64],
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
) -> Result<SoftPhotonProbe> {
    check_vector(basis, grid, j, psi)?;
    let psi_norm = norm(psi);
    if psi_norm == 0.0 {
        return Err(Error::Precondition("zero state".into()));
    }
    let sa = params.sqrt_alpha();
    let rows: Vec<SoftPhotonRow> = grid
        .active_modes(j)
        .map(|m| {
            let mode = grid.mode(m);
            let b_norm = norm(&annihilate(basis, m, psi)) / psi_norm;
            let constant = if sa == 0.0 {
                0.0
            } else {
                b_norm * mode.knorm.powf(1.5) / (sa * mode.weight.sqrt())
            };
            SoftPhotonRow { mode: m, shell: mode.shell, knorm: mode.knorm, weight: mode.weight, b_norm, constant }
        })
        .collect();
    let constant = rows.iter().map(|r| r.constant).fold(0.0, f64::max);
    Ok(SoftPhotonProbe { j, rows, constant })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullThrough {
    pub mode: usize,
    /// `‖b_m ψ‖`.
    pub lhs_norm: f64,
    /// `‖LHS − RHS‖ / ‖LHS‖`; zero at `α = 0`.
    pub residual: f64,
}

/// Pull-through identity for mode `m`:
/// `b_m ψ = −α^{1/2} g_m (H_{P−k} + |k| − E)^{-1} ε_m·(P − β) ψ`.
///
/// `ψ` is normalized internally and `E` is its `H_P` expectation.
pub fn pull_through_probe(
    psi: &[f64],
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    m: usize,
    res_opts: &ResolventOptions,
) -> Result<PullThrough> {
    check_vector(basis, grid, j, psi)?;
    if !grid.active_modes(j).contains(&m) {
        return Err(Error::Precondition(format!("mode {m} is not active at scale {j}")));
    }
    let psi = crate::linalg::normalized(psi);
    let mode = grid.mode(m);
    let lhs = annihilate(basis, m, &psi);
    let lhs_norm = norm(&lhs);
    if params.alpha == 0.0 {
        return Ok(PullThrough { mode: m, lhs_norm, residual: 0.0 });
    }
    let energy = assemble_h_fiber(params, grid, basis, j)?.expectation(&psi);
    let shifted = params.with_p(vec3::sub(params.p, mode.k));
    let h_shift = assemble_h_fiber(&shifted, grid, basis, j)?;
    let x = VectorOp::constant(grid.len(), params.p)
        .add_scaled(-1.0, &VectorOp::beta(params, grid, j))
        .assemble(basis);
    let mut source = vec![0.0; basis.len()];
    for i in 0..3 {
        if mode.eps[i] != 0.0 {
            crate::linalg::axpy(mode.eps[i], &x[i].apply(&psi), &mut source);
        }
    }
    let z = C64::new(energy - mode.knorm, 0.0);
    let solved = resolvent_apply(&h_shift, z, &to_complex(&source), res_opts)?;
    let c = -params.sqrt_alpha() * mode.coupling();
    let rhs: Vec<f64> = solved.iter().map(|v| c * v.re).collect();
    let residual = if lhs_norm == 0.0 {
        norm(&rhs)
    } else {
        norm(&sub(&lhs, &rhs)) / lhs_norm
    };
    Ok(PullThrough { mode: m, lhs_norm, residual })
}

/// Pull-through residuals for every active mode at scale `j`.
pub fn pull_through_all(
    psi: &[f64],
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    res_opts: &ResolventOptions,
) -> Result<Vec<PullThrough>> {
    grid.active_modes(j)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&m| pull_through_probe(psi, params, grid, basis, j, m, res_opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CAlphaProbe {
    /// `max_k (E_P − E_{P−k}) / |k|` over the distinct active momenta.
    pub value: f64,
    pub argmax: Vec3,
    pub energy_p: f64,
    /// `(k, ratio)` per distinct momentum, in grid order.
    pub ratios: Vec<(Vec3, f64)>,
}

fn distinct_momenta(grid: &ModeGrid, j: usize) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::new();
    for m in grid.active_modes(j) {
        let k = grid.mode(m).k;
        if !out.iter().any(|q| vec3::norm(vec3::sub(*q, k)) < 1e-12) {
            out.push(k);
        }
    }
    out
}

/// Smallest constant with `E_{P−k} ≥ E_P − C|k|` on the active momenta of
/// scale `j`; each `E_{P−k}` is a fresh ground-state solve.
pub fn c_alpha_probe(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    opts: &LanczosOptions,
) -> Result<CAlphaProbe> {
    let ks = distinct_momenta(grid, j);
    if ks.is_empty() {
        return Err(Error::Precondition(format!("no active momenta at scale {j}")));
    }
    let energy_p = energy_at(params, grid, basis, j, opts)?.energy;
    let ratios: Vec<(Vec3, f64)> = ks
        .par_iter()
        .map(|&k| {
            let e = energy_at(&params.with_p(vec3::sub(params.p, k)), grid, basis, j, opts)?.energy;
            Ok((k, (energy_p - e) / vec3::norm(k)))
        })
        .collect::<Result<_>>()?;
    let (argmax, value) = ratios
        .iter()
        .cloned()
        .fold((vec3::ZERO, f64::NEG_INFINITY), |acc, r| if r.1 > acc.1 { r } else { acc });
    Ok(CAlphaProbe { value, argmax, energy_p, ratios })
}

/// `α = 0` value of the same quantity: `max_k (P·k̂ − |k|/2)`.
pub fn c_alpha_free(p: Vec3, grid: &ModeGrid, j: usize) -> f64 {
    distinct_momenta(grid, j)
        .into_iter()
        .map(|k| {
            let kn = vec3::norm(k);
            vec3::dot(p, k) / kn - 0.5 * kn
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn cyclic(v: Vec3) -> Vec3 {
    [v[2], v[0], v[1]]
}

/// True when the cyclic coordinate permutation maps the grid momenta (with
/// weights and shells) onto themselves.
pub fn grid_is_cyclic_symmetric(grid: &ModeGrid) -> bool {
    grid.modes().iter().all(|a| {
        let rk = cyclic(a.k);
        grid.modes().iter().any(|b| {
            vec3::norm(vec3::sub(b.k, rk)) < 1e-12 && (a.weight - b.weight).abs() < 1e-14 && a.shell == b.shell
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationCheck {
    pub p: Vec3,
    pub rotated_p: Vec3,
    pub energy: f64,
    pub rotated_energy: f64,
    pub difference: f64,
}

/// Ground energies at `P` and at its cyclic permutation `(P_z, P_x, P_y)`.
pub fn rotation_check(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    opts: &LanczosOptions,
) -> Result<RotationCheck> {
    if !grid_is_cyclic_symmetric(grid) {
        return Err(Error::Precondition("angular set is not invariant under coordinate permutation".into()));
    }
    let rotated_p = cyclic(params.p);
    let energy = energy_at(params, grid, basis, j, opts)?.energy;
    let rotated_energy = energy_at(&params.with_p(rotated_p), grid, basis, j, opts)?.energy;
    Ok(RotationCheck { p: params.p, rotated_p, energy, rotated_energy, difference: (energy - rotated_energy).abs() })
}

/// Spectral bounds at one step `j → j+1`, evaluated on the contour of the
/// step with the dense spectrum of `K^{σ_j}`.
type BoundGetter<'a> = &'a dyn Fn(&ResolventBounds) -> Option<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventBounds {
    /// `max_z ⟨x,|R|x⟩ / |⟨x,Rx⟩|` with `x = Γ^i Φ`; `None` for `x = 0`.
    pub b3: [Option<f64>; 3],
    /// Same ratio with `x = L^{(+)l} Γ^i Φ`, indexed `[l][i]`.
    pub b4: [[Option<f64>; 3]; 3],
    /// `max_z ⟨x,|R|²x⟩ / |⟨x,R²x⟩|` with `x = Γ^i Φ`.
    pub b5: [Option<f64>; 3],
    /// `max_{i,z} |⟨Γ^iΦ, R² Γ^iΦ⟩|`.
    pub theorem_lhs: f64,
    /// `theorem_lhs · α^{1/2} ε^{2jδ}`, the implied constant.
    pub theorem_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub j: usize,
    pub b1_lhs: f64,
    pub b1_rhs: f64,
    pub b2_lhs: f64,
    pub b2_rhs: f64,
    /// `None` when the step space exceeds the dense limit.
    pub resolvent: Option<ResolventBounds>,
}

impl BoundsRow {
    pub fn b1_constant(&self) -> f64 {
        ratio(self.b1_lhs, self.b1_rhs)
    }

    pub fn b2_constant(&self) -> f64 {
        ratio(self.b2_lhs, self.b2_rhs)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub delta: f64,
    pub rows: Vec<BoundsRow>,
    pub notices: Vec<String>,
}

fn max_opt(it: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    it.flatten().fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

impl BoundsReport {
    pub fn c1(&self) -> f64 {
        self.rows.iter().map(BoundsRow::b1_constant).fold(0.0, f64::max)
    }

    pub fn c2(&self) -> f64 {
        self.rows.iter().map(BoundsRow::b2_constant).fold(0.0, f64::max)
    }

    pub fn c3(&self) -> Option<f64> {
        max_opt(self.rows.iter().filter_map(|r| r.resolvent.as_ref()).flat_map(|b| b.b3))
    }

    pub fn c4(&self) -> Option<f64> {
        max_opt(
            self.rows
                .iter()
                .filter_map(|r| r.resolvent.as_ref())
                .flat_map(|b| b.b4.into_iter().flatten()),
        )
    }

    pub fn c5(&self) -> Option<f64> {
        max_opt(self.rows.iter().filter_map(|r| r.resolvent.as_ref()).flat_map(|b| b.b5))
    }

    /// Largest implied theorem constant over the scales.
    pub fn r0(&self) -> Option<f64> {
        max_opt(self.rows.iter().map(|r| r.resolvent.as_ref().map(|b| b.theorem_constant)))
    }

    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
        let mut s = String::new();
        let _ = writeln!(s, "energy shift: |dE_j| <= C1 * alpha * eps^j");
        for r in &self.rows {
            let _ = writeln!(s, "  j={} lhs={:.4e} rhs={:.4e} C={:.4e}", r.j, r.b1_lhs, r.b1_rhs, r.b1_constant());
        }
        let _ = writeln!(s, "  fitted C1 = {:.4e}", self.c1());
        let _ = writeln!(s, "gradient shift: |dgradE_j| <= C2 * (step + alpha^(1/4) eps^(j+1))");
        for r in &self.rows {
            let _ = writeln!(s, "  j={} lhs={:.4e} rhs={:.4e} C={:.4e}", r.j, r.b2_lhs, r.b2_rhs, r.b2_constant());
        }
        let _ = writeln!(s, "  fitted C2 = {:.4e}", self.c2());
        let families: [(&str, BoundGetter); 3] = [
            ("resolvent modulus: <x,|R|x> <= C3 |<x,Rx>|, x = Gamma^i Phi", &|b| max_opt(b.b3.into_iter())),
            ("lifted resolvent modulus: same with x = L(+)^l Gamma^i Phi", &|b| max_opt(b.b4.into_iter().flatten())),
            ("squared resolvent: <x,|R|^2 x> <= C5 |<x,R^2 x>|", &|b| max_opt(b.b5.into_iter())),
        ];
        for (title, get) in families {
            let _ = writeln!(s, "{title}");
            for r in &self.rows {
                let _ = writeln!(s, "  j={} C={}", r.j, fmt(r.resolvent.as_ref().and_then(get)));
            }
        }
        let _ = writeln!(s, "  fitted C3 = {}, C4 = {}, C5 = {}", fmt(self.c3()), fmt(self.c4()), fmt(self.c5()));
        let _ = writeln!(s, "[IV.1] |<Gamma Phi, R^2 Gamma Phi>| <= R0 / (alpha^(1/2) eps^(2 j delta)), delta = {}", self.delta);
        for r in &self.rows {
            let (lhs, c) = r
                .resolvent
                .as_ref()
                .map_or((None, None), |b| (Some(b.theorem_lhs), Some(b.theorem_constant)));
            let _ = writeln!(s, "  j={} lhs={} R0={}", r.j, fmt(lhs), fmt(c));
        }
        let _ = writeln!(s, "  fitted R0 = {}", fmt(self.r0()));
        for n in &self.notices {
            let _ = writeln!(s, "notice: {n}");
        }
        s
    }
}

/// `(max_z ⟨x,|R|x⟩/|⟨x,Rx⟩|, max_z ⟨x,|R|²x⟩/|⟨x,R²x⟩|, max_z |⟨x,R²x⟩|)`
/// from eigenbasis coefficients.
fn resolvent_ratios(values: &[f64], coeffs: &[f64], points: &[C64]) -> (f64, f64, f64) {
    let (mut r1, mut r2, mut sq) = (0.0f64, 0.0f64, 0.0f64);
    for &z in points {
        let (mut plain, mut abs, mut plain2, mut abs2) = (C64::new(0.0, 0.0), 0.0, C64::new(0.0, 0.0), 0.0);
        for (&l, &c) in values.iter().zip(coeffs) {
            let w = c * c;
            let d = C64::new(l, 0.0) - z;
            let inv = d.inv();
            plain += inv * w;
            abs += w / d.norm();
            plain2 += inv * inv * w;
            abs2 += w / d.norm_sqr();
        }
        r1 = r1.max(abs / plain.norm());
        r2 = r2.max(abs2 / plain2.norm());
        sq = sq.max(plain2.norm());
    }
    (r1, r2, sq)
}

const ZERO_VECTOR: f64 = 1e-14;

fn resolvent_bounds(state: &CascadeState, j: usize, delta: f64, dense_limit: usize, nodes: usize) -> Result<ResolventBounds> {
    let (params, grid) = (&state.params, &state.grid);
    let r = &state.records[j];
    let b1 = state.sector_basis(j + 1)?;
    if b1.len() > dense_limit {
        return Err(Error::DenseLimit { dim: b1.len(), limit: dense_limit });
    }
    let phi = state.sector(j + 1)?.extract(&r.phi);
    let (k, _) = assemble_k_canonical(params, grid, &b1, j, r.grad_e, r.gamma_shift)?;
    let spectrum = dense_spectrum(&k, dense_limit)?;
    let pi = bogoliubov::pi_operators(params, grid, &b1, j, r.grad_e)?;
    let (gamma, _) = bogoliubov::gamma_operator(&pi, &phi)?;
    let (l, _) = slice_operators(params, grid, j, r.grad_e)?;
    let points = Contour::new(r.energy, params.mu * grid.cutoffs().sigma(j + 1), nodes)?.points();
    let values = spectrum.values();

    let mut out = ResolventBounds {
        b3: [None; 3],
        b4: [[None; 3]; 3],
        b5: [None; 3],
        theorem_lhs: 0.0,
        theorem_constant: 0.0,
    };
    for i in 0..3 {
        let x = gamma[i].apply(&phi);
        if norm(&x) <= ZERO_VECTOR {
            continue;
        }
        let (r3, r5, sq) = resolvent_ratios(values, &spectrum.coefficients(&x), &points);
        out.b3[i] = Some(r3);
        out.b5[i] = Some(r5);
        out.theorem_lhs = out.theorem_lhs.max(sq);
        for (li, row) in out.b4.iter_mut().enumerate() {
            let y = create_sum(&b1, &l.linear[li][..b1.mode_count()], &x);
            if norm(&y) > ZERO_VECTOR {
                row[i] = Some(resolvent_ratios(values, &spectrum.coefficients(&y), &points).0);
            }
        }
    }
    out.theorem_constant =
        out.theorem_lhs * params.sqrt_alpha() * params.epsilon.powf(2.0 * j as f64 * delta);
    Ok(out)
}

/// Both sides of the energy, gradient and resolvent bounds at every step of a
/// completed cascade. The resolvent constants and the theorem quantity are skipped with a
/// notice on steps whose space exceeds `dense_limit`.
pub fn bounds_probe_b(state: &CascadeState, delta: f64, dense_limit: usize, nodes: usize) -> Result<BoundsReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let params = &state.params;
    let steps = state.records.len().saturating_sub(1);
    let results: Vec<(BoundsRow, Option<String>)> = (0..steps)
        .into_par_iter()
        .map(|j| {
            let r = &state.records[j];
            let eps_j = params.epsilon.powi(j as i32);
            let (resolvent, notice) = match resolvent_bounds(state, j, delta, dense_limit, nodes) {
                Ok(b) => (Some(b), None),
                Err(Error::DenseLimit { dim, limit }) => (
                    None,
                    Some(format!("resolvent constants skipped at j={j}: dimension {dim} exceeds dense limit {limit}")),
                ),
                Err(e) => return Err(Error::Cascade { scale: j, source: Box::new(e) }),
            };
            let row = BoundsRow {
                j,
                b1_lhs: r.energy_shift.abs(),
                b1_rhs: params.alpha * eps_j,
                b2_lhs: r.grad_shift,
                b2_rhs: r.step_norm + params.alpha.powf(0.25) * eps_j * params.epsilon,
                resolvent,
            };
            Ok((row, notice))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut notices = Vec::new();
    for (row, notice) in results {
        rows.push(row);
        notices.extend(notice);
    }
    Ok(BoundsReport { delta, rows, notices })
}
