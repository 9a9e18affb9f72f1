//! Scale-by-scale construction of ground states of `H` and of the
//! canonical form `K` across the cutoff sequence.
//!
//! Step `j → j+1` runs on the sector with photons in shells `0..=j`:
//!
//! 1. `Φ̂^{σ_{j+1}}` is the contour projection of `Φ^{σ_j}` onto the ground
//!    state of `K̂`, on the circle of radius `μσ_{j+1}` around `E^{σ_j}`.
//!    The Neumann expansion in `ΔK` around `K^{σ_j}` is run alongside.
//! 2. `E^{σ_{j+1}}` and `Ψ^{σ_{j+1}}` come from a direct eigensolve of `H`.
//! 3. `∇E^{σ_{j+1}}` is the Feynman–Hellmann value on `Ψ^{σ_{j+1}}`.
//! 4. `Φ^{σ_{j+1}}` is `Φ̂^{σ_{j+1}}` re-dressed by one Weyl operator with
//!    the amplitude change caused by the new gradient.
//!
//! Vectors are stored on the full basis; sector vectors embed with zeros in
//! the inactive modes. Projector outputs are kept unnormalized.

use std::fmt::Write as _;

use crate::bogoliubov::{self, displacement_coeffs, weyl_apply, Direction, DEFAULT_LEAK_BOUND};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockOperator, Sector, DEFAULT_BASIS_LIMIT};
use crate::hamiltonian::{
    assemble_delta_k, assemble_h_fiber, assemble_k_canonical, assemble_k_hat, ModelParams, VectorOp,
};
use crate::linalg;
use crate::modes::ModeGrid;
use crate::observables::{eigen_residual, grad_from_beta, STALE_RESIDUAL};
use crate::output::{fmt_f64, RunMetadata};
use crate::spectral::{
    contour_project_with, ground_state_with, neumann_project, resolvent_for, Contour, GroundStateRecord,
    LanczosOptions, ProjectionOptions, DEFAULT_NODES,
};
use crate::vec3::{self, Vec3};

/// One inequality of the parameter report.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: &'static str,
    pub statement: String,
    /// Smallest margin by which the inequality holds; negative on failure.
    pub slack: f64,
}

impl Constraint {
    fn new(name: &'static str, statement: String, slack: f64) -> Self {
        Self { name, statement, slack }
    }

    pub fn pass(&self) -> bool {
        self.slack > 0.0
    }
}

/// The four parameter relations of the construction, plus domain checks
/// the numerics rely on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub constraints: Vec<Constraint>,
    pub domain: Vec<Constraint>,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.constraints.iter().chain(&self.domain).all(Constraint::pass)
    }

    pub fn first_failure(&self) -> Option<&Constraint> {
        self.constraints.iter().chain(&self.domain).find(|c| !c.pass())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut block = |title: &str, list: &[Constraint]| {
            let _ = writeln!(s, "{title}");
            for c in list {
                let _ = writeln!(
                    s,
                    "  {:<12} {:<44} slack {:>12.4e}  {}",
                    c.name,
                    c.statement,
                    c.slack,
                    if c.pass() { "PASS" } else { "FAIL" }
                );
            }
        };
        block("constraints", &self.constraints);
        block("domain", &self.domain);
        s
    }
}

/// Checks the parameter relations; never fails, reports instead.
pub fn validate_params(params: &ModelParams) -> ConstraintReport {
    let p = params;
    let gap_top = 1.0 - p.c_alpha_assumed;
    let chain = [
        p.rho_minus,
        p.mu - p.rho_minus,
        p.rho_plus - p.mu,
        gap_top - p.rho_plus,
        2.0 / 3.0 - gap_top,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let constraints = vec![
        Constraint::new(
            "chain",
            format!(
                "0 < ρ⁻={} < μ={} < ρ⁺={} < 1−C_α={:.4} < 2/3",
                p.rho_minus, p.mu, p.rho_plus, gap_top
            ),
            chain,
        ),
        Constraint::new(
            "ratio",
            format!("0 < ε={} < ρ⁻/ρ⁺={:.4}", p.epsilon, p.rho_minus / p.rho_plus),
            p.epsilon.min(p.rho_minus / p.rho_plus - p.epsilon),
        ),
        Constraint::new(
            "ir-floor",
            format!("ε={} > C α^½={:.4e}", p.epsilon, p.ir_floor_c * p.alpha.max(0.0).sqrt()),
            p.epsilon - p.ir_floor_c * p.alpha.max(0.0).sqrt(),
        ),
        Constraint::new(
            "gap-cover",
            format!("ρ⁻={} > 3με={:.4}", p.rho_minus, 3.0 * p.mu * p.epsilon),
            p.rho_minus - 3.0 * p.mu * p.epsilon,
        ),
    ];
    let pn = vec3::norm(p.p);
    let domain = vec![
        Constraint::new("epsilon", format!("ε={} < 1/2", p.epsilon), 0.5 - p.epsilon),
        Constraint::new("momentum", format!("|P|={pn:.4} < 1/3"), 1.0 / 3.0 - pn),
        Constraint::new(
            "c-alpha",
            format!("1/3 < C_α={} < 1", p.c_alpha_assumed),
            (p.c_alpha_assumed - 1.0 / 3.0).min(1.0 - p.c_alpha_assumed),
        ),
        // Zero coupling is admissible; report a unit slack for it.
        Constraint::new(
            "alpha",
            format!("α={} ≥ 0", p.alpha),
            if p.alpha >= 0.0 { p.alpha.max(1.0) } else { p.alpha },
        ),
        Constraint::new("scales", format!("J={} ≥ 1", p.scales), p.scales as f64),
    ];
    ConstraintReport { constraints, domain }
}

/// Which construction of `Φ̂` the cascade carries forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiHatPath {
    /// Contour projection with the full intermediate operator.
    Direct,
    /// Partial sums of the Neumann expansion in `ΔK`.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub lanczos: LanczosOptions,
    pub projection: ProjectionOptions,
    pub nodes: usize,
    /// Maximum Neumann terms; `0` disables the Neumann cross-check.
    pub neumann_terms: usize,
    pub phi_hat_path: PhiHatPath,
    pub leak_bound: f64,
    /// Run even when [`validate_params`] reports a violated relation.
    pub allow_invalid: bool,
    pub basis_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            lanczos: LanczosOptions::default(),
            projection: ProjectionOptions::default(),
            nodes: DEFAULT_NODES,
            neumann_terms: 24,
            phi_hat_path: PhiHatPath::Direct,
            leak_bound: DEFAULT_LEAK_BOUND,
            allow_invalid: false,
            basis_limit: DEFAULT_BASIS_LIMIT,
        }
    }
}

/// Diagnostics of one scale. Fields describing the step `j → j+1` are NaN
/// on the last scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRecord {
    pub j: usize,
    pub sigma: f64,
    pub energy: f64,
    pub grad_e: Vec3,
    /// `Ψ^{σ_j}`, normalized.
    pub psi: Vec<f64>,
    /// `Φ^{σ_j}`, unnormalized.
    pub phi: Vec<f64>,
    /// `Φ̂^{σ_j}`, unnormalized; `Ω` at `j = 0`.
    pub phi_hat: Vec<f64>,
    pub phi_norm_sq: f64,
    pub phi_hat_norm_sq: f64,
    /// Gap of `H^{σ_j}` on the scale-`j` sector; infinite at `j = 0`.
    pub gap_fsigma: f64,
    /// Gap of `H^{σ_j}` on the scale-`(j+1)` sector.
    pub gap_fnext: f64,
    /// `‖Φ̂^{σ_{j+1}} − Φ^{σ_j}‖`.
    pub step_norm: f64,
    /// `E^{σ_j} − E^{σ_{j+1}}`.
    pub energy_shift: f64,
    /// `|∇E^{σ_{j+1}} − ∇E^{σ_j}|`.
    pub grad_shift: f64,
    /// Constant subtracted from `Π` to form `Γ`; equals `⟨Π⟩_Φ`.
    pub gamma_shift: Vec3,
    /// `max_i |⟨Φ, Γ_i Φ⟩| / ‖Φ‖²`.
    pub gamma_orthogonality: f64,
    /// `|shift − (P − ∇E − ⟨WβW*⟩_Ω)|`, zero without truncation.
    pub shift_defect: f64,
    /// Eigen-residual of `Ψ` for `H^{σ_j}`.
    pub h_residual: f64,
    /// `⟨K⟩_Φ − E` at this scale.
    pub k_energy_defect: f64,
    /// `⟨K̂⟩_{Φ̂} − E` for the `Φ̂` of this scale.
    pub khat_energy_defect: f64,
    /// `‖Φ̂_Neumann − Φ̂_direct‖` for the next step.
    pub neumann_direct_diff: f64,
    /// Neumann term norms for the next step.
    pub neumann_terms: Vec<f64>,
    /// Idempotence defect of the direct projection for the next step.
    pub projection_defect: f64,
    /// Truncation leak of the re-dressing Weyl operator producing `Φ`.
    pub weyl_leak: f64,
}

#[derive(Debug, Clone)]
pub struct CascadeState {
    pub params: ModelParams,
    pub grid: ModeGrid,
    pub n_max: usize,
    pub c_max: usize,
    pub constraints: ConstraintReport,
    pub records: Vec<ScaleRecord>,
}

/// Truncated basis over the modes of shells `0..shells`.
pub fn sector_basis(grid: &ModeGrid, shells: usize, n_max: usize, c_max: usize, limit: usize) -> Result<FockBasis> {
    FockBasis::with_limit(grid.active_modes(shells).end, n_max, c_max, limit)
}

impl CascadeState {
    pub fn scales(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn full_basis(&self) -> Result<FockBasis> {
        FockBasis::with_limit(self.grid.len(), self.n_max, self.c_max, usize::MAX)
    }

    /// The scale-`j` sector `F_{σ_j}` as a basis of its own.
    pub fn sector_basis(&self, j: usize) -> Result<FockBasis> {
        sector_basis(&self.grid, j, self.n_max, self.c_max, usize::MAX)
    }

    /// Index map from the full basis onto the scale-`j` sector.
    pub fn sector(&self, j: usize) -> Result<Sector> {
        Ok(self.full_basis()?.sector(self.grid.active_modes(j).end))
    }
}

fn embed(sec: &Sector, v: &[f64]) -> Vec<f64> {
    sec.embed(v)
}

fn solve_ground(h: &FockOperator, opts: &LanczosOptions) -> Result<GroundStateRecord> {
    let rec = ground_state_with(h, opts, None)?;
    if rec.degenerate {
        return Err(Error::Degenerate { gap: rec.gap });
    }
    Ok(rec)
}

struct StepProjection {
    vector: Vec<f64>,
    neumann_diff: f64,
    neumann_terms: Vec<f64>,
    idempotence_defect: f64,
}

/// `Φ̂^{σ_{j+1}}` on the scale-`(j+1)` sector.
#[allow(clippy::too_many_arguments)]
fn intermediate_vector(
    params: &ModelParams,
    grid: &ModeGrid,
    b1: &FockBasis,
    j: usize,
    prev: &ScaleRecord,
    phi: &[f64],
    contour: &Contour,
    opts: &SolverOptions,
) -> Result<StepProjection> {
    let (khat, e_hat) = assemble_k_hat(params, grid, b1, j, prev.grad_e, prev.gamma_shift)?;
    // An exact eigenvector inside the contour is its own projection.
    let lambda = khat.expectation(phi);
    if eigen_residual(&khat, phi) == 0.0 && contour.encloses(lambda) {
        return Ok(StepProjection {
            vector: phi.to_vec(),
            neumann_diff: 0.0,
            neumann_terms: vec![linalg::norm(phi)],
            idempotence_defect: 0.0,
        });
    }
    let res = resolvent_for(&khat, &opts.projection.resolvent)?;
    let direct = contour_project_with(res.as_ref(), contour, phi, &opts.projection)?;
    drop(res);

    let (mut neumann_diff, mut neumann_terms, mut neumann_vec) = (f64::NAN, Vec::new(), None);
    if opts.neumann_terms > 0 {
        let (k_j, e_j) = assemble_k_canonical(params, grid, b1, j, prev.grad_e, prev.gamma_shift)?;
        let delta = assemble_delta_k(params, grid, b1, j, prev.grad_e, prev.gamma_shift)?.shift(e_hat - e_j);
        let res_j = resolvent_for(&k_j, &opts.projection.resolvent)?;
        let n = neumann_project(res_j.as_ref(), &delta, contour, phi, opts.neumann_terms)?;
        neumann_diff = linalg::norm(&linalg::sub(&n.vector, &direct.vector));
        neumann_terms = n.term_norms;
        if n.diverging && opts.phi_hat_path == PhiHatPath::Neumann {
            return Err(Error::Contour(format!(
                "Neumann series does not converge (last term {:.3e})",
                neumann_terms.last().copied().unwrap_or(f64::NAN)
            )));
        }
        neumann_vec = Some(n.vector);
    }
    let vector = match (opts.phi_hat_path, neumann_vec) {
        (PhiHatPath::Neumann, Some(v)) => v,
        (PhiHatPath::Neumann, None) => {
            return Err(Error::Parameter("the Neumann path needs neumann_terms > 0".into()));
        }
        (PhiHatPath::Direct, _) => direct.vector,
    };
    Ok(StepProjection {
        vector,
        neumann_diff,
        neumann_terms,
        idempotence_defect: direct.idempotence_defect,
    })
}

/// K-picture bookkeeping for a freshly built `Φ` on `basis`.
fn canonical_diagnostics(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    j: usize,
    grad_e: Vec3,
    energy: f64,
    phi: &[f64],
) -> Result<(Vec3, f64, f64, f64)> {
    let pi = bogoliubov::pi_operators(params, grid, basis, j, grad_e)?;
    let (gamma, shift) = bogoliubov::gamma_operator(&pi, phi)?;
    let orth = bogoliubov::gamma_expectation(&gamma, phi)
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let c = bogoliubov::beta_vacuum_shift(params, grid, j, grad_e)?;
    let physical = vec3::sub(vec3::sub(params.p, grad_e), c);
    let shift_defect = vec3::norm(vec3::sub(shift, physical));
    let (k, _) = assemble_k_canonical(params, grid, basis, j, grad_e, shift)?;
    let k_defect = k.expectation(phi) - energy;
    Ok((shift, orth, shift_defect, k_defect))
}

/// Runs the cascade to scale `params.scales`; `basis` must cover every mode
/// of `grid`.
pub fn run_cascade(
    params: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    opts: &SolverOptions,
) -> Result<CascadeState> {
    let constraints = validate_params(params);
    if !opts.allow_invalid {
        if let Some(c) = constraints.first_failure() {
            return Err(Error::Parameter(format!(
                "constraint '{}' violated ({}, slack {:.3e}); enable the override to run anyway",
                c.name, c.statement, c.slack
            )));
        }
    }
    if basis.mode_count() != grid.len() {
        return Err(Error::Precondition(format!(
            "cascade basis covers {} modes, the grid has {}",
            basis.mode_count(),
            grid.len()
        )));
    }
    let scales = params.scales;
    if scales == 0 || scales > grid.cutoffs().scales() {
        return Err(Error::Parameter(format!(
            "scales {scales} must lie in 1..={}",
            grid.cutoffs().scales()
        )));
    }
    let (n_max, c_max) = (basis.n_max(), basis.c_max());
    let cut = grid.cutoffs();

    // Scale 0: no interaction, Ψ = Φ = Ω.
    let b0 = sector_basis(grid, 0, n_max, c_max, opts.basis_limit)?;
    let sec0 = basis.sector(b0.mode_count());
    let h0 = assemble_h_fiber(params, grid, &b0, 0)?;
    let g0 = solve_ground(&h0, &opts.lanczos)?;
    let omega = b0.vacuum();
    let beta0 = VectorOp::beta(params, grid, 0).assemble(&b0);
    let grad0 = grad_from_beta(&beta0, params.p, &omega);
    let (shift0, orth0, defect0, kdef0) = canonical_diagnostics(params, grid, &b0, 0, grad0, g0.energy, &omega)?;
    let mut records = vec![ScaleRecord {
        j: 0,
        sigma: cut.sigma(0),
        energy: g0.energy,
        grad_e: grad0,
        psi: embed(&sec0, &omega),
        phi: embed(&sec0, &omega),
        phi_hat: embed(&sec0, &omega),
        phi_norm_sq: 1.0,
        phi_hat_norm_sq: 1.0,
        gap_fsigma: g0.gap,
        gap_fnext: f64::NAN,
        step_norm: f64::NAN,
        energy_shift: f64::NAN,
        grad_shift: f64::NAN,
        gamma_shift: shift0,
        gamma_orthogonality: orth0,
        shift_defect: defect0,
        h_residual: g0.residual,
        k_energy_defect: kdef0,
        khat_energy_defect: 0.0,
        neumann_direct_diff: f64::NAN,
        neumann_terms: Vec::new(),
        projection_defect: f64::NAN,
        weyl_leak: 0.0,
    }];

    for j in 0..scales {
        let step = (|| -> Result<ScaleRecord> {
            let prev = &records[j];
            let b1 = sector_basis(grid, j + 1, n_max, c_max, opts.basis_limit)?;
            let sec1 = basis.sector(b1.mode_count());
            let phi_prev = sec1.extract(&prev.phi);

            let h_prev = assemble_h_fiber(params, grid, &b1, j)?;
            let gap_fnext = solve_ground(&h_prev, &opts.lanczos)?.gap;

            let contour = Contour::new(prev.energy, params.mu * cut.sigma(j + 1), opts.nodes)?;
            let proj = intermediate_vector(params, grid, &b1, j, prev, &phi_prev, &contour, opts)?;
            let phi_hat = proj.vector;

            let h1 = assemble_h_fiber(params, grid, &b1, j + 1)?;
            let g1 = solve_ground(&h1, &opts.lanczos)?;
            if !(g1.residual <= STALE_RESIDUAL) {
                return Err(Error::NoConvergence {
                    iterations: g1.iterations,
                    residual: g1.residual,
                });
            }
            let beta1 = VectorOp::beta(params, grid, j + 1).assemble(&b1);
            let grad1 = grad_from_beta(&beta1, params.p, &g1.vector);

            let f_old = displacement_coeffs(prev.grad_e, grid, 0..j + 1, params.alpha)?;
            let f_new = displacement_coeffs(grad1, grid, 0..j + 1, params.alpha)?;
            let redress = weyl_apply(&b1, &f_new.difference(&f_old), &phi_hat, Direction::Forward, opts.leak_bound)?;
            let phi1 = redress.vector;

            let (shift1, orth1, defect1, kdef1) =
                canonical_diagnostics(params, grid, &b1, j + 1, grad1, g1.energy, &phi1)?;
            let (khat, _) = assemble_k_hat(params, grid, &b1, j, prev.grad_e, prev.gamma_shift)?;
            let khat_defect = khat.expectation(&phi_hat) - g1.energy;

            let phi_norm_sq = linalg::dot(&phi1, &phi1);
            let record = ScaleRecord {
                j: j + 1,
                sigma: cut.sigma(j + 1),
                energy: g1.energy,
                grad_e: grad1,
                psi: embed(&sec1, &g1.vector),
                phi: embed(&sec1, &phi1),
                phi_hat: embed(&sec1, &phi_hat),
                phi_norm_sq,
                phi_hat_norm_sq: linalg::dot(&phi_hat, &phi_hat),
                gap_fsigma: g1.gap,
                gap_fnext: f64::NAN,
                step_norm: f64::NAN,
                energy_shift: f64::NAN,
                grad_shift: f64::NAN,
                gamma_shift: shift1,
                gamma_orthogonality: orth1,
                shift_defect: defect1,
                h_residual: g1.residual,
                k_energy_defect: kdef1,
                khat_energy_defect: khat_defect,
                neumann_direct_diff: f64::NAN,
                neumann_terms: Vec::new(),
                projection_defect: f64::NAN,
                weyl_leak: redress.truncation_leak,
            };
            let prev = &mut records[j];
            prev.gap_fnext = gap_fnext;
            prev.step_norm = linalg::norm(&linalg::sub(&phi_hat, &phi_prev));
            prev.energy_shift = prev.energy - g1.energy;
            prev.grad_shift = vec3::norm(vec3::sub(grad1, prev.grad_e));
            prev.neumann_direct_diff = proj.neumann_diff;
            prev.neumann_terms = proj.neumann_terms;
            prev.projection_defect = proj.idempotence_defect;
            Ok(record)
        })()
        .map_err(|e| e.at_scale(j + 1))?;
        records.push(step);
    }

    Ok(CascadeState {
        params: params.clone(),
        grid: grid.clone(),
        n_max,
        c_max,
        constraints,
        records,
    })
}

/// `y ≈ prefactor · exp(−exponent · j)` by least squares on `ln y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub points: usize,
}

impl DecayFit {
    /// Fits the positive finite entries; fewer than two give an infinite
    /// exponent and zero prefactor.
    pub fn fit(values: &[(usize, f64)]) -> Self {
        let pts: Vec<(f64, f64)> = values
            .iter()
            .filter(|(_, y)| y.is_finite() && *y > 0.0)
            .map(|&(j, y)| (j as f64, y.ln()))
            .collect();
        let n = pts.len();
        if n < 2 {
            return Self {
                exponent: f64::INFINITY,
                prefactor: 0.0,
                points: n,
            };
        }
        let nf = n as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        Self {
            exponent: -slope,
            prefactor: (my - slope * mx).exp(),
            points: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub delta: f64,
    pub step_fit: DecayFit,
    pub energy_fit: DecayFit,
    pub grad_fit: DecayFit,
    /// `(1 − δ) ln(1/ε)`.
    pub step_threshold: f64,
    pub step_exponent_pass: bool,
    /// `(j, ‖Φ̂^{σ_{j+1}} − Φ^{σ_j}‖, α^{1/4} ε^{(j+1)(1−δ)})`.
    pub step_bound: Vec<(usize, f64, f64)>,
    pub step_bound_pass: bool,
    /// `|E^{σ_j} − E^{σ_{j+1}}| / (α ε^j)`.
    pub c1: Vec<f64>,
    /// `max c1 / min c1` over the positive entries.
    pub c1_spread: f64,
    /// Smallest constant valid for scales `0..=j`: the running maximum of `c1`.
    pub c1_bound: Vec<f64>,
    /// The bound constant grows by at most a factor 3 as scales are added.
    pub c1_stable: bool,
    /// `ΔE_{j+1} / ΔE_j`.
    pub energy_ratios: Vec<f64>,
    /// Every ratio lies within a factor 3 of `ε`.
    pub energy_ratio_pass: bool,
}

impl ConvergenceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fit = |f: &DecayFit| format!("exponent {:.4} prefactor {:.4e} ({} pts)", f.exponent, f.prefactor, f.points);
        let _ = writeln!(s, "convergence (delta = {})", self.delta);
        let _ = writeln!(s, "  step_norm    {}", fit(&self.step_fit));
        let _ = writeln!(s, "  energy_shift {}", fit(&self.energy_fit));
        let _ = writeln!(s, "  grad_shift   {}", fit(&self.grad_fit));
        let _ = writeln!(
            s,
            "  step exponent >= {:.4}: {}",
            self.step_threshold,
            if self.step_exponent_pass { "PASS" } else { "FAIL" }
        );
        for (j, v, b) in &self.step_bound {
            let _ = writeln!(s, "  j={j} step {v:.4e} bound {b:.4e}");
        }
        let _ = writeln!(
            s,
            "  step bound: {}",
            if self.step_bound_pass { "PASS" } else { "FAIL" }
        );
        let list = |v: &[f64]| v.iter().map(|c| format!("{c:.4e}")).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "  C1 per scale [{}] spread {:.3}", list(&self.c1), self.c1_spread);
        let _ = writeln!(
            s,
            "  C1 bound through scale [{}] stable(x3): {}",
            list(&self.c1_bound),
            if self.c1_stable { "PASS" } else { "FAIL" }
        );
        let r: Vec<String> = self.energy_ratios.iter().map(|c| format!("{c:.4}")).collect();
        let _ = writeln!(
            s,
            "  energy ratios [{}] within x3 of eps: {}",
            r.join(", "),
            if self.energy_ratio_pass { "PASS" } else { "FAIL" }
        );
        s
    }
}

/// Decay fits and bound comparisons over the completed scales.
pub fn convergence_report(state: &CascadeState, delta: f64) -> Result<ConvergenceReport> {
    if state.records.len() < 3 {
        return Err(Error::Precondition(format!(
            "convergence report needs at least 3 scales, have {}",
            state.records.len()
        )));
    }
    let p = &state.params;
    let steps: Vec<&ScaleRecord> = state.records.iter().filter(|r| r.step_norm.is_finite()).collect();
    let series = |f: &dyn Fn(&ScaleRecord) -> f64| -> Vec<(usize, f64)> { steps.iter().map(|r| (r.j, f(r))).collect() };
    let step_fit = DecayFit::fit(&series(&|r| r.step_norm));
    let energy_fit = DecayFit::fit(&series(&|r| r.energy_shift.abs()));
    let grad_fit = DecayFit::fit(&series(&|r| r.grad_shift));
    let step_threshold = (1.0 - delta) * (1.0 / p.epsilon).ln();
    let step_bound: Vec<(usize, f64, f64)> = steps
        .iter()
        .map(|r| {
            let bound = p.alpha.powf(0.25) * p.epsilon.powf((r.j + 1) as f64 * (1.0 - delta));
            (r.j, r.step_norm, bound)
        })
        .collect();
    let step_bound_pass = step_bound.iter().all(|(_, v, b)| v <= b);
    let c1: Vec<f64> = if p.alpha > 0.0 {
        steps
            .iter()
            .map(|r| r.energy_shift.abs() / (p.alpha * p.epsilon.powi(r.j as i32)))
            .collect()
    } else {
        vec![0.0; steps.len()]
    };
    let positive: Vec<f64> = c1.iter().copied().filter(|c| *c > 0.0).collect();
    let c1_spread = if positive.is_empty() {
        1.0
    } else {
        positive.iter().copied().fold(0.0, f64::max) / positive.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let mut running = 0.0f64;
    let c1_bound: Vec<f64> = c1
        .iter()
        .map(|c| {
            running = running.max(*c);
            running
        })
        .collect();
    let c1_stable = match (c1_bound.first(), c1_bound.last()) {
        (Some(&first), Some(&last)) if first > 0.0 => last / first <= 3.0,
        (Some(_), Some(&last)) => last == 0.0,
        _ => true,
    };
    let energy_ratios: Vec<f64> = steps
        .windows(2)
        .filter(|w| w[0].energy_shift != 0.0)
        .map(|w| w[1].energy_shift / w[0].energy_shift)
        .collect();
    let energy_ratio_pass = energy_ratios
        .iter()
        .all(|r| *r >= p.epsilon / 3.0 && *r <= 3.0 * p.epsilon);
    Ok(ConvergenceReport {
        delta,
        step_fit,
        energy_fit,
        grad_fit,
        step_threshold,
        step_exponent_pass: step_fit.exponent >= step_threshold,
        step_bound,
        step_bound_pass,
        c1,
        c1_spread,
        c1_bound,
        c1_stable,
        energy_ratios,
        energy_ratio_pass,
    })
}

/// Column names of the cascade trace, in order.
pub const TRACE_HEADER: &str = "j,sigma,E,gradE_x,gradE_y,gradE_z,psi_norm,phi_norm_sq,phi_hat_norm_sq,gap_Fsigma,gap_Fnext,step_norm,energy_shift,grad_shift,gamma_shift_x,gamma_shift_y,gamma_shift_z,gamma_orthogonality,shift_defect,h_residual,k_energy_defect,khat_energy_defect,neumann_direct_diff,neumann_terms,projection_defect,weyl_leak";

/// One row per scale, vectors summarized by norm, with a metadata trailer.
pub fn trace_csv(state: &CascadeState, meta: &RunMetadata) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in &state.records {
        let fields = [
            r.sigma,
            r.energy,
            r.grad_e[0],
            r.grad_e[1],
            r.grad_e[2],
            linalg::norm(&r.psi),
            r.phi_norm_sq,
            r.phi_hat_norm_sq,
            r.gap_fsigma,
            r.gap_fnext,
            r.step_norm,
            r.energy_shift,
            r.grad_shift,
            r.gamma_shift[0],
            r.gamma_shift[1],
            r.gamma_shift[2],
            r.gamma_orthogonality,
            r.shift_defect,
            r.h_residual,
            r.k_energy_defect,
            r.khat_energy_defect,
            r.neumann_direct_diff,
        ];
        let _ = write!(s, "{}", r.j);
        for x in fields {
            let _ = write!(s, ",{}", fmt_f64(x));
        }
        let _ = writeln!(
            s,
            ",{},{},{}",
            r.neumann_terms.len(),
            fmt_f64(r.projection_defect),
            fmt_f64(r.weyl_leak)
        );
    }
    s.push_str(&meta.trailer());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{AngularSet, CutoffSequence};

    fn example(eps: f64) -> ModelParams {
        ModelParams {
            epsilon: eps,
            alpha: 1e-4,
            mu: 0.2,
            rho_minus: 0.1,
            rho_plus: 0.4,
            c_alpha_assumed: 0.35,
            ir_floor_c: 10.0,
            ..ModelParams::default()
        }
    }

    #[test]
    fn constraint_examples() {
        let r = validate_params(&example(0.2));
        let fails: Vec<&str> = r.constraints.iter().filter(|c| !c.pass()).map(|c| c.name).collect();
        assert_eq!(fails, vec!["gap-cover"]);
        assert!((r.constraints[3].slack - (0.1 - 0.12)).abs() < 1e-15);
        assert!(validate_params(&example(0.15)).all_pass());
        let r = validate_params(&example(0.6));
        assert!(!r.domain[0].pass());
        assert!(!r.all_pass());
    }

    #[test]
    fn decay_fit_recovers_exponent() {
        let v: Vec<(usize, f64)> = (0..4).map(|j| (j, 2.0 * (-0.7 * j as f64).exp())).collect();
        let f = DecayFit::fit(&v);
        assert!((f.exponent - 0.7).abs() < 1e-12);
        assert!((f.prefactor - 2.0).abs() < 1e-12);
        assert!(DecayFit::fit(&[(0, 0.0), (1, 0.0)]).exponent.is_infinite());
    }

    fn small(alpha: f64) -> (ModelParams, ModeGrid, FockBasis) {
        let params = ModelParams {
            alpha,
            scales: 2,
            p: [0.1, 0.0, 0.0],
            ..ModelParams::default()
        };
        let grid = ModeGrid::build(params.cutoffs().unwrap(), 1, AngularSet::Octahedral6).unwrap();
        let basis = FockBasis::new(grid.len(), 2, 2).unwrap();
        (params, grid, basis)
    }

    fn lenient() -> SolverOptions {
        SolverOptions {
            allow_invalid: true,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn refuses_invalid_parameters() {
        let (params, grid, basis) = small(1e-4);
        let err = run_cascade(&params, &grid, &basis, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }

    #[test]
    fn free_cascade_is_trivial() {
        let (params, grid, basis) = small(0.0);
        let st = run_cascade(&params, &grid, &basis, &lenient()).unwrap();
        assert_eq!(st.records.len(), 3);
        let e0 = 0.5 * vec3::dot(params.p, params.p);
        for r in &st.records {
            assert!((r.energy - e0).abs() <= 1e-15);
            assert!(vec3::norm(vec3::sub(r.grad_e, params.p)) < 1e-14);
            assert_eq!(r.phi, basis.vacuum());
            if r.j < 2 {
                assert_eq!(r.step_norm, 0.0);
                assert_eq!(r.energy_shift.abs(), 0.0);
            }
        }
        let rep = convergence_report(&st, 0.2).unwrap();
        assert!(rep.step_fit.exponent.is_infinite());
    }

    #[test]
    fn interacting_cascade_invariants() {
        let (params, grid, basis) = small(1e-3);
        let st = run_cascade(&params, &grid, &basis, &lenient()).unwrap();
        for r in &st.records {
            assert!(r.gamma_orthogonality < 1e-12, "{}", r.gamma_orthogonality);
            assert!(r.phi_norm_sq > 2.0 / 3.0);
            assert!(vec3::norm(r.grad_e) < 1.0);
        }
        let r0 = &st.records[0];
        assert!(r0.step_norm > 0.0 && r0.energy_shift != 0.0);
        assert!(r0.neumann_direct_diff < 1e-8, "{}", r0.neumann_direct_diff);
        assert!(st.records[1].khat_energy_defect.abs() < 1e-6);
        assert!(convergence_report(&st, 0.2).is_ok());
    }

    #[test]
    fn trace_has_header_rows_and_trailer() {
        let (params, grid, basis) = small(0.0);
        let st = run_cascade(&params, &grid, &basis, &lenient()).unwrap();
        let csv = trace_csv(&st, &RunMetadata::for_config("alpha = 0\n"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert_eq!(lines[1].split(',').count(), TRACE_HEADER.split(',').count());
        assert!(lines[4].starts_with("# config_sha256="));
        let _ = CutoffSequence::new(1.0, 0.3, 1).unwrap();
    }
}
