use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bogoliubov;
use crate::cascade::{run_cascade, CascadeState, SolverOptions};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::hamiltonian::{assemble_k_canonical, ModelParams};
use crate::modes::ModeGrid;
use crate::output::{fmt_f64, RunMetadata};
use crate::spectral::{ground_state_with, Contour};
use crate::vec3::Vec3;

use super::curvature::{d2e_h_contour, d2e_k_contour, momentum_axis, KCurvature};
use super::gradient::{
    d2e_finite_difference, grad_e_finite_difference, DEFAULT_CURVATURE_STEP, DEFAULT_GRADIENT_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub gradient_step: f64,
    pub curvature_step: f64,
    /// Curvature contour radius in units of `ρ⁻σ_j`.
    pub contour_fraction: f64,
    pub nodes: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            gradient_step: DEFAULT_GRADIENT_STEP,
            curvature_step: DEFAULT_CURVATURE_STEP,
            contour_fraction: 0.5,
            nodes: crate::spectral::DEFAULT_NODES,
        }
    }
}

/// Curvature contour at scale `j`: centered at `E^{σ_j}`, radius
/// `fraction · ρ⁻σ_j`.
pub fn curvature_contour(state: &CascadeState, j: usize, opts: &ScanOptions) -> Result<Contour> {
    let r = &state.records[j];
    Contour::new(r.energy, opts.contour_fraction * state.params.rho_minus * r.sigma, opts.nodes)
}

/// `∂²E` at scale `j` from the H picture on the scale-`j` sector.
pub fn h_route(state: &CascadeState, j: usize, opts: &ScanOptions) -> Result<f64> {
    let sj = state.sector_basis(j)?;
    let psi = state.sector(j)?.extract(&state.records[j].psi);
    d2e_h_contour(&psi, &state.params, &state.grid, &sj, j, &curvature_contour(state, j, opts)?)
}

/// `∂²E` at scale `j` from the canonical form.
///
/// `K^{σ_j}` carries the cascade's `Γ` shift; its ground state is refined
/// from `Φ^{σ_j}` and `Γ` is recentred on it, which the formula requires of
/// an exact eigenvector.
pub fn k_route(state: &CascadeState, j: usize, opts: &ScanOptions, lanczos: &crate::spectral::LanczosOptions) -> Result<KCurvature> {
    let r = &state.records[j];
    let (params, grid) = (&state.params, &state.grid);
    let sj = state.sector_basis(j)?;
    let phi = state.sector(j)?.extract(&r.phi);
    let (k, _) = assemble_k_canonical(params, grid, &sj, j, r.grad_e, r.gamma_shift)?;
    let ground = ground_state_with(&k, lanczos, Some(&phi))?;
    let pi = bogoliubov::pi_operators(params, grid, &sj, j, r.grad_e)?;
    let (gamma, _) = bogoliubov::gamma_operator(&pi, &ground.vector)?;
    d2e_k_contour(&ground.vector, &gamma, &k, params, r.grad_e, &curvature_contour(state, j, opts)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassScanRow {
    pub alpha: f64,
    pub j: usize,
    pub sigma: f64,
    pub p: Vec3,
    pub energy: f64,
    pub grad_fh: Vec3,
    pub grad_fd: Vec3,
    pub d2e_fd: f64,
    pub d2e_h: f64,
    pub d2e_k: f64,
    /// `1 / d2e_k`.
    pub m_r: f64,
    pub delta_hk: f64,
    pub delta_hf: f64,
    pub cross_term: f64,
    pub reduced_defect: f64,
}

/// Rows of one scale by every route.
pub fn scan_row(state: &CascadeState, j: usize, solver: &SolverOptions, opts: &ScanOptions) -> Result<MassScanRow> {
    let r = &state.records[j];
    let params = &state.params;
    let axis = momentum_axis(params.p)?;
    let sj = state.sector_basis(j)?;
    let grad_fd = grad_e_finite_difference(params, &state.grid, &sj, j, opts.gradient_step, &solver.lanczos)?;
    let d2e_fd = d2e_finite_difference(params, &state.grid, &sj, j, axis, opts.curvature_step, &solver.lanczos)?;
    let d2e_h = h_route(state, j, opts)?;
    let k = k_route(state, j, opts, &solver.lanczos)?;
    Ok(MassScanRow {
        alpha: params.alpha,
        j,
        sigma: r.sigma,
        p: params.p,
        energy: r.energy,
        grad_fh: r.grad_e,
        grad_fd,
        d2e_fd,
        d2e_h,
        d2e_k: k.value,
        m_r: 1.0 / k.value,
        delta_hk: (d2e_h - k.value).abs(),
        delta_hf: (d2e_h - d2e_fd).abs(),
        cross_term: k.cross_term,
        reduced_defect: (k.value - k.reduced).abs(),
    })
}

/// All rows of one `(α, P)` cascade, with the last-scale curvature and the
/// successive-scale differences.
#[derive(Debug, Clone)]
pub struct ScanFamily {
    pub alpha: f64,
    pub p: Vec3,
    pub rows: std::result::Result<Vec<MassScanRow>, Error>,
}

impl ScanFamily {
    /// `∂²E` at the deepest scale.
    pub fn last_curvature(&self) -> Option<f64> {
        self.rows.as_ref().ok()?.last().map(|r| r.d2e_k)
    }

    /// `|∂²E^{σ_{j+1}} − ∂²E^{σ_j}|`.
    pub fn tail(&self) -> Vec<f64> {
        match &self.rows {
            Ok(rows) => rows.windows(2).map(|w| (w[1].d2e_k - w[0].d2e_k).abs()).collect(),
            Err(_) => Vec::new(),
        }
    }
}

/// Runs one cascade per `(α, P)` and evaluates every scale up to `max_scale`.
#[allow(clippy::too_many_arguments)]
pub fn mass_scan(
    alphas: &[f64],
    momenta: &[Vec3],
    template: &ModelParams,
    grid: &ModeGrid,
    basis: &FockBasis,
    max_scale: usize,
    solver: &SolverOptions,
    opts: &ScanOptions,
) -> Result<Vec<ScanFamily>> {
    if alphas.is_empty() || momenta.is_empty() {
        return Err(Error::Parameter("mass scan needs at least one α and one P".into()));
    }
    let jobs: Vec<(f64, Vec3)> = alphas
        .iter()
        .flat_map(|&a| momenta.iter().map(move |&p| (a, p)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(alpha, p)| {
            let params = ModelParams { alpha, p, ..template.clone() };
            let rows = run_cascade(&params, grid, basis, solver).and_then(|state| {
                (0..=max_scale.min(state.scales()))
                    .map(|j| scan_row(&state, j, solver, opts).map_err(|e| Error::Cascade { scale: j, source: Box::new(e) }))
                    .collect()
            });
            ScanFamily { alpha, p, rows }
        })
        .collect())
}

pub const SCAN_HEADER: &str = "alpha,j,sigma,Px,Py,Pz,E,gE_FH_x,gE_FH_y,gE_FH_z,gE_FD_x,gE_FD_y,gE_FD_z,d2E_fd,d2E_H,d2E_K,m_r,delta_HK,delta_HF";

/// Scan table; failed families appear as `#` comment lines.
pub fn scan_csv(families: &[ScanFamily], meta: &RunMetadata) -> String {
    let mut s = String::from(SCAN_HEADER);
    s.push('\n');
    for fam in families {
        match &fam.rows {
            Ok(rows) => {
                for r in rows {
                    let vals = [
                        r.sigma, r.p[0], r.p[1], r.p[2], r.energy, r.grad_fh[0], r.grad_fh[1], r.grad_fh[2], r.grad_fd[0],
                        r.grad_fd[1], r.grad_fd[2], r.d2e_fd, r.d2e_h, r.d2e_k, r.m_r, r.delta_hk, r.delta_hf,
                    ];
                    let _ = write!(s, "{},{}", fmt_f64(r.alpha), r.j);
                    for v in vals {
                        let _ = write!(s, ",{}", fmt_f64(v));
                    }
                    s.push('\n');
                }
            }
            Err(e) => {
                let _ = writeln!(
                    s,
                    "# alpha={} P=({},{},{}) failed: {e}",
                    fmt_f64(fam.alpha),
                    fmt_f64(fam.p[0]),
                    fmt_f64(fam.p[1]),
                    fmt_f64(fam.p[2])
                );
            }
        }
    }
    s.push_str(&meta.trailer());
    s
}

/// Gnuplot script plotting `m_r` against `α` and `∂²E` against `j`.
pub fn gnuplot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 900,600\n\
         set output 'mass_vs_alpha.png'\n\
         set logscale x\n\
         set xlabel 'alpha'\n\
         set ylabel 'm_r'\n\
         plot '{csv_name}' using 1:17 with points title 'm_r'\n\
         unset logscale x\n\
         set output 'd2e_vs_scale.png'\n\
         set xlabel 'j'\n\
         set ylabel 'd2E'\n\
         plot '{csv_name}' using 2:16 with linespoints title 'K route', \\\n\
         \x20    '{csv_name}' using 2:15 with points title 'H route', \\\n\
         \x20    '{csv_name}' using 2:14 with points title 'finite difference'\n"
    )
}
