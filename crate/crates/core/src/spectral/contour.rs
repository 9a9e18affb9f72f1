use std::f64::consts::PI;

use super::resolvent::{resolvent_for, Resolvent, ResolventOptions};
use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::linalg::{self, C64};

/// Default quadrature node count.
pub const DEFAULT_NODES: usize = 64;

/// Circle `|z − center| = radius` with `nodes` equispaced trapezoidal nodes.
///
/// Integrals follow the clockwise orientation, for which
/// `(1/2πi)∮ dz/z = −1` and `(1/2πi)∮ (A − z)^{-1} dz` is the spectral
/// projector onto the enclosed eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    center: f64,
    radius: f64,
    nodes: usize,
}

impl Contour {
    pub fn new(center: f64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::Parameter(format!("contour radius {radius} must be positive and finite")));
        }
        if nodes < 8 || !nodes.is_multiple_of(2) {
            return Err(Error::Parameter(format!("contour needs an even node count ≥ 8, got {nodes}")));
        }
        Ok(Self { center, radius, nodes })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn doubled(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
            ..*self
        }
    }

    pub fn encloses(&self, x: f64) -> bool {
        (x - self.center).abs() < self.radius
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.nodes)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / self.nodes as f64;
                C64::new(self.center, 0.0) + C64::from_polar(self.radius, t)
            })
            .collect()
    }

    /// Weights with `(1/2πi)∮ g(z) dz ≈ Σ_k w_k g(z_k)`.
    pub fn weights(&self) -> Vec<C64> {
        let c = C64::new(self.center, 0.0);
        self.points()
            .iter()
            .map(|&z| -(z - c) / self.nodes as f64)
            .collect()
    }

    /// Weights with `∮ h(z) dz̄ ≈ Σ_k w_k h(z_k)`.
    pub fn conj_differentials(&self) -> Vec<C64> {
        let c = C64::new(self.center, 0.0);
        let step = 2.0 * PI / self.nodes as f64;
        self.points()
            .iter()
            .map(|&z| -(C64::new(0.0, 1.0) * (z - c)).conj() * step)
            .collect()
    }

    /// Smallest distance from the circle to the given eigenvalues.
    pub fn margin(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|&l| ((l - self.center).abs() - self.radius).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub vector: Vec<f64>,
    /// `‖P(Pv) − Pv‖ / ‖v‖`.
    pub idempotence_defect: f64,
    /// Imaginary part left by the quadrature, relative to `‖v‖`.
    pub imaginary_residue: f64,
    pub contour: Contour,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub idempotence_tol: f64,
    pub max_nodes: usize,
    pub resolvent: ResolventOptions,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            idempotence_tol: 1e-8,
            max_nodes: 1024,
            resolvent: ResolventOptions::default(),
        }
    }
}

/// One quadrature application of the projector.
pub fn project_once(res: &dyn Resolvent, contour: &Contour, v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let zs = contour.points();
    let ws = contour.weights();
    let xs = res.solve_shifts(&zs, &linalg::to_complex(v))?;
    let mut acc = vec![C64::new(0.0, 0.0); v.len()];
    for (w, x) in ws.iter().zip(&xs) {
        for (a, xi) in acc.iter_mut().zip(x) {
            *a += w * xi;
        }
    }
    let im = acc.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    Ok((acc.iter().map(|z| z.re).collect(), im))
}

fn check_enclosure(res: &dyn Resolvent, contour: &Contour) -> Result<()> {
    if let Some(spec) = res.spectrum() {
        let inside = spec.count_inside(|l| contour.encloses(l));
        if inside != 1 {
            return Err(Error::Contour(format!(
                "contour (center {:.6e}, radius {:.3e}) encloses {inside} eigenvalues",
                contour.center(),
                contour.radius()
            )));
        }
    }
    Ok(())
}

/// Projection with a prepared resolvent, doubling the node count until the
/// idempotence defect is below tolerance.
pub fn contour_project_with(
    res: &dyn Resolvent,
    contour: &Contour,
    v: &[f64],
    opts: &ProjectionOptions,
) -> Result<Projection> {
    check_enclosure(res, contour)?;
    let vn = linalg::norm(v);
    if vn == 0.0 {
        return Err(Error::Precondition("projection of the zero vector".into()));
    }
    let mut c = *contour;
    loop {
        let (pv, im) = project_once(res, &c, v)?;
        let (ppv, _) = project_once(res, &c, &pv)?;
        let defect = linalg::norm(&linalg::sub(&ppv, &pv)) / vn;
        if defect <= opts.idempotence_tol {
            return Ok(Projection {
                vector: pv,
                idempotence_defect: defect,
                imaginary_residue: im / vn,
                contour: c,
            });
        }
        if 2 * c.nodes() > opts.max_nodes {
            return Err(Error::Contour(format!(
                "idempotence defect {defect:.3e} at {} nodes; contour likely crosses the spectrum",
                c.nodes()
            )));
        }
        c = c.doubled();
    }
}

/// Spectral projection of `v` onto the eigenvalue enclosed by `contour`.
pub fn contour_project(op: &FockOperator, contour: &Contour, v: &[f64], opts: &ProjectionOptions) -> Result<Projection> {
    let res = resolvent_for(op, &opts.resolvent)?;
    contour_project_with(res.as_ref(), contour, v, opts)
}

#[derive(Debug, Clone)]
pub struct NeumannProjection {
    pub vector: Vec<f64>,
    /// `‖term_n‖` for `n = 0..terms`.
    pub term_norms: Vec<f64>,
    /// Geometric tail estimate from the last ratio.
    pub tail_bound: f64,
    /// Set when the last term norms did not decrease.
    pub diverging: bool,
}

/// Partial sums of `(1/2πi)∮ Σ_n R(z)[−ΔH R(z)]^n dz v`, with `R` the
/// resolvent of the unperturbed operator. Stops early once a term falls
/// below `1e-15 ‖v‖`.
pub fn neumann_project(
    res_prev: &dyn Resolvent,
    delta: &FockOperator,
    contour: &Contour,
    v: &[f64],
    terms: usize,
) -> Result<NeumannProjection> {
    if terms == 0 {
        return Err(Error::Parameter("Neumann series needs at least one term".into()));
    }
    let zs = contour.points();
    let ws = contour.weights();
    let mut chain = res_prev.solve_shifts(&zs, &linalg::to_complex(v))?;
    let mut vector = vec![0.0; v.len()];
    let mut term_norms = Vec::with_capacity(terms);
    let floor = 1e-15 * linalg::norm(v);
    for n in 0..terms {
        if n >= 2 && term_norms.last().is_some_and(|t: &f64| *t <= floor) {
            break;
        }
        if n > 0 {
            let rhs: Vec<Vec<C64>> = chain
                .iter()
                .map(|x| delta.apply_complex(x).into_iter().map(|c| -c).collect())
                .collect();
            chain = res_prev.solve_pairs(&zs, &rhs)?;
        }
        let mut term = vec![0.0; v.len()];
        for (w, x) in ws.iter().zip(&chain) {
            for (t, xi) in term.iter_mut().zip(x) {
                *t += (w * xi).re;
            }
        }
        term_norms.push(linalg::norm(&term));
        linalg::axpy(1.0, &term, &mut vector);
    }
    let used = term_norms.len();
    let (diverging, tail_bound) = if used >= 2 {
        let last = term_norms[used - 1];
        let prev = term_norms[used - 2];
        let ratio = if prev > 0.0 { last / prev } else { 0.0 };
        if ratio >= 1.0 {
            (true, f64::INFINITY)
        } else {
            (false, last * ratio / (1.0 - ratio))
        }
    } else {
        (false, f64::NAN)
    };
    Ok(NeumannProjection {
        vector,
        term_norms,
        tail_bound,
        diverging,
    })
}
