//! Photon momentum discretization.
//!
//! The ball of radius `Λ` is cut into geometric shells `σ_{j+1} < |k| ≤ σ_j`
//! with `σ_j = Λ ε^j`. Each shell is split radially into `n_radial` cells on
//! a geometric subdivision, and each cell is combined with a fixed weighted
//! point set on the unit sphere. Every (radial, angular) node carries two
//! transverse polarizations.
//!
//! Weights are midpoint-rule cell volumes, `4π r_mid² Δr`, times the
//! normalized angular weight. The per-cell volume error is exactly `π Δr³ / 3`
//! (the midpoint rule underestimates `∫ 4π r² dr`), so shell sums converge at
//! second order on radial refinement.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Infrared cutoff sequence `σ_j = Λ ε^j`, `j = 0..=scales`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSequence {
    lambda: f64,
    epsilon: f64,
    scales: usize,
}

impl CutoffSequence {
    pub fn new(lambda: f64, epsilon: f64, scales: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Parameter(format!("Lambda must be positive, got {lambda}")));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::Parameter(format!(
                "epsilon must lie in (0, 1/2), got {epsilon}"
            )));
        }
        if scales == 0 {
            return Err(Error::Parameter("J must be at least 1".into()));
        }
        Ok(Self {
            lambda,
            epsilon,
            scales,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of shells, `J`.
    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn sigma(&self, j: usize) -> f64 {
        self.lambda * self.epsilon.powi(j as i32)
    }
}

/// Built-in weighted point sets on the unit sphere. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub enum AngularSet {
    /// `±x̂, ±ŷ, ±ẑ`; invariant under every coordinate permutation.
    Octahedral6,
    /// Vertices of the regular icosahedron.
    Icosahedral12,
    /// Caller-supplied directions and weights (weights must sum to one).
    Custom(Vec<(Vec3, f64)>),
}

impl AngularSet {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "octahedral6" | "octahedral" | "6" => Ok(AngularSet::Octahedral6),
            "icosahedral12" | "icosahedral" | "12" => Ok(AngularSet::Icosahedral12),
            other => Err(Error::Parameter(format!(
                "unknown angular set '{other}' (expected octahedral6 or icosahedral12)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AngularSet::Octahedral6 => "octahedral6",
            AngularSet::Icosahedral12 => "icosahedral12",
            AngularSet::Custom(_) => "custom",
        }
    }

    pub fn points(&self) -> Result<Vec<(Vec3, f64)>> {
        match self {
            AngularSet::Octahedral6 => {
                let w = 1.0 / 6.0;
                Ok(vec![
                    ([1.0, 0.0, 0.0], w),
                    ([-1.0, 0.0, 0.0], w),
                    ([0.0, 1.0, 0.0], w),
                    ([0.0, -1.0, 0.0], w),
                    ([0.0, 0.0, 1.0], w),
                    ([0.0, 0.0, -1.0], w),
                ])
            }
            AngularSet::Icosahedral12 => {
                let phi = 0.5 * (1.0 + 5f64.sqrt());
                let s = 1.0 / (1.0 + phi * phi).sqrt();
                let mut pts = Vec::with_capacity(12);
                for &a in &[1.0, -1.0] {
                    for &b in &[1.0, -1.0] {
                        pts.push([0.0, a * s, b * phi * s]);
                        pts.push([a * s, b * phi * s, 0.0]);
                        pts.push([b * phi * s, 0.0, a * s]);
                    }
                }
                Ok(pts.into_iter().map(|p| (p, 1.0 / 12.0)).collect())
            }
            AngularSet::Custom(points) => {
                if points.is_empty() {
                    return Err(Error::Parameter("custom angular set is empty".into()));
                }
                let total: f64 = points.iter().map(|(_, w)| w).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Parameter(format!(
                        "custom angular weights sum to {total}, expected 1"
                    )));
                }
                points
                    .iter()
                    .map(|&(p, w)| {
                        let n = vec3::norm(p);
                        if n == 0.0 {
                            Err(Error::Domain("zero direction in angular set".into()))
                        } else {
                            Ok((vec3::scale(1.0 / n, p), w))
                        }
                    })
                    .collect()
            }
        }
    }
}

/// One discrete photon mode: a momentum node with one transverse polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonMode {
    pub k: Vec3,
    pub knorm: f64,
    pub khat: Vec3,
    /// Shell index `j` with `σ_{j+1} < |k| ≤ σ_j`.
    pub shell: usize,
    /// Momentum-space volume carried by the mode.
    pub weight: f64,
    /// Polarization label, 1 or 2.
    pub lambda: u8,
    pub eps: Vec3,
}

impl PhotonMode {
    /// Continuum coupling `d³k/√|k|` discretized as `√(w/|k|)`.
    pub fn coupling(&self) -> f64 {
        (self.weight / self.knorm).sqrt()
    }
}

/// Returns `(ε₁, ε₂)` such that `(ε₁, ε₂, k̂)` is a right-handed orthonormal
/// triad. `ε₁ ∝ ẑ × k̂`; within `1e-6` of the poles the frame is seeded with
/// the transverse part of `x̂` instead, so `k̂ = ẑ` gives `(x̂, ŷ)`.
pub fn polarization_frame(khat: Vec3) -> Result<(Vec3, Vec3)> {
    let n = vec3::norm(khat);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Domain("polarization frame of a zero vector".into()));
    }
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("direction has norm {n}, expected 1")));
    }
    let zx = vec3::cross([0.0, 0.0, 1.0], khat);
    let seed = if vec3::norm(zx) < 1e-6 {
        let x = [1.0, 0.0, 0.0];
        vec3::sub(x, vec3::scale(vec3::dot(x, khat), khat))
    } else {
        zx
    };
    let eps1 = vec3::scale(1.0 / vec3::norm(seed), seed);
    let eps2 = vec3::cross(khat, eps1);
    Ok((eps1, eps2))
}

/// Immutable discretization of `B_Λ` aligned with a cutoff sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    modes: Vec<PhotonMode>,
    cutoffs: CutoffSequence,
    n_radial: usize,
    angular: AngularSet,
    shell_starts: Vec<usize>,
}

impl ModeGrid {
    /// Builds the grid; mode order is shell, radial cell, angular point,
    /// polarization.
    pub fn build(cutoffs: CutoffSequence, n_radial: usize, angular: AngularSet) -> Result<Self> {
        if n_radial == 0 {
            return Err(Error::Parameter("n_radial must be at least 1".into()));
        }
        let points = angular.points()?;
        let mut modes = Vec::new();
        let mut shell_starts = Vec::with_capacity(cutoffs.scales() + 1);
        for shell in 0..cutoffs.scales() {
            shell_starts.push(modes.len());
            let outer = cutoffs.sigma(shell);
            let inner = cutoffs.sigma(shell + 1);
            let ratio = outer / inner;
            for cell in 0..n_radial {
                let r0 = inner * ratio.powf(cell as f64 / n_radial as f64);
                let r1 = if cell + 1 == n_radial {
                    outer
                } else {
                    inner * ratio.powf((cell + 1) as f64 / n_radial as f64)
                };
                let r = 0.5 * (r0 + r1);
                let cell_volume = 4.0 * std::f64::consts::PI * r * r * (r1 - r0);
                for &(khat, w_ang) in &points {
                    let (eps1, eps2) = polarization_frame(khat)?;
                    let k = vec3::scale(r, khat);
                    for (lambda, eps) in [(1u8, eps1), (2u8, eps2)] {
                        modes.push(PhotonMode {
                            k,
                            knorm: r,
                            khat,
                            shell,
                            weight: cell_volume * w_ang,
                            lambda,
                            eps,
                        });
                    }
                }
            }
        }
        shell_starts.push(modes.len());
        Ok(Self {
            modes,
            cutoffs,
            n_radial,
            angular,
            shell_starts,
        })
    }

    pub fn modes(&self) -> &[PhotonMode] {
        &self.modes
    }

    pub fn mode(&self, m: usize) -> &PhotonMode {
        &self.modes[m]
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn cutoffs(&self) -> &CutoffSequence {
        &self.cutoffs
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn angular(&self) -> &AngularSet {
        &self.angular
    }

    /// Mode indices belonging to the given shells (clamped to the grid).
    pub fn shell_modes(&self, shells: Range<usize>) -> Range<usize> {
        let nshell = self.cutoffs.scales();
        let lo = shells.start.min(nshell);
        let hi = shells.end.clamp(lo, nshell);
        self.shell_starts[lo]..self.shell_starts[hi]
    }

    /// Modes with `σ_j < |k| ≤ Λ`, i.e. the interaction support at scale `j`.
    pub fn active_modes(&self, j: usize) -> Range<usize> {
        self.shell_modes(0..j)
    }

    pub fn shell_weight(&self, shell: usize) -> f64 {
        self.modes[self.shell_modes(shell..shell + 1)]
            .iter()
            .map(|m| m.weight)
            .sum()
    }

    /// CSV dump: `index,j,kx,ky,kz,knorm,weight,lambda,ex,ey,ez`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,j,kx,ky,kz,knorm,weight,lambda,ex,ey,ez\n");
        for (i, m) in self.modes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e}",
                m.shell, m.k[0], m.k[1], m.k[2], m.knorm, m.weight, m.lambda, m.eps[0], m.eps[1], m.eps[2]
            );
        }
        out
    }
}

/// Exact volume of shell `j`: `(4π/3)(σ_j³ − σ_{j+1}³)`.
pub fn shell_volume(cutoffs: &CutoffSequence, shell: usize) -> f64 {
    let a = cutoffs.sigma(shell + 1);
    let b = cutoffs.sigma(shell);
    4.0 / 3.0 * std::f64::consts::PI * (b.powi(3) - a.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut(eps: f64, j: usize) -> CutoffSequence {
        CutoffSequence::new(1.0, eps, j).unwrap()
    }

    #[test]
    fn cutoff_sequence_is_geometric() {
        let c = cut(0.3, 4);
        assert_eq!(c.sigma(0), 1.0);
        for j in 0..4 {
            assert!(c.sigma(j + 1) < c.sigma(j));
            assert!((c.sigma(j + 1) / c.sigma(j) - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_cutoffs_rejected() {
        assert!(CutoffSequence::new(1.0, 0.6, 2).is_err());
        assert!(CutoffSequence::new(1.0, 0.0, 2).is_err());
        assert!(CutoffSequence::new(1.0, 0.25, 0).is_err());
    }

    #[test]
    fn single_shell_octahedral_count() {
        let g = ModeGrid::build(cut(0.25, 1), 1, AngularSet::Octahedral6).unwrap();
        assert_eq!(g.len(), 12);
        assert!(g.modes().iter().all(|m| m.knorm > 0.25 && m.knorm <= 1.0));
    }

    #[test]
    fn two_shells_count() {
        let g = ModeGrid::build(cut(0.25, 2), 1, AngularSet::Octahedral6).unwrap();
        assert_eq!(g.len(), 24);
        assert_eq!(g.shell_modes(0..1), 0..12);
        assert_eq!(g.shell_modes(1..2), 12..24);
        assert_eq!(g.active_modes(0), 0..0);
        for m in &g.modes()[12..] {
            assert!(m.knorm > 0.25f64.powi(2) && m.knorm <= 0.25);
        }
    }

    #[test]
    fn shell_weight_matches_documented_midpoint_error() {
        let c = cut(0.25, 1);
        let g = ModeGrid::build(c, 1, AngularSet::Octahedral6).unwrap();
        let exact = shell_volume(&c, 0);
        assert!((exact - 4.1233).abs() < 1e-4);
        // Two polarizations per node double the angular weight sum.
        let per_pol = g.shell_weight(0) / 2.0;
        let dr: f64 = 0.75;
        assert!((exact - per_pol - std::f64::consts::PI * dr.powi(3) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn shell_volume_error_decreases_on_doubling() {
        let c = cut(0.25, 1);
        let exact = shell_volume(&c, 0);
        let mut last = f64::INFINITY;
        for n in [1, 2, 4, 8, 16] {
            let g = ModeGrid::build(c, n, AngularSet::Icosahedral12).unwrap();
            let err = (g.shell_weight(0) / 2.0 - exact).abs();
            assert!(err < last, "n_radial={n}: {err} !< {last}");
            last = err;
        }
    }

    #[test]
    fn pole_and_equator_frames() {
        let (e1, e2) = polarization_frame([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(e1, [1.0, 0.0, 0.0]);
        assert_eq!(e2, [0.0, 1.0, 0.0]);
        let (e1, e2) = polarization_frame([1.0, 0.0, 0.0]).unwrap();
        assert!(vec3::norm(vec3::sub(e1, [0.0, 1.0, 0.0])) < 1e-15);
        assert!(vec3::norm(vec3::sub(e2, [0.0, 0.0, 1.0])) < 1e-15);
        assert!(polarization_frame([0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn every_mode_is_transverse_and_unit() {
        let g = ModeGrid::build(cut(0.3, 3), 2, AngularSet::Icosahedral12).unwrap();
        for pair in g.modes().chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            assert_eq!(a.k, b.k);
            assert!(vec3::dot(a.eps, a.khat).abs() < 1e-12);
            assert!((vec3::norm(a.eps) - 1.0).abs() < 1e-12);
            assert!(vec3::dot(a.eps, b.eps).abs() < 1e-12);
            let c = cutoffs_of(&g);
            assert!(a.knorm > c.sigma(a.shell + 1) && a.knorm <= c.sigma(a.shell));
        }
    }

    fn cutoffs_of(g: &ModeGrid) -> CutoffSequence {
        *g.cutoffs()
    }

    #[test]
    fn grid_is_deterministic() {
        let a = ModeGrid::build(cut(0.3, 2), 3, AngularSet::Icosahedral12).unwrap();
        let b = ModeGrid::build(cut(0.3, 2), 3, AngularSet::Icosahedral12).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn frame_is_right_handed_orthonormal(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
                let n = (x * x + y * y + z * z).sqrt();
                prop_assume!(n > 1e-3);
                let k = [x / n, y / n, z / n];
                prop_assume!((vec3::norm(k) - 1.0).abs() <= 1e-12);
                let (e1, e2) = polarization_frame(k).unwrap();
                prop_assert!(vec3::dot(e1, k).abs() < 1e-12);
                prop_assert!(vec3::dot(e2, k).abs() < 1e-12);
                prop_assert!(vec3::dot(e1, e2).abs() < 1e-12);
                prop_assert!(vec3::norm(vec3::sub(vec3::cross(e1, e2), k)) < 1e-12);
            }
        }
    }
}
