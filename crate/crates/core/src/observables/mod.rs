//! Physics outputs and identity/bound probes built on a cascade.

mod curvature;
mod gradient;
mod probes;
mod scan;

pub use curvature::{d2e_h_contour, d2e_k_contour, momentum_axis, KCurvature, ORTHOGONALITY_TOL};
pub use gradient::{
    d2e_finite_difference, eigen_residual, energy_at, grad_e_feynman_hellmann, grad_e_finite_difference,
    grad_from_beta, DEFAULT_CURVATURE_STEP, DEFAULT_GRADIENT_STEP, STALE_RESIDUAL,
};
pub use scan::{
    curvature_contour, gnuplot_script, h_route, k_route, mass_scan, scan_csv, scan_row, MassScanRow, ScanFamily,
    ScanOptions, SCAN_HEADER,
};
pub use probes::{
    bounds_probe_b, c_alpha_free, c_alpha_probe, grid_is_cyclic_symmetric, pull_through_all, pull_through_probe,
    rotation_check, soft_photon_probe, spread, BoundsReport, BoundsRow, CAlphaProbe, PullThrough, ResolventBounds,
    RotationCheck, SoftPhotonProbe, SoftPhotonRow,
};
