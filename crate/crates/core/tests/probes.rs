use fiberqed::cascade::{run_cascade, SolverOptions};
use fiberqed::fock::FockBasis;
use fiberqed::hamiltonian::ModelParams;
use fiberqed::modes::{AngularSet, ModeGrid};
use fiberqed::observables::{
    c_alpha_free, c_alpha_probe, energy_at, mass_scan, pull_through_all, rotation_check, scan_csv,
    soft_photon_probe, ScanFamily, ScanOptions, SCAN_HEADER,
};
use fiberqed::output::RunMetadata;
use fiberqed::spectral::{LanczosOptions, ResolventOptions};
use fiberqed::Error;

fn setup(alpha: f64, scales: usize) -> (ModelParams, ModeGrid, FockBasis) {
    let params = ModelParams { alpha, scales, ..ModelParams::default() };
    let grid = ModeGrid::build(params.cutoffs().unwrap(), 1, AngularSet::Octahedral6).unwrap();
    let basis = FockBasis::new(grid.len(), 2, 2).unwrap();
    (params, grid, basis)
}

#[test]
fn free_theory_probes_vanish() {
    let (params, grid, basis) = setup(0.0, 1);
    let gs = energy_at(&params, &grid, &basis, 1, &LanczosOptions::default()).unwrap();
    let soft = soft_photon_probe(&gs.vector, &params, &grid, &basis, 1).unwrap();
    assert_eq!(soft.constant, 0.0);
    let pull = pull_through_all(&gs.vector, &params, &grid, &basis, 1, &ResolventOptions::default()).unwrap();
    assert_eq!(pull.len(), grid.len());
    assert!(pull.iter().all(|r| r.residual == 0.0 && r.lhs_norm < 1e-12));
}

#[test]
fn free_c_alpha_matches_the_closed_form() {
    let (params, grid, basis) = setup(0.0, 2);
    let probe = c_alpha_probe(&params, &grid, &basis, 2, &LanczosOptions::default()).unwrap();
    let free = c_alpha_free(params.p, &grid, 2);
    assert!((probe.value - free).abs() < 1e-10, "{} vs {free}", probe.value);
    assert!(free <= 1.0 / 3.0);
}

#[test]
fn weak_coupling_pull_through_is_small() {
    let (params, grid, basis) = setup(1e-3, 1);
    let gs = energy_at(&params, &grid, &basis, 1, &LanczosOptions::default()).unwrap();
    let rows = pull_through_all(&gs.vector, &params, &grid, &basis, 1, &ResolventOptions::default()).unwrap();
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    assert!(worst < 0.1, "{worst}");
}

#[test]
fn energy_is_invariant_under_cyclic_axis_permutation() {
    let (mut params, grid, basis) = setup(1e-3, 1);
    params.p = [0.1, 0.05, 0.02];
    let rc = rotation_check(&params, &grid, &basis, 1, &LanczosOptions::default()).unwrap();
    assert!(rc.difference < 1e-10, "{rc:?}");
}

#[test]
fn scan_csv_has_header_rows_comments_and_trailer() {
    let (params, grid, basis) = setup(1e-4, 2);
    let solver = SolverOptions { allow_invalid: true, ..SolverOptions::default() };
    let mut families =
        mass_scan(&[1e-4], &[[0.1, 0.0, 0.0]], &params, &grid, &basis, 1, &solver, &ScanOptions::default()).unwrap();
    families.push(ScanFamily {
        alpha: 5.0,
        p: [0.1, 0.0, 0.0],
        rows: Err(Error::Parameter("synthetic failure".into())),
    });
    let meta = RunMetadata::for_config("x = 1");
    let csv = scan_csv(&families, &meta);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SCAN_HEADER);
    let width = SCAN_HEADER.split(',').count();
    let data: Vec<&&str> = lines.iter().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2);
    assert!(data.iter().all(|l| l.split(',').count() == width));
    assert!(csv.contains("synthetic failure"));
    assert!(csv.ends_with(&meta.trailer()));
}

#[test]
fn empty_scan_lists_are_rejected() {
    let (params, grid, basis) = setup(1e-4, 1);
    let r = mass_scan(&[], &[[0.1, 0.0, 0.0]], &params, &grid, &basis, 1, &SolverOptions::default(), &ScanOptions::default());
    assert!(matches!(r, Err(Error::Parameter(_))));
    let solver = SolverOptions { allow_invalid: true, ..SolverOptions::default() };
    let state = run_cascade(&params, &grid, &basis, &solver).unwrap();
    assert_eq!(state.records.len(), 2);
}
