use proptest::prelude::*;

use fiberqed::bogoliubov::{weyl_apply, Direction, DisplacementField};
use fiberqed::cascade::validate_params;
use fiberqed::fock::{ladder, FockBasis, FockOperator, Symmetry};
use fiberqed::hamiltonian::ModelParams;
use fiberqed::linalg;
use fiberqed::modes::CutoffSequence;
use fiberqed::output::{decode_sidecar, encode_sidecar};
use fiberqed::spectral::{
    contour_project, dense_spectrum, ground_state_with, Contour, LanczosOptions, ProjectionOptions,
};

fn unit(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ccr_holds_below_the_cap(modes in 1usize..5, n_max in 2usize..4, m in 0usize..5, k in 0usize..5, pick in 0usize..1000) {
        let (m, k) = (m % modes, k % modes);
        let basis = FockBasis::new(modes, n_max, n_max).unwrap();
        let uncapped: Vec<usize> = (0..basis.len()).filter(|&s| basis.total(s) < n_max).collect();
        let s = uncapped[pick % uncapped.len()];
        let (bm, _) = ladder(&basis, m);
        let (_, bk_dag) = ladder(&basis, k);
        let e = unit(basis.len(), s);
        let lhs = linalg::sub(&bm.apply(&bk_dag.apply(&e)), &bk_dag.apply(&bm.apply(&e)));
        let expected = if m == k { e } else { vec![0.0; basis.len()] };
        prop_assert!(linalg::norm(&linalg::sub(&lhs, &expected)) < 1e-12);
    }

    #[test]
    fn weyl_round_trip_is_identity(amps in prop::collection::vec(-0.05f64..0.05, 3), seed in 0usize..50) {
        let basis = FockBasis::new(3, 6, 6).unwrap();
        let field = DisplacementField::from_amplitudes(amps, 0..3).unwrap();
        let v = linalg::normalized(&fiberqed::spectral::generic_vector(basis.len(), seed));
        let w = weyl_apply(&basis, &field, &v, Direction::Forward, 1.0).unwrap();
        let back = weyl_apply(&basis, &field, &w.vector, Direction::Inverse, 1.0).unwrap();
        prop_assert!(w.norm_defect.abs() < 1e-12);
        prop_assert!(linalg::norm(&linalg::sub(&back.vector, &v)) < 1e-11);
    }

    #[test]
    fn sector_embedding_round_trips(modes in 2usize..6, limit in 1usize..6, n_max in 1usize..4, seed in 0usize..50) {
        let limit = limit.min(modes);
        let basis = FockBasis::new(modes, n_max, n_max).unwrap();
        let sector = basis.sector(limit);
        let part = fiberqed::spectral::generic_vector(sector.len(), seed);
        let full = sector.embed(&part);
        prop_assert_eq!(full.len(), basis.len());
        prop_assert_eq!(sector.extract(&full), part);
        prop_assert_eq!(sector.leakage(&full), 0.0);
        for &s in sector.indices() {
            prop_assert!(basis.occupation(s)[limit..].iter().all(|&n| n == 0));
        }
    }

    #[test]
    fn constraint_verdicts_follow_slack(
        alpha in 0.0f64..0.05,
        epsilon in 0.05f64..0.6,
        mu in 0.05f64..0.5,
        rho_minus in 0.01f64..0.5,
        rho_plus in 0.05f64..0.9,
        c_alpha in 0.0f64..0.5,
        px in 0.0f64..0.5,
    ) {
        let params = ModelParams {
            alpha, epsilon, mu, rho_minus, rho_plus, c_alpha_assumed: c_alpha, p: [px, 0.0, 0.0],
            ..ModelParams::default()
        };
        let r = validate_params(&params);
        for c in r.constraints.iter().chain(&r.domain) {
            prop_assert_eq!(c.pass(), c.slack > 0.0);
        }
        prop_assert_eq!(r.all_pass(), r.first_failure().is_none());
    }

    #[test]
    fn cutoffs_are_geometric(lambda in 0.5f64..5.0, epsilon in 0.05f64..0.5, scales in 1usize..8) {
        let c = CutoffSequence::new(lambda, epsilon, scales).unwrap();
        for j in 0..scales {
            let ratio = c.sigma(j + 1) / c.sigma(j);
            prop_assert!((ratio - epsilon).abs() < 1e-12);
        }
        prop_assert!((c.sigma(0) - lambda).abs() < 1e-12);
    }

    #[test]
    fn sidecar_round_trip_is_bitwise(v in prop::collection::vec(any::<f64>(), 0..64)) {
        let back = decode_sidecar(&encode_sidecar(&v)).unwrap();
        prop_assert_eq!(back.len(), v.len());
        prop_assert!(back.iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn lanczos_matches_dense_on_random_symmetric(n in 4usize..40, entries in prop::collection::vec((0usize..40, 0usize..40, -1.0f64..1.0), 10..120)) {
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, i as f64 * 0.37));
        }
        for (i, j, v) in entries {
            let (i, j) = (i % n, j % n);
            trip.push((i, j, v));
            if i != j {
                trip.push((j, i, v));
            }
        }
        let op = FockOperator::from_triplets(n, &trip, Symmetry::Symmetric);
        let spec = dense_spectrum(&op, 100).unwrap();
        prop_assume!(spec.gap() > 1e-3);
        let lz = ground_state_with(&op, &LanczosOptions::default(), None).unwrap();
        prop_assert!((lz.energy - spec.values()[0]).abs() < 1e-10);
    }

    #[test]
    fn contour_projection_isolates_one_level(levels in prop::collection::vec(0.2f64..3.0, 3..12), seed in 0usize..20) {
        let mut d = levels.clone();
        d.push(0.0);
        let op = FockOperator::diagonal(&d);
        let v = fiberqed::spectral::generic_vector(d.len(), seed);
        let contour = Contour::new(0.0, 0.1, 64).unwrap();
        let p = contour_project(&op, &contour, &v, &ProjectionOptions::default()).unwrap();
        let last = d.len() - 1;
        for (i, x) in p.vector.iter().enumerate() {
            let expected = if i == last { v[last] } else { 0.0 };
            prop_assert!((x - expected).abs() < 1e-10);
        }
    }
}
