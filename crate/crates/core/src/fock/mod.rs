//! Truncated bosonic Fock spaces and sparse operators on them.
//!
//! Ladder amplitudes that would leave the truncation (`Σn > n_max` or
//! `n_m > c_max`) are dropped, so `b*_m` is the exact transpose of `b_m` and
//! the canonical commutation relations hold on the uncapped subspace.

mod basis;
mod operator;

pub use basis::{count_states, FockBasis, Sector, DEFAULT_BASIS_LIMIT};
pub use operator::{FockOperator, Symmetry};

use crate::modes::{ModeGrid, PhotonMode};

/// State vectors are plain coefficient arrays indexed by basis ordinal.
pub type FockVector = Vec<f64>;

/// `(b_m, b*_m)` on the truncated basis.
pub fn ladder(basis: &FockBasis, m: usize) -> (FockOperator, FockOperator) {
    assert!(m < basis.mode_count(), "mode index {m} out of range");
    let mut trip = Vec::new();
    for s in 0..basis.len() {
        if let Some(t) = basis.raised(s, m) {
            let n = basis.occupation(s)[m] as f64;
            trip.push((t, s, (n + 1.0).sqrt()));
        }
    }
    let create = FockOperator::from_triplets(basis.len(), &trip, Symmetry::General);
    let annihilate = create.transpose();
    (annihilate, create)
}

/// Applies `b_m` to a vector without assembling the operator.
pub fn annihilate(basis: &FockBasis, m: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for s in 0..basis.len() {
        if let Some(t) = basis.raised(s, m) {
            let n = basis.occupation(s)[m] as f64;
            out[s] += (n + 1.0).sqrt() * v[t];
        }
    }
    out
}

/// Diagonal operator `Σ_m f(mode_m) n_m` (no quadrature weight). The basis
/// may cover a leading subset of the grid's modes.
pub fn weighted_number_sum(
    basis: &FockBasis,
    grid: &ModeGrid,
    f: impl Fn(&PhotonMode) -> f64,
) -> FockOperator {
    assert!(basis.mode_count() <= grid.len(), "basis has more modes than the grid");
    let coeffs: Vec<f64> = grid.modes().iter().take(basis.mode_count()).map(f).collect();
    number_sum(basis, &coeffs)
}

/// Diagonal operator `Σ_m c_m n_m`.
pub fn number_sum(basis: &FockBasis, coeffs: &[f64]) -> FockOperator {
    assert_eq!(coeffs.len(), basis.mode_count());
    let diag: Vec<f64> = (0..basis.len())
        .map(|s| {
            basis
                .occupation(s)
                .iter()
                .zip(coeffs)
                .filter(|(&n, _)| n != 0)
                .map(|(&n, c)| n as f64 * c)
                .sum()
        })
        .collect();
    FockOperator::diagonal(&diag)
}

/// `Σ_m c_m (b_m + b*_m)`, assembled directly.
pub fn field_sum(basis: &FockBasis, coeffs: &[f64]) -> FockOperator {
    ladder_combination(basis, coeffs, 1.0)
}

/// `Σ_m f_m (b*_m − b_m)`; antisymmetric.
pub fn displacement_generator(basis: &FockBasis, amplitudes: &[f64]) -> FockOperator {
    ladder_combination(basis, amplitudes, -1.0)
}

fn ladder_combination(basis: &FockBasis, coeffs: &[f64], lower_sign: f64) -> FockOperator {
    assert_eq!(coeffs.len(), basis.mode_count());
    let mut trip = Vec::new();
    for s in 0..basis.len() {
        let occ = basis.occupation(s);
        for (m, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if let Some(t) = basis.raised(s, m) {
                let amp = c * (occ[m] as f64 + 1.0).sqrt();
                trip.push((t, s, amp));
                trip.push((s, t, lower_sign * amp));
            }
        }
    }
    let symmetry = if lower_sign == 1.0 {
        Symmetry::Symmetric
    } else {
        Symmetry::General
    };
    FockOperator::from_triplets(basis.len(), &trip, symmetry)
}

/// Applies `Σ_m c_m b*_m`; amplitude leaving the truncation is dropped.
pub fn create_sum(basis: &FockBasis, coeffs: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for s in 0..basis.len() {
        if v[s] == 0.0 {
            continue;
        }
        let occ = basis.occupation(s);
        for (m, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                if let Some(t) = basis.raised(s, m) {
                    out[t] += c * (occ[m] as f64 + 1.0).sqrt() * v[s];
                }
            }
        }
    }
    out
}

/// Norm of the amplitude that `Σ_m c_m b*_m` would push outside the truncation.
pub fn creation_overflow(basis: &FockBasis, coeffs: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for s in 0..basis.len() {
        if v[s] == 0.0 {
            continue;
        }
        let occ = basis.occupation(s);
        let lost: f64 = coeffs
            .iter()
            .enumerate()
            .filter(|(m, c)| **c != 0.0 && basis.raised(s, *m).is_none())
            .map(|(m, c)| c * c * (occ[m] as f64 + 1.0))
            .sum();
        acc += lost * v[s] * v[s];
    }
    acc.sqrt()
}
