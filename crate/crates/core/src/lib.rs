// `!(x <= tol)` deliberately rejects NaN; index loops mirror the mode sums.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bogoliubov;
pub mod cascade;
pub mod config;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod linalg;
pub mod modes;
pub mod observables;
pub mod output;
pub mod spectral;
pub mod vec3;
pub mod verify;

pub use error::{Error, Result};
