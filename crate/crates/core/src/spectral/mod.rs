//! Dense oracle, Lanczos ground states, shifted solves, and contour-integral
//! projectors.

mod contour;
mod dense;
mod lanczos;
mod resolvent;

pub use contour::{
    contour_project, contour_project_with, neumann_project, project_once, Contour, NeumannProjection, Projection,
    ProjectionOptions, DEFAULT_NODES,
};
pub use dense::{dense_spectrum, DenseSpectrum, DEFAULT_DENSE_LIMIT};
pub use lanczos::{
    generic_vector, ground_state, ground_state_with, GroundStateRecord, LanczosOptions, SolverMethod, DEGENERACY_GAP,
};
pub use resolvent::{
    relative_residual, resolvent_apply, resolvent_for, DenseResolvent, KrylovResolvent, Resolvent, ResolventOptions,
};
