//! Majorization-minimization refinement of a DOA estimate on the sphere.
//!
//! Starting from a grid estimate, each step minimizes a surrogate that lies
//! above the cost and touches it at the current iterate, so the cost never
//! increases. Both surrogates are minimized directly over unit vectors; no
//! step size and no projection are involved.

mod gtrs;
mod refine;
mod surrogate;

pub use gtrs::{solve_gtrs, GtrsSolution};
pub use refine::{linear_update, refine, refine_observed, RefinementTrace, Refiner, Variant, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL};
pub use surrogate::{
    cosine_surrogate_coeffs, cosine_upper_bound, majorization_constant, power_mean_gradient, sinc, surrogate_system,
    wrap_phase, PairCoefficients, SurrogateSystem,
};
