//! Linear instability analysis for a single-species chemotaxis model coupled
//! to an arbitrary mass-action chemical reaction network.
//!
//! The model couples a population density `u` that climbs the gradient of one
//! chemical (the chemoattractant) to `N` chemical concentrations `v` evolving
//! under diffusion, production by the population, and reaction kinetics:
//!
//! ```text
//! u_t = div(D grad u - chi u grad v_c)
//! v_t = D_tilde lap v + alpha u + g(v)
//! ```
//!
//! with zero-flux boundaries. Whether a homogeneous steady state `(u*, v*)`
//! is linearly unstable reduces to the eigenvalues of the `(N+1) x (N+1)`
//! mode matrix `M(mu)` taken over the Neumann Laplacian spectrum `mu`; the
//! [`spectral`] module builds those matrices and evaluates sufficient
//! destabilization conditions based on Metzler structure and Perron roots,
//! while [`sim`] integrates the full nonlinear system to cross-validate the
//! predictions.

pub mod eigen;
pub mod error;
pub mod matrix;
pub mod model;
pub mod parse;
pub mod sim;
pub mod spectral;
pub mod steady;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, ParseError, Result};
pub use model::{DomainSpec, ModelSpec, Reaction, ReactionNetwork, Species};
pub use steady::SteadyState;
