//! Generalized birth-death processes on finite q-dimensional grids.
//!
//! A process moves along exactly one coordinate per step, forward by at
//! most `l1` or backward by at most `l2`. When the directional transition
//! matrices commute and `l1 = l2`, k-step probabilities follow from the
//! eigensystems of one small symmetric banded block per axis.
//!
//! Modules:
//! - [`lattice`]: grid shapes, state indexing, edges, adjacency/Laplacian
//! - [`model`]: transition models and validation
//! - [`commute`]: commutators and the bilinear two-step identities
//! - [`param`]: vertex/edge parametrization, its recovery, detailed balance
//! - [`spectral`]: block decomposition, Jacobi eigensolver, k-step matrices
//! - [`stochastic`]: Perron-root normalization
//! - [`algebra`]: integer constraint/parameter matrices and exact ranks
//! - [`simulate`]: Monte Carlo trajectories
//! - [`io`]: file formats

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod commute;
pub mod error;
pub mod io;
pub mod lattice;
pub mod model;
pub mod param;
pub mod simulate;
pub mod spectral;
pub mod stochastic;

pub use error::{GbdpError, Result};
pub use lattice::{DirectedEdge, Grid, GridShape, State};
pub use model::{SelfTransition, TransitionModel};
pub use param::{EdgeClass, Parametrization};

/// Environment variable overriding the default absolute tolerance of the CLI.
pub const TOL_ENV: &str = "GBDP_TOL";

/// [`commute::DEFAULT_TOL`] unless `GBDP_TOL` holds a positive number.
pub fn default_tolerance() -> f64 {
    std::env::var(TOL_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|t| *t > 0.0 && t.is_finite())
        .unwrap_or(commute::DEFAULT_TOL)
}
