//! Executable loop-measure and determinant identities.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph_loops`]: discrete Laplacians, random-walk loop masses and loop soups on finite graphs.
//! * [`surfaces`]: model surfaces with explicit spectra and a certified heat-trace evaluator.
//! * [`zeta_det`]: spectral zeta functions and zeta-regularized log-determinants.
//! * [`loop_mass`]: Brownian loop masses in quadratic-variation windows and the
//!   small-loop expansion residuals.
//! * [`lattice_bridge`]: discrete torus determinants and their constant-order term.
//! * [`gff`]: discrete Gaussian free field sampling on dyadic grids.
//! * [`subdivision`]: quantum-size square subdivisions, adjacency graphs and ball growth.
//! * [`reweight`]: Dirichlet-energy projections and central-charge reweighting.
//!
//! Heavy inner loops go through [`exec`], which dispatches to rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod error;
pub mod exec;
pub mod gff;
pub mod graph_loops;
pub mod lattice_bridge;
pub mod linalg;
pub mod loop_mass;
pub mod quadrature;
pub mod reweight;
pub mod rng;
pub mod special;
pub mod stats;
pub mod subdivision;
pub mod surfaces;
pub mod zeta_det;

pub use error::{Error, Result};
