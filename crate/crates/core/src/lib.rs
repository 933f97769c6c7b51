//! Discrete geometric singular perturbation theory for fast-slow maps
//! `z -> z + N(z) f(z) + eps G(z, eps)`.
//!
//! The critical manifold is `S = {f = 0}`. Along `S` the map has `k` unit multipliers and
//! `n - k` nontrivial ones, the eigenvalues of `I + Df N`. Away from folds and flips the
//! slow manifold `S_eps` is a graph over `S`, computed here both by its first-order
//! expansion and as the fixed point of a graph transform.

pub mod analysis;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod map;
pub mod models;
pub mod ode;
pub mod poincare;
pub mod reduced;
pub mod spectral;
pub mod spline;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use manifold::{Direction, GraphManifold, Grid, ProjectionMatrix};
pub use map::{Chart, FastSlowMap, Trajectory};
pub use spectral::{Classification, SingularityHit, SingularityKind, SpectralBounds, SpectrumReport};
