//! Killed random walks on finite domains of weighted graphs.
//!
//! The crate builds the killed (Dirichlet) kernel of a domain, solves for its
//! Perron pair and Doob transform, certifies John and inner-uniform geometry,
//! and measures the quantities that govern quasi-stationary behaviour.

pub mod cli;
pub mod defaults;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod inequalities;
pub mod io;
pub mod kernels;
pub mod quasistationary;
pub mod spectral;
pub mod zoo;

pub use error::{Error, Result};
pub use graph::{Domain, Vertex, WeightedGraph};
pub use kernels::{HRule, KernelKind, KernelMatrix};
pub use spectral::{perron_pair, SolverOptions, SpectralPair};
