//! Deterministic CONGEST simulation of expander routing and sorting.
//!
//! The stack runs bottom-up: [`graph`] and [`sim`] provide the host model,
//! [`decomposition`] builds the hierarchy, [`shuffler`] mixes tokens across
//! parts, [`sorting`] and [`routing`] implement the query-time primitives and
//! [`equivalence`] reduces each of sorting and routing to the other.

pub mod decomposition;
pub mod equivalence;
pub mod graph;
pub mod harness;
pub mod numeric;
pub mod routing;
pub mod shuffler;
pub mod sim;
pub mod sorting;

pub use num_rational::BigRational as Rational;

pub use graph::{Embedding, Graph, PathSet};
pub use numeric::Scalar;

/// Cut player running its projections in double precision.
pub type CutPlayerF64 = shuffler::CutPlayer<f64>;
/// Cut player running its projections in single precision.
pub type CutPlayerF32 = shuffler::CutPlayer<f32>;
/// Spectral certification in double precision.
pub type SpectralF64 = numeric::SpectralEstimate<f64>;
