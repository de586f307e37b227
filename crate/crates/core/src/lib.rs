//! Generalized alternating projections (GAP) on subspaces, smooth manifolds
//! and convex sets.
//!
//! The numerical core is generic over the scalar type: `f32`, `f64`, and
//! for the set families that need no square roots, the exact field
//! [`exact::QuadSurd`]. The aliases below fix the common choices.

pub mod engine;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod linalg;
pub mod local;
pub mod scalar;
pub mod sets;
pub mod spectral;
pub mod subspace;

pub use error::{GapError, Result};

pub type Subspace64 = subspace::Subspace<f64>;
pub type Subspace32 = subspace::Subspace<f32>;
pub type ProjectableSet64 = sets::ProjectableSet<f64>;
pub type ProjectableSet32 = sets::ProjectableSet<f32>;
pub type GapParams64 = engine::GapParams<f64>;
pub type IterationTrace64 = engine::IterationTrace<f64>;
pub type SpectralReport64 = spectral::SpectralReport<f64>;
pub type LocalRateReport64 = local::LocalRateReport<f64>;
/// Elements of Q(√73), the field of the polyhedral counter-example.
pub type Exact73 = exact::QuadSurd<73>;
