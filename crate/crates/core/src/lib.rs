//! Weight construction and numerical checks for parabolic Carleman estimates.
//!
//! The crate builds the double-dyadic cell partitions, regularizes
//! coefficient-size tables into slowly varying sequences, constructs the
//! temporal and spatial weights, and provides a Hermite spectral toolkit,
//! the heat-to-Hermite change of variables, a rough-metric coordinate
//! change, and a verifier that measures every checkable inequality.
//!
//! Partition, regularization, weight and Hermite kernels are generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix them to `f64`.

pub mod error;
pub mod hermite;
pub mod partition;
pub mod regularize;
pub mod scalar;
pub mod smooth;
pub mod transform;
pub mod verifier;
pub mod weights;

pub use error::{Error, Result};
pub use partition::{CellKind, DyadicIndex};
pub use scalar::Scalar;

pub type PartitionWindow = partition::PartitionWindow<f64>;
pub type AlphaTable = regularize::AlphaTable<f64>;
pub type EpsilonTable = regularize::EpsilonTable<f64>;
pub type WeightH = weights::WeightH<f64>;
pub type WeightPhi = weights::WeightPhi<f64>;
pub type AuxWeights = weights::AuxWeights<f64>;
pub type Psi = weights::Psi<f64>;
