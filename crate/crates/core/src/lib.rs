//! Shape reconstruction and editing from Laplacian spectra.
//!
//! A shape is described by the consecutive differences of the low end of its
//! global Laplace–Beltrami spectrum, concatenated with the same differences
//! taken from one or more localized operators living on user-provided
//! regions. A fully connected decoder maps such encodings back to vertex
//! coordinates, which makes it possible to swap or interpolate the global and
//! local parts independently.
//!
//! The crate is organised bottom-up:
//!
//! - [`geom`]: meshes, point clouds, regions, file IO and the synthetic cube dataset
//! - [`sparse`]: symmetric sparse matrices
//! - [`operators`]: cotangent Laplacian, Dirichlet reduction and the localized operators
//! - [`eigen`]: truncated generalized eigensolver plus a dense reference
//! - [`encoding`]: spectral encodings and the swap/interpolate algebra
//! - [`decoder`]: the MLP, its training loop and checkpoints
//! - [`metrics`]: reconstruction measures and the nearest-neighbour baseline
//! - [`pipeline`]: glue that turns shapes into encodings for a given configuration

pub mod decoder;
pub mod eigen;
pub mod encoding;
mod error;
pub mod geom;
pub mod metrics;
pub mod operators;
pub mod pipeline;
pub mod sparse;

pub use decoder::{init_decoder, DecoderModel, LossKind, TrainConfig};
pub use eigen::Spectrum;
pub use encoding::{EncodingStats, Segment, SpectralEncoding};
pub use error::{Error, Result};
pub use geom::{Mesh, PointCloud, Region, Shape};
pub use operators::{LocalizedOperatorKind, MassMatrix, SparseOperator};
pub use pipeline::EncodingConfig;
