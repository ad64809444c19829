//! Coupled inner/outer cortical surface reconstruction.
//!
//! A midthickness surface is extracted from the sum of the white-matter and
//! gray-matter signed distance fields, warped by the flow of a stationary
//! velocity field, and offset inward and outward by a half-thickness field to
//! produce the white-matter and pial surfaces together. The velocity and
//! half-thickness grids are fitted by gradient descent with hand-written
//! adjoints.

pub mod deform;
pub mod error;
pub mod levelset;
pub mod losses;
pub mod mesh;
pub mod phantom;
pub mod metrics;
pub mod optimize;
pub mod spatial;
pub mod volume;

pub use error::{Error, Result};
pub use levelset::TopologyReport;
pub use mesh::{MeshAdjacency, TriMesh};
pub use volume::{NormalizedFrame, ScalarVolume, VectorVolume};

/// Points and vectors in normalized coordinates.
pub type Vec3 = nalgebra::Vector3<f64>;
