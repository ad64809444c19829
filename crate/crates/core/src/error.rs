use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate mask (no boundary)")]
    DegenerateMask,

    #[error("zero dynamic range")]
    ZeroDynamicRange,

    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch([usize; 3], [usize; 3]),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("empty isosurface")]
    EmptyIsosurface,

    /// Every face around the vertex has (near) zero area, so no normal exists.
    #[error("vertex {0} has only degenerate incident faces")]
    DegenerateVertex(usize),

    #[error("degenerate face {0} on a shared edge")]
    DegenerateFace(usize),

    #[error("mesh has zero surface area")]
    ZeroArea,

    #[error("empty point set")]
    EmptyPointSet,

    #[error("topology repair failed after {0} rounds")]
    TopologyRepairFailed(usize),

    #[error("non-finite loss at iteration {0}")]
    NonFiniteLoss(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
