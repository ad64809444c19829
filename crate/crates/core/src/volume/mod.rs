//! Dense 3D grids, distance transforms and trilinear sampling.
//!
//! Grids are stored row-major with x fastest: the linear index of voxel
//! `(i, j, k)` is `i + nx * (j + ny * k)`. Every grid carries a
//! [`NormalizedFrame`] mapping voxel indices onto `[-1, 1]^3`, which is the
//! coordinate system all meshes live in. Grids of different resolution share
//! that frame, so a coarse velocity grid and a fine mask grid cover the same
//! domain.

mod edt;
pub mod io;
pub(crate) mod sample;

pub use edt::{edt_squared, signed_distance};
pub use sample::{scalar_sample_adjoint, vector_sample_adjoint, Stencil};

use crate::error::{Error, Result};
use crate::Vec3;

/// Maps voxel indices to normalized coordinates, `x = 2 i / (n - 1) - 1` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormalizedFrame {
    dims: [usize; 3],
}

impl NormalizedFrame {
    pub fn new(dims: [usize; 3]) -> Self {
        Self { dims }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Voxels per normalized unit along each axis, `(n - 1) / 2`.
    pub fn voxels_per_unit(&self) -> [f64; 3] {
        self.dims.map(|n| (n.max(1) - 1) as f64 / 2.0)
    }

    /// Continuous voxel coordinate to normalized coordinate.
    pub fn to_normalized(&self, voxel: [f64; 3]) -> Vec3 {
        let s = self.voxels_per_unit();
        Vec3::from_fn(|a, _| if s[a] > 0.0 { voxel[a] / s[a] - 1.0 } else { 0.0 })
    }

    /// Normalized coordinate to continuous voxel coordinate (not clamped).
    pub fn to_voxel(&self, p: &Vec3) -> [f64; 3] {
        let s = self.voxels_per_unit();
        [0, 1, 2].map(|a| (p[a] + 1.0) * s[a])
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.to_normalized([i as f64, j as f64, k as f64])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Inverse of [`NormalizedFrame::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }
}

fn check_geometry(dims: [usize; 3], spacing: [f64; 3], len: usize) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
    }
    if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidVolume(format!("spacing must be positive, got {spacing:?}")));
    }
    let expected: usize = dims.iter().product();
    if len != expected {
        return Err(Error::InvalidVolume(format!(
            "data length {len} does not match dims {dims:?} ({expected} voxels)"
        )));
    }
    Ok(())
}

/// Dense grid of scalars: intensities, masks, signed distances, thickness parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        check_geometry(dims, spacing, data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume(format!("non-finite value at voxel {pos}")));
        }
        Ok(Self { dims, spacing, data })
    }

    /// Unit-spacing grid filled with `value`.
    pub fn filled(dims: [usize; 3], value: f64) -> Self {
        Self { dims, spacing: [1.0; 3], data: vec![value; dims.iter().product()] }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, spacing: [1.0; 3], data }
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_geometry(self.dims, spacing, self.data.len())?;
        self.spacing = spacing;
        Ok(self)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn frame(&self) -> NormalizedFrame {
        NormalizedFrame::new(self.dims)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the raw values. Callers must keep them finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.frame().index(i, j, k)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Foreground test used for every mask in the crate.
    #[inline]
    pub fn is_foreground(value: f64) -> bool {
        value > 0.5
    }

    pub fn same_geometry(&self, other: &ScalarVolume) -> Result<()> {
        if self.dims != other.dims || self.spacing != other.spacing {
            return Err(Error::DimensionMismatch(self.dims, other.dims));
        }
        Ok(())
    }

    /// Affine rescale so the minimum maps to 0 and the maximum to 1.
    pub fn normalize_intensity(&self) -> Result<ScalarVolume> {
        let (lo, hi) = self.min_max();
        if !(hi > lo) {
            return Err(Error::ZeroDynamicRange);
        }
        let range = hi - lo;
        let data = self
            .data
            .iter()
            .map(|&v| if v == hi { 1.0 } else { (v - lo) / range })
            .collect();
        Ok(ScalarVolume { dims: self.dims, spacing: self.spacing, data })
    }
}

/// Dense grid of 3-vectors: velocity and displacement fields.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<Vec3>,
}

impl VectorVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<Vec3>) -> Result<Self> {
        check_geometry(dims, spacing, data.len())?;
        if let Some(pos) = data.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidVolume(format!("non-finite vector at voxel {pos}")));
        }
        Ok(Self { dims, spacing, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self { dims, spacing: [1.0; 3], data: vec![Vec3::zeros(); dims.iter().product()] }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> Vec3) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, spacing: [1.0; 3], data }
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_geometry(self.dims, spacing, self.data.len())?;
        self.spacing = spacing;
        Ok(self)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn frame(&self) -> NormalizedFrame {
        NormalizedFrame::new(self.dims)
    }

    pub fn data(&self) -> &[Vec3] {
        &self.data
    }

    /// Mutable access to the raw vectors. Callers must keep them finite.
    pub fn data_mut(&mut self) -> &mut [Vec3] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.data[self.frame().index(i, j, k)]
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> VectorVolume {
        VectorVolume { dims: self.dims, spacing: self.spacing, data: self.data.iter().map(|v| v * s).collect() }
    }
}
