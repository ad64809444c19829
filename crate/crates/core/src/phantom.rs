//! Synthetic nested-surface phantoms with exact reference meshes.
//!
//! Radii are in voxels about the volume center. Reference meshes share one
//! icosphere parameterization, so vertex `i` of the wm, mid and pial meshes
//! lie on the same ray.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{shapes, TriMesh};
use crate::volume::{NormalizedFrame, ScalarVolume};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    SpherePair,
    BumpyPair,
    HandleDefect,
}

impl FromStr for PhantomKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere_pair" => Ok(Self::SpherePair),
            "bumpy_pair" => Ok(Self::BumpyPair),
            "handle_defect" => Ok(Self::HandleDefect),
            _ => Err(Error::InvalidPhantom(format!("unknown phantom kind '{s}'"))),
        }
    }
}

impl std::fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SpherePair => "sphere_pair",
            Self::BumpyPair => "bumpy_pair",
            Self::HandleDefect => "handle_defect",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub dims: [usize; 3],
    pub r_w: f64,
    pub r_g: f64,
    /// Bump amplitude in voxels.
    pub amplitude: f64,
    /// Angular frequency of the bumps.
    pub frequency: u32,
    /// Reference meshes get at least this many vertices.
    pub gt_vertices: usize,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            kind: PhantomKind::SpherePair,
            dims: [64; 3],
            r_w: 8.0,
            r_g: 12.0,
            amplitude: 1.5,
            frequency: 3,
            gt_vertices: 40_000,
            seed: 0,
        }
    }
}

/// Tube radius of the handle in voxels.
const HANDLE_RADIUS: f64 = 0.75;
/// Height of the handle arc above the wm sphere, in voxels.
const HANDLE_LIFT: f64 = 2.0;
/// Half opening angle of the handle arc.
const HANDLE_HALF_ANGLE: f64 = 0.6;

impl PhantomSpec {
    pub fn sphere_pair(dims: usize, r_w: f64, r_g: f64) -> Self {
        Self { dims: [dims; 3], r_w, r_g, ..Self::default() }
    }

    pub fn bumpy_pair(dims: usize, r_w: f64, r_g: f64, amplitude: f64, frequency: u32) -> Self {
        Self { kind: PhantomKind::BumpyPair, amplitude, frequency, ..Self::sphere_pair(dims, r_w, r_g) }
    }

    pub fn handle_defect(dims: usize, r_w: f64, r_g: f64) -> Self {
        Self { kind: PhantomKind::HandleDefect, ..Self::sphere_pair(dims, r_w, r_g) }
    }

    fn amplitude_used(&self) -> f64 {
        if self.kind == PhantomKind::BumpyPair {
            self.amplitude
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPhantom(msg));
        let min_dim = *self.dims.iter().min().unwrap() as f64;
        if self.dims.iter().any(|&d| d < 4) {
            return bad(format!("dims must be at least 4, got {:?}", self.dims));
        }
        if !(self.r_w.is_finite() && self.r_g.is_finite() && self.r_w > 0.0 && self.r_w < self.r_g) {
            return bad(format!("need 0 < rw < rg, got rw={} rg={}", self.r_w, self.r_g));
        }
        let a = self.amplitude_used();
        if !(a.is_finite() && a >= 0.0) || a >= (self.r_g - self.r_w) / 2.0 || a >= self.r_w {
            return bad(format!("bump amplitude {a} must be below half the gap {}", (self.r_g - self.r_w) / 2.0));
        }
        let mut extent = self.r_g + a;
        if self.kind == PhantomKind::HandleDefect {
            extent = extent.max(self.r_w + HANDLE_LIFT + HANDLE_RADIUS);
        }
        // Keep one voxel of background all around.
        if extent >= (min_dim - 1.0) / 2.0 - 1.0 {
            return bad(format!("radius {extent} does not fit in dims {:?}", self.dims));
        }
        if self.gt_vertices == 0 {
            return bad("gt_vertices must be positive".into());
        }
        Ok(())
    }

    fn center(&self) -> Vec3 {
        Vec3::from_fn(|a, _| (self.dims[a] - 1) as f64 / 2.0)
    }

    /// Radius of a surface with base radius `r0` along unit direction `dir`.
    pub fn radius(&self, r0: f64, dir: &Vec3) -> f64 {
        let a = self.amplitude_used();
        if a == 0.0 {
            return r0;
        }
        let theta = dir.z.clamp(-1.0, 1.0).acos();
        let phi = dir.y.atan2(dir.x);
        let m = self.frequency as f64;
        r0 + a * (m * theta).sin() * (m * phi).cos()
    }

    pub fn thickness(&self) -> f64 {
        self.r_g - self.r_w
    }
}

/// Masks, reference meshes and reference thickness (voxels).
#[derive(Clone, Debug)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub mask_w: ScalarVolume,
    pub mask_g: ScalarVolume,
    pub gt_wm: TriMesh,
    pub gt_pial: TriMesh,
    pub gt_mid: TriMesh,
    pub gt_thickness: f64,
}

/// Distance from `p` to the handle: an arc at height `r_w + HANDLE_LIFT` over
/// the +z pole in the xz plane, with radial legs down into the wm sphere.
fn handle_distance(spec: &PhantomSpec, p: &Vec3) -> f64 {
    let lift = spec.r_w + HANDLE_LIFT;
    let (x, z) = (p.x, p.z);
    let angle = x.atan2(z);
    let in_plane = if angle.abs() <= HANDLE_HALF_ANGLE {
        ((x * x + z * z).sqrt() - lift).abs()
    } else {
        f64::INFINITY
    };
    let leg = |sign: f64| {
        let dir = Vec3::new((sign * HANDLE_HALF_ANGLE).sin(), 0.0, HANDLE_HALF_ANGLE.cos());
        let t = p.dot(&dir).clamp(spec.r_w - 1.0, lift);
        (p - dir * t).norm()
    };
    let arc = (in_plane * in_plane + p.y * p.y).sqrt();
    arc.min(leg(1.0)).min(leg(-1.0))
}

fn rasterize(dims: [usize; 3], inside: impl Fn(&Vec3) -> bool + Sync) -> ScalarVolume {
    let frame = NormalizedFrame::new(dims);
    let data = (0..frame.len())
        .into_par_iter()
        .map(|n| {
            let [i, j, k] = frame.coords(n);
            if inside(&Vec3::new(i as f64, j as f64, k as f64)) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    ScalarVolume::new(dims, [1.0; 3], data).expect("binary mask")
}

pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let c = spec.center();
    let inside = |r0: f64, p: &Vec3| {
        let d = p - c;
        let n = d.norm();
        n == 0.0 || n < spec.radius(r0, &(d / n))
    };
    let handle = spec.kind == PhantomKind::HandleDefect;
    let mask_w = rasterize(spec.dims, |p| inside(spec.r_w, p) || (handle && handle_distance(spec, &(p - c)) < HANDLE_RADIUS));
    let mask_g = rasterize(spec.dims, |p| inside(spec.r_g, p));

    let frame = NormalizedFrame::new(spec.dims);
    let sphere = shapes::icosphere(shapes::icosphere_level_for(spec.gt_vertices));
    let at = |r0: f64| -> TriMesh {
        sphere.map_vertices(|d| {
            let v = c + d * spec.radius(r0, d);
            frame.to_normalized([v.x, v.y, v.z])
        })
    };
    let gt_wm = at(spec.r_w);
    let gt_pial = at(spec.r_g);
    let mid: Vec<Vec3> = gt_wm.vertices().iter().zip(gt_pial.vertices()).map(|(a, b)| (a + b) / 2.0).collect();
    let gt_mid = gt_wm.with_vertices(mid);
    Ok(Phantom { spec: spec.clone(), mask_w, mask_g, gt_wm, gt_pial, gt_mid, gt_thickness: spec.thickness() })
}
