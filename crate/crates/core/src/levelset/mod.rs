//! Implicit midthickness surface: SDF addition, isosurface extraction and
//! spherical-topology enforcement.

mod marching_cubes;
mod topology;

pub use marching_cubes::{marching_cubes, EDGE_T_MIN};
pub use topology::{gaussian_smooth, topology_check, topology_repair, TopologyReport};

use crate::error::Result;
use crate::volume::ScalarVolume;

/// Voxelwise sum of the two signed distance fields; its zero level lies
/// halfway between the two interfaces.
pub fn midthickness_level_set(sdf_w: &ScalarVolume, sdf_g: &ScalarVolume) -> Result<ScalarVolume> {
    sdf_w.same_geometry(sdf_g)?;
    let data = sdf_w.data().iter().zip(sdf_g.data()).map(|(a, b)| a + b).collect();
    ScalarVolume::new(sdf_w.dims(), sdf_w.spacing(), data)
}

/// Push node values within `margin` of `iso` out to `iso - margin` (inside)
/// or `iso + margin` (outside). Inside/outside labels are unchanged, so the
/// extracted topology is too, but no isosurface vertex ends up next to a grid
/// node and no sliver fans form there.
pub fn separate_from_level(field: &ScalarVolume, iso: f64, margin: f64) -> ScalarVolume {
    let data = field
        .data()
        .iter()
        .map(|&f| {
            if (f - iso).abs() >= margin {
                f
            } else if f < iso {
                iso - margin
            } else {
                iso + margin
            }
        })
        .collect();
    ScalarVolume::new(field.dims(), field.spacing(), data).expect("same geometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn planar_interfaces_meet_halfway() {
        let dims = [24, 4, 4];
        let plane = |a: f64| ScalarVolume::from_fn(dims, move |i, _, _| i as f64 - a);
        let sum = midthickness_level_set(&plane(5.0), &plane(13.0)).unwrap();
        assert_eq!(sum.get(9, 0, 0), 0.0);
        assert!(sum.get(8, 1, 1) < 0.0 && sum.get(10, 1, 1) > 0.0);
    }

    #[test]
    fn symmetric_and_identity() {
        let a = ScalarVolume::from_fn([6, 6, 6], |i, j, k| (i * j) as f64 - k as f64);
        let b = ScalarVolume::from_fn([6, 6, 6], |i, j, k| (i + j) as f64 * 0.3 - (k * k) as f64);
        assert_eq!(midthickness_level_set(&a, &b).unwrap(), midthickness_level_set(&b, &a).unwrap());
        let twice = midthickness_level_set(&a, &a).unwrap();
        assert!(twice.data().iter().zip(a.data()).all(|(t, x)| *t == 2.0 * x));
    }

    #[test]
    fn separation_keeps_labels() {
        let f = ScalarVolume::from_fn([5, 5, 5], |i, j, k| (i as f64 - 2.0) * 0.01 + j as f64 * 0.3 - k as f64 * 0.2);
        let s = separate_from_level(&f, 0.0, 0.1);
        for (a, b) in f.data().iter().zip(s.data()) {
            assert_eq!(*a < 0.0, *b < 0.0);
            assert!(b.abs() >= 0.1);
            if a.abs() >= 0.1 {
                assert_eq!(a, b);
            }
        }
        let zero = ScalarVolume::filled([2, 2, 2], 0.0);
        assert!(separate_from_level(&zero, 0.0, 0.5).data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn mismatched_dims_error() {
        let a = ScalarVolume::filled([4, 4, 4], 0.0);
        let b = ScalarVolume::filled([4, 4, 5], 0.0);
        assert!(matches!(midthickness_level_set(&a, &b), Err(Error::DimensionMismatch(..))));
    }
}
