use super::marching_cubes;
use crate::error::{Error, Result};
use crate::mesh::{MeshAdjacency, TriMesh};
use crate::volume::ScalarVolume;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TopologyReport {
    pub num_components: usize,
    /// `V - E + F`
    pub euler_characteristic: i64,
    /// Only defined for a single closed manifold component.
    pub genus: Option<i64>,
    pub is_closed_manifold: bool,
    pub num_nonmanifold_edges: usize,
}

impl TopologyReport {
    pub fn is_spherical(&self) -> bool {
        self.num_components == 1 && self.genus == Some(0)
    }
}

pub fn topology_check(mesh: &TriMesh) -> TopologyReport {
    let adj = MeshAdjacency::new(mesh);
    let num_components = mesh.component_labels().iter().copied().max().map_or(0, |m| m as usize + 1);
    let euler_characteristic = mesh.num_vertices() as i64 - adj.edges.len() as i64 + mesh.num_faces() as i64;
    let is_closed_manifold = !adj.edges.is_empty() && adj.edges.iter().all(|e| e.count == 2);
    let genus = (num_components == 1 && is_closed_manifold).then(|| (2 - euler_characteristic) / 2);
    TopologyReport {
        num_components,
        euler_characteristic,
        genus,
        is_closed_manifold,
        num_nonmanifold_edges: adj.nonmanifold_edges,
    }
}

/// Separable 3x3x3 Gaussian blur (sigma = 0.5 voxel), replicate padding.
pub fn gaussian_smooth(field: &ScalarVolume) -> ScalarVolume {
    let side = (-2.0f64).exp(); // exp(-1 / (2 sigma^2))
    let norm = 1.0 + 2.0 * side;
    let dims = field.dims();
    let frame = field.frame();
    let mut data = field.data().to_vec();
    for axis in 0..3 {
        let src = data.clone();
        for (idx, out) in data.iter_mut().enumerate() {
            let c = frame.coords(idx);
            let mut lo = c;
            let mut hi = c;
            lo[axis] = c[axis].saturating_sub(1);
            hi[axis] = (c[axis] + 1).min(dims[axis] - 1);
            *out = (src[idx] + side * (src[frame.index(lo[0], lo[1], lo[2])] + src[frame.index(hi[0], hi[1], hi[2])])) / norm;
        }
    }
    ScalarVolume::new(dims, field.spacing(), data).expect("blur keeps values finite")
}

/// Extract the zero level, keep its largest component, and blur the field
/// until that component is a topological sphere. Round 0 is the unmodified
/// field; at most `max_rounds` blurs are applied.
pub fn topology_repair(field: &ScalarVolume, max_rounds: usize) -> Result<(ScalarVolume, TriMesh)> {
    let mut current = field.clone();
    for round in 0..=max_rounds {
        if round > 0 {
            current = gaussian_smooth(&current);
        }
        let mesh = match marching_cubes(&current, 0.0) {
            Ok(m) => m.largest_component(),
            // Blurring erased the surface entirely: nothing left to repair.
            Err(Error::EmptyIsosurface) if round > 0 => break,
            Err(e) => return Err(e),
        };
        if topology_check(&mesh).is_spherical() {
            return Ok((current, mesh));
        }
    }
    Err(Error::TopologyRepairFailed(max_rounds))
}
