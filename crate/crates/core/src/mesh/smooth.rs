//! Tangential mesh relaxation.

use super::{MeshAdjacency, TriMesh};
use crate::Vec3;

/// Move each vertex part way towards its ring centroid within its tangent
/// plane. Evens out edge lengths and removes slivers while leaving the shape
/// nearly unchanged. Connectivity is unchanged.
pub fn tangential_relax(mesh: &TriMesh, iterations: usize, factor: f64) -> TriMesh {
    let adj = MeshAdjacency::new(mesh);
    let mut current = mesh.clone();
    for _ in 0..iterations {
        let normals = match super::vertex_normals(&current) {
            Ok(n) => n.normals,
            Err(_) => break,
        };
        let verts = current.vertices();
        let moved = (0..verts.len())
            .map(|v| {
                let ring = adj.neighbors(v);
                if ring.is_empty() {
                    return verts[v];
                }
                let centroid = ring.iter().map(|&u| verts[u as usize]).sum::<Vec3>() / ring.len() as f64;
                let d = centroid - verts[v];
                let n = normals[v];
                verts[v] + (d - n * d.dot(&n)) * factor
            })
            .collect();
        current = current.with_vertices(moved);
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn radial_rms(m: &TriMesh) -> f64 {
        let r: Vec<f64> = m.vertices().iter().map(|v| v.norm()).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r.len() as f64).sqrt()
    }

    fn edge_length_spread(m: &TriMesh) -> f64 {
        let adj = MeshAdjacency::new(m);
        let lengths: Vec<f64> =
            adj.edges.iter().map(|e| (m.vertices()[e.a as usize] - m.vertices()[e.b as usize]).norm()).collect();
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / lengths.len() as f64).sqrt() / mean
    }

    #[test]
    fn evens_out_edges_and_keeps_shape() {
        let sphere = shapes::icosphere(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let jittered: Vec<Vec3> = sphere
            .vertices()
            .iter()
            .map(|p| {
                let t = Vec3::from_fn(|_, _| rng.gen_range(-0.02..0.02));
                (p + t - p * t.dot(p)).normalize()
            })
            .collect();
        let jittered = sphere.with_vertices(jittered);
        let relaxed = tangential_relax(&jittered, 20, 0.5);
        assert!(edge_length_spread(&relaxed) < edge_length_spread(&jittered));
        assert!(radial_rms(&relaxed) < 1e-3);
        assert_eq!(relaxed.faces(), jittered.faces());
    }

    #[test]
    fn planes_stay_planar() {
        let sheet = shapes::grid_sheet(5, 1.0);
        let s = tangential_relax(&sheet, 5, 0.5);
        assert!(s.vertices().iter().all(|v| v.z.abs() < 1e-15));
    }
}
