//! Triangle meshes in normalized coordinates.

mod adjacency;
pub mod io;
mod normals;
mod remesh;
mod sample;
pub mod shapes;
mod smooth;
mod subdivide;

pub use adjacency::{Edge, MeshAdjacency};
pub use normals::{vertex_normals, vertex_normals_backward, VertexNormals};
pub use remesh::equalize_valence;
pub use sample::{sample_points_uniform, sample_points_with_faces};
pub use smooth::tangential_relax;
pub use subdivide::{loop_subdivide, midpoint_subdivide};

use crate::error::{Error, Result};
use crate::Vec3;

/// Faces with area below this are degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh. Faces are counter-clockwise seen from outside.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Validates the faces and drops vertices no face references.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v as usize >= n) {
                return Err(Error::InvalidMesh(format!("face {fi} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
        }
        if let Some(v) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not finite")));
        }
        let mut used = vec![false; n];
        for f in &faces {
            for &v in f {
                used[v as usize] = true;
            }
        }
        if used.iter().all(|&u| u) {
            return Ok(Self { vertices, faces });
        }
        let mut remap = vec![u32::MAX; n];
        let mut kept = Vec::new();
        for (i, p) in vertices.into_iter().enumerate() {
            if used[i] {
                remap[i] = kept.len() as u32;
                kept.push(p);
            }
        }
        let faces = faces.into_iter().map(|f| f.map(|v| remap[v as usize])).collect();
        Ok(Self { vertices: kept, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> TriMesh {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        TriMesh { vertices, faces: self.faces.clone() }
    }

    /// Same positions, new faces over the same vertex set.
    pub(crate) fn with_faces(&self, faces: Vec<[u32; 3]>) -> TriMesh {
        TriMesh { vertices: self.vertices.clone(), faces }
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriMesh {
        self.with_vertices(self.vertices.iter().map(f).collect())
    }

    /// Unnormalized face normal `(b - a) x (c - a)`; its length is twice the area.
    #[inline]
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    #[inline]
    pub fn corners(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|v| self.vertices[v as usize])
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Reverse the orientation of every face.
    pub fn flipped(&self) -> TriMesh {
        TriMesh { vertices: self.vertices.clone(), faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect() }
    }

    /// Vertices of the connected component (through shared vertices) with the
    /// most faces. Ties go to the component containing the lowest face index.
    pub fn largest_component(&self) -> TriMesh {
        let labels = self.component_labels();
        let count = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        if count <= 1 {
            return self.clone();
        }
        let mut sizes = vec![0usize; count];
        for f in &self.faces {
            sizes[labels[f[0] as usize] as usize] += 1;
        }
        let mut best = 0;
        for (c, &s) in sizes.iter().enumerate() {
            if s > sizes[best] {
                best = c;
            }
        }
        let faces = self.faces.iter().copied().filter(|f| labels[f[0] as usize] as usize == best).collect();
        TriMesh::new(self.vertices.clone(), faces).expect("subset of a valid mesh")
    }

    /// Component label per vertex, numbered in order of first appearance in the face list.
    pub fn component_labels(&self) -> Vec<u32> {
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(parent: &mut [u32], mut x: u32) -> u32 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }
        for f in &self.faces {
            for s in 1..3 {
                let (ra, rb) = (find(&mut parent, f[0]), find(&mut parent, f[s]));
                if ra != rb {
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi as usize] = lo;
                }
            }
        }
        let mut label = vec![u32::MAX; self.vertices.len()];
        let mut next = 0;
        let mut out = vec![0; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                let r = find(&mut parent, v) as usize;
                if label[r] == u32::MAX {
                    label[r] = next;
                    next += 1;
                }
                out[v as usize] = label[r];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compacts_unreferenced_vertices() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::new(5.0, 5.0, 5.0), Vec3::y()];
        let m = TriMesh::new(v, vec![[0, 1, 3]]).unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert_eq!(m.vertices()[2], Vec3::y());
    }

    #[test]
    fn rejects_invalid_faces() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriMesh::new(v, vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn largest_component_keeps_bigger_sphere() {
        let big = shapes::icosphere(2);
        let small = shapes::icosphere(0).map_vertices(|p| p * 0.1 + Vec3::new(3.0, 0.0, 0.0));
        let merged = shapes::merge(&[&small, &big]);
        let kept = merged.largest_component();
        assert_eq!(kept.num_vertices(), big.num_vertices());
        assert_eq!(kept.num_faces(), big.num_faces());
    }
}
