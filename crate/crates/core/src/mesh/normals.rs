//! Area-weighted vertex normals and their reverse-mode adjoint.

use super::{TriMesh, DEGENERATE_AREA};
use crate::error::{Error, Result};
use crate::Vec3;

/// Unit normals plus the unnormalized sums they came from (kept for the adjoint).
#[derive(Clone, Debug)]
pub struct VertexNormals {
    pub normals: Vec<Vec3>,
    pub sums: Vec<Vec3>,
}

#[inline]
fn is_degenerate(cross: &Vec3) -> bool {
    0.5 * cross.norm() < DEGENERATE_AREA
}

/// Normal at each vertex: the normalized sum of the cross-product normals of
/// its non-degenerate incident faces.
pub fn vertex_normals(mesh: &TriMesh) -> Result<VertexNormals> {
    let mut sums = vec![Vec3::zeros(); mesh.num_vertices()];
    let mut seen = vec![false; mesh.num_vertices()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let c = mesh.face_cross(fi);
        if is_degenerate(&c) {
            continue;
        }
        for &v in f {
            sums[v as usize] += c;
            seen[v as usize] = true;
        }
    }
    let mut normals = Vec::with_capacity(sums.len());
    for (v, s) in sums.iter().enumerate() {
        let len = s.norm();
        if !seen[v] || len == 0.0 {
            return Err(Error::DegenerateVertex(v));
        }
        normals.push(s / len);
    }
    Ok(VertexNormals { normals, sums })
}

/// Pull a cotangent on the unit normals back to the vertex positions.
pub fn vertex_normals_backward(mesh: &TriMesh, forward: &VertexNormals, grad_normals: &[Vec3]) -> Vec<Vec3> {
    // d(s/|s|) = (I - n n^T) ds / |s|
    let grad_sums: Vec<Vec3> = forward
        .normals
        .iter()
        .zip(&forward.sums)
        .zip(grad_normals)
        .map(|((n, s), g)| (g - n * n.dot(g)) / s.norm())
        .collect();
    let mut grad = vec![Vec3::zeros(); mesh.num_vertices()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let [a, b, c] = mesh.corners(fi);
        let (e1, e2) = (b - a, c - a);
        if is_degenerate(&e1.cross(&e2)) {
            continue;
        }
        let gc = grad_sums[f[0] as usize] + grad_sums[f[1] as usize] + grad_sums[f[2] as usize];
        let g1 = e2.cross(&gc);
        let g2 = gc.cross(&e1);
        grad[f[0] as usize] -= g1 + g2;
        grad[f[1] as usize] += g1;
        grad[f[2] as usize] += g2;
    }
    grad
}

#[cfg(test)]
pub(crate) fn max_unit_deviation(normals: &[Vec3]) -> f64 {
    normals.iter().map(|n| (n.norm() - 1.0).abs()).fold(0.0, f64::max)
}
