//! Reference meshes: platonic solids, subdivided spheres, sheets, tori.

use std::collections::HashMap;

use super::TriMesh;
use crate::Vec3;

pub fn tetrahedron() -> TriMesh {
    let v = vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ];
    orient_outward(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

fn orient_outward(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriMesh {
    let centroid = vertices.iter().sum::<Vec3>() / vertices.len() as f64;
    let faces = faces
        .into_iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            if (b - a).cross(&(c - a)).dot(&((a + b + c) / 3.0 - centroid)) < 0.0 {
                [f[0], f[2], f[1]]
            } else {
                f
            }
        })
        .collect();
    TriMesh::new(vertices, faces).expect("valid solid")
}

/// Unit-radius icosphere with `10 * 4^level + 2` vertices. Symmetric under
/// reflection of any coordinate axis.
pub fn icosphere(level: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let mut vertices: Vec<Vec3> = raw.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalize()).collect();
    let faces = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let mut faces = orient_outward(vertices.clone(), faces).faces().to_vec();
    for _ in 0..level {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize());
                vertices.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriMesh::new(vertices, faces).expect("valid icosphere")
}

/// Smallest icosphere level with at least `min_vertices` vertices.
pub fn icosphere_level_for(min_vertices: usize) -> u32 {
    (0..16).find(|&l| 10 * 4usize.pow(l) + 2 >= min_vertices).unwrap_or(15)
}

/// Flat `n x n`-quad sheet of side `size` centred at the origin in the z = 0
/// plane, normals +z.
pub fn grid_sheet(n: usize, size: f64) -> TriMesh {
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec3::new(size * (i as f64 / n as f64 - 0.5), size * (j as f64 / n as f64 - 0.5), 0.0));
        }
    }
    let id = |i: usize, j: usize| (i + j * (n + 1)) as u32;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("valid sheet")
}

/// Torus with tube radius `r` around a circle of radius `big_r` in the xy plane.
pub fn torus(big_r: f64, r: f64, n_major: usize, n_minor: usize) -> TriMesh {
    let mut vertices = Vec::new();
    for i in 0..n_major {
        let u = i as f64 / n_major as f64 * std::f64::consts::TAU;
        for j in 0..n_minor {
            let v = j as f64 / n_minor as f64 * std::f64::consts::TAU;
            let rho = big_r + r * v.cos();
            vertices.push(Vec3::new(rho * u.cos(), rho * u.sin(), r * v.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % n_major) * n_minor + j % n_minor) as u32;
    let mut faces = Vec::new();
    for i in 0..n_major {
        for j in 0..n_minor {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("valid torus")
}

/// Disjoint union; vertex indices of later meshes are shifted.
pub fn merge(meshes: &[&TriMesh]) -> TriMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in meshes {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(m.vertices());
        faces.extend(m.faces().iter().map(|f| f.map(|v| v + base)));
    }
    TriMesh::new(vertices, faces).expect("union of valid meshes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_sizes_and_radius() {
        for level in 0..5 {
            let s = icosphere(level);
            assert_eq!(s.num_vertices(), 10 * 4usize.pow(level) + 2);
            assert_eq!(s.num_faces(), 20 * 4usize.pow(level));
            assert!(s.vertices().iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        }
        assert_eq!(icosphere_level_for(40_000), 6);
        assert_eq!(icosphere_level_for(130_000), 7);
    }

    #[test]
    fn icosphere_faces_point_outward() {
        let s = icosphere(2);
        for f in 0..s.num_faces() {
            let [a, b, c] = s.corners(f);
            assert!(s.face_cross(f).dot(&(a + b + c)) > 0.0);
        }
    }

    #[test]
    fn icosphere_is_mirror_symmetric() {
        let s = icosphere(3);
        let mut pts: Vec<[i64; 3]> = s.vertices().iter().map(|p| [p.x, p.y, p.z].map(|c| (c * 1e12).round() as i64)).collect();
        let mut mirrored: Vec<[i64; 3]> = pts.iter().map(|p| [-p[0], p[1], p[2]]).collect();
        pts.sort();
        mirrored.sort();
        assert_eq!(pts, mirrored);
    }
}
