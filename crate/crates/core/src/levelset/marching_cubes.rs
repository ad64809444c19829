//! Table-driven marching cubes.
//!
//! The 256-entry case table is generated once from a fixed per-face rule: on a
//! face whose diagonal corners are inside, the inside corners are kept
//! separate. Because the rule depends only on the face's own corners, two
//! cells sharing a face always agree on the contour there, so the output has
//! no cracks. Each cell's contour segments are chained into polygons that are
//! fan-triangulated from their lowest cube edge.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::volume::ScalarVolume;
use crate::Vec3;

/// Edge vertices are kept at least this fraction of an edge away from grid
/// nodes, so iso values hit exactly at a node never produce coincident vertices.
pub const EDGE_T_MIN: f64 = 1e-2;

fn corner_bits(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Cube edges as `(base corner, axis)`, numbered axis-major.
fn cube_edges() -> [(usize, usize); 12] {
    let mut edges = [(0, 0); 12];
    let mut n = 0;
    for axis in 0..3 {
        for c in 0..8 {
            if corner_bits(c)[axis] == 0 {
                edges[n] = (c, axis);
                n += 1;
            }
        }
    }
    edges
}

fn edge_between(edges: &[(usize, usize); 12], p: usize, q: usize) -> usize {
    let (lo, hi) = (p.min(q), p.max(q));
    edges
        .iter()
        .position(|&(c, a)| c == lo && c | (1 << a) == hi)
        .expect("corners share an edge")
}

/// Corners of each face in counter-clockwise order seen from outside the cube.
fn cube_faces() -> [[usize; 4]; 6] {
    let mut faces = [[0; 4]; 6];
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let corner = |u: usize, v: usize| (side << axis) | (u << b) | (v << c);
            let ccw = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            faces[2 * axis + side] = if side == 1 { ccw } else { [ccw[0], ccw[3], ccw[2], ccw[1]] };
        }
    }
    faces
}

type CaseTable = Vec<Vec<[u8; 3]>>;

fn build_table() -> CaseTable {
    let edges = cube_edges();
    let faces = cube_faces();
    let mut table: CaseTable = (0..256).map(|case| polygons(case, &edges, &faces)).collect();
    // Orient so normals point from inside (below iso) to outside: with one
    // inside corner the triangle must face away from it.
    let [a, b, c] = table[1][0].map(|e| edge_midpoint(&edges, e as usize));
    if (b - a).cross(&(c - a)).dot(&a) < 0.0 {
        for tris in &mut table {
            for t in tris.iter_mut() {
                t.swap(1, 2);
            }
        }
    }
    table
}

fn edge_midpoint(edges: &[(usize, usize); 12], e: usize) -> Vec3 {
    let (c, axis) = edges[e];
    let bits = corner_bits(c);
    let mut p = Vec3::new(bits[0] as f64, bits[1] as f64, bits[2] as f64);
    p[axis] += 0.5;
    p
}

fn polygons(case: usize, edges: &[(usize, usize); 12], faces: &[[usize; 4]; 6]) -> Vec<[u8; 3]> {
    let inside = |c: usize| case & (1 << c) != 0;
    let mut next = [usize::MAX; 12];
    for face in faces {
        // crossing on side s (from face[s] to face[s+1]): Some(true) when leaving the inside
        let crossing: [Option<bool>; 4] = std::array::from_fn(|s| {
            let (p, q) = (face[s], face[(s + 1) % 4]);
            (inside(p) != inside(q)).then_some(inside(p))
        });
        for s in 0..4 {
            if crossing[s] != Some(true) {
                continue;
            }
            // Pair with the nearest entering crossing walking backwards, which
            // cuts off the inside corner on its own.
            let back = (1..4).map(|d| (s + 4 - d) % 4).find(|&t| crossing[t] == Some(false)).expect("balanced");
            let from = edge_between(edges, face[s], face[(s + 1) % 4]);
            let to = edge_between(edges, face[back], face[(back + 1) % 4]);
            next[from] = to;
        }
    }
    let mut tris = Vec::new();
    let mut used = [false; 12];
    for start in 0..12 {
        if next[start] == usize::MAX || used[start] {
            continue;
        }
        let mut cycle = vec![start];
        used[start] = true;
        let mut e = next[start];
        while e != start {
            used[e] = true;
            cycle.push(e);
            e = next[e];
        }
        for i in 1..cycle.len() - 1 {
            tris.push([cycle[0] as u8, cycle[i] as u8, cycle[i + 1] as u8]);
        }
    }
    tris
}

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Extract the `iso` level of `field` as a triangle mesh in normalized
/// coordinates. Voxels with `value < iso` are inside; faces are oriented so
/// their normals point towards larger values. Vertices on a shared grid edge
/// are merged by edge identity.
pub fn marching_cubes(field: &ScalarVolume, iso: f64) -> Result<TriMesh> {
    let (lo, hi) = field.min_max();
    if !(lo < iso && hi >= iso) {
        return Err(Error::EmptyIsosurface);
    }
    let dims = field.dims();
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::EmptyIsosurface);
    }
    let frame = field.frame();
    let data = field.data();
    let table = case_table();
    let edges = cube_edges();
    let strides = [1, dims[0], dims[0] * dims[1]];

    let mut vertex_of = vec![u32::MAX; 3 * data.len()];
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for k in 0..dims[2] - 1 {
        for j in 0..dims[1] - 1 {
            for i in 0..dims[0] - 1 {
                let base = frame.index(i, j, k);
                let mut case = 0;
                for c in 0..8 {
                    let b = corner_bits(c);
                    if data[base + b[0] * strides[0] + b[1] * strides[1] + b[2] * strides[2]] < iso {
                        case |= 1 << c;
                    }
                }
                for tri in &table[case] {
                    let face = tri.map(|e| {
                        let (c, axis) = edges[e as usize];
                        let b = corner_bits(c);
                        let n0 = base + b[0] * strides[0] + b[1] * strides[1] + b[2] * strides[2];
                        let key = 3 * n0 + axis;
                        if vertex_of[key] == u32::MAX {
                            let (f0, f1) = (data[n0], data[n0 + strides[axis]]);
                            let t = ((iso - f0) / (f1 - f0)).clamp(EDGE_T_MIN, 1.0 - EDGE_T_MIN);
                            let mut voxel = [(i + b[0]) as f64, (j + b[1]) as f64, (k + b[2]) as f64];
                            voxel[axis] += t;
                            vertex_of[key] = vertices.len() as u32;
                            vertices.push(frame.to_normalized(voxel));
                        }
                        vertex_of[key]
                    });
                    faces.push(face);
                }
            }
        }
    }
    TriMesh::new(vertices, faces)
}
