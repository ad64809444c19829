//! Loop subdivision: each triangle becomes four, positions are smoothed with
//! Loop's masks (Warren's weights for even vertices).

use super::{MeshAdjacency, TriMesh};
use crate::Vec3;

fn opposite(face: &[u32; 3], a: u32, b: u32) -> u32 {
    *face.iter().find(|&&v| v != a && v != b).expect("triangle has a third vertex")
}

/// One round of Loop subdivision. Connectivity of the result is `4 F` faces and
/// `V + E` vertices; genus and component count are unchanged.
pub fn loop_subdivide(mesh: &TriMesh) -> TriMesh {
    let adj = MeshAdjacency::new(mesh);
    let verts = mesh.vertices();
    let nv = verts.len();
    let faces = mesh.faces();

    let mut boundary_neighbors: Vec<Vec<u32>> = vec![Vec::new(); nv];
    let mut odd = Vec::with_capacity(adj.edges.len());
    for e in &adj.edges {
        let (a, b) = (verts[e.a as usize], verts[e.b as usize]);
        if e.count == 2 {
            let c = verts[opposite(&faces[e.faces[0] as usize], e.a, e.b) as usize];
            let d = verts[opposite(&faces[e.faces[1] as usize], e.a, e.b) as usize];
            odd.push((a + b) * 0.375 + (c + d) * 0.125);
        } else {
            if e.count == 1 {
                boundary_neighbors[e.a as usize].push(e.b);
                boundary_neighbors[e.b as usize].push(e.a);
            }
            odd.push((a + b) * 0.5);
        }
    }

    let mut vertices: Vec<Vec3> = (0..nv)
        .map(|v| {
            let p = verts[v];
            match boundary_neighbors[v].as_slice() {
                [] => {
                    let ring = adj.neighbors(v);
                    let n = ring.len() as f64;
                    let beta = if ring.len() == 3 { 3.0 / 16.0 } else { 3.0 / (8.0 * n) };
                    let sum: Vec3 = ring.iter().map(|&q| verts[q as usize]).sum();
                    p * (1.0 - n * beta) + sum * beta
                }
                [x, y] => p * 0.75 + (verts[*x as usize] + verts[*y as usize]) * 0.125,
                _ => p,
            }
        })
        .collect();
    vertices.extend(odd);

    split_faces(mesh, &adj, vertices)
}

/// One round of midpoint subdivision: every edge gains its midpoint and each
/// triangle becomes four. The surface itself is unchanged.
pub fn midpoint_subdivide(mesh: &TriMesh) -> TriMesh {
    let adj = MeshAdjacency::new(mesh);
    let verts = mesh.vertices();
    let mut vertices = verts.to_vec();
    vertices.extend(adj.edges.iter().map(|e| (verts[e.a as usize] + verts[e.b as usize]) * 0.5));
    split_faces(mesh, &adj, vertices)
}

/// 1-to-4 split; `vertices` holds the old vertices followed by one vertex per edge.
fn split_faces(mesh: &TriMesh, adj: &MeshAdjacency, vertices: Vec<Vec3>) -> TriMesh {
    let nv = mesh.num_vertices();
    let edge_vertex = |a: u32, b: u32| -> u32 {
        let key = (a.min(b), a.max(b));
        let i = adj.edges.binary_search_by(|e| (e.a, e.b).cmp(&key)).expect("edge of a face");
        (nv + i) as u32
    };
    let mut out = Vec::with_capacity(4 * mesh.num_faces());
    for &[a, b, c] in mesh.faces() {
        let (ab, bc, ca) = (edge_vertex(a, b), edge_vertex(b, c), edge_vertex(c, a));
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
    }
    TriMesh::new(vertices, out).expect("subdivision of a valid mesh")
}
