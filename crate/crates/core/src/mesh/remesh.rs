//! Connectivity clean-up by edge flips.

use super::{MeshAdjacency, TriMesh};

/// Flips that would bend the two faces by more than this (cosine) are skipped.
const MIN_FLIP_COSINE: f64 = 0.9;
const MAX_PASSES: usize = 20;

fn valence_cost(v: i64) -> i64 {
    (v - 6) * (v - 6)
}

fn opposite(face: &[u32; 3], a: u32, b: u32) -> u32 {
    *face.iter().find(|&&v| v != a && v != b).expect("triangle has a third vertex")
}

/// Flip interior edges while doing so brings vertex valences closer to six.
/// Vertex positions, vertex count, face count and genus are unchanged; flips
/// that would fold or sharply bend the surface are skipped.
pub fn equalize_valence(mesh: &TriMesh) -> TriMesh {
    let verts = mesh.vertices();
    let mut faces = mesh.faces().to_vec();
    let cross = |f: &[u32; 3]| {
        let [a, b, c] = f.map(|i| verts[i as usize]);
        (b - a).cross(&(c - a))
    };
    for _ in 0..MAX_PASSES {
        let current = mesh.with_faces(faces.clone());
        let adj = MeshAdjacency::new(&current);
        let mut valence: Vec<i64> = (0..verts.len()).map(|v| adj.neighbors(v).len() as i64).collect();
        let mut touched = vec![false; faces.len()];
        let mut flips = 0;
        for e in adj.edges.iter().filter(|e| e.is_interior()) {
            let (f0, f1) = (e.faces[0] as usize, e.faces[1] as usize);
            if touched[f0] || touched[f1] {
                continue;
            }
            let (a, b) = (e.a, e.b);
            let c = opposite(&faces[f0], a, b);
            let d = opposite(&faces[f1], a, b);
            if c == d || adj.neighbors(c as usize).binary_search(&d).is_ok() {
                continue;
            }
            let [va, vb, vc, vd] = [a, b, c, d].map(|v| valence[v as usize]);
            if va <= 3 || vb <= 3 {
                continue;
            }
            let before = valence_cost(va) + valence_cost(vb) + valence_cost(vc) + valence_cost(vd);
            let after = valence_cost(va - 1) + valence_cost(vb - 1) + valence_cost(vc + 1) + valence_cost(vd + 1);
            if after >= before {
                continue;
            }
            let face = faces[f0];
            let i = face.iter().position(|&x| x == a).expect("edge endpoint in face");
            let (p, q) = if face[(i + 1) % 3] == b { (a, b) } else { (b, a) };
            let new0 = [c, d, q];
            let new1 = [d, c, p];
            let old = cross(&faces[f0]) + cross(&faces[f1]);
            let (n0, n1) = (cross(&new0), cross(&new1));
            if n0.dot(&old) <= 0.0 || n1.dot(&old) <= 0.0 {
                continue;
            }
            if n0.dot(&n1) < MIN_FLIP_COSINE * n0.norm() * n1.norm() {
                continue;
            }
            faces[f0] = new0;
            faces[f1] = new1;
            touched[f0] = true;
            touched[f1] = true;
            valence[a as usize] -= 1;
            valence[b as usize] -= 1;
            valence[c as usize] += 1;
            valence[d as usize] += 1;
            flips += 1;
        }
        if flips == 0 {
            break;
        }
    }
    mesh.with_faces(faces)
}
