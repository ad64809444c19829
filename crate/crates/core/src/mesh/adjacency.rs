use super::TriMesh;

/// An undirected edge `a < b` and the faces bordering it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    /// First two bordering faces; `faces[1]` is meaningful only when `count >= 2`.
    pub faces: [u32; 2],
    pub count: u32,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.count == 2
    }
}

/// Vertex/face/edge incidence for a fixed connectivity.
#[derive(Clone, Debug)]
pub struct MeshAdjacency {
    pub edges: Vec<Edge>,
    vertex_face_offsets: Vec<usize>,
    vertex_faces: Vec<u32>,
    neighbor_offsets: Vec<usize>,
    neighbors: Vec<u32>,
    /// Edges bordered by more than two faces.
    pub nonmanifold_edges: usize,
}

impl MeshAdjacency {
    pub fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.num_vertices();
        let mut sides: Vec<(u32, u32, u32)> = Vec::with_capacity(3 * mesh.num_faces());
        for (fi, f) in mesh.faces().iter().enumerate() {
            for s in 0..3 {
                let (u, v) = (f[s], f[(s + 1) % 3]);
                sides.push((u.min(v), u.max(v), fi as u32));
            }
        }
        sides.sort_unstable();

        let mut edges: Vec<Edge> = Vec::with_capacity(sides.len() / 2 + 1);
        for (a, b, f) in sides {
            match edges.last_mut() {
                Some(e) if e.a == a && e.b == b => {
                    if e.count == 1 {
                        e.faces[1] = f;
                    }
                    e.count += 1;
                }
                _ => edges.push(Edge { a, b, faces: [f, u32::MAX], count: 1 }),
            }
        }
        let nonmanifold_edges = edges.iter().filter(|e| e.count > 2).count();

        let (vertex_face_offsets, vertex_faces) =
            csr(nv, mesh.faces().iter().enumerate().flat_map(|(fi, f)| f.map(|v| (v, fi as u32))));
        let (neighbor_offsets, neighbors) =
            csr(nv, edges.iter().flat_map(|e| [(e.a, e.b), (e.b, e.a)]));

        Self { edges, vertex_face_offsets, vertex_faces, neighbor_offsets, neighbors, nonmanifold_edges }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_face_offsets.len() - 1
    }

    pub fn vertex_faces(&self, v: usize) -> &[u32] {
        &self.vertex_faces[self.vertex_face_offsets[v]..self.vertex_face_offsets[v + 1]]
    }

    /// Neighbors of `v`, sorted ascending.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.neighbor_offsets[v]..self.neighbor_offsets[v + 1]]
    }

    pub fn boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.count == 1).count()
    }
}

fn csr(n: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    for (k, _) in pairs.clone() {
        offsets[k as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut values = vec![0u32; offsets[n]];
    for (k, v) in pairs {
        values[fill[k as usize]] = v;
        fill[k as usize] += 1;
    }
    for i in 0..n {
        values[offsets[i]..offsets[i + 1]].sort_unstable();
    }
    (offsets, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn tetrahedron_counts() {
        let t = shapes::tetrahedron();
        let adj = MeshAdjacency::new(&t);
        assert_eq!(t.num_vertices(), 4);
        assert_eq!(t.num_faces(), 4);
        assert_eq!(adj.edges.len(), 6);
        assert!(adj.edges.iter().all(|e| e.count == 2));
        for v in 0..4 {
            assert_eq!(adj.neighbors(v).len(), 3);
            assert_eq!(adj.vertex_faces(v).len(), 3);
        }
    }

    #[test]
    fn icosphere_edge_count() {
        for level in 0..4 {
            let s = shapes::icosphere(level);
            let adj = MeshAdjacency::new(&s);
            assert_eq!(adj.edges.len(), 3 * s.num_vertices() - 6);
            assert_eq!(adj.nonmanifold_edges, 0);
        }
    }

    #[test]
    fn sheet_boundary_edges_have_one_face() {
        let s = shapes::grid_sheet(3, 1.0);
        let adj = MeshAdjacency::new(&s);
        assert_eq!(adj.boundary_edges(), 12);
        for e in &adj.edges {
            let (p, q) = (s.vertices()[e.a as usize], s.vertices()[e.b as usize]);
            let same_x_border = p.x == q.x && p.x.abs() == 0.5;
            let same_y_border = p.y == q.y && p.y.abs() == 0.5;
            assert_eq!(e.count == 1, same_x_border || same_y_border);
        }
    }

    #[test]
    fn neighbor_lists_are_symmetric() {
        let s = shapes::icosphere(2);
        let adj = MeshAdjacency::new(&s);
        for v in 0..s.num_vertices() {
            for &n in adj.neighbors(v) {
                assert!(adj.neighbors(n as usize).contains(&(v as u32)));
            }
        }
    }

    #[test]
    fn nonmanifold_edges_are_counted() {
        let v = vec![crate::Vec3::zeros(), crate::Vec3::x(), crate::Vec3::y(), crate::Vec3::z(), -crate::Vec3::y()];
        let m = TriMesh::new(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap();
        let adj = MeshAdjacency::new(&m);
        assert_eq!(adj.nonmanifold_edges, 1);
        let e = adj.edges.iter().find(|e| (e.a, e.b) == (0, 1)).unwrap();
        assert_eq!(e.count, 3);
    }
}
