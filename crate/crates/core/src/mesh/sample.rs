use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::Vec3;

/// `n` points uniformly distributed over the surface, reproducible from `seed`.
pub fn sample_points_uniform(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    Ok(sample_points_with_faces(mesh, n, seed)?.into_iter().map(|(p, _)| p).collect())
}

/// Like [`sample_points_uniform`], also returning the face each point lies on.
pub fn sample_points_with_faces(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<(Vec3, usize)>> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.num_faces());
    let mut total = 0.0;
    for f in 0..mesh.num_faces() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.gen::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= u).min(mesh.num_faces() - 1);
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        let [a, b, c] = mesh.corners(f);
        out.push((a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2), f));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn deterministic_for_seed() {
        let s = shapes::icosphere(2);
        assert_eq!(sample_points_uniform(&s, 500, 9).unwrap(), sample_points_uniform(&s, 500, 9).unwrap());
        assert_ne!(sample_points_uniform(&s, 500, 9).unwrap(), sample_points_uniform(&s, 500, 10).unwrap());
    }

    #[test]
    fn single_triangle_containment() {
        let t = TriMesh::new(vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)], vec![[0, 1, 2]])
            .unwrap();
        for p in sample_points_uniform(&t, 3, 1).unwrap() {
            // barycentric coordinates for this right triangle
            let (b, c) = (p.x / 2.0, p.y);
            let a = 1.0 - b - c;
            assert!(a >= 0.0 && b >= 0.0 && c >= 0.0 && p.z == 0.0);
        }
    }

    #[test]
    fn quadrant_density_is_uniform() {
        let sheet = shapes::grid_sheet(7, 1.0);
        let n = 100_000;
        let pts = sample_points_uniform(&sheet, n, 3).unwrap();
        let mut counts = [0usize; 4];
        for p in &pts {
            counts[(p.x > 0.0) as usize + 2 * (p.y > 0.0) as usize] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 3 degrees of freedom, 99.9% quantile
        assert!(chi2 < 16.27, "chi2 = {chi2}");
        for c in counts {
            assert!((c as f64 - expected).abs() / expected < 0.02);
        }
    }

    #[test]
    fn points_lie_on_their_faces() {
        let s = shapes::icosphere(2).map_vertices(|p| p * 3.0);
        for (p, f) in sample_points_with_faces(&s, 2000, 4).unwrap() {
            let [a, _, _] = s.corners(f);
            let n = s.face_cross(f).normalize();
            assert!((p - a).dot(&n).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_area_errors() {
        let t = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(sample_points_uniform(&t, 5, 0), Err(Error::ZeroArea)));
    }
}
