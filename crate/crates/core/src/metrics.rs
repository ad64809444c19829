//! Surface distance metrics over uniformly sampled point clouds: Chamfer
//! distance, average absolute distance and 90th-percentile Hausdorff distance,
//! all computed in both directions and reported in physical units.

use crate::error::{Error, Result};
use crate::mesh::{sample_points_uniform, TriMesh};
use crate::spatial::PointGrid;
use crate::volume::NormalizedFrame;
use crate::Vec3;

pub const DEFAULT_SAMPLES: usize = 20_000;

/// Physical length of one normalized unit along each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricUnits {
    pub scale: [f64; 3],
}

impl MetricUnits {
    pub fn normalized() -> Self {
        Self { scale: [1.0; 3] }
    }

    pub fn voxels(frame: &NormalizedFrame) -> Self {
        Self::physical(frame, [1.0; 3])
    }

    pub fn physical(frame: &NormalizedFrame, spacing: [f64; 3]) -> Self {
        let vpu = frame.voxels_per_unit();
        Self { scale: [0, 1, 2].map(|a| vpu[a] * spacing[a]) }
    }

    fn apply(&self, p: &Vec3) -> Vec3 {
        Vec3::new(p.x * self.scale[0], p.y * self.scale[1], p.z * self.scale[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceMetrics {
    pub cd: f64,
    pub ad: f64,
    pub hd90: f64,
    pub n_points: usize,
}

impl std::fmt::Display for SurfaceMetrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cd={:.6} ad={:.6} hd90={:.6} n={}", self.cd, self.ad, self.hd90, self.n_points)
    }
}

/// Per-point nearest distances behind a [`SurfaceMetrics`].
#[derive(Clone, Debug)]
pub struct MetricDistances {
    pub pred_to_target: Vec<f64>,
    pub target_to_pred: Vec<f64>,
}

/// Percentile by linear interpolation between order statistics, `p` in `[0, 1]`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn nearest_distances(from: &[Vec3], to: &[Vec3]) -> Vec<f64> {
    PointGrid::new(to).nearest_all(from).iter().map(|n| n.dist2.sqrt()).collect()
}

impl MetricDistances {
    pub fn between(pred: &[Vec3], target: &[Vec3]) -> Result<Self> {
        if pred.is_empty() || target.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        Ok(Self { pred_to_target: nearest_distances(pred, target), target_to_pred: nearest_distances(target, pred) })
    }

    pub fn summary(&self) -> SurfaceMetrics {
        let mean_sq = |v: &[f64]| v.iter().map(|d| d * d).sum::<f64>() / v.len() as f64;
        let (a, b) = (&self.pred_to_target, &self.target_to_pred);
        SurfaceMetrics {
            cd: mean_sq(a) + mean_sq(b),
            ad: (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (a.len() + b.len()) as f64,
            hd90: percentile(a, 0.9).max(percentile(b, 0.9)),
            n_points: a.len().max(b.len()),
        }
    }
}

/// Sample `n` points on each mesh with the same seed and compare them.
pub fn evaluate_detailed(pred: &TriMesh, target: &TriMesh, n: usize, seed: u64, units: &MetricUnits) -> Result<MetricDistances> {
    if n < 1 {
        return Err(Error::InvalidConfig("metric sample count must be at least 1".into()));
    }
    let scaled = |m: &TriMesh| -> Result<Vec<Vec3>> {
        Ok(sample_points_uniform(m, n, seed)?.iter().map(|p| units.apply(p)).collect())
    };
    MetricDistances::between(&scaled(pred)?, &scaled(target)?)
}

pub fn evaluate(pred: &TriMesh, target: &TriMesh, n: usize, seed: u64, units: &MetricUnits) -> Result<SurfaceMetrics> {
    Ok(evaluate_detailed(pred, target, n, seed, units)?.summary())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use crate::spatial::brute_force_nearest;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 5.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert!((percentile(&v, 0.9) - 4.6).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.9), 7.0);
    }

    #[test]
    fn self_comparison_is_zero() {
        let s = shapes::icosphere(3);
        let m = evaluate(&s, &s, 2000, 7, &MetricUnits::normalized()).unwrap();
        assert_eq!((m.cd, m.ad, m.hd90, m.n_points), (0.0, 0.0, 0.0, 2000));
    }

    #[test]
    fn zero_samples_rejected() {
        let s = shapes::icosphere(1);
        assert!(evaluate(&s, &s, 0, 1, &MetricUnits::normalized()).is_err());
    }

    #[test]
    fn concentric_spheres() {
        let r = 0.5;
        let d = 0.02;
        let a = shapes::icosphere(5).map_vertices(|p| p * r);
        let b = shapes::icosphere(5).map_vertices(|p| p * (r + d));
        let m = evaluate(&a, &b, 20_000, 3, &MetricUnits::normalized()).unwrap();
        assert!((m.ad - d).abs() < 0.05 * d, "{m}");
        assert!((m.hd90 - d).abs() < 0.1 * d, "{m}");
        assert!(m.ad <= m.hd90);
        let bigger = shapes::icosphere(5).map_vertices(|p| p * (r + 2.0 * d));
        assert!(evaluate(&a, &bigger, 20_000, 3, &MetricUnits::normalized()).unwrap().ad > m.ad);
    }

    #[test]
    fn units_scale_distances() {
        let a = shapes::icosphere(3).map_vertices(|p| p * 0.5);
        let b = shapes::icosphere(3).map_vertices(|p| p * 0.55);
        let frame = NormalizedFrame::new([65, 65, 65]);
        let n = evaluate(&a, &b, 3000, 1, &MetricUnits::normalized()).unwrap();
        let v = evaluate(&a, &b, 3000, 1, &MetricUnits::physical(&frame, [2.0; 3])).unwrap();
        assert!((v.ad - 64.0 * n.ad).abs() < 1e-9);
        assert!((v.cd - 64.0 * 64.0 * n.cd).abs() < 1e-6);
    }

    #[test]
    fn accelerated_distances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cloud = |n: usize| -> Vec<Vec3> { (0..n).map(|_| Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect() };
        let a = cloud(2000);
        let b = cloud(2000);
        let d = MetricDistances::between(&a, &b).unwrap();
        for (p, got) in a.iter().zip(&d.pred_to_target) {
            assert!((brute_force_nearest(&b, p).dist2.sqrt() - got).abs() < 1e-12);
        }
        for (q, got) in b.iter().zip(&d.target_to_pred) {
            assert!((brute_force_nearest(&a, q).dist2.sqrt() - got).abs() < 1e-12);
        }
        let swapped = MetricDistances::between(&b, &a).unwrap().summary();
        let m = d.summary();
        assert!((m.cd - swapped.cd).abs() < 1e-12 && (m.ad - swapped.ad).abs() < 1e-12 && m.hd90 == swapped.hd90);
    }
}
