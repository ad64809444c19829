//! Trilinear interpolation in the normalized frame, with point jacobians and
//! grid adjoints. Points outside `[-1, 1]^3` are clamped to the boundary
//! (replicate padding); the derivative along a clamped axis is zero.

use rayon::prelude::*;

use super::{NormalizedFrame, ScalarVolume, VectorVolume};
use crate::Vec3;

/// The eight grid nodes around a point, their weights, and the weight
/// derivatives with respect to the (normalized) point.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub index: [usize; 8],
    pub weight: [f64; 8],
    pub dweight: [Vec3; 8],
}

impl Stencil {
    pub fn new(frame: &NormalizedFrame, p: &Vec3) -> Stencil {
        let dims = frame.dims();
        let scale = frame.voxels_per_unit();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut t = [0.0; 3];
        let mut dt = [0.0; 3];
        for a in 0..3 {
            let n = dims[a];
            if n < 2 {
                continue;
            }
            let g = (p[a] + 1.0) * scale[a];
            let max = (n - 1) as f64;
            let (g, inside) = if g < 0.0 {
                (0.0, false)
            } else if g > max {
                (max, false)
            } else {
                (g, true)
            };
            let i0 = (g.floor() as usize).min(n - 2);
            lo[a] = i0;
            hi[a] = i0 + 1;
            t[a] = g - i0 as f64;
            dt[a] = if inside { scale[a] } else { 0.0 };
        }

        let mut index = [0; 8];
        let mut weight = [0.0; 8];
        let mut dweight = [Vec3::zeros(); 8];
        for c in 0..8 {
            let bit = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let mut idx = [0; 3];
            let mut f = [0.0; 3];
            let mut df = [0.0; 3];
            for a in 0..3 {
                if bit[a] == 1 {
                    idx[a] = hi[a];
                    f[a] = t[a];
                    df[a] = dt[a];
                } else {
                    idx[a] = lo[a];
                    f[a] = 1.0 - t[a];
                    df[a] = -dt[a];
                }
            }
            index[c] = frame.index(idx[0], idx[1], idx[2]);
            weight[c] = f[0] * f[1] * f[2];
            dweight[c] = Vec3::new(df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]);
        }
        Stencil { index, weight, dweight }
    }

    #[inline]
    pub fn scalar(&self, data: &[f64]) -> f64 {
        (0..8).map(|c| self.weight[c] * data[self.index[c]]).sum()
    }

    /// Value and gradient with respect to the point.
    #[inline]
    pub fn scalar_grad(&self, data: &[f64]) -> (f64, Vec3) {
        let mut v = 0.0;
        let mut g = Vec3::zeros();
        for c in 0..8 {
            let x = data[self.index[c]];
            v += self.weight[c] * x;
            g += self.dweight[c] * x;
        }
        (v, g)
    }

    #[inline]
    pub fn vector(&self, data: &[Vec3]) -> Vec3 {
        let mut v = Vec3::zeros();
        for c in 0..8 {
            v += data[self.index[c]] * self.weight[c];
        }
        v
    }

    /// Value and jacobian `J[(component, axis)] = d value_component / d p_axis`.
    #[inline]
    pub fn vector_jacobian(&self, data: &[Vec3]) -> (Vec3, nalgebra::Matrix3<f64>) {
        let mut v = Vec3::zeros();
        let mut j = nalgebra::Matrix3::zeros();
        for c in 0..8 {
            let x = data[self.index[c]];
            v += x * self.weight[c];
            j += x * self.dweight[c].transpose();
        }
        (v, j)
    }

    #[inline]
    pub fn scatter_scalar(&self, grad: &mut [f64], cotangent: f64) {
        for c in 0..8 {
            grad[self.index[c]] += self.weight[c] * cotangent;
        }
    }

    #[inline]
    pub fn scatter_vector(&self, grad: &mut [Vec3], cotangent: &Vec3) {
        for c in 0..8 {
            grad[self.index[c]] += cotangent * self.weight[c];
        }
    }
}

impl ScalarVolume {
    pub fn sample(&self, p: &Vec3) -> f64 {
        Stencil::new(&self.frame(), p).scalar(self.data())
    }

    /// Value and spatial gradient (per normalized unit).
    pub fn sample_grad(&self, p: &Vec3) -> (f64, Vec3) {
        Stencil::new(&self.frame(), p).scalar_grad(self.data())
    }

    pub fn sample_many(&self, points: &[Vec3]) -> Vec<f64> {
        let frame = self.frame();
        points.par_iter().map(|p| Stencil::new(&frame, p).scalar(self.data())).collect()
    }
}

impl VectorVolume {
    pub fn sample(&self, p: &Vec3) -> Vec3 {
        Stencil::new(&self.frame(), p).vector(self.data())
    }

    pub fn sample_jacobian(&self, p: &Vec3) -> (Vec3, nalgebra::Matrix3<f64>) {
        Stencil::new(&self.frame(), p).vector_jacobian(self.data())
    }

    pub fn sample_many(&self, points: &[Vec3]) -> Vec<Vec3> {
        let frame = self.frame();
        points.par_iter().map(|p| Stencil::new(&frame, p).vector(self.data())).collect()
    }
}

/// Adjoint of `ScalarVolume::sample_many` with respect to the grid values.
/// Accumulation runs in point order, so the result is deterministic.
pub fn scalar_sample_adjoint(frame: &NormalizedFrame, points: &[Vec3], cotangents: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; frame.len()];
    for (p, &w) in points.iter().zip(cotangents) {
        Stencil::new(frame, p).scatter_scalar(&mut grad, w);
    }
    grad
}

/// Adjoint of `VectorVolume::sample_many` with respect to the grid values.
pub fn vector_sample_adjoint(frame: &NormalizedFrame, points: &[Vec3], cotangents: &[Vec3]) -> Vec<Vec3> {
    let mut grad = vec![Vec3::zeros(); frame.len()];
    for (p, w) in points.iter().zip(cotangents) {
        Stencil::new(frame, p).scatter_vector(&mut grad, w);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(dims: [usize; 3], seed: u64) -> ScalarVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarVolume::from_fn(dims, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    fn random_interior_point(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::from_fn(|_, _| rng.gen_range(-0.95..0.95))
    }

    #[test]
    fn exact_at_nodes() {
        let f = random_field([5, 4, 6], 1);
        let frame = f.frame();
        for k in 0..6 {
            for j in 0..4 {
                for i in 0..5 {
                    assert!((f.sample(&frame.node(i, j, k)) - f.get(i, j, k)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn reproduces_linear_functions() {
        let dims = [7, 9, 5];
        let frame = NormalizedFrame::new(dims);
        let lin = |p: &Vec3| 0.3 * p.x - 1.7 * p.y + 2.2 * p.z + 0.5;
        let f = ScalarVolume::from_fn(dims, |i, j, k| lin(&frame.node(i, j, k)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            assert!((f.sample(&p) - lin(&p)).abs() < 1e-12);
            let (_, g) = f.sample_grad(&p);
            assert!((g - Vec3::new(0.3, -1.7, 2.2)).norm() < 1e-9);
        }
    }

    #[test]
    fn clamps_outside_points() {
        let f = random_field([4, 4, 4], 3);
        let inside = Vec3::new(1.0, -0.2, 0.4);
        let outside = Vec3::new(3.0, -0.2, 0.4);
        assert_eq!(f.sample(&inside), f.sample(&outside));
        let (_, g) = f.sample_grad(&outside);
        assert_eq!(g.x, 0.0);
    }

    #[test]
    fn point_gradient_matches_central_differences() {
        let f = random_field([6, 6, 6], 4);
        let v = VectorVolume::from_fn([5, 6, 7], |i, j, k| Vec3::new((i * j) as f64 * 0.1, (k as f64).sin(), (i + k) as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for _ in 0..50 {
            let p = random_interior_point(&mut rng);
            let (_, g) = f.sample_grad(&p);
            let (_, jac) = v.sample_jacobian(&p);
            for a in 0..3 {
                let mut e = Vec3::zeros();
                e[a] = h;
                let fd = (f.sample(&(p + e)) - f.sample(&(p - e))) / (2.0 * h);
                assert!((fd - g[a]).abs() <= 1e-6 * fd.abs().max(1.0), "{fd} vs {}", g[a]);
                let fdv = (v.sample(&(p + e)) - v.sample(&(p - e))) / (2.0 * h);
                for c in 0..3 {
                    assert!((fdv[c] - jac[(c, a)]).abs() <= 1e-6 * fdv[c].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn grid_adjoint_is_transpose_of_sampling() {
        let dims = [4, 5, 3];
        let frame = NormalizedFrame::new(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let points: Vec<Vec3> = (0..40).map(|_| random_interior_point(&mut rng)).collect();
        let cot: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let adj = scalar_sample_adjoint(&frame, &points, &cot);
        let delta = random_field(dims, 7);
        // <w, S delta> == <S^T w, delta>
        let lhs: f64 = delta.sample_many(&points).iter().zip(&cot).map(|(a, b)| a * b).sum();
        let rhs: f64 = adj.iter().zip(delta.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
