//! Diffeomorphic warping by a stationary velocity field and coupled
//! white-matter / pial construction by half-thickness offsets along normals.
//!
//! Every forward step keeps what its adjoint needs, so the full chain from
//! parameter grids to the two output surfaces can be differentiated exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{vertex_normals, vertex_normals_backward, TriMesh, VertexNormals};
use crate::volume::{NormalizedFrame, ScalarVolume, Stencil, VectorVolume};
use crate::Vec3;

pub const MAX_SQUARING_STEPS: usize = 12;
pub const DEFAULT_SQUARING_STEPS: usize = 6;

/// Stationary velocity field in normalized units per unit time.
#[derive(Clone, Debug)]
pub struct SvfParams {
    pub velocity: VectorVolume,
    pub squaring_steps: usize,
}

impl SvfParams {
    pub fn new(velocity: VectorVolume, squaring_steps: usize) -> Result<Self> {
        if squaring_steps > MAX_SQUARING_STEPS {
            return Err(Error::InvalidConfig(format!(
                "squaring steps must be at most {MAX_SQUARING_STEPS}, got {squaring_steps}"
            )));
        }
        Ok(Self { velocity, squaring_steps })
    }

    pub fn zeros(dims: [usize; 3], squaring_steps: usize) -> Result<Self> {
        Self::new(VectorVolume::zeros(dims), squaring_steps)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn inverse_softplus(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

/// Half cortical thickness as a grid of unconstrained values, mapped to
/// `scale * softplus(raw)` where sampled. Always strictly positive.
#[derive(Clone, Debug)]
pub struct HctParams {
    pub raw: ScalarVolume,
    pub scale: f64,
}

impl HctParams {
    pub fn new(raw: ScalarVolume, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidConfig(format!("hct scale must be positive, got {scale}")));
        }
        Ok(Self { raw, scale })
    }

    /// Constant grid whose mapped half-thickness is `half_thickness` everywhere.
    pub fn uniform(dims: [usize; 3], half_thickness: f64, scale: f64) -> Result<Self> {
        if !(half_thickness > 0.0) {
            return Err(Error::InvalidConfig(format!("half thickness must be positive, got {half_thickness}")));
        }
        Self::new(ScalarVolume::filled(dims, inverse_softplus(half_thickness / scale)), scale)
    }

    #[inline]
    pub fn map(&self, raw: f64) -> f64 {
        self.scale * softplus(raw)
    }

    #[inline]
    fn map_derivative(&self, raw: f64) -> f64 {
        self.scale * sigmoid(raw)
    }
}

/// Intermediate displacement fields of scaling and squaring, `u_0 .. u_K`.
#[derive(Clone, Debug)]
pub struct SvfFlow {
    steps: Vec<VectorVolume>,
}

/// `u_{k+1}(x) = u_k(x) + u_k(x + u_k(x))` on the grid nodes.
fn square(u: &VectorVolume) -> VectorVolume {
    let frame = u.frame();
    let data = u.data();
    let next: Vec<Vec3> = (0..frame.len())
        .into_par_iter()
        .map(|n| {
            let [i, j, k] = frame.coords(n);
            let q = frame.node(i, j, k) + data[n];
            data[n] + Stencil::new(&frame, &q).vector(data)
        })
        .collect();
    VectorVolume::new(u.dims(), u.spacing(), next).expect("finite composition")
}

impl SvfFlow {
    pub fn integrate(params: &SvfParams) -> SvfFlow {
        let scale = 0.5f64.powi(params.squaring_steps as i32);
        let mut steps = Vec::with_capacity(params.squaring_steps + 1);
        steps.push(params.velocity.scaled(scale));
        for _ in 0..params.squaring_steps {
            let next = square(steps.last().unwrap());
            steps.push(next);
        }
        SvfFlow { steps }
    }

    /// Displacement `u` with `phi(x) = x + u(x)`.
    pub fn displacement(&self) -> &VectorVolume {
        self.steps.last().unwrap()
    }

    /// Pull a cotangent on the final displacement grid back to the velocity grid.
    pub fn backward(&self, grad_displacement: &[Vec3]) -> Vec<Vec3> {
        let mut grad = grad_displacement.to_vec();
        for u in self.steps[..self.steps.len() - 1].iter().rev() {
            let frame = u.frame();
            let data = u.data();
            // identity term
            let mut prev = grad.clone();
            for n in 0..frame.len() {
                let g = grad[n];
                if g == Vec3::zeros() {
                    continue;
                }
                let [i, j, k] = frame.coords(n);
                let stencil = Stencil::new(&frame, &(frame.node(i, j, k) + data[n]));
                stencil.scatter_vector(&mut prev, &g);
                let (_, jac) = stencil.vector_jacobian(data);
                prev[n] += jac.transpose() * g;
            }
            grad = prev;
        }
        let scale = 0.5f64.powi(self.steps.len() as i32 - 1);
        grad.iter().map(|g| g * scale).collect()
    }
}

/// Displacement field of the flow of `params.velocity` at time 1.
pub fn integrate_svf(params: &SvfParams) -> VectorVolume {
    SvfFlow::integrate(params).displacement().clone()
}

/// Move every vertex by the interpolated displacement; connectivity is kept.
pub fn warp_mesh(displacement: &VectorVolume, mesh: &TriMesh) -> TriMesh {
    let moved = displacement.sample_many(mesh.vertices());
    mesh.with_vertices(mesh.vertices().iter().zip(moved).map(|(p, d)| p + d).collect())
}

/// Adjoint of [`warp_mesh`] with respect to the displacement grid values.
pub fn warp_mesh_backward(frame: &NormalizedFrame, mesh: &TriMesh, grad_vertices: &[Vec3]) -> Vec<Vec3> {
    crate::volume::sample::vector_sample_adjoint(frame, mesh.vertices(), grad_vertices)
}

/// White-matter and pial surfaces offset from a midthickness mesh.
#[derive(Clone, Debug)]
pub struct OffsetSurfaces {
    pub wm: TriMesh,
    pub pial: TriMesh,
    /// Half thickness per vertex; the thickness is twice this.
    pub half_thickness: Vec<f64>,
    normals: VertexNormals,
    raw: Vec<f64>,
}

impl OffsetSurfaces {
    pub fn thickness(&self) -> Vec<f64> {
        self.half_thickness.iter().map(|h| 2.0 * h).collect()
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals.normals
    }

    /// Pull cotangents on the wm and pial vertices back to the midthickness
    /// vertices and to the raw half-thickness grid.
    pub fn backward(&self, mid: &TriMesh, hct: &HctParams, grad_wm: &[Vec3], grad_pial: &[Vec3]) -> (Vec<Vec3>, Vec<f64>) {
        let frame = hct.raw.frame();
        let n = mid.num_vertices();
        let mut grad_mid = Vec::with_capacity(n);
        let mut grad_normals = Vec::with_capacity(n);
        let mut grad_raw_grid = vec![0.0; frame.len()];
        for v in 0..n {
            let (gw, gp) = (grad_wm[v], grad_pial[v]);
            let diff = gp - gw;
            let normal = self.normals.normals[v];
            grad_normals.push(diff * self.half_thickness[v]);
            let grad_raw = normal.dot(&diff) * hct.map_derivative(self.raw[v]);
            let p = mid.vertices()[v];
            let stencil = Stencil::new(&frame, &p);
            stencil.scatter_scalar(&mut grad_raw_grid, grad_raw);
            let (_, dp) = stencil.scalar_grad(hct.raw.data());
            grad_mid.push(gw + gp + dp * grad_raw);
        }
        let through_normals = vertex_normals_backward(mid, &self.normals, &grad_normals);
        for (g, t) in grad_mid.iter_mut().zip(through_normals) {
            *g += t;
        }
        (grad_mid, grad_raw_grid)
    }
}

/// `wm = p - dp n`, `pial = p + dp n` with `dp` sampled from the half-thickness
/// field at each midthickness vertex `p` and `n` its unit vertex normal.
pub fn offset_surfaces(mid: &TriMesh, hct: &HctParams) -> Result<OffsetSurfaces> {
    let normals = vertex_normals(mid)?;
    let raw = hct.raw.sample_many(mid.vertices());
    let half_thickness: Vec<f64> = raw.iter().map(|&r| hct.map(r)).collect();
    let mut wm = Vec::with_capacity(mid.num_vertices());
    let mut pial = Vec::with_capacity(mid.num_vertices());
    for ((p, n), h) in mid.vertices().iter().zip(&normals.normals).zip(&half_thickness) {
        wm.push(p - n * *h);
        pial.push(p + n * *h);
    }
    Ok(OffsetSurfaces { wm: mid.with_vertices(wm), pial: mid.with_vertices(pial), half_thickness, normals, raw })
}

/// Gradients of a scalar objective with respect to both parameter grids.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradients {
    pub velocity: Vec<Vec3>,
    pub hct_raw: Vec<f64>,
}

/// Forward pass of the whole deformation: `S_0 -> mid -> (wm, pial)`.
#[derive(Clone, Debug)]
pub struct CoupledForward {
    pub flow: SvfFlow,
    pub mid: TriMesh,
    pub offsets: OffsetSurfaces,
}

impl CoupledForward {
    pub fn run(init: &TriMesh, svf: &SvfParams, hct: &HctParams) -> Result<CoupledForward> {
        let flow = SvfFlow::integrate(svf);
        let mid = warp_mesh(flow.displacement(), init);
        let offsets = offset_surfaces(&mid, hct)?;
        Ok(CoupledForward { flow, mid, offsets })
    }

    pub fn wm(&self) -> &TriMesh {
        &self.offsets.wm
    }

    pub fn pial(&self) -> &TriMesh {
        &self.offsets.pial
    }

    pub fn backward(&self, init: &TriMesh, hct: &HctParams, grad_wm: &[Vec3], grad_pial: &[Vec3]) -> ParamGradients {
        let (grad_mid, hct_raw) = self.offsets.backward(&self.mid, hct, grad_wm, grad_pial);
        let grad_u = warp_mesh_backward(&self.flow.displacement().frame(), init, &grad_mid);
        ParamGradients { velocity: self.flow.backward(&grad_u), hct_raw }
    }
}
