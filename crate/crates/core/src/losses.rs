//! Training objective: bidirectional Chamfer on both surfaces, edge-length and
//! normal-consistency regularizers, and their weighted total. Every term
//! returns its gradient with respect to the mesh vertices alongside the value.

use crate::deform::{CoupledForward, HctParams, ParamGradients, SvfParams};
use crate::error::{Error, Result};
use crate::mesh::{MeshAdjacency, TriMesh, DEGENERATE_AREA};
use crate::spatial::{Nearest, NearestIndex, PointGrid};
use crate::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    #[default]
    Mean,
}

impl std::str::FromStr for Reduction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Reduction::Sum),
            "mean" => Ok(Reduction::Mean),
            _ => Err(Error::InvalidConfig(format!("unknown reduction '{s}' (expected sum or mean)"))),
        }
    }
}

impl std::fmt::Display for Reduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Reduction::Sum => "sum",
            Reduction::Mean => "mean",
        })
    }
}

impl Reduction {
    fn factor(self, count: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean if count == 0 => 0.0,
            Reduction::Mean => 1.0 / count as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub chamfer: f64,
    pub edge_length: f64,
    pub normal_consistency: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { chamfer: 1.0, edge_length: 1.0, normal_consistency: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("chamfer", self.chamfer),
            ("edge_length", self.edge_length),
            ("normal_consistency", self.normal_consistency),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidConfig(format!("weight {name} must be finite and nonnegative, got {w}")));
            }
        }
        Ok(())
    }
}

/// Loss terms of one evaluation. Regularizers are summed over wm and pial.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub chamfer_wm: f64,
    pub chamfer_pial: f64,
    pub edge_length: f64,
    pub normal_consistency: f64,
    pub total: f64,
    pub gradients: Option<ParamGradients>,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.chamfer_wm, self.chamfer_pial, self.edge_length, self.normal_consistency, self.total]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Value and gradient with respect to the first point set / mesh vertices.
pub type WithGrad = (f64, Vec<Vec3>);

fn check_nonempty(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    Ok(())
}

/// `sum_p min_q |p-q|^2 + sum_q min_p |q-p|^2`, each direction optionally
/// divided by its source-set size.
pub fn chamfer_bidirectional(pred: &[Vec3], target: &[Vec3], reduction: Reduction) -> Result<f64> {
    Ok(chamfer_with_grad(pred, target, reduction)?.0)
}

/// Chamfer value and its gradient with respect to `pred`, nearest neighbors held fixed.
pub fn chamfer_with_grad(pred: &[Vec3], target: &[Vec3], reduction: Reduction) -> Result<WithGrad> {
    check_nonempty(pred, target)?;
    let forward = PointGrid::new(target).nearest_all(pred);
    Ok(chamfer_from_forward(pred, target, &forward, reduction))
}

/// As [`chamfer_with_grad`] against a prebuilt index of the target set.
pub fn chamfer_to_index(pred: &[Vec3], target: &NearestIndex, reduction: Reduction) -> Result<WithGrad> {
    check_nonempty(pred, target.points())?;
    let forward = target.nearest_all(pred);
    Ok(chamfer_from_forward(pred, target.points(), &forward, reduction))
}

fn chamfer_from_forward(pred: &[Vec3], target: &[Vec3], forward: &[Nearest], reduction: Reduction) -> WithGrad {
    // Reverse queries land about as far away as the forward ones.
    let typical = forward.iter().map(|n| n.dist2.sqrt()).sum::<f64>() / forward.len() as f64;
    let backward = PointGrid::with_min_cell(pred, typical).nearest_all(target);
    let wf = reduction.factor(pred.len());
    let wb = reduction.factor(target.len());
    let mut grad = vec![Vec3::zeros(); pred.len()];
    let mut sf = 0.0;
    for (i, nn) in forward.iter().enumerate() {
        sf += nn.dist2;
        grad[i] += (pred[i] - target[nn.index]) * (2.0 * wf);
    }
    let mut sb = 0.0;
    for (q, nn) in target.iter().zip(&backward) {
        sb += nn.dist2;
        grad[nn.index] += (pred[nn.index] - q) * (2.0 * wb);
    }
    (sf * wf + sb * wb, grad)
}

/// `sum_p sum_{q in N(p)} |p-q|^2`: every undirected edge counts twice.
pub fn edge_length_loss(mesh: &TriMesh, adj: &MeshAdjacency, reduction: Reduction) -> WithGrad {
    let v = mesh.vertices();
    let w = reduction.factor(2 * adj.edges.len());
    let mut grad = vec![Vec3::zeros(); v.len()];
    let mut sum = 0.0;
    for e in &adj.edges {
        let (a, b) = (e.a as usize, e.b as usize);
        let d = v[a] - v[b];
        sum += 2.0 * d.norm_squared();
        grad[a] += d * (4.0 * w);
        grad[b] -= d * (4.0 * w);
    }
    (sum * w, grad)
}

/// `sum over interior edges of 1 - cos(angle between the two face normals)`.
pub fn normal_consistency_loss(mesh: &TriMesh, adj: &MeshAdjacency, reduction: Reduction) -> Result<WithGrad> {
    let crosses: Vec<Vec3> = (0..mesh.num_faces()).map(|f| mesh.face_cross(f)).collect();
    let lengths: Vec<f64> = crosses.iter().map(|c| c.norm()).collect();
    let interior = adj.edges.iter().filter(|e| e.is_interior()).count();
    let w = reduction.factor(interior);
    let mut face_grad = vec![Vec3::zeros(); mesh.num_faces()];
    let mut sum = 0.0;
    for e in adj.edges.iter().filter(|e| e.is_interior()) {
        let [f0, f1] = e.faces.map(|f| f as usize);
        for f in [f0, f1] {
            if 0.5 * lengths[f] < DEGENERATE_AREA {
                return Err(Error::DegenerateFace(f));
            }
        }
        let (n0, n1) = (crosses[f0] / lengths[f0], crosses[f1] / lengths[f1]);
        let cos = n0.dot(&n1);
        sum += 1.0 - cos;
        face_grad[f0] -= (n1 - n0 * cos) * (w / lengths[f0]);
        face_grad[f1] -= (n0 - n1 * cos) * (w / lengths[f1]);
    }
    // back through (b - a) x (c - a)
    let v = mesh.vertices();
    let mut grad = vec![Vec3::zeros(); v.len()];
    for (f, g) in mesh.faces().iter().zip(&face_grad) {
        let [a, b, c] = f.map(|i| i as usize);
        let (e1, e2) = (v[b] - v[a], v[c] - v[a]);
        let g1 = e2.cross(g);
        let g2 = g.cross(&e1);
        grad[a] -= g1 + g2;
        grad[b] += g1;
        grad[c] += g2;
    }
    Ok((sum * w, grad))
}

/// Fixed point sets the two predicted surfaces are fitted to, indexed once.
#[derive(Clone, Debug)]
pub struct SurfaceTargets {
    pub wm: NearestIndex,
    pub pial: NearestIndex,
}

fn mean_edge_length(mesh: &TriMesh) -> f64 {
    let adj = MeshAdjacency::new(mesh);
    let v = mesh.vertices();
    adj.edges.iter().map(|e| (v[e.a as usize] - v[e.b as usize]).norm()).sum::<f64>() / adj.edges.len().max(1) as f64
}

/// Queries farther than this many cells from the target fall back to a plain grid search.
const CANDIDATE_MARGIN_CELLS: f64 = 2.0;

fn index_mesh(mesh: &TriMesh) -> NearestIndex {
    let cell = mean_edge_length(mesh).max(1e-9);
    NearestIndex::new(mesh.vertices().to_vec(), cell, CANDIDATE_MARGIN_CELLS * cell)
}

impl SurfaceTargets {
    /// Index the vertices of both meshes, candidate cells about one edge wide.
    pub fn from_meshes(wm: &TriMesh, pial: &TriMesh) -> Self {
        Self { wm: index_mesh(wm), pial: index_mesh(pial) }
    }
}

/// Loss of a given wm/pial pair and the gradients with respect to both vertex sets.
pub fn surface_loss(
    wm: &TriMesh,
    pial: &TriMesh,
    adj: &MeshAdjacency,
    targets: &SurfaceTargets,
    weights: &LossWeights,
    reduction: Reduction,
) -> Result<(LossReport, Vec<Vec3>, Vec<Vec3>)> {
    let (chamfer_wm, gcw) = chamfer_to_index(wm.vertices(), &targets.wm, reduction)?;
    let (chamfer_pial, gcp) = chamfer_to_index(pial.vertices(), &targets.pial, reduction)?;
    let (elw, gew) = edge_length_loss(wm, adj, reduction);
    let (elp, gep) = edge_length_loss(pial, adj, reduction);
    let (ncw, gnw) = normal_consistency_loss(wm, adj, reduction)?;
    let (ncp, gnp) = normal_consistency_loss(pial, adj, reduction)?;
    let combine = |c: Vec<Vec3>, e: Vec<Vec3>, n: Vec<Vec3>| -> Vec<Vec3> {
        c.iter()
            .zip(&e)
            .zip(&n)
            .map(|((c, e), n)| c * weights.chamfer + e * weights.edge_length + n * weights.normal_consistency)
            .collect()
    };
    let edge_length = elw + elp;
    let normal_consistency = ncw + ncp;
    let total = weights.chamfer * (chamfer_wm + chamfer_pial)
        + weights.edge_length * edge_length
        + weights.normal_consistency * normal_consistency;
    let report = LossReport { chamfer_wm, chamfer_pial, edge_length, normal_consistency, total, gradients: None };
    Ok((report, combine(gcw, gew, gnw), combine(gcp, gep, gnp)))
}

/// Full objective as a function of the parameter grids: warp `init`, offset,
/// score, and pull the vertex gradients back to both grids.
pub fn total_loss(
    init: &TriMesh,
    adj: &MeshAdjacency,
    svf: &SvfParams,
    hct: &HctParams,
    targets: &SurfaceTargets,
    weights: &LossWeights,
    reduction: Reduction,
) -> Result<(LossReport, CoupledForward)> {
    let forward = CoupledForward::run(init, svf, hct)?;
    let (mut report, gw, gp) = surface_loss(forward.wm(), forward.pial(), adj, targets, weights, reduction)?;
    report.gradients = Some(forward.backward(init, hct, &gw, &gp));
    Ok((report, forward))
}
