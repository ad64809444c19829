//! Per-case reconstruction: build targets and the initial midthickness mesh
//! from the two masks, then fit the velocity and half-thickness grids with
//! Adam on the total loss.

use crate::deform::{inverse_softplus, CoupledForward, HctParams, ParamGradients, SvfParams, DEFAULT_SQUARING_STEPS};
use crate::error::{Error, Result};
use crate::levelset::{gaussian_smooth, marching_cubes, midthickness_level_set, separate_from_level, topology_repair};
use crate::losses::{total_loss, LossReport, LossWeights, Reduction, SurfaceTargets};
use crate::mesh::{equalize_valence, loop_subdivide, midpoint_subdivide, tangential_relax, MeshAdjacency, TriMesh};
use crate::metrics::{evaluate, MetricUnits, SurfaceMetrics};
use crate::volume::{signed_distance, NormalizedFrame, ScalarVolume, VectorVolume};
use crate::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TargetSource {
    #[default]
    FromMasks,
    ProvidedMeshes,
}

impl std::str::FromStr for TargetSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "from_masks" | "masks" => Ok(Self::FromMasks),
            "provided_meshes" | "meshes" => Ok(Self::ProvidedMeshes),
            _ => Err(Error::InvalidConfig(format!("unknown target source '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionConfig {
    pub iterations: usize,
    pub step_size: f64,
    /// Step size at the last iteration as a fraction of `step_size`; the
    /// schedule is geometric in between.
    pub final_step_fraction: f64,
    /// Velocity parameters step at `step_size * svf_step_ratio`.
    pub svf_step_ratio: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub squaring_steps: usize,
    /// `None` means half the volume dims.
    pub svf_grid_dims: Option<[usize; 3]>,
    /// `None` means a quarter of the volume dims.
    pub hct_grid_dims: Option<[usize; 3]>,
    pub weights: LossWeights,
    pub reduction: Reduction,
    /// Half thickness is `hct_scale * softplus(raw)` in normalized units.
    pub hct_scale: f64,
    /// The initial mesh is Loop-subdivided to the level whose vertex count is
    /// closest to this.
    pub target_vertices: usize,
    /// Midpoint subdivisions applied to the target meshes before they are used
    /// as Chamfer point sets.
    pub target_subdivisions: usize,
    pub init: InitOptions,
    pub seed: u64,
    pub target_source: TargetSource,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            iterations: 150,
            step_size: 5e-2,
            final_step_fraction: 0.05,
            svf_step_ratio: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            squaring_steps: DEFAULT_SQUARING_STEPS,
            svf_grid_dims: None,
            hct_grid_dims: None,
            weights: LossWeights::default(),
            reduction: Reduction::Mean,
            hct_scale: 0.05,
            target_vertices: 40_000,
            target_subdivisions: 1,
            init: InitOptions::default(),
            seed: 0,
            target_source: TargetSource::FromMasks,
        }
    }
}

fn reduced_dims(dims: [usize; 3], factor: usize) -> [usize; 3] {
    dims.map(|d| (d / factor).max(2))
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad(format!("step_size must be positive, got {}", self.step_size));
        }
        if !(self.final_step_fraction > 0.0 && self.final_step_fraction <= 1.0) {
            return bad(format!("final_step_fraction must be in (0, 1], got {}", self.final_step_fraction));
        }
        if !(self.svf_step_ratio.is_finite() && self.svf_step_ratio > 0.0) {
            return bad(format!("svf_step_ratio must be positive, got {}", self.svf_step_ratio));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decays must be in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(self.hct_scale.is_finite() && self.hct_scale > 0.0) {
            return bad(format!("hct_scale must be positive, got {}", self.hct_scale));
        }
        for dims in [self.svf_grid_dims, self.hct_grid_dims].into_iter().flatten() {
            if dims.iter().any(|&d| d < 2) {
                return bad(format!("parameter grids need at least 2 nodes per axis, got {dims:?}"));
            }
        }
        self.weights.validate()?;
        SvfParams::zeros([2, 2, 2], self.squaring_steps).map(|_| ())
    }

    pub fn svf_dims(&self, volume: [usize; 3]) -> [usize; 3] {
        self.svf_grid_dims.unwrap_or_else(|| reduced_dims(volume, 2))
    }

    pub fn hct_dims(&self, volume: [usize; 3]) -> [usize; 3] {
        self.hct_grid_dims.unwrap_or_else(|| reduced_dims(volume, 4))
    }

    fn step_at(&self, t: usize) -> f64 {
        let span = self.iterations.saturating_sub(1).max(1) as f64;
        self.step_size * self.final_step_fraction.powf(t as f64 / span)
    }
}

/// Node values of the summed distance field are kept this far (in units of
/// the voxel spacing) from the zero level.
const ISO_MARGIN: f64 = 0.1;

/// Target meshes at the zero level of each mask's signed distance. The
/// strings are warnings about anatomically implausible input.
pub fn build_targets(mask_w: &ScalarVolume, mask_g: &ScalarVolume) -> Result<(TriMesh, TriMesh, Vec<String>)> {
    mask_w.same_geometry(mask_g)?;
    let mut warnings = Vec::new();
    let outside = mask_w
        .data()
        .iter()
        .zip(mask_g.data())
        .filter(|(w, g)| ScalarVolume::is_foreground(**w) && !ScalarVolume::is_foreground(**g))
        .count();
    if outside > 0 {
        warnings.push(format!("{outside} wm voxels lie outside the gm mask"));
    }
    let wm = marching_cubes(&signed_distance(mask_w)?, 0.0)?;
    let pial = marching_cubes(&signed_distance(mask_g)?, 0.0)?;
    Ok((wm, pial, warnings))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitOptions {
    /// Blurs applied to the summed distance field before extraction; each
    /// is the same small Gaussian the topology repair uses.
    pub smoothing_rounds: usize,
    pub repair_rounds: usize,
    /// Tangential relaxation passes on the extracted mesh.
    pub relax_iterations: usize,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self { smoothing_rounds: 4, repair_rounds: 8, relax_iterations: 30 }
    }
}

/// Initial midthickness mesh: zero level of the summed signed distances,
/// repaired to a single genus-0 component.
pub fn initialize(mask_w: &ScalarVolume, mask_g: &ScalarVolume, options: &InitOptions) -> Result<TriMesh> {
    let (_, mesh) = initialize_with_sdf(mask_w, mask_g, options)?;
    Ok(mesh)
}

fn initialize_with_sdf(
    mask_w: &ScalarVolume,
    mask_g: &ScalarVolume,
    options: &InitOptions,
) -> Result<((ScalarVolume, ScalarVolume), TriMesh)> {
    mask_w.same_geometry(mask_g)?;
    let sdf_w = signed_distance(mask_w)?;
    let sdf_g = signed_distance(mask_g)?;
    let mut level = midthickness_level_set(&sdf_w, &sdf_g)?;
    for _ in 0..options.smoothing_rounds {
        level = gaussian_smooth(&level);
    }
    let spacing = mask_w.spacing();
    let margin = ISO_MARGIN * (spacing[0] + spacing[1] + spacing[2]) / 3.0;
    let (_, mesh) = topology_repair(&separate_from_level(&level, 0.0, margin), options.repair_rounds)?;
    Ok(((sdf_w, sdf_g), tangential_relax(&equalize_valence(&mesh), options.relax_iterations, 0.5)))
}

/// Loop-subdivide while that brings the vertex count closer to `target_vertices`
/// (compared by ratio).
pub fn refine(mesh: &TriMesh, target_vertices: usize) -> TriMesh {
    let target = target_vertices.max(1) as f64;
    let mut mesh = mesh.clone();
    loop {
        let now = mesh.num_vertices() as f64;
        let adj = MeshAdjacency::new(&mesh);
        let next = now + adj.edges.len() as f64;
        if (next / target).ln().abs() >= (now / target).ln().abs() {
            return mesh;
        }
        mesh = loop_subdivide(&mesh);
    }
}

/// Initial half thickness in normalized units: half of the mean half-gap
/// between the two signed distances over the mesh, kept positive.
pub fn initial_half_thickness(sdf_w: &ScalarVolume, sdf_g: &ScalarVolume, mesh: &TriMesh) -> f64 {
    let frame = sdf_w.frame();
    let vpu = frame.voxels_per_unit();
    let spacing = sdf_w.spacing();
    let unit = (0..3).map(|a| vpu[a] * spacing[a]).sum::<f64>() / 3.0;
    let gaps: f64 = mesh.vertices().iter().map(|p| (sdf_w.sample(p) - sdf_g.sample(p)) / 2.0).sum();
    let mean_gap = gaps / mesh.num_vertices() as f64 / unit;
    let floor = 0.25 / vpu.iter().sum::<f64>() * 3.0;
    (0.5 * mean_gap).max(floor)
}

/// Adam over one flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1, beta2, epsilon }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], step: f64) {
        self.step_scaled(params, grad, &[(params.len(), step)]);
    }

    /// Step with a different step size per contiguous block `(len, step)`.
    pub fn step_scaled(&mut self, params: &mut [f64], grad: &[f64], blocks: &[(usize, f64)]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let mut block = 0;
        let mut block_end = blocks[0].0;
        for i in 0..params.len() {
            while i >= block_end {
                block += 1;
                block_end += blocks[block].0;
            }
            let step = blocks[block].1;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= step * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.epsilon);
        }
    }
}

fn flatten(svf: &SvfParams, hct: &HctParams) -> Vec<f64> {
    let mut out: Vec<f64> = svf.velocity.data().iter().flat_map(|v| [v.x, v.y, v.z]).collect();
    out.extend_from_slice(hct.raw.data());
    out
}

fn unflatten(flat: &[f64], svf: &mut SvfParams, hct: &mut HctParams) {
    let n = svf.velocity.data().len();
    for (v, c) in svf.velocity.data_mut().iter_mut().zip(flat[..3 * n].chunks_exact(3)) {
        *v = Vec3::new(c[0], c[1], c[2]);
    }
    hct.raw.data_mut().copy_from_slice(&flat[3 * n..]);
}

fn flatten_grad(g: &ParamGradients) -> Vec<f64> {
    let mut out: Vec<f64> = g.velocity.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
    out.extend_from_slice(&g.hct_raw);
    out
}

/// One line of the optimization trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub total: f64,
    pub chamfer_wm: f64,
    pub chamfer_pial: f64,
    pub edge_length: f64,
    pub normal_consistency: f64,
    pub best_total: f64,
    pub step: f64,
}

impl std::fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iter={} total={:.9e} chamfer_wm={:.9e} chamfer_pial={:.9e} edge_length={:.9e} normal_consistency={:.9e} best={:.9e} step={:.3e}",
            self.iteration,
            self.total,
            self.chamfer_wm,
            self.chamfer_pial,
            self.edge_length,
            self.normal_consistency,
            self.best_total,
            self.step
        )
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub init: TriMesh,
    pub mid: TriMesh,
    pub wm: TriMesh,
    pub pial: TriMesh,
    /// `2 * half thickness` per vertex, normalized units.
    pub thickness_per_vertex: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub best_iteration: usize,
    pub svf: SvfParams,
    pub hct: HctParams,
    pub target_wm: TriMesh,
    pub target_pial: TriMesh,
    pub warnings: Vec<String>,
    /// wm and pial metrics, when reference surfaces were supplied.
    pub final_metrics: Option<(SurfaceMetrics, SurfaceMetrics)>,
}

impl ReconstructionResult {
    pub fn evaluate(&self, gt_wm: &TriMesh, gt_pial: &TriMesh, n: usize, seed: u64, units: &MetricUnits) -> Result<(SurfaceMetrics, SurfaceMetrics)> {
        Ok((evaluate(&self.wm, gt_wm, n, seed, units)?, evaluate(&self.pial, gt_pial, n, seed, units)?))
    }
}

/// What an observer sees after each loss evaluation.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub report: &'a LossReport,
    pub forward: &'a CoupledForward,
}

pub struct ReconstructionInputs<'a> {
    pub mask_w: &'a ScalarVolume,
    pub mask_g: &'a ScalarVolume,
    pub targets: Option<(&'a TriMesh, &'a TriMesh)>,
}

pub fn reconstruct(inputs: &ReconstructionInputs, config: &ReconstructionConfig) -> Result<ReconstructionResult> {
    reconstruct_observed(inputs, config, &mut |_| {})
}

pub fn reconstruct_observed(
    inputs: &ReconstructionInputs,
    config: &ReconstructionConfig,
    observer: &mut dyn FnMut(&IterationView),
) -> Result<ReconstructionResult> {
    config.validate()?;
    let ((sdf_w, sdf_g), s0) = initialize_with_sdf(inputs.mask_w, inputs.mask_g, &config.init)?;
    let (target_wm, target_pial, warnings) = match (config.target_source, inputs.targets) {
        (TargetSource::FromMasks, _) => build_targets(inputs.mask_w, inputs.mask_g)?,
        (TargetSource::ProvidedMeshes, Some((w, p))) => (w.clone(), p.clone(), Vec::new()),
        (TargetSource::ProvidedMeshes, None) => {
            return Err(Error::InvalidConfig("target source is provided_meshes but no meshes were given".into()))
        }
    };
    let init = refine(&s0, config.target_vertices);
    let adj = MeshAdjacency::new(&init);
    let densify = |m: &TriMesh| (0..config.target_subdivisions).fold(m.clone(), |m, _| midpoint_subdivide(&m));
    let targets = SurfaceTargets::from_meshes(&densify(&target_wm), &densify(&target_pial));

    let dims = inputs.mask_w.dims();
    let mut svf = SvfParams::new(VectorVolume::zeros(config.svf_dims(dims)), config.squaring_steps)?;
    let half = initial_half_thickness(&sdf_w, &sdf_g, &init);
    let mut hct = HctParams::new(
        ScalarVolume::filled(config.hct_dims(dims), inverse_softplus(half / config.hct_scale)),
        config.hct_scale,
    )?;

    let mut params = flatten(&svf, &hct);
    let mut adam = Adam::new(params.len(), config.beta1, config.beta2, config.epsilon);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut best: Option<(f64, usize, Vec<f64>, CoupledForward)> = None;
    for it in 0..=config.iterations {
        unflatten(&params, &mut svf, &mut hct);
        let (report, forward) = total_loss(&init, &adj, &svf, &hct, &targets, &config.weights, config.reduction)?;
        if !report.is_finite() {
            return Err(Error::NonFiniteLoss(it));
        }
        observer(&IterationView { iteration: it, report: &report, forward: &forward });
        let step = config.step_at(it);
        let improved = best.as_ref().map_or(true, |b| report.total < b.0);
        let best_total = if improved { report.total } else { best.as_ref().unwrap().0 };
        trace.push(TraceRecord {
            iteration: it,
            total: report.total,
            chamfer_wm: report.chamfer_wm,
            chamfer_pial: report.chamfer_pial,
            edge_length: report.edge_length,
            normal_consistency: report.normal_consistency,
            best_total,
            step: if it < config.iterations { step } else { 0.0 },
        });
        if it < config.iterations {
            let grad = flatten_grad(report.gradients.as_ref().expect("total_loss returns gradients"));
            if improved {
                best = Some((report.total, it, params.clone(), forward));
            }
            let n_svf = 3 * svf.velocity.data().len();
            let blocks = [(n_svf, step * config.svf_step_ratio), (params.len() - n_svf, step)];
            adam.step_scaled(&mut params, &grad, &blocks);
        } else if improved {
            best = Some((report.total, it, params.clone(), forward));
        }
    }
    let (_, best_iteration, best_params, forward) = best.expect("at least one evaluation");
    unflatten(&best_params, &mut svf, &mut hct);
    Ok(ReconstructionResult {
        thickness_per_vertex: forward.offsets.thickness(),
        mid: forward.mid.clone(),
        wm: forward.offsets.wm.clone(),
        pial: forward.offsets.pial.clone(),
        init,
        trace,
        best_iteration,
        svf,
        hct,
        target_wm,
        target_pial,
        warnings,
        final_metrics: None,
    })
}

/// Built-in gradient-check setups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradCheckFixture {
    /// Chamfer terms only, both parameter blocks.
    ChamferOnly,
    /// All loss terms, both parameter blocks.
    FullLoss,
    /// All loss terms, half-thickness block only.
    HctOnly,
}

impl GradCheckFixture {
    pub const ALL: [GradCheckFixture; 3] = [Self::ChamferOnly, Self::FullLoss, Self::HctOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ChamferOnly => "chamfer_only",
            Self::FullLoss => "full_loss",
            Self::HctOnly => "hct_only",
        }
    }
}

impl std::str::FromStr for GradCheckFixture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown gradient check fixture '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub fixture: GradCheckFixture,
    /// Largest `|analytic - numeric|` over a block divided by the block's
    /// largest gradient magnitude; `None` when the block was not checked.
    pub svf_error: Option<f64>,
    pub hct_error: Option<f64>,
    pub num_parameters: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.svf_error.unwrap_or(0.0).max(self.hct_error.unwrap_or(0.0))
    }
}

/// Small problem on which every parameter can be differentiated numerically.
pub struct GradCheckProblem {
    pub init: TriMesh,
    pub targets: SurfaceTargets,
    pub svf: SvfParams,
    pub hct: HctParams,
    pub weights: LossWeights,
    pub reduction: Reduction,
}

impl GradCheckProblem {
    pub fn fixture(fixture: GradCheckFixture) -> Result<Self> {
        use crate::phantom::{generate, PhantomSpec};
        use rand::{Rng, SeedableRng};
        let spec = PhantomSpec { gt_vertices: 300, ..PhantomSpec::sphere_pair(16, 3.0, 5.5) };
        let p = generate(&spec)?;
        let init = initialize(&p.mask_w, &p.mask_g, &InitOptions::default())?;
        let (tw, tp, _) = build_targets(&p.mask_w, &p.mask_g)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(match fixture {
            GradCheckFixture::ChamferOnly => 1,
            GradCheckFixture::FullLoss => 2,
            GradCheckFixture::HctOnly => 3,
        });
        let velocity = VectorVolume::from_fn([6, 6, 6], |_, _, _| Vec3::from_fn(|_, _| rng.gen_range(-0.02..0.02)));
        let raw = ScalarVolume::from_fn([4, 4, 4], |_, _, _| rng.gen_range(-0.3..0.3));
        let weights = match fixture {
            GradCheckFixture::ChamferOnly => LossWeights { chamfer: 1.0, edge_length: 0.0, normal_consistency: 0.0 },
            _ => LossWeights::default(),
        };
        Ok(Self {
            init,
            targets: SurfaceTargets::from_meshes(&tw, &tp),
            svf: SvfParams::new(velocity, 4)?,
            hct: HctParams::new(raw, 0.1)?,
            weights,
            reduction: Reduction::Mean,
        })
    }

    pub fn loss(&self, svf: &SvfParams, hct: &HctParams) -> Result<LossReport> {
        let adj = MeshAdjacency::new(&self.init);
        Ok(total_loss(&self.init, &adj, svf, hct, &self.targets, &self.weights, self.reduction)?.0)
    }
}

fn block_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs())) / scale
}

/// Compare the analytic gradient of the total loss against central differences.
pub fn gradient_check(problem: &GradCheckProblem, check_svf: bool, check_hct: bool, epsilon: f64) -> Result<(f64, f64, usize)> {
    let report = problem.loss(&problem.svf, &problem.hct)?;
    let grads = report.gradients.expect("gradients");
    let value = |svf: &SvfParams, hct: &HctParams| -> Result<f64> { Ok(problem.loss(svf, hct)?.total) };
    let mut count = 0;
    let mut svf_err = 0.0;
    if check_svf {
        let (mut an, mut nu) = (Vec::new(), Vec::new());
        for n in 0..problem.svf.velocity.data().len() {
            for c in 0..3 {
                let mut plus = problem.svf.clone();
                plus.velocity.data_mut()[n][c] += epsilon;
                let mut minus = problem.svf.clone();
                minus.velocity.data_mut()[n][c] -= epsilon;
                nu.push((value(&plus, &problem.hct)? - value(&minus, &problem.hct)?) / (2.0 * epsilon));
                an.push(grads.velocity[n][c]);
            }
        }
        count += an.len();
        svf_err = block_error(&an, &nu);
    }
    let mut hct_err = 0.0;
    if check_hct {
        let (mut an, mut nu) = (Vec::new(), Vec::new());
        for n in 0..problem.hct.raw.data().len() {
            let mut plus = problem.hct.clone();
            plus.raw.data_mut()[n] += epsilon;
            let mut minus = problem.hct.clone();
            minus.raw.data_mut()[n] -= epsilon;
            nu.push((value(&problem.svf, &plus)? - value(&problem.svf, &minus)?) / (2.0 * epsilon));
            an.push(grads.hct_raw[n]);
        }
        count += an.len();
        hct_err = block_error(&an, &nu);
    }
    Ok((svf_err, hct_err, count))
}

pub fn gradient_check_fixture(fixture: GradCheckFixture, epsilon: f64) -> Result<GradCheckReport> {
    let problem = GradCheckProblem::fixture(fixture)?;
    let check_svf = fixture != GradCheckFixture::HctOnly;
    let (svf, hct, num_parameters) = gradient_check(&problem, check_svf, true, epsilon)?;
    Ok(GradCheckReport { fixture, svf_error: check_svf.then_some(svf), hct_error: Some(hct), num_parameters })
}

/// Map a node index to its mirror image across the `x = 0` plane.
pub fn mirror_x(frame: &NormalizedFrame, n: usize) -> usize {
    let [i, j, k] = frame.coords(n);
    frame.index(frame.dims()[0] - 1 - i, j, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::topology_check;
    use crate::mesh::shapes;
    use crate::phantom::{generate, Phantom, PhantomSpec};

    fn phantom(dims: usize, rw: f64, rg: f64) -> Phantom {
        generate(&PhantomSpec { gt_vertices: 500, ..PhantomSpec::sphere_pair(dims, rw, rg) }).unwrap()
    }

    fn mean_radius_voxels(mesh: &TriMesh, frame: &NormalizedFrame) -> f64 {
        let vpu = frame.voxels_per_unit()[0];
        mesh.vertices().iter().map(|v| v.norm() * vpu).sum::<f64>() / mesh.num_vertices() as f64
    }

    fn small_config(iterations: usize) -> ReconstructionConfig {
        ReconstructionConfig { iterations, target_vertices: 2_000, ..Default::default() }
    }

    #[test]
    fn initialize_concentric_balls() {
        let p = phantom(32, 5.0, 9.0);
        let s0 = initialize(&p.mask_w, &p.mask_g, &InitOptions::default()).unwrap();
        let r = topology_check(&s0);
        assert_eq!((r.num_components, r.genus), (1, Some(0)));
        let radius = mean_radius_voxels(&s0, &p.mask_w.frame());
        assert!((radius - 7.0).abs() < 1.0, "{radius}");
    }

    #[test]
    fn initialize_identical_masks_sits_on_the_boundary() {
        let p = phantom(32, 5.0, 9.0);
        let s0 = initialize(&p.mask_g, &p.mask_g, &InitOptions::default()).unwrap();
        let radius = mean_radius_voxels(&s0, &p.mask_g.frame());
        assert!((radius - 9.0).abs() < 1.0, "{radius}");
    }

    #[test]
    fn initialize_repairs_handle() {
        let p = generate(&PhantomSpec { gt_vertices: 500, ..PhantomSpec::handle_defect(64, 8.0, 12.0) }).unwrap();
        let s0 = initialize(&p.mask_w, &p.mask_g, &InitOptions::default()).unwrap();
        let r = topology_check(&s0);
        assert_eq!((r.num_components, r.genus), (1, Some(0)));
    }

    #[test]
    fn targets_from_concentric_masks() {
        let p = phantom(32, 5.0, 9.0);
        let (wm, pial, warnings) = build_targets(&p.mask_w, &p.mask_g).unwrap();
        assert!(warnings.is_empty());
        let frame = p.mask_w.frame();
        assert!((mean_radius_voxels(&wm, &frame) - 5.0).abs() < 0.5);
        assert!((mean_radius_voxels(&pial, &frame) - 9.0).abs() < 0.5);
    }

    #[test]
    fn swapped_masks_warn_but_continue() {
        let p = phantom(32, 5.0, 9.0);
        let (_, _, warnings) = build_targets(&p.mask_g, &p.mask_w).unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn provided_targets_pass_through() {
        let p = phantom(24, 4.0, 7.0);
        let config = ReconstructionConfig { target_source: TargetSource::ProvidedMeshes, ..small_config(0) };
        let inputs = ReconstructionInputs { mask_w: &p.mask_w, mask_g: &p.mask_g, targets: Some((&p.gt_wm, &p.gt_pial)) };
        let r = reconstruct(&inputs, &config).unwrap();
        assert_eq!(r.target_wm, p.gt_wm);
        assert_eq!(r.target_pial, p.gt_pial);

        let missing = ReconstructionInputs { targets: None, ..inputs };
        assert!(matches!(reconstruct(&missing, &config), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_iterations_return_the_initialization() {
        let p = phantom(24, 4.0, 7.0);
        let inputs = ReconstructionInputs { mask_w: &p.mask_w, mask_g: &p.mask_g, targets: None };
        let r = reconstruct(&inputs, &small_config(0)).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best_iteration, 0);
        assert_eq!(r.mid, r.init);
        let first = r.thickness_per_vertex[0];
        assert!(first > 0.0);
        assert!(r.thickness_per_vertex.iter().all(|t| (t - first).abs() < 1e-12));
    }

    #[test]
    fn short_run_keeps_invariants() {
        let p = phantom(24, 4.0, 7.0);
        let inputs = ReconstructionInputs { mask_w: &p.mask_w, mask_g: &p.mask_g, targets: None };
        let mut faces_same = true;
        let r = reconstruct_observed(&inputs, &small_config(12), &mut |view| {
            faces_same &= view.forward.mid.faces() == view.forward.wm().faces()
                && view.forward.pial().faces() == view.forward.mid.faces();
        })
        .unwrap();
        assert!(faces_same);
        assert_eq!(r.trace.len(), 13);
        for w in r.trace.windows(2) {
            assert!(w[1].best_total <= w[0].best_total);
        }
        assert_eq!(r.trace[r.best_iteration].total, r.trace.last().unwrap().best_total);
        assert!(r.trace.last().unwrap().best_total < r.trace[0].total);
        assert_eq!(r.mid.faces(), r.init.faces());
        assert!(r.thickness_per_vertex.iter().all(|&t| t > 0.0));
        for v in 0..r.mid.num_vertices() {
            let (w, g, m) = (r.wm.vertices()[v], r.pial.vertices()[v], r.mid.vertices()[v]);
            assert!(((w + g) / 2.0 - m).norm() < 1e-9);
            assert!(((g - w).norm() - r.thickness_per_vertex[v]).abs() < 1e-9);
        }
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let p = phantom(24, 4.0, 7.0);
        let inputs = ReconstructionInputs { mask_w: &p.mask_w, mask_g: &p.mask_g, targets: None };
        let a = reconstruct(&inputs, &small_config(5)).unwrap();
        let b = reconstruct(&inputs, &small_config(5)).unwrap();
        assert_eq!(a.wm, b.wm);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn config_validation() {
        assert!(ReconstructionConfig::default().validate().is_ok());
        let bad = [
            ReconstructionConfig { step_size: 0.0, ..Default::default() },
            ReconstructionConfig { final_step_fraction: 0.0, ..Default::default() },
            ReconstructionConfig { hct_scale: -1.0, ..Default::default() },
            ReconstructionConfig { svf_grid_dims: Some([1, 4, 4]), ..Default::default() },
            ReconstructionConfig { squaring_steps: 40, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert_eq!("from_masks".parse::<TargetSource>().unwrap(), TargetSource::FromMasks);
        assert!("elsewhere".parse::<TargetSource>().is_err());
    }

    #[test]
    fn step_schedule_is_geometric() {
        let c = ReconstructionConfig { iterations: 11, step_size: 1.0, final_step_fraction: 0.01, ..Default::default() };
        assert!((c.step_at(0) - 1.0).abs() < 1e-15);
        assert!((c.step_at(5) - 0.1).abs() < 1e-12);
        assert!((c.step_at(10) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn adam_minimizes_a_quadratic_per_block() {
        let target = [3.0, -2.0, 0.5];
        let mut x = vec![0.0; 3];
        let mut adam = Adam::new(3, 0.9, 0.999, 1e-8);
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            adam.step_scaled(&mut x, &g, &[(2, 0.05), (1, 0.01)]);
        }
        for (a, b) in x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-2, "{x:?}");
        }
        let mut y = vec![1.0];
        Adam::new(1, 0.9, 0.999, 1e-8).step(&mut y, &[4.0], 0.1);
        assert!((y[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn gradient_checks_pass_on_all_fixtures() {
        for fixture in GradCheckFixture::ALL {
            let report = gradient_check_fixture(fixture, 1e-5).unwrap();
            assert!(report.max_error() < 1e-4, "{fixture:?}: {report:?}");
            assert_eq!(report.svf_error.is_some(), fixture != GradCheckFixture::HctOnly);
            assert_eq!(fixture.name().parse::<GradCheckFixture>().unwrap(), fixture);
        }
    }

    #[test]
    fn velocity_gradient_is_mirror_antisymmetric() {
        let sphere = shapes::icosphere(2);
        let problem = GradCheckProblem {
            init: sphere.map_vertices(|p| p * 0.5),
            targets: SurfaceTargets::from_meshes(&sphere.map_vertices(|p| p * 0.4), &sphere.map_vertices(|p| p * 0.62)),
            svf: SvfParams::zeros([7, 6, 6], 4).unwrap(),
            hct: HctParams::uniform([4, 4, 4], 0.05, 0.05).unwrap(),
            weights: LossWeights::default(),
            reduction: Reduction::Mean,
        };
        let g = problem.loss(&problem.svf, &problem.hct).unwrap().gradients.unwrap().velocity;
        let frame = problem.svf.velocity.frame();
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.amax()));
        assert!(scale > 0.0);
        for n in 0..g.len() {
            let m = g[mirror_x(&frame, n)];
            assert!((m.x + g[n].x).abs() < 1e-9 * scale.max(1.0));
            assert!((m.y - g[n].y).abs() < 1e-9 * scale.max(1.0));
            assert!((m.z - g[n].z).abs() < 1e-9 * scale.max(1.0));
        }
    }
}
