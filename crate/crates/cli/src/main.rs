//! `midsurf` command-line tool.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use midsurf::levelset::topology_check;
use midsurf::mesh::io as mesh_io;
use midsurf::metrics::{evaluate, MetricUnits, DEFAULT_SAMPLES};
use midsurf::optimize::{
    gradient_check_fixture, reconstruct_observed, GradCheckFixture, ReconstructionInputs, TargetSource,
};
use midsurf::phantom::{generate, PhantomKind, PhantomSpec};
use midsurf::volume::io::{self as volume_io, Volume};
use midsurf::volume::signed_distance;
use midsurf::{Error, ScalarVolume, TriMesh};

use config::RunConfig;

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "midsurf", version, about = "Coupled cortical surface reconstruction from tissue masks")]
struct Cli {
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic masks and reference surfaces.
    Phantom(PhantomArgs),
    /// Signed distance of a binary mask.
    Sdf(SdfArgs),
    /// Fit midthickness, white and pial surfaces to a pair of masks.
    Reconstruct(ReconstructArgs),
    /// Compare two meshes.
    Metrics(MetricsArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Summarize a mesh or volume file.
    Inspect(InspectArgs),
    /// Rewrite a mesh in another format (by extension).
    Convert(ConvertArgs),
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value = "sphere_pair")]
    kind: String,
    #[arg(long, default_value_t = 64)]
    dims: usize,
    #[arg(long, default_value_t = 8.0)]
    rw: f64,
    #[arg(long, default_value_t = 12.0)]
    rg: f64,
    #[arg(long, default_value_t = 1.5)]
    amplitude: f64,
    #[arg(long, default_value_t = 3)]
    frequency: u32,
    #[arg(long, default_value_t = 40_000)]
    gt_vertices: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SdfArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    wm_mask: PathBuf,
    #[arg(long)]
    gm_mask: PathBuf,
    #[arg(long, requires = "target_pial")]
    target_wm: Option<PathBuf>,
    #[arg(long, requires = "target_wm")]
    target_pial: Option<PathBuf>,
    /// Reference surfaces; when given, final metrics are reported.
    #[arg(long, requires = "gt_pial")]
    gt_wm: Option<PathBuf>,
    #[arg(long, requires = "gt_wm")]
    gt_pial: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    target_vertices: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print every trace record to stderr while running.
    #[arg(long)]
    verbose: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Volume whose grid and spacing give physical units; normalized units otherwise.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// chamfer_only, full_loss, hct_only or all.
    #[arg(long, default_value = "all")]
    fixture: String,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    input: PathBuf,
    output: PathBuf,
}

/// Message plus process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFiniteLoss(_) => 3,
            Error::TopologyRepairFailed(_) => 4,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn with_path<T>(path: &Path, r: midsurf::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let f = Failure::from(e);
        Failure { message: format!("{}: {}", path.display(), f.message), ..f }
    })
}

fn read_mask(path: &Path) -> Result<ScalarVolume, Failure> {
    with_path(path, volume_io::read(path).and_then(Volume::into_scalar))
}

fn read_mesh(path: &Path) -> Result<TriMesh, Failure> {
    with_path(path, mesh_io::read(path))
}

fn write_mesh(path: &Path, mesh: &TriMesh) -> CmdResult {
    with_path(path, mesh_io::write(path, mesh))
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))
}

fn cmd_phantom(a: &PhantomArgs) -> CmdResult {
    let kind: PhantomKind = a.kind.parse()?;
    let spec = PhantomSpec {
        kind,
        dims: [a.dims; 3],
        r_w: a.rw,
        r_g: a.rg,
        amplitude: a.amplitude,
        frequency: a.frequency,
        gt_vertices: a.gt_vertices,
        seed: a.seed,
    };
    let p = generate(&spec)?;
    create_dir(&a.out)?;
    for (name, mask) in [("wm_mask.mvol", &p.mask_w), ("gm_mask.mvol", &p.mask_g)] {
        let path = a.out.join(name);
        with_path(&path, volume_io::write_mask(&path, mask))?;
    }
    for (name, mesh) in [("gt_wm.ply", &p.gt_wm), ("gt_pial.ply", &p.gt_pial), ("gt_mid.ply", &p.gt_mid)] {
        write_mesh(&a.out.join(name), mesh)?;
    }
    println!(
        "kind={kind} dims={} rw={} rg={} thickness={} gt_vertices={} out={}",
        a.dims,
        a.rw,
        a.rg,
        p.gt_thickness,
        p.gt_wm.num_vertices(),
        a.out.display()
    );
    Ok(())
}

fn cmd_sdf(a: &SdfArgs) -> CmdResult {
    let mask = read_mask(&a.mask)?;
    let sdf = with_path(&a.mask, signed_distance(&mask))?;
    with_path(&a.out, volume_io::write_scalar(&a.out, &sdf))?;
    let (lo, hi) = sdf.min_max();
    println!("dims={:?} min={lo} max={hi} out={}", sdf.dims(), a.out.display());
    Ok(())
}

fn cmd_reconstruct(a: &ReconstructArgs) -> CmdResult {
    let mut run = RunConfig::default();
    if let Some(path) = &a.config {
        run.apply_file(path).map_err(Failure::input)?;
    }
    let r = &mut run.reconstruction;
    if let Some(v) = a.iterations {
        r.iterations = v;
    }
    if let Some(v) = a.step_size {
        r.step_size = v;
    }
    if let Some(v) = a.target_vertices {
        r.target_vertices = v;
    }
    if let Some(v) = a.seed {
        r.seed = v;
    }
    let provided = match (&a.target_wm, &a.target_pial) {
        (Some(w), Some(p)) => {
            r.target_source = TargetSource::ProvidedMeshes;
            Some((read_mesh(w)?, read_mesh(p)?))
        }
        _ => None,
    };
    let gt = match (&a.gt_wm, &a.gt_pial) {
        (Some(w), Some(p)) => Some((read_mesh(w)?, read_mesh(p)?)),
        _ => None,
    };
    let mask_w = read_mask(&a.wm_mask)?;
    let mask_g = read_mask(&a.gm_mask)?;
    let inputs = ReconstructionInputs {
        mask_w: &mask_w,
        mask_g: &mask_g,
        targets: provided.as_ref().map(|(w, p)| (w, p)),
    };
    let verbose = a.verbose;
    let mut result = reconstruct_observed(&inputs, &run.reconstruction, &mut |view| {
        if verbose {
            eprintln!("iter={} total={:.9e}", view.iteration, view.report.total);
        }
    })?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }

    let frame = mask_w.frame();
    let vpu = frame.voxels_per_unit();
    let voxel_scale = (vpu[0] + vpu[1] + vpu[2]) / 3.0;
    create_dir(&a.out)?;
    write_mesh(&a.out.join("mid.ply"), &result.mid)?;
    write_mesh(&a.out.join("wm.ply"), &result.wm)?;
    write_mesh(&a.out.join("pial.ply"), &result.pial)?;
    let mut thickness = String::new();
    for t in &result.thickness_per_vertex {
        thickness.push_str(&format!("{:.9}\n", t * voxel_scale));
    }
    let trace: String = result.trace.iter().map(|t| format!("{t}\n")).collect();
    for (name, text) in [("thickness.txt", thickness), ("trace.txt", trace)] {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }

    let mean_thickness =
        result.thickness_per_vertex.iter().sum::<f64>() / result.thickness_per_vertex.len() as f64 * voxel_scale;
    let last = result.trace.last().expect("trace has the initial evaluation");
    let mut line = format!(
        "vertices={} faces={} iterations={} best_iteration={} initial_loss={:.9e} best_loss={:.9e} mean_thickness={mean_thickness:.6}",
        result.mid.num_vertices(),
        result.mid.num_faces(),
        run.reconstruction.iterations,
        result.best_iteration,
        result.trace[0].total,
        last.best_total,
    );
    if let Some((gw, gp)) = &gt {
        let units = MetricUnits::physical(&frame, mask_w.spacing());
        let (mw, mp) = result.evaluate(gw, gp, run.metric_samples, run.metric_seed, &units)?;
        line.push_str(&format!(
            " wm_cd={:.6} wm_ad={:.6} wm_hd90={:.6} pial_cd={:.6} pial_ad={:.6} pial_hd90={:.6}",
            mw.cd, mw.ad, mw.hd90, mp.cd, mp.ad, mp.hd90
        ));
        result.final_metrics = Some((mw, mp));
    }
    println!("{line}");
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> CmdResult {
    let pred = read_mesh(&a.pred)?;
    let target = read_mesh(&a.target)?;
    let units = match &a.reference {
        Some(path) => {
            let v = read_mask(path)?;
            MetricUnits::physical(&v.frame(), v.spacing())
        }
        None => MetricUnits::normalized(),
    };
    let m = evaluate(&pred, &target, a.n, a.seed, &units)?;
    println!("{m}");
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs) -> CmdResult {
    let fixtures: Vec<GradCheckFixture> =
        if a.fixture == "all" { GradCheckFixture::ALL.to_vec() } else { vec![a.fixture.parse()?] };
    let mut worst = 0.0f64;
    for fixture in fixtures {
        let r = gradient_check_fixture(fixture, a.epsilon)?;
        let show = |e: Option<f64>| e.map_or("skipped".to_string(), |e| format!("{e:.3e}"));
        println!(
            "fixture={} svf_error={} hct_error={} max_error={:.3e} parameters={} pass={}",
            fixture.name(),
            show(r.svf_error),
            show(r.hct_error),
            r.max_error(),
            r.num_parameters,
            r.max_error() < GRADCHECK_TOLERANCE
        );
        worst = worst.max(r.max_error());
    }
    if worst < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(Failure { code: 3, message: format!("max relative error {worst:.3e} exceeds {GRADCHECK_TOLERANCE:e}") })
    }
}

fn is_mesh_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("ply" | "off")
    )
}

fn cmd_inspect(a: &InspectArgs) -> CmdResult {
    if is_mesh_path(&a.path) {
        let m = read_mesh(&a.path)?;
        let t = topology_check(&m);
        let genus = t.genus.map_or("undefined".to_string(), |g| g.to_string());
        println!(
            "kind=mesh vertices={} faces={} components={} euler={} genus={genus} closed_manifold={} area={:.9}",
            m.num_vertices(),
            m.num_faces(),
            t.num_components,
            t.euler_characteristic,
            t.is_closed_manifold,
            m.area()
        );
        return Ok(());
    }
    let v = with_path(&a.path, volume_io::read(&a.path))?;
    let (kind, dims, spacing, lo, hi) = match &v {
        Volume::Mask(s) | Volume::Scalar(s) => {
            let (lo, hi) = s.min_max();
            (if matches!(v, Volume::Mask(_)) { "mask" } else { "scalar" }, s.dims(), s.spacing(), lo, hi)
        }
        Volume::Vector(w) => ("vector", w.dims(), w.spacing(), 0.0, w.max_norm()),
    };
    let mut line = format!(
        "kind={kind} dims={}x{}x{} spacing={},{},{} min={lo} max={hi}",
        dims[0], dims[1], dims[2], spacing[0], spacing[1], spacing[2]
    );
    if let Volume::Mask(s) = &v {
        let fg = s.data().iter().filter(|&&x| ScalarVolume::is_foreground(x)).count();
        line.push_str(&format!(" foreground={fg}"));
    }
    println!("{line}");
    Ok(())
}

fn cmd_convert(a: &ConvertArgs) -> CmdResult {
    let m = read_mesh(&a.input)?;
    write_mesh(&a.output, &m)?;
    println!("vertices={} faces={} out={}", m.num_vertices(), m.num_faces(), a.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Sdf(a) => cmd_sdf(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Convert(a) => cmd_convert(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
