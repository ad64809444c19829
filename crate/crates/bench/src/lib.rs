//! Shared fixtures for the pipeline benchmarks.

use midsurf::deform::{HctParams, SvfParams};
use midsurf::losses::SurfaceTargets;
use midsurf::optimize::{build_targets, initialize, refine, InitOptions};
use midsurf::phantom::{generate, Phantom, PhantomSpec};
use midsurf::{MeshAdjacency, TriMesh, VectorVolume};

/// Everything one loss evaluation needs, built from a sphere-pair phantom.
pub struct Fixture {
    pub phantom: Phantom,
    pub init: TriMesh,
    pub adj: MeshAdjacency,
    pub targets: SurfaceTargets,
    pub target_wm: TriMesh,
    pub svf: SvfParams,
    pub hct: HctParams,
}

impl Fixture {
    pub fn sphere_pair(dims: usize, vertices: usize) -> Fixture {
        let spec = PhantomSpec { dims: [dims; 3], ..PhantomSpec::default() };
        let phantom = generate(&spec).expect("valid phantom");
        let s0 = initialize(&phantom.mask_w, &phantom.mask_g, &InitOptions::default()).expect("initialization");
        let init = refine(&s0, vertices);
        let adj = MeshAdjacency::new(&init);
        let (target_wm, target_pial, _) = build_targets(&phantom.mask_w, &phantom.mask_g).expect("targets");
        let targets = SurfaceTargets::from_meshes(&target_wm, &target_pial);
        // A small nonzero velocity so the integrator does real work.
        let grid = [dims / 2; 3];
        let frame = midsurf::NormalizedFrame::new(grid);
        let velocity = VectorVolume::from_fn(grid, |i, j, k| {
            let p = frame.node(i, j, k);
            midsurf::Vec3::new(p.y, -p.x, 0.5 * p.z) * 0.02
        });
        let svf = SvfParams::new(velocity, 6).expect("svf");
        let hct = HctParams::uniform([dims / 4; 3], 2.0 / 31.5, 0.05).expect("hct");
        Fixture { phantom, init, adj, targets, target_wm, svf, hct }
    }
}
