//! Exact squared Euclidean distance transform by separable lower envelopes of
//! parabolas, one pass per axis. Distances are measured between voxel
//! centers.

use super::ScalarVolume;
use crate::error::{Error, Result};

/// Squared distance along one line: `out[p] = min_q (w (p - q))^2 + f[q]`.
/// Infinite entries of `f` are not sites.
fn lower_envelope(f: &[f64], w: f64, out: &mut [f64], sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    let pos = |q: usize| q as f64 * w;
    for (q, &fq) in f.iter().enumerate() {
        if fq == f64::INFINITY {
            continue;
        }
        loop {
            let Some(&v) = sites.last() else {
                sites.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let s = ((fq + pos(q) * pos(q)) - (f[v] + pos(v) * pos(v))) / (2.0 * (pos(q) - pos(v)));
            if s <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
            } else {
                sites.push(q);
                bounds.push(s);
                break;
            }
        }
    }
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let x = pos(p);
        while k + 1 < sites.len() && bounds[k + 1] < x {
            k += 1;
        }
        let d = x - pos(sites[k]);
        *o = d * d + f[sites[k]];
    }
}

/// Squared distance from every voxel to the nearest voxel with `seed[v] == true`.
pub(crate) fn squared_distance_to(seed: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let mut d: Vec<f64> = seed.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let [nx, ny, nz] = dims;
    let strides = [1, nx, nx * ny];
    let mut line = Vec::new();
    let mut out = Vec::new();
    let mut sites = Vec::new();
    let mut bounds = Vec::new();
    for axis in 0..3 {
        let n = dims[axis];
        let stride = strides[axis];
        line.resize(n, 0.0);
        out.resize(n, 0.0);
        // Every line along `axis` starts at a voxel whose `axis` coordinate is 0.
        for start in 0..nx * ny * nz {
            let c = [start % nx, (start / nx) % ny, start / (nx * ny)];
            if c[axis] != 0 {
                continue;
            }
            for (t, l) in line.iter_mut().enumerate() {
                *l = d[start + t * stride];
            }
            lower_envelope(&line, spacing[axis], &mut out, &mut sites, &mut bounds);
            for (t, o) in out.iter().enumerate() {
                d[start + t * stride] = *o;
            }
        }
    }
    d
}

fn foreground(mask: &ScalarVolume) -> Result<Vec<bool>> {
    let fg: Vec<bool> = mask.data().iter().map(|&v| ScalarVolume::is_foreground(v)).collect();
    let count = fg.iter().filter(|&&b| b).count();
    if count == 0 || count == fg.len() {
        return Err(Error::DegenerateMask);
    }
    Ok(fg)
}

/// Exact squared Euclidean distance (in spacing-scaled units) from each voxel
/// center to the nearest foreground voxel center. Foreground voxels are 0.
pub fn edt_squared(mask: &ScalarVolume) -> Result<ScalarVolume> {
    let fg = foreground(mask)?;
    let d = squared_distance_to(&fg, mask.dims(), mask.spacing());
    ScalarVolume::new(mask.dims(), mask.spacing(), d)
}

/// Signed distance: foreground voxels hold minus the distance to the nearest
/// background voxel, background voxels the distance to the nearest foreground
/// voxel. No voxel is exactly zero; the interface lies between voxels.
pub fn signed_distance(mask: &ScalarVolume) -> Result<ScalarVolume> {
    let fg = foreground(mask)?;
    let bg: Vec<bool> = fg.iter().map(|b| !b).collect();
    let to_fg = squared_distance_to(&fg, mask.dims(), mask.spacing());
    let to_bg = squared_distance_to(&bg, mask.dims(), mask.spacing());
    let data = fg
        .iter()
        .zip(to_fg.iter().zip(&to_bg))
        .map(|(&inside, (df, db))| if inside { -db.sqrt() } else { df.sqrt() })
        .collect();
    ScalarVolume::new(mask.dims(), mask.spacing(), data)
}
