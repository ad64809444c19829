//! `key = value` run configuration files.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored. Later
//! lines override earlier ones, and command-line flags override the file.

use std::path::Path;

use midsurf::metrics::DEFAULT_SAMPLES;
use midsurf::optimize::ReconstructionConfig;

/// Reconstruction settings plus the evaluation settings used when reference
/// surfaces are supplied.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub reconstruction: ReconstructionConfig,
    pub metric_samples: usize,
    pub metric_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { reconstruction: ReconstructionConfig::default(), metric_samples: DEFAULT_SAMPLES, metric_seed: 7 }
    }
}

pub const KEYS: &[&str] = &[
    "iterations",
    "step_size",
    "final_step_fraction",
    "svf_step_ratio",
    "beta1",
    "beta2",
    "epsilon",
    "squaring_steps",
    "svf_grid",
    "hct_grid",
    "lambda_chamfer",
    "lambda_edge",
    "lambda_normal",
    "reduction",
    "hct_scale",
    "target_vertices",
    "target_subdivisions",
    "smoothing_rounds",
    "repair_rounds",
    "relax_iterations",
    "seed",
    "target_source",
    "metric_samples",
    "metric_seed",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("{key}: cannot parse '{value}'"))
}

/// `N` or `X,Y,Z`.
fn parse_dims(key: &str, value: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = value.split(',').map(|p| parse(key, p.trim())).collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [n] => Ok([*n; 3]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(format!("{key}: expected N or X,Y,Z, got '{value}'")),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let r = &mut self.reconstruction;
        match key {
            "iterations" => r.iterations = parse(key, value)?,
            "step_size" => r.step_size = parse(key, value)?,
            "final_step_fraction" => r.final_step_fraction = parse(key, value)?,
            "svf_step_ratio" => r.svf_step_ratio = parse(key, value)?,
            "beta1" => r.beta1 = parse(key, value)?,
            "beta2" => r.beta2 = parse(key, value)?,
            "epsilon" => r.epsilon = parse(key, value)?,
            "squaring_steps" => r.squaring_steps = parse(key, value)?,
            "svf_grid" => r.svf_grid_dims = Some(parse_dims(key, value)?),
            "hct_grid" => r.hct_grid_dims = Some(parse_dims(key, value)?),
            "lambda_chamfer" => r.weights.chamfer = parse(key, value)?,
            "lambda_edge" => r.weights.edge_length = parse(key, value)?,
            "lambda_normal" => r.weights.normal_consistency = parse(key, value)?,
            "reduction" => r.reduction = value.parse().map_err(|e: midsurf::Error| e.to_string())?,
            "hct_scale" => r.hct_scale = parse(key, value)?,
            "target_vertices" => r.target_vertices = parse(key, value)?,
            "target_subdivisions" => r.target_subdivisions = parse(key, value)?,
            "smoothing_rounds" => r.init.smoothing_rounds = parse(key, value)?,
            "repair_rounds" => r.init.repair_rounds = parse(key, value)?,
            "relax_iterations" => r.init.relax_iterations = parse(key, value)?,
            "seed" => r.seed = parse(key, value)?,
            "target_source" => r.target_source = value.parse().map_err(|e: midsurf::Error| e.to_string())?,
            "metric_samples" => self.metric_samples = parse(key, value)?,
            "metric_seed" => self.metric_seed = parse(key, value)?,
            _ => return Err(format!("unknown config key '{key}' (known: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            self.set(key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.apply_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use midsurf::losses::Reduction;
    use midsurf::optimize::TargetSource;

    #[test]
    fn parses_comments_blanks_and_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# run\niterations = 12\n\nstep_size=0.5 # inline\nsvf_grid = 8\nhct_grid = 4,5,6\niterations = 20\n")
            .unwrap();
        assert_eq!(c.reconstruction.iterations, 20);
        assert_eq!(c.reconstruction.step_size, 0.5);
        assert_eq!(c.reconstruction.svf_grid_dims, Some([8, 8, 8]));
        assert_eq!(c.reconstruction.hct_grid_dims, Some([4, 5, 6]));
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let values = [
            ("reduction", "sum"),
            ("target_source", "provided_meshes"),
            ("svf_grid", "4"),
            ("hct_grid", "4"),
        ];
        for key in KEYS {
            let value = values.iter().find(|(k, _)| k == key).map_or("1", |(_, v)| v);
            RunConfig::default().set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
        let mut c = RunConfig::default();
        c.set("reduction", "sum").unwrap();
        c.set("target_source", "provided_meshes").unwrap();
        assert_eq!(c.reconstruction.reduction, Reduction::Sum);
        assert_eq!(c.reconstruction.target_source, TargetSource::ProvidedMeshes);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let err = RunConfig::default().apply_text("iterations = 3\nlearning_rate = 1\n").unwrap_err();
        assert!(err.contains("line 2") && err.contains("learning_rate"), "{err}");
        assert!(RunConfig::default().apply_text("iterations = many\n").is_err());
        assert!(RunConfig::default().apply_text("iterations\n").is_err());
        assert!(RunConfig::default().apply_text("svf_grid = 1,2\n").is_err());
        assert!(RunConfig::default().apply_text("reduction = median\n").is_err());
    }
}
