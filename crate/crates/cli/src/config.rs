use std::path::Path;

use anyhow::{bail, Context, Result};
use funk_geodesics::surface::{SurfaceConfig, SurfaceFile};
use serde::Deserialize;

/// A surface file plus optional run parameters; command-line flags win.
#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub surface: SurfaceFile,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub dt_avg: Option<f64>,
    pub n_nodes: Option<usize>,
    pub resolution: Option<[usize; 2]>,
    pub start_x: Option<[f64; 3]>,
    pub start_v: Option<[f64; 3]>,
    pub l0: Option<[f64; 3]>,
    pub eps_list: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub n_levels: Option<usize>,
    pub stride: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, SurfaceConfig)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        let surface = config.surface.clone().into_config()?;
        config.validate()?;
        Ok((config, surface))
    }

    fn validate(&self) -> Result<()> {
        let reals = [
            ("t_end", self.t_end),
            ("dt", self.dt),
            ("dt_avg", self.dt_avg),
            ("horizon", self.horizon),
        ];
        for (name, value) in reals {
            if let Some(v) = value {
                if !(v > 0.0) || !v.is_finite() {
                    bail!("`{name}` must be positive, got {v}");
                }
            }
        }
        for (name, value) in [("n_nodes", self.n_nodes), ("n_levels", self.n_levels), ("stride", self.stride)] {
            if value == Some(0) {
                bail!("`{name}` must be positive");
            }
        }
        if let Some(list) = &self.eps_list {
            if list.is_empty() || list.iter().any(|e| !(*e >= 0.0)) {
                bail!("`eps_list` must be a nonempty list of non-negative strengths");
            }
        }
        Ok(())
    }
}
