//! Run configuration: JSON form, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::ModelSpec;
use crate::solver::{SolverSettings, R_MAX};

pub const SCHEMA: &str = "cmcfoliate/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl RadiusGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let m = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let f = k as f64 / m;
                if k + 1 == self.count {
                    return self.stop;
                }
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * f,
                    Spacing::Geometric => self.start * (self.stop / self.start).powf(f),
                }
            })
            .collect()
    }
}

fn default_l_max() -> usize {
    crate::hemisphere::DEFAULT_L_MAX
}
fn default_exactness() -> usize {
    crate::hemisphere::DEFAULT_EXACTNESS
}
fn default_tol_perp() -> f64 {
    SolverSettings::default().tol_perp
}
fn default_tol_k() -> f64 {
    SolverSettings::default().tol_k
}
fn default_max_iters() -> usize {
    SolverSettings::default().max_iters
}
fn default_density() -> usize {
    9
}
fn default_output() -> String {
    "out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub n: usize,
    pub model: ModelSpec,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default = "default_exactness")]
    pub quadrature_exactness: usize,
    #[serde(default = "default_tol_perp")]
    pub tol_perp: f64,
    #[serde(default = "default_tol_k")]
    pub tol_k: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    pub r_grid: RadiusGrid,
    #[serde(default)]
    pub seed: u64,
    /// Samples per axis for determinant checks and exported point clouds.
    #[serde(default = "default_density")]
    pub sample_density: usize,
    #[serde(default = "default_output")]
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            n: 2,
            model: ModelSpec::Bump { a: 1.0, q: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
            l_max: default_l_max(),
            quadrature_exactness: default_exactness(),
            tol_perp: default_tol_perp(),
            tol_k: default_tol_k(),
            max_iters: default_max_iters(),
            r_grid: RadiusGrid { start: 0.02, stop: 0.2, count: 8, spacing: Spacing::Geometric },
            seed: 7,
            sample_density: default_density(),
            output_dir: default_output(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Configuration(format!("invalid run configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn settings(&self) -> SolverSettings {
        SolverSettings { tol_perp: self.tol_perp, tol_k: self.tol_k, max_iters: self.max_iters, ..Default::default() }
    }

    pub fn output_path(&self) -> PathBuf {
        PathBuf::from(&self.output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if self.schema != SCHEMA {
            return bad(format!("schema {:?} is not {SCHEMA:?}", self.schema));
        }
        if !(2..=6).contains(&self.n) {
            return bad(format!("n = {} outside 2..=6", self.n));
        }
        if self.l_max < 2 {
            return bad(format!("l_max = {} is below 2", self.l_max));
        }
        if self.quadrature_exactness < 2 * self.l_max + 4 {
            return bad(format!(
                "quadrature_exactness = {} is below 2 * l_max + 4 = {}",
                self.quadrature_exactness,
                2 * self.l_max + 4
            ));
        }
        if !(self.tol_perp > 0.0 && self.tol_k > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        let g = &self.r_grid;
        if g.count == 0 {
            return bad("r_grid.count must be >= 1".into());
        }
        if !(g.start > 0.0 && g.start <= g.stop && g.stop <= R_MAX) {
            return bad(format!("r_grid needs 0 < start <= stop <= {R_MAX}, got [{}, {}]", g.start, g.stop));
        }
        if g.count > 1 && g.start == g.stop {
            return bad("r_grid with several points needs start < stop".into());
        }
        if self.sample_density < 2 {
            return bad("sample_density must be >= 2".into());
        }
        Ok(())
    }
}
