//! Config-driven scenario runs with reproducible CSV, JSON and SVG output.

mod config;
mod output;
mod run;
pub mod svg;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Geometry, OutputKind, ScenarioConfig, ScenarioKind, TermSpec, GOLDEN_RATIO};
pub use output::{format_float, histogram_csv, summary_json, trajectories_csv, write_outputs};
pub use run::{execute, run_scenario};

use crate::dynamics::Trajectory;
use crate::ergodicity::CoverageGrid;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("refusing to serialize: {0}")]
    Serialization(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// Process exit code: 2 for configuration errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Parse { .. } | ScenarioError::Schema(_) => 2,
            ScenarioError::Numeric(_) | ScenarioError::Serialization(_) => 3,
            ScenarioError::Io { .. } => 1,
        }
    }

    pub(crate) fn numeric(e: impl std::fmt::Display) -> Self {
        ScenarioError::Numeric(e.to_string())
    }
}

/// Strict JSON parse; syntax errors carry a position, data errors name the key.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    use serde_json::error::Category;
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
        Category::Data => ScenarioError::Schema(e.to_string()),
    })?;
    cfg.resolved()
}

/// One reported number with its sample count and tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub value: f64,
    pub n: usize,
    pub tolerance: f64,
}

impl Statistic {
    pub fn new(value: f64, n: usize, tolerance: f64) -> Self {
        Self {
            value,
            n,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: ScenarioKind,
    pub version: String,
    pub seed: Option<u64>,
    /// The resolved configuration, defaults included.
    pub config: ScenarioConfig,
    pub statistics: BTreeMap<String, Statistic>,
    pub flags: Vec<String>,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn stat(&self, key: &str) -> Option<f64> {
        self.statistics.get(key).map(|s| s.value)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Equal-width bin counts over [lo, hi].
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub label: String,
}

impl Histogram {
    /// Values outside [lo, hi] are dropped.
    pub fn from_values(values: &[f64], lo: f64, hi: f64, bins: usize, label: &str) -> Self {
        let mut counts = vec![0u64; bins];
        let w = (hi - lo) / bins as f64;
        for &v in values {
            if v >= lo && v <= hi {
                let i = (((v - lo) / w) as usize).min(bins - 1);
                counts[i] += 1;
            }
        }
        Self {
            lo,
            hi,
            counts,
            label: label.to_string(),
        }
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w)
    }
}

/// A scalar field on a grid, optionally with a visited overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
    pub resolution: usize,
    pub values: Vec<f64>,
    pub overlay: Option<Vec<bool>>,
}

impl Heatmap {
    pub fn from_coverage(grid: &CoverageGrid, values: Vec<f64>) -> Self {
        Self {
            x_bounds: grid.x_bounds,
            y_bounds: grid.y_bounds,
            resolution: grid.resolution,
            values,
            overlay: Some(grid.visited.clone()),
        }
    }
}

/// Bulk data produced by a run, written by [`write_outputs`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub trajectories: Vec<Trajectory>,
    pub histogram: Option<Histogram>,
    pub heatmap: Option<Heatmap>,
    /// Plot trajectories in the coordinate plane instead of against time.
    pub planar: bool,
}
