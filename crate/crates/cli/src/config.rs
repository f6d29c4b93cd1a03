//! Run configuration for `simulate`.
//!
//! A JSON file supplies any subset of the fields; command-line flags
//! override it field by field. Unset fields fall back to the defaults in
//! [`RunConfig::resolve`].

use std::path::{Path, PathBuf};

use anyhow::Context;
use forcepinch_core::synthuser::DEFAULT_TREMOR;
use forcepinch_core::{EngineOptions, ForceStrategy, Shape, TaskKind, Technique};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub technique: Option<Technique>,
    pub task: Option<TaskKind>,
    /// Trace shape; without it trial `seed` draws shape `seed % 5`.
    pub shape: Option<Shape>,
    pub c: Option<f64>,
    /// First seed of a consecutive run.
    pub seed: Option<u64>,
    /// Explicit seed list; overrides `seed` and `trials`.
    pub seeds: Option<Vec<u64>>,
    pub trials: Option<usize>,
    pub tremor: Option<f64>,
    pub strategy: Option<ForceStrategy>,
    pub profile: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub histograms: Option<PathBuf>,
    pub rollback: Option<bool>,
    pub min_engage_force: Option<f64>,
}

/// Base gain used by the study for each task family.
pub fn default_gain(kind: TaskKind) -> f64 {
    match kind {
        TaskKind::Slider | TaskKind::Trace => 0.5,
        TaskKind::Placement => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub technique: Technique,
    pub task: TaskKind,
    pub shape: Option<Shape>,
    pub c: f64,
    pub seeds: Vec<u64>,
    pub tremor: f64,
    pub strategy: ForceStrategy,
    pub profile: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub histograms: Option<PathBuf>,
    pub options: EngineOptions,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: RunConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            technique,
            task,
            shape,
            c,
            seed,
            seeds,
            trials,
            tremor,
            strategy,
            profile,
            out_dir,
            csv,
            histograms,
            rollback,
            min_engage_force
        )
    }

    pub fn resolve(self) -> CliResult<ResolvedRun> {
        let task = self.task.unwrap_or(TaskKind::Slider);
        let c = self.c.unwrap_or_else(|| default_gain(task));
        if !(c > 0.0 && c.is_finite()) {
            return Err(CliError::usage(format!("c must be positive, got {c}")));
        }
        let seeds = match self.seeds {
            Some(list) => list,
            None => {
                let trials = self.trials.unwrap_or(1);
                let first = self.seed.unwrap_or(0);
                (0..trials as u64).map(|i| first + i).collect()
            }
        };
        if seeds.is_empty() {
            return Err(CliError::usage("trial count must be at least 1"));
        }
        let tremor = self.tremor.unwrap_or(DEFAULT_TREMOR);
        if !(tremor >= 0.0 && tremor.is_finite()) {
            return Err(CliError::usage(format!(
                "tremor must be nonnegative, got {tremor}"
            )));
        }
        if self.shape.is_some() && task != TaskKind::Trace {
            return Err(CliError::usage("shape applies to the trace task only"));
        }
        Ok(ResolvedRun {
            technique: self.technique.unwrap_or(Technique::Constant),
            task,
            shape: self.shape,
            c,
            seeds,
            tremor,
            strategy: self.strategy.unwrap_or(ForceStrategy::DynamicModulation),
            profile: self.profile,
            out_dir: self.out_dir,
            csv: self.csv,
            histograms: self.histograms,
            options: EngineOptions {
                rollback: self.rollback,
                min_engage_force: self.min_engage_force,
            },
        })
    }
}
