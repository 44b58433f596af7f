//! Config file schema (JSON) and conversion into core types.
//!
//! The config is parsed first and validated second: every precondition of
//! the requested task is checked before any work starts, so a bad config
//! never produces partial artifacts.

use serde::Deserialize;

use cbm_core::mech::{JumpMeasure, LevyMechanism, MechanismPair};
use cbm_core::path::{LevyPathConfig, SmallJumpMode};
use cbm_core::scale::ScaleEvalConfig;
use cbm_core::sim::SimConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanisms: MechanismsSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub quad: QuadSpec,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub mc: McSpec,
    /// Worker-pool size; falls back to the CBM_THREADS env var, then to
    /// the number of logical CPUs.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismsSpec {
    pub branching: MechanismSpec,
    pub migration: MechanismSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub jumps: JumpSpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSpec {
    #[default]
    None,
    StableTail {
        beta: f64,
        c: f64,
    },
    CompoundExponential {
        rate: f64,
        mean: f64,
    },
    Atoms {
        atoms: Vec<(f64, f64)>,
    },
    TabulatedTail {
        points: Vec<(f64, f64)>,
        #[serde(default)]
        heavy_tail: bool,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub x: f64,
    pub a: f64,
    pub alpha: f64,
    pub alphabar: f64,
    /// x grid for scale sweeps.
    pub x_grid: Vec<f64>,
    /// Threshold sweep for explosion estimation.
    pub m_sweep: Vec<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            x: 1.0,
            a: 0.0,
            alpha: 1.0,
            alphabar: 0.0,
            x_grid: vec![0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            m_sweep: vec![1e3, 1e5, 1e7],
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub inner_tol: f64,
    pub max_subdivisions: usize,
    pub upper_truncation_tail_tol: f64,
    pub inverse_tol: f64,
    pub delimiter: Option<f64>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        let d = ScaleEvalConfig::<f64>::default();
        Self {
            rel_tol: d.rel_tol,
            inner_tol: d.inner_tol,
            max_subdivisions: d.max_subdivisions,
            upper_truncation_tail_tol: d.upper_truncation_tail_tol,
            inverse_tol: d.inverse_tol,
            delimiter: d.delimiter,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    pub dt_base: f64,
    pub adaptive: bool,
    pub y_ref: f64,
    pub explosion_threshold: f64,
    pub horizon: f64,
    pub truncation_level: f64,
    pub max_steps: usize,
    pub eps_jump: f64,
    /// "gaussian_match" (default) or "drift_only".
    pub small_jump_mode: String,
}

impl Default for SimSpec {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            dt_base: d.dt_base,
            adaptive: d.adaptive,
            y_ref: d.y_ref,
            explosion_threshold: d.explosion_threshold,
            horizon: d.horizon,
            truncation_level: d.truncation_level,
            max_steps: d.max_steps,
            eps_jump: d.levy.eps_jump,
            small_jump_mode: "gaussian_match".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    pub n_paths: usize,
    pub seed: u64,
    pub eps_tail: f64,
}

impl Default for McSpec {
    fn default() -> Self {
        Self { n_paths: 10_000, seed: 1, eps_tail: 1e-8 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Directory for artifacts (created if absent).
    pub dir: String,
    /// Filename stem; the task name and extension are appended.
    pub prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "out".into(), prefix: "cbm".into() }
    }
}

impl MechanismSpec {
    pub fn build(&self) -> cbm_core::Result<LevyMechanism<f64>> {
        let jumps = match &self.jumps {
            JumpSpec::None => JumpMeasure::NoJumps,
            JumpSpec::StableTail { beta, c } => {
                JumpMeasure::StableTail { beta: *beta, c: *c }
            }
            JumpSpec::CompoundExponential { rate, mean } => {
                JumpMeasure::CompoundExponential { rate: *rate, mean: *mean }
            }
            JumpSpec::Atoms { atoms } => JumpMeasure::Atoms(atoms.clone()),
            JumpSpec::TabulatedTail { points, heavy_tail } => {
                JumpMeasure::TabulatedTail {
                    points: points.clone(),
                    heavy_tail: *heavy_tail,
                }
            }
        };
        LevyMechanism::new(self.sigma, self.gamma, jumps)
    }
}

impl ExperimentConfig {
    pub fn pair(&self) -> cbm_core::Result<MechanismPair<f64>> {
        MechanismPair::new(
            self.mechanisms.branching.build()?,
            self.mechanisms.migration.build()?,
        )
    }

    pub fn scale_cfg(&self) -> ScaleEvalConfig<f64> {
        ScaleEvalConfig {
            rel_tol: self.quad.rel_tol,
            inner_tol: self.quad.inner_tol,
            max_subdivisions: self.quad.max_subdivisions,
            upper_truncation_tail_tol: self.quad.upper_truncation_tail_tol,
            inverse_tol: self.quad.inverse_tol,
            delimiter: self.quad.delimiter,
        }
    }

    pub fn sim_cfg(&self) -> anyhow::Result<SimConfig> {
        let mode = match self.sim.small_jump_mode.as_str() {
            "gaussian_match" => SmallJumpMode::GaussianMatch,
            "drift_only" => SmallJumpMode::DriftOnly,
            other => anyhow::bail!(
                "unknown small_jump_mode {other:?} (expected \"gaussian_match\" \
                 or \"drift_only\")"
            ),
        };
        Ok(SimConfig {
            dt_base: self.sim.dt_base,
            adaptive: self.sim.adaptive,
            y_ref: self.sim.y_ref,
            explosion_threshold: self.sim.explosion_threshold,
            horizon: self.sim.horizon,
            truncation_level: self.sim.truncation_level,
            levy: LevyPathConfig {
                dt: self.sim.dt_base,
                eps_jump: self.sim.eps_jump,
                small_jump_mode: mode,
                horizon: self.sim.horizon,
            },
            max_steps: self.sim.max_steps,
            stop_level: 0.0,
        })
    }
}
