//! Scenario configuration files and the two built-in example scenarios.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Method;
use crate::multipliers::MultiplierConfig;
use crate::nonlinearity::{KnownNonlinearitySpec, StateNonlinearitySpec};
use crate::plant::PlantSpec;
use crate::reconstruction::KernelKind;
use crate::signal::{Channel, VectorSignal, Waveform};
use crate::synthesis::ObserverGains;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub plant: PlantSpec,
    pub synthesis: SynthesisBlock,
    pub simulation: SimulationBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisBlock {
    pub alpha: f64,
    #[serde(rename = "L2")]
    pub l2: Vec<Vec<f64>>,
    pub multiplier: MultiplierConfig,
    pub eta: f64,
    /// Sliding gain; `None` means the smallest admissible value, `rho_x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default = "yes")]
    pub minimize_mu: bool,
    #[serde(default = "default_p_max")]
    pub p_max: Option<f64>,
    #[serde(default = "default_y1_weight")]
    pub y1_weight: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Precomputed gains; synthesis is skipped when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<ObserverGains>,
}

fn yes() -> bool {
    true
}
fn default_p_max() -> Option<f64> {
    Some(40.0)
}
fn default_y1_weight() -> f64 {
    0.01
}
fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub t_span: [f64; 2],
    pub step: f64,
    /// Drawn uniformly from `[-10, 10]^n_x` with `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    /// Sampling interval of the recorded trace; defaults to `step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_step: Option<f64>,
    /// Fraction of the span used for the terminal error.
    #[serde(default = "default_trailing")]
    pub trailing_fraction: f64,
}

fn default_trailing() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Discontinuities {
    /// `"auto"`: taken from the disturbance generators.
    Auto(AutoTag),
    /// Explicit jump times per channel.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl Default for Discontinuities {
    fn default() -> Self {
        Self::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionBlock {
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    /// One width per state-disturbance channel, seconds.
    pub betas: Vec<f64>,
    /// Start of the scored window; defaults to `t_S + 5 beta_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default)]
    pub discontinuities: Discontinuities,
}

fn default_kernel() -> KernelKind {
    KernelKind::StandardBump
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("scenario: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that do not need the plant to be built.
    pub fn validate(&self) -> Result<()> {
        let s = &self.simulation;
        let [t0, tf] = s.t_span;
        if !(tf > t0) {
            return Err(Error::ConfigInvalid(format!("t_span [{t0}, {tf}] is empty")));
        }
        if !(s.step > 0.0) || s.step > tf - t0 {
            return Err(Error::ConfigInvalid(format!("step {} outside (0, tf - t0]", s.step)));
        }
        if let Some(r) = s.record_step {
            if !(r >= s.step) {
                return Err(Error::ConfigInvalid(format!("record_step {r} below step {}", s.step)));
            }
        }
        if !(s.trailing_fraction > 0.0 && s.trailing_fraction <= 1.0) {
            return Err(Error::ConfigInvalid("trailing_fraction must be in (0, 1]".into()));
        }
        if !(self.synthesis.eta > 0.0) {
            return Err(Error::ConfigInvalid("eta must be > 0".into()));
        }
        if !(self.synthesis.alpha > 0.0) {
            return Err(Error::ConfigInvalid("alpha must be > 0".into()));
        }
        if let Some(r) = &self.reconstruction {
            if r.betas.iter().any(|b| !(*b > 0.0)) {
                return Err(Error::ConfigInvalid("betas must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Number of steps between recorded samples.
    pub fn record_every(&self) -> usize {
        let s = &self.simulation;
        s.record_step.map_or(1, |r| ((r / s.step).round() as usize).max(1))
    }
}

pub const BUILTIN: [&str; 2] = ["example1", "example2"];

pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        other => Err(Error::UnknownRegistryName(other.to_string())),
    }
}

fn rows<const C: usize>(r: &[[f64; C]]) -> Vec<Vec<f64>> {
    r.iter().map(|row| row.to_vec()).collect()
}

const C_EXAMPLES: [[f64; 4]; 3] = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];

/// Single-link flexible-joint robot.
pub fn example1() -> ScenarioConfig {
    let b = [[0.0], [-1.1104], [0.0], [1.0]];
    ScenarioConfig {
        name: Some("example1".into()),
        plant: PlantSpec {
            a: rows(&[
                [0.0, 1.0, 0.0, 0.0],
                [-3.75, -0.0015, 3.75, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [3.75, 0.0, -3.75, -0.0013],
            ]),
            b_f: rows(&b),
            b_g: Some(rows(&b)),
            g: rows(&[[1.0], [0.5], [0.0], [1.3]]),
            c: rows(&C_EXAMPLES),
            d: rows(&[[0.0], [1.0], [-2.0]]),
            c_q: rows(&[[0.0, 1.0, 0.0, 0.0]]),
            f: StateNonlinearitySpec::CosOfQ { gain: 1.0 },
            g_known: Some(KnownNonlinearitySpec::SinOfY { index: 0, gain: 2.3 }),
            rho_x: Some(1.0),
            w_x: VectorSignal::new(vec![Channel::new(Waveform::Sawtooth, 1.0, 2.0, 1.0)]),
            w_y: VectorSignal::new(vec![Channel::new(Waveform::Square, 1.0, 4.0, 0.0)]),
        },
        synthesis: SynthesisBlock {
            alpha: 0.5,
            l2: vec![vec![-16.55, -90.07, 80.54]],
            multiplier: MultiplierConfig::Lipschitz { l_f: 1.0, zeta: None },
            eta: 1e-4,
            rho: Some(100.0),
            minimize_mu: true,
            p_max: default_p_max(),
            y1_weight: default_y1_weight(),
            tolerance: default_tolerance(),
            gains: None,
        },
        simulation: SimulationBlock {
            t_span: [0.0, 80.0],
            step: 1e-3,
            x0: Some(vec![2.09, -2.17, -0.31, -8.58]),
            z0: None,
            seed: 0,
            method: Method::Sdirk3,
            record_step: None,
            trailing_fraction: default_trailing(),
        },
        reconstruction: Some(ReconstructionBlock {
            kernel: KernelKind::StandardBump,
            betas: vec![0.24],
            onset: Some(20.0),
            end: None,
            discontinuities: Discontinuities::default(),
        }),
        output: OutputBlock::default(),
    }
}

/// Unstable fourth-order system with a `q|q|` nonlinearity and two
/// state-disturbance channels.
pub fn example2() -> ScenarioConfig {
    ScenarioConfig {
        name: Some("example2".into()),
        plant: PlantSpec {
            a: rows(&[
                [2.44, 5.32, 9.29, 8.63],
                [1.1, -4.11, 1.82, 2.53],
                [-0.09, 0.9, -2.91, 0.06],
                [-4.53, -3.45, -8.59, -12.14],
            ]),
            b_f: rows(&[[0.0], [-1.0], [0.0], [1.0]]),
            b_g: None,
            g: rows(&[[0.04, 1.77], [1.37, 0.3], [-6.14, -0.56], [-2.71, 0.05]]),
            c: rows(&C_EXAMPLES),
            d: rows(&[[1.0], [0.0], [-1.0]]),
            // f(q) = (q/2)|q/2| written as 0.25 q|q| with q = 2 x_2
            c_q: rows(&[[0.0, 2.0, 0.0, 0.0]]),
            f: StateNonlinearitySpec::QAbsQ { gain: 0.25 },
            g_known: None,
            rho_x: Some(34f64.sqrt()),
            w_x: VectorSignal::new(vec![
                Channel::new(Waveform::Cos, 3.0, 1.0, 0.0),
                Channel::new(Waveform::Sawtooth, 5.0, 4.0, 0.0),
            ]),
            w_y: VectorSignal::new(vec![Channel::new(Waveform::Sin, 10.0, 3.0, 0.0)]),
        },
        synthesis: SynthesisBlock {
            alpha: 0.5,
            l2: vec![vec![-0.04, -0.23, 1.42]],
            multiplier: MultiplierConfig::PositivelyReal {
                x: vec![vec![1.0]],
                zeta: None,
            },
            eta: 1e-4,
            rho: Some(200.0),
            minimize_mu: true,
            p_max: default_p_max(),
            y1_weight: default_y1_weight(),
            tolerance: default_tolerance(),
            gains: None,
        },
        simulation: SimulationBlock {
            t_span: [0.0, 80.0],
            step: 1e-3,
            x0: Some(vec![-32.94, -31.38, -26.19, -68.89]),
            z0: None,
            seed: 0,
            method: Method::Sdirk3,
            record_step: None,
            trailing_fraction: default_trailing(),
        },
        reconstruction: Some(ReconstructionBlock {
            kernel: KernelKind::StandardBump,
            betas: vec![0.3, 0.1],
            onset: None,
            end: None,
            discontinuities: Discontinuities::default(),
        }),
        output: OutputBlock::default(),
    }
}
