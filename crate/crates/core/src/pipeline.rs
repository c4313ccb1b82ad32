//! Synthesis → simulation → reconstruction, driven by a [`ScenarioConfig`].

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::descriptor::{build_descriptor, DescriptorSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::observer::{self, ErrorMetrics, Observer, Scenario, SimulationTrace};
use crate::reconstruction::{self, Kernel, ReconstructionOptions, ReconstructionReport, WindowFilter};
use crate::scenario::{Discontinuities, Format, ScenarioConfig};
use crate::sdp::ClarabelSolver;
use crate::synthesis::{self, ObserverGains, SynthesisConfig, SynthesisResult};

pub fn descriptor_of(config: &ScenarioConfig) -> Result<DescriptorSystem> {
    build_descriptor(&config.plant.build()?)
}

pub fn synthesis_config(config: &ScenarioConfig, d: &DescriptorSystem) -> Result<SynthesisConfig> {
    let s = &config.synthesis;
    let l2 = linalg::from_rows(&s.l2).ok_or_else(|| Error::ConfigInvalid("L2: ragged matrix".into()))?;
    let multiplier = s.multiplier.build(d.plant.n_q(), d.plant.n_f())?;
    let mut c = SynthesisConfig::new(s.alpha, l2, multiplier, d.plant.rho_x, s.eta);
    c.rho = s.rho;
    c.minimize_mu = s.minimize_mu;
    c.p_max = s.p_max;
    c.y1_weight = s.y1_weight;
    c.solver_tolerance = s.tolerance;
    c.validate(d)?;
    Ok(c)
}

pub fn synthesize(config: &ScenarioConfig) -> Result<SynthesisResult> {
    let d = descriptor_of(config)?;
    let sc = synthesis_config(config, &d)?;
    synthesis::synthesize(&d, &sc, &ClarabelSolver::default())
}

fn initial_state(config: &ScenarioConfig, n_x: usize) -> Result<Vector> {
    match &config.simulation.x0 {
        Some(v) if v.len() == n_x => Ok(Vector::from_column_slice(v)),
        Some(v) => Err(Error::DimensionMismatch(format!(
            "x0 has {} entries, expected {n_x}",
            v.len()
        ))),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.simulation.seed);
            Ok(Vector::from_fn(n_x, |_, _| rng.gen_range(-10.0..=10.0)))
        }
    }
}

pub fn scenario_of(config: &ScenarioConfig, d: DescriptorSystem, gains: ObserverGains) -> Result<Scenario> {
    let n_x = d.n_x();
    let x0 = initial_state(config, n_x)?;
    let sim = &config.simulation;
    let mut s = Scenario::new(Observer::new(d, gains)?, x0, sim.t_span[0], sim.t_span[1], sim.step);
    s.z0 = sim.z0.as_ref().map(|v| Vector::from_column_slice(v));
    s.method = sim.method;
    s.record_every = config.record_every();
    Ok(s)
}

/// Everything `run` reports, flattened for JSON and sweep CSV rows.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub name: Option<String>,
    pub mu: f64,
    pub rho: f64,
    pub eta: f64,
    pub alpha: f64,
    pub step: f64,
    #[serde(flatten)]
    pub error: ErrorMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionReport>,
}

pub struct RunOutcome {
    pub synthesis: Option<SynthesisResult>,
    pub gains: ObserverGains,
    pub trace: SimulationTrace,
    pub metrics: RunMetrics,
}

/// Runs the whole pipeline. `gains` overrides both synthesis and any inline gains.
pub fn run(config: &ScenarioConfig, gains: Option<ObserverGains>) -> Result<RunOutcome> {
    config.validate()?;
    let d = descriptor_of(config)?;
    let (synthesis, gains) = match gains.or_else(|| config.synthesis.gains.clone()) {
        Some(g) => (None, g),
        None => {
            let sc = synthesis_config(config, &d)?;
            let r = synthesis::synthesize(&d, &sc, &ClarabelSolver::default())?;
            let g = r.gains.clone();
            (Some(r), g)
        }
    };
    simulate_with(config, d, gains, synthesis)
}

fn simulate_with(
    config: &ScenarioConfig,
    d: DescriptorSystem,
    gains: ObserverGains,
    synthesis: Option<SynthesisResult>,
) -> Result<RunOutcome> {
    let rho_x = d.plant.rho_x;
    let w_x = d.plant.w_x.clone();
    let scenario = scenario_of(config, d, gains.clone())?;
    let trace = observer::simulate(&scenario)?;
    let error = observer::error_metrics(&trace, &gains, rho_x, config.simulation.trailing_fraction)?;
    let reconstruction = match &config.reconstruction {
        None => None,
        Some(block) => {
            let filter = WindowFilter::new(Kernel::new(block.kernel), block.betas.clone());
            let [t0, tf] = config.simulation.t_span;
            let discontinuities = match &block.discontinuities {
                Discontinuities::Auto(_) => w_x.jump_times(t0, tf),
                Discontinuities::Explicit(v) => v.clone(),
            };
            let opts = ReconstructionOptions {
                onset: block.onset,
                end: block.end,
                discontinuities,
            };
            let truth = move |t: f64| w_x.eval(t);
            Some(reconstruction::reconstruct_wx(&trace, &filter, Some(&truth), &opts)?)
        }
    };
    let metrics = RunMetrics {
        name: config.name.clone(),
        mu: gains.mu,
        rho: gains.rho,
        eta: gains.eta,
        alpha: gains.alpha,
        step: config.simulation.step,
        error,
        reconstruction,
    };
    Ok(RunOutcome {
        synthesis,
        gains,
        trace,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Eta,
    Beta,
    Rho,
    Alpha,
    Step,
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(Self::Eta),
            "beta" => Ok(Self::Beta),
            "rho" => Ok(Self::Rho),
            "alpha" => Ok(Self::Alpha),
            "step" => Ok(Self::Step),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eta => "eta",
            Self::Beta => "beta",
            Self::Rho => "rho",
            Self::Alpha => "alpha",
            Self::Step => "step",
        }
    }

    fn apply(self, config: &mut ScenarioConfig, gains: &mut Option<ObserverGains>, value: f64) -> Result<()> {
        match self {
            Self::Eta => {
                config.synthesis.eta = value;
                if let Some(g) = gains {
                    g.eta = value;
                }
            }
            Self::Rho => {
                config.synthesis.rho = Some(value);
                if let Some(g) = gains {
                    g.rho = value.max(config.plant.rho_x.unwrap_or(0.0));
                }
            }
            Self::Alpha => {
                config.synthesis.alpha = value;
                *gains = None;
            }
            Self::Step => config.simulation.step = value,
            Self::Beta => {
                let r = config
                    .reconstruction
                    .as_mut()
                    .ok_or_else(|| Error::ConfigInvalid("beta sweep needs a reconstruction block".into()))?;
                r.betas.iter_mut().for_each(|b| *b = value);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub parameter: &'static str,
    pub value: f64,
    pub mu: f64,
    pub terminal_sup_error: f64,
    pub terminal_state_error: f64,
    pub terminal_sensor_error: f64,
    pub bound: f64,
    pub within_bound: bool,
    pub t_s: Option<f64>,
    pub reconstruction_mse: Option<f64>,
    /// Largest unmasked reconstruction error over the channels.
    pub reconstruction_sup_error: Option<f64>,
}

/// One pipeline run per value on `workers` threads; rows keep the input order.
/// Gains are synthesized once unless the parameter enters the LMIs.
pub fn sweep(
    config: &ScenarioConfig,
    parameter: SweepParameter,
    values: &[f64],
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::ConfigInvalid(format!(
            "no values given for `{}`",
            parameter.name()
        )));
    }
    let base_gains = match parameter {
        SweepParameter::Alpha => None,
        _ => match &config.synthesis.gains {
            Some(g) => Some(g.clone()),
            None => Some(synthesize(config)?.gains),
        },
    };
    let mut jobs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = config.clone();
        let mut g = base_gains.clone();
        parameter.apply(&mut c, &mut g, v)?;
        c.validate()?;
        jobs.push((v, c, g));
    }
    let workers = workers.clamp(1, jobs.len());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<Result<SweepRow>>> = (0..jobs.len()).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some((v, c, g)) = jobs.get(i) else { break };
                let row = run(c, g.clone()).map(|o| row_of(parameter, *v, &o.metrics));
                slots.lock().expect("sweep worker panicked")[i] = Some(row);
            });
        }
    });
    results.into_iter().map(|r| r.expect("every job ran")).collect()
}

fn row_of(parameter: SweepParameter, value: f64, m: &RunMetrics) -> SweepRow {
    let rec = m.reconstruction.as_ref();
    SweepRow {
        parameter: parameter.name(),
        value,
        mu: m.mu,
        terminal_sup_error: m.error.terminal_sup_error,
        terminal_state_error: m.error.terminal_state_error,
        terminal_sensor_error: m.error.terminal_sensor_error,
        bound: m.error.bound,
        within_bound: m.error.within_bound,
        t_s: m.error.t_s,
        reconstruction_mse: rec.and_then(|r| r.mse),
        reconstruction_sup_error: rec
            .and_then(|r| r.channels.iter().filter_map(|c| c.sup_error_unmasked).reduce(f64::max)),
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `gains.json` and the synthesis diagnostics.
pub fn write_synthesis(result: &SynthesisResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("gains.json"), serde_json::to_string_pretty(&result.gains)?)?;
    std::fs::write(dir.join("synthesis.json"), result.to_json()?)?;
    Ok(())
}

/// Writes `trace.csv`, `reconstruction.csv` and `metrics.json` as selected.
pub fn write_run(outcome: &RunOutcome, dir: &Path, formats: &[Format]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(s) = &outcome.synthesis {
        write_synthesis(s, dir)?;
    }
    if formats.contains(&Format::Csv) {
        outcome.trace.write_csv(std::fs::File::create(dir.join("trace.csv"))?)?;
        if let Some(r) = &outcome.metrics.reconstruction {
            r.write_csv(std::fs::File::create(dir.join("reconstruction.csv"))?)?;
        }
    }
    if formats.contains(&Format::Json) {
        std::fs::write(
            dir.join("metrics.json"),
            serde_json::to_string_pretty(&outcome.metrics)?,
        )?;
    }
    Ok(())
}
