//! Command-line front end; `blsmo --help` lists the subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{exit_code, Error, Result};
use crate::pipeline::{self, SweepParameter};
use crate::scenario::{self, Format, ScenarioConfig};
use crate::synthesis::ObserverGains;

#[derive(Debug, Parser)]
#[command(name = "blsmo", version, about = "Boundary-layer sliding-mode observer toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON file, or the name of a built-in scenario.
    #[arg(long, short)]
    pub config: String,
    /// Output directory; defaults to the config's `output.dir`, then `out`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restricts the written formats.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the LMIs and write gains.json.
    Synth(Common),
    /// Synthesize (or load gains), simulate and reconstruct.
    Run {
        #[command(flatten)]
        common: Common,
        /// Use these gains instead of synthesizing.
        #[arg(long)]
        gains: Option<PathBuf>,
    },
    /// One run per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// eta, beta, rho, alpha or step.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Built-in scenarios.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExamplesAction {
    /// Print the built-in scenario names.
    List,
    /// Print a built-in scenario as JSON.
    Show { name: String },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut c = if Path::new(&common.config).exists() {
        ScenarioConfig::load(Path::new(&common.config))?
    } else if scenario::BUILTIN.contains(&common.config.as_str()) {
        scenario::builtin(&common.config)?
    } else {
        return Err(Error::ConfigInvalid(format!(
            "`{}` is neither a file nor a built-in scenario",
            common.config
        )));
    };
    if let Some(seed) = common.seed {
        c.simulation.seed = seed;
    }
    Ok(c)
}

fn out_dir(common: &Common, c: &ScenarioConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| c.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn formats(common: &Common, c: &ScenarioConfig) -> Vec<Format> {
    match common.format {
        Some(FormatArg::Csv) => vec![Format::Csv],
        Some(FormatArg::Json) => vec![Format::Json],
        None => c.output.formats.clone(),
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(common) => {
            let c = load(&common)?;
            let r = pipeline::synthesize(&c)?;
            let dir = out_dir(&common, &c);
            pipeline::write_synthesis(&r, &dir)?;
            writeln!(
                stdout,
                "feasible: mu = {:.6}, lambda1 = {:.6}, bound = {:.6}, rho = {}",
                r.gains.mu, r.lambda1, r.ultimate_bound, r.gains.rho
            )?;
            writeln!(stdout, "wrote {}", dir.join("gains.json").display())?;
        }
        Command::Run { common, gains } => {
            let c = load(&common)?;
            let gains: Option<ObserverGains> = match gains {
                Some(p) => Some(
                    serde_json::from_str(&std::fs::read_to_string(&p)?)
                        .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", p.display())))?,
                ),
                None => None,
            };
            let o = pipeline::run(&c, gains)?;
            let dir = out_dir(&common, &c);
            pipeline::write_run(&o, &dir, &formats(&common, &c))?;
            let m = &o.metrics;
            writeln!(
                stdout,
                "terminal |e| = {:.4e} (bound {:.4e}, within = {}), t_S = {}",
                m.error.terminal_sup_error,
                m.error.bound,
                m.error.within_bound,
                m.error.t_s.map_or("none".into(), |t| format!("{t:.4}"))
            )?;
            if let Some(mse) = m.reconstruction.as_ref().and_then(|r| r.mse) {
                writeln!(stdout, "reconstruction mse = {mse:.4e}")?;
            }
            writeln!(stdout, "wrote {}", dir.display())?;
        }
        Command::Sweep {
            common,
            param,
            values,
            workers,
        } => {
            let parameter: SweepParameter = param.parse()?;
            let c = load(&common)?;
            let rows = pipeline::sweep(&c, parameter, &values, workers)?;
            let dir = out_dir(&common, &c);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("sweep_{}.csv", parameter.name()));
            pipeline::write_sweep_csv(&rows, &path)?;
            for r in &rows {
                writeln!(
                    stdout,
                    "{} = {:e}: terminal |e| = {:.4e}, mse = {}",
                    r.parameter,
                    r.value,
                    r.terminal_sup_error,
                    r.reconstruction_mse.map_or("-".into(), |v| format!("{v:.4e}"))
                )?;
            }
            writeln!(stdout, "wrote {}", path.display())?;
        }
        Command::Examples { action } => match action {
            ExamplesAction::List => {
                for name in scenario::BUILTIN {
                    writeln!(stdout, "{name}")?;
                }
            }
            ExamplesAction::Show { name } => writeln!(stdout, "{}", scenario::builtin(&name)?.to_json()?)?,
        },
    }
    Ok(())
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit_code::CONFIG
            } else {
                exit_code::OK
            };
        }
    };
    match execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => exit_code::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
