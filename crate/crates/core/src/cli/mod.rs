//! Command-line front end. Every subcommand reads the shared TOML config,
//! validates it fully, computes, and emits one or more tables.
//!
//! Exit codes: 0 ok, 2 configuration, 3 numerical or strict-check failure,
//! 4 resource limit.

mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Outcome, Overrides, Run};
pub use output::{Cell, Table};

use crate::config::{Format, LoadedConfig, PolicyName};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "gclt", version, about = "Worst-case CLT limits under variance uncertainty: DP, Monte Carlo and the G-heat PDE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; tables go to stdout when neither this nor `output.dir` is set.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Turn check failures into exit code 3.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// constant, bang_bang or dp_argmax.
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Hypothesis checkers over the `[check]` n list.
    Check,
    /// G-heat solve at the band limits.
    Pde,
    /// Grid DP value for each n in `[dp]`.
    Dp,
    /// Monte Carlo estimate under the `[mc]` policy.
    Simulate,
    /// DP against PDE over the `[dp]` n list.
    Converge,
    /// Vanishing-viscosity sweep over `[pde] epsilons`.
    Viscosity,
    /// Mollified and truncated payoff over the window.
    #[command(name = "mollify-demo")]
    MollifyDemo,
}

impl Cli {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            seed: self.seed,
            paths: self.paths,
            epsilon: self.epsilon,
            policy: self.policy.as_deref().map(str::parse::<PolicyName>).transpose()?,
        })
    }
}

/// Computes the tables for `command` from an already loaded config.
pub fn execute(command: Command, config: &LoadedConfig, overrides: Overrides) -> Result<Outcome> {
    let run = Run { config, overrides };
    match command {
        Command::Check => run.check(),
        Command::Pde => run.pde(),
        Command::Dp => run.dp(),
        Command::Simulate => run.simulate(),
        Command::Converge => run.converge(),
        Command::Viscosity => run.viscosity(),
        Command::MollifyDemo => run.mollify_demo(),
    }
}

/// Full CLI run: load, compute, write the tables, then report any failed
/// self-check when `--strict` is set.
pub fn run(cli: &Cli) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Configuration("--config PATH is required".into()))?;
    let loaded = LoadedConfig::from_path(path)?;
    let format = match &cli.format {
        Some(f) => f.parse::<Format>()?,
        None => loaded.config.output.format,
    };
    let out_dir = cli.out.clone().or_else(|| loaded.config.output.dir.as_ref().map(PathBuf::from));
    let overrides = cli.overrides()?;
    let work = || execute(cli.command, &loaded, overrides);
    let outcome = match cli.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Configuration(format!("cannot start {w} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };
    emit(&outcome.tables, format, out_dir.as_deref())?;
    match outcome.violation {
        Some(msg) if cli.strict => Err(Error::StrictCheck(msg)),
        Some(msg) => {
            eprintln!("warning: {msg}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn emit(tables: &[Table], format: Format, out_dir: Option<&std::path::Path>) -> Result<()> {
    match out_dir {
        Some(dir) => {
            for t in tables {
                let path = t.write_to(dir, format)?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for t in tables {
                stdout.write_all(t.render(format).as_bytes())?;
            }
        }
    }
    Ok(())
}
