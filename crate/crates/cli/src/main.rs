//! Command-line driver: runs scenario configs, the built-in three-box
//! experiments, and coupling sweeps.
//!
//! Exit status: 0 when every assertion passes, 1 when any fails, 2 for
//! configuration and input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use weaklab::scenarios::{
    emit_config, load_config, presets, run_scenario, run_three_box, sweep_coupling, OutputFormat,
    Report, ScenarioConfig, ThreeBoxMode,
};

#[derive(Parser)]
#[command(name = "weaklab", version, about = "Pre- and post-selected measurement scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report format; defaults to the config's choice
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Override the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config
    Run { config: PathBuf },
    /// Run one of the three-box experiments
    ThreeBox {
        #[arg(long, value_parser = parse_mode)]
        mode: ThreeBoxMode,
    },
    /// Run a weak or projective config over a list of couplings
    Sweep {
        config: PathBuf,
        /// Comma-separated couplings, e.g. 1e-1,1e-2,1e-3,1e-4
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        g: Vec<f64>,
    },
    /// List the built-in scenarios, or write them as config files
    Presets {
        /// Directory to write `<name>.json` files into
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_mode(s: &str) -> Result<ThreeBoxMode, String> {
    s.parse()
}

/// Failure classes mapped to exit codes.
enum Failure {
    Assertions,
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<(ScenarioConfig, Vec<String>)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let loaded = load_config(&text).with_context(|| format!("in {}", path.display()))?;
    let mut config = loaded.config;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok((config, loaded.warnings))
}

fn emit(report: &Report, format: OutputFormat, out: Option<&Path>) -> anyhow::Result<()> {
    let text = match format {
        OutputFormat::Json => report.to_json()?,
        OutputFormat::Csv => report.to_csv()?,
    };
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let requested = cli.format.map(|f| match f {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::Csv,
    });
    let (report, format) = match &cli.command {
        Command::Run { config } => {
            let (config, warnings) = load(config, cli.seed)?;
            let mut report = run_scenario(&config).map_err(anyhow::Error::from)?;
            report.warnings.splice(0..0, warnings);
            (report, requested.unwrap_or(config.format))
        }
        Command::Sweep { config, g } => {
            let (config, warnings) = load(config, cli.seed)?;
            let mut report = sweep_coupling(&config, g).map_err(anyhow::Error::from)?;
            report.warnings.splice(0..0, warnings);
            (report, requested.unwrap_or(config.format))
        }
        Command::ThreeBox { mode } => {
            let mut report = run_three_box(*mode).map_err(anyhow::Error::from)?;
            if let Some(seed) = cli.seed {
                report.seed = seed;
            }
            (report, requested.unwrap_or_default())
        }
        Command::Presets { export } => {
            match export {
                Some(dir) => {
                    fs::create_dir_all(dir)
                        .with_context(|| format!("cannot create {}", dir.display()))?;
                    for p in presets() {
                        let path = dir.join(format!("{}.json", p.name));
                        fs::write(&path, emit_config(&p))
                            .with_context(|| format!("cannot write {}", path.display()))?;
                    }
                }
                None => {
                    for p in presets() {
                        println!("{}", p.name);
                    }
                }
            }
            return Ok(());
        }
    };
    if report.assertions.is_empty() {
        return Err(Failure::Config(anyhow::anyhow!(
            "scenario '{}' produced no assertions",
            report.scenario
        )));
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(&report, format, cli.out.as_deref())?;
    let failed: Vec<_> = report.failed().collect();
    eprintln!(
        "{}: {} assertions, {} failed",
        report.scenario,
        report.assertions.len(),
        failed.len()
    );
    for a in &failed {
        eprintln!(
            "  FAIL {} residual {:e} > tolerance {:e}{}",
            a.id,
            a.residual,
            a.tolerance,
            a.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
        );
    }
    if !failed.is_empty() {
        return Err(Failure::Assertions);
    }
    Ok(())
}

fn check_out_parent(cli: &Cli) -> anyhow::Result<()> {
    if let Some(parent) = cli.out.as_deref().and_then(Path::parent) {
        if !parent.as_os_str().is_empty() && !parent.is_dir() {
            bail!("output directory {} does not exist", parent.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = check_out_parent(&cli) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertions) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
