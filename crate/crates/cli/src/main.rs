//! `ridebench`: command-line driver for the ridership forecasting benchmark.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ridebench::data::OutputDesign;
use ridebench::pipeline::{Pipeline, PipelineError, RunSettings};
use ridebench::runner::{ExperimentConfig, GridSpec, ModelFamily, Strategy};

#[derive(Parser)]
#[command(name = "ridebench", version, about = "Transit ridership forecasting benchmark")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config file (TOML).
    #[arg(long, short, global = true, default_value = "ridebench.toml")]
    config: PathBuf,
    /// Output root; overrides `output.root`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid cells and stations [default: available parallelism].
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic panel.
    Synth,
    /// Load a long-format `date,station_id,count` CSV.
    Ingest {
        /// Overrides `data.panel`.
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Overrides `data.holidays`.
        #[arg(long)]
        holidays: Option<PathBuf>,
    },
    /// Train and walk forward every selected experiment.
    Run(RunArgs),
    /// Daily MAAPE, closed-station tables and condition regressions.
    Analyze,
    /// Charts and summary tables.
    Report,
    /// Re-check the artifact checksums recorded in the manifest.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// Start from a predefined grid instead of the config's.
    #[arg(long, value_enum)]
    grid: Option<GridChoice>,
    /// Model families to run (repeatable or comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    model: Vec<ModelFamily>,
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    strategy: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', value_parser = parse_output)]
    output: Vec<OutputDesign>,
    /// Stop each experiment after this many test origins; a later `run` resumes.
    #[arg(long)]
    stop_after: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridChoice {
    /// All 14 cells.
    All,
    /// The 12 neural cells.
    Neural,
}

fn parse_family(s: &str) -> Result<ModelFamily, String> {
    ModelFamily::parse(s).ok_or_else(|| format!("unknown model {s:?} (arima, sarima, mlp, cnn, lstm)"))
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| format!("unknown strategy {s:?} (static, online)"))
}

fn parse_output(s: &str) -> Result<OutputDesign, String> {
    ridebench::runner::parse_output(s).ok_or_else(|| format!("unknown output design {s:?} (single, multi)"))
}

/// Grid from the config, a preset and explicit flags. Explicitly requested
/// combinations that no experiment supports are rejected.
fn select_grid(pipeline: &Pipeline, args: &RunArgs) -> Result<GridSpec, PipelineError> {
    let mut grid = match args.grid {
        Some(GridChoice::All) => GridSpec::full(),
        Some(GridChoice::Neural) => GridSpec::neural(),
        None => pipeline.config.grid_spec(),
    };
    if !args.model.is_empty() {
        grid.families = args.model.clone();
    }
    if !args.strategy.is_empty() {
        grid.strategies = args.strategy.clone();
    }
    if !args.output.is_empty() {
        grid.outputs = args.output.clone();
    }
    if !args.model.is_empty() {
        let template = pipeline.config.template();
        for &family in &grid.families {
            for &strategy in &grid.strategies {
                for &output in &grid.outputs {
                    ExperimentConfig { family, strategy, output, ..template.clone() }
                        .validate()
                        .map_err(|e| PipelineError::Usage(e.to_string()))?;
                }
            }
        }
    }
    Ok(grid)
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let mut pipeline = Pipeline::from_file(&cli.common.config)?;
    if let Some(out) = cli.common.out {
        pipeline.config.output.root = out;
    }
    if let Some(seed) = cli.common.seed {
        pipeline.config.seed = seed;
    }
    if cli.common.jobs == Some(0) {
        return Err(PipelineError::Usage("--jobs must be at least 1".into()));
    }
    let root = pipeline.root().display().to_string();
    match cli.command {
        Command::Synth => {
            let panel = pipeline.synth()?;
            println!(
                "wrote {} stations x {} days to {root}/data/panel.csv",
                panel.n_stations(),
                panel.n_days()
            );
        }
        Command::Ingest { panel, holidays } => {
            if panel.is_some() {
                pipeline.config.data.panel = panel;
            }
            if holidays.is_some() {
                pipeline.config.data.holidays = holidays;
            }
            let report = pipeline.ingest()?;
            println!(
                "ingested {} rows; imputed {} cells; {} missing dates",
                report.rows,
                report.imputed_cells,
                report.missing_dates.len()
            );
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Run(args) => {
            let grid = select_grid(&pipeline, &args)?;
            let settings = RunSettings {
                jobs: cli.common.jobs,
                stop_after: args.stop_after,
            };
            let outcome = pipeline.run(&grid, &settings)?;
            for id in &outcome.completed {
                println!("completed {id}");
            }
            for id in &outcome.interrupted {
                println!("stopped {id}; run again to resume");
            }
        }
        Command::Analyze => {
            let fits = pipeline.analyze()?;
            println!("fitted {} regressions; tables in {root}/analysis/tables.txt", fits.len());
        }
        Command::Report => {
            let bundle = pipeline.report()?;
            println!("wrote {} report files under {root}/report", bundle.files.len());
        }
        Command::Verify => {
            let n = pipeline.verify()?;
            println!("{n} artifacts verified");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
