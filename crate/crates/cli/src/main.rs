use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use locprec::CampaignConfig;
use locprec_cli::{
    echo_config, emit_plot_data, execute, import_results, parse_config, CellFilter, CliError, OutputFormat, PlotKind,
    Result, RunRequest,
};

#[derive(Debug, Parser)]
#[command(name = "locprec", version, about = "LEO multibeam precoding Monte Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a campaign and write records, summaries and a manifest.
    Run {
        /// Campaign file (TOML); built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Overrides the campaign seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of iterations.
        #[arg(long)]
        iterations: Option<u32>,
        /// Cell selection, e.g. `scheme=mmse|ss-mmse,power=4`.
        #[arg(long)]
        cells: Option<String>,
        /// Worker threads; results are identical for any value.
        #[arg(long)]
        threads: Option<usize>,
        /// Only write per-cell summaries.
        #[arg(long)]
        summary_only: bool,
        /// Also write plot data and gnuplot scripts under `<out>/plots`.
        #[arg(long)]
        plots: bool,
    },
    /// Emit plot data from an exported record file.
    Plot {
        /// Record file written by `run`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        /// Format of the record file; guessed from its extension by default.
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        #[arg(long)]
        cells: Option<String>,
        /// SIR values above this are left out of SIR CDFs.
        #[arg(long, default_value_t = 100.0)]
        sir_cap_db: f64,
    },
    /// Print the fully materialized configuration.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(config: Option<&PathBuf>) -> Result<CampaignConfig> {
    match config {
        Some(p) => parse_config(p),
        None => Ok(CampaignConfig::default()),
    }
}

fn filter(cells: Option<&String>) -> Result<CellFilter> {
    cells.map_or(Ok(CellFilter::all()), |s| s.parse())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            format,
            seed,
            iterations,
            cells,
            threads,
            summary_only,
            plots,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(n) = iterations {
                cfg.iterations = n;
            }
            cfg.validate()?;
            let mut req = RunRequest::new(cfg, out);
            req.format = format;
            req.cells = filter(cells.as_ref())?;
            req.threads = threads;
            req.keep_records = !summary_only;
            req.plots = plots;
            let report = execute(&req)?;
            eprintln!(
                "{} cells, {} records, {} skipped -> {}",
                report.n_cells,
                report.n_records,
                report.skipped.len(),
                req.out_dir.display()
            );
            for s in &report.skipped {
                eprintln!("skipped {}: {}", s.cell.label(), s.reason);
            }
            if report.n_cells > 0 && report.summaries.is_empty() {
                return Err(CliError::Runtime("every cell was skipped".into()));
            }
            Ok(())
        }
        Command::Plot {
            input,
            kind,
            out,
            format,
            cells,
            sir_cap_db,
        } => {
            let format = match format {
                Some(f) => f,
                None if input.extension().is_some_and(|e| e == "jsonl") => OutputFormat::Jsonl,
                None => OutputFormat::Csv,
            };
            let rows = import_results(&input, format)?;
            let files = emit_plot_data(&rows, kind, &filter(cells.as_ref())?, sir_cap_db, &out)?;
            eprintln!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
        Command::Config { config } => {
            print!("{}", echo_config(&load(config.as_ref())?)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
