//! Campaign execution: configuration in, result files out.

use std::path::{Path, PathBuf};

use locprec::simulation::{CellSummary, IterationInfo, RunOptions, SkippedCell};
use locprec::{CampaignConfig, CampaignOutput, Simulator};
use serde::Serialize;

use crate::config_io::{config_digest, echo_config};
use crate::error::{CliError, Result};
use crate::export::{export_results, rows, write_summary, OutputFormat, SCHEMA_VERSION};
use crate::filter::CellFilter;
use crate::plot::{emit_plot_data, PlotKind};

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub config: CampaignConfig,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub cells: CellFilter,
    /// Worker threads; the current rayon pool when unset. Output bytes do not
    /// depend on this value.
    pub threads: Option<usize>,
    /// Write per-user records, not just per-cell summaries.
    pub keep_records: bool,
    /// Emit plot data next to the results.
    pub plots: bool,
}

impl RunRequest {
    pub fn new(config: CampaignConfig, out_dir: impl Into<PathBuf>) -> Self {
        RunRequest {
            config,
            out_dir: out_dir.into(),
            format: OutputFormat::Csv,
            cells: CellFilter::all(),
            threads: None,
            keep_records: true,
            plots: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config_path: PathBuf,
    pub records_path: Option<PathBuf>,
    pub summary_path: PathBuf,
    pub manifest_path: PathBuf,
    pub n_cells: usize,
    pub n_records: usize,
    pub summaries: Vec<CellSummary>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    config_sha256: String,
    record_fingerprint: String,
    cells_requested: usize,
    cells_completed: usize,
    records: usize,
    records_file: Option<String>,
    skipped: Vec<SkippedEntry<'a>>,
    iterations: &'a [IterationInfo],
}

#[derive(Serialize)]
struct SkippedEntry<'a> {
    cell_id: u32,
    cell: String,
    reason: &'a str,
}

/// Runs the campaign described by `req` and writes, under `out_dir`:
/// `config.toml` (materialized configuration), `records.{csv,jsonl}`,
/// `summary.csv`, `manifest.json` and optionally `plots/`.
pub fn execute(req: &RunRequest) -> Result<RunReport> {
    let cells = req.cells.apply(&req.config.cells());
    let simulator = Simulator::new(req.config.clone())?;
    let options = RunOptions {
        keep_records: req.keep_records,
    };
    let output = match req.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))?
            .install(|| simulator.run_campaign(&cells, options)),
        None => simulator.run_campaign(&cells, options),
    };
    write_outputs(req, &cells, &output)
}

fn write_outputs(req: &RunRequest, cells: &[locprec::CellKey], output: &CampaignOutput) -> Result<RunReport> {
    let out = &req.out_dir;
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;

    let config_path = out.join("config.toml");
    write_file(&config_path, &echo_config(&req.config)?)?;

    let records_path = if req.keep_records {
        let p = out.join(format!("records.{}", req.format.extension()));
        export_results(rows(&output.records, cells), &p, req.format)?;
        Some(p)
    } else {
        None
    };

    let summary_path = out.join("summary.csv");
    write_summary(&output.summaries, &summary_path)?;

    if req.plots && req.keep_records && !output.records.is_empty() {
        emit_plots(req, cells, output, &out.join("plots"))?;
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_sha256: config_digest(&req.config)?,
        record_fingerprint: format!("{:016x}", output.fingerprint),
        cells_requested: cells.len(),
        cells_completed: output.summaries.len(),
        records: output.records.len(),
        records_file: records_path
            .as_ref()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned()),
        skipped: output
            .skipped
            .iter()
            .map(|s| SkippedEntry {
                cell_id: s.cell.cell_id,
                cell: s.cell.label(),
                reason: &s.reason,
            })
            .collect(),
        iterations: &output.iterations,
    };
    let manifest_path = out.join("manifest.json");
    write_file(&manifest_path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    Ok(RunReport {
        config_path,
        records_path,
        summary_path,
        manifest_path,
        n_cells: cells.len(),
        n_records: output.records.len(),
        summaries: output.summaries.clone(),
        skipped: output.skipped.clone(),
    })
}

/// One directory per (space, terminal, scenario, propagation) combination,
/// each holding the mean-SE histogram and SINR/SIR CDFs of its cells.
fn emit_plots(req: &RunRequest, cells: &[locprec::CellKey], output: &CampaignOutput, dir: &Path) -> Result<()> {
    let all_rows: Vec<_> = rows(&output.records, cells).collect();
    let mut groups: Vec<String> = cells
        .iter()
        .map(|c| {
            format!(
                "space={},terminal={},scenario={},propagation={}",
                c.space.as_str(),
                c.terminal.as_str(),
                c.scenario.as_str(),
                c.propagation.as_str()
            )
        })
        .collect();
    groups.dedup();
    for g in groups {
        let filter: CellFilter = g.parse()?;
        let name: Vec<&str> = g
            .split(',')
            .filter_map(|kv| kv.split_once('=').map(|(_, v)| v))
            .collect();
        let sub = dir.join(name.join("_"));
        for kind in PlotKind::ALL {
            match emit_plot_data(&all_rows, kind, &filter, req.config.plot.sir_cap_db, &sub) {
                Ok(_) => {}
                // every cell of the group was skipped
                Err(CliError::Runtime(_)) => break,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
