//! Plot-ready data files and matching gnuplot scripts.
//!
//! - mean spectral efficiency per (scheme, normalization, power), the bar
//!   charts of a campaign figure;
//! - SINR and SIR empirical CDFs, one data file per cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use locprec::{CellKey, EmpiricalCdf, Normalization, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::export::ResultRow;
use crate::filter::CellFilter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    MeanSeHistogram,
    SinrCdf,
    SirCdf,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::MeanSeHistogram, PlotKind::SinrCdf, PlotKind::SirCdf];

    pub fn stem(self) -> &'static str {
        match self {
            PlotKind::MeanSeHistogram => "mean_se_histogram",
            PlotKind::SinrCdf => "sinr_cdf",
            PlotKind::SirCdf => "sir_cdf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBar {
    pub scheme: Scheme,
    pub normalization: Normalization,
    pub power_dbw_mhz: f64,
    pub mean_se: f64,
    pub samples: usize,
}

/// Mean SE per (scheme, normalization, power), ordered by scheme,
/// normalization and power.
pub fn mean_se_histogram(rows: &[ResultRow]) -> Vec<HistogramBar> {
    let mut groups: BTreeMap<(Scheme, Normalization, u64), (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        // total order on power via its bit pattern, then re-sorted numerically
        let e = groups
            .entry((r.scheme, r.normalization, r.power_dbw_mhz.to_bits()))
            .or_insert((r.power_dbw_mhz, 0.0, 0));
        e.1 += r.se_bps_hz;
        e.2 += 1;
    }
    let mut bars: Vec<HistogramBar> = groups
        .into_iter()
        .map(|((scheme, normalization, _), (power, sum, n))| HistogramBar {
            scheme,
            normalization,
            power_dbw_mhz: power,
            mean_se: sum / n as f64,
            samples: n,
        })
        .collect();
    bars.sort_by(|a, b| {
        (a.scheme, a.normalization)
            .cmp(&(b.scheme, b.normalization))
            .then(a.power_dbw_mhz.total_cmp(&b.power_dbw_mhz))
    });
    bars
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSeries {
    pub cell: CellKey,
    /// `(value_db, probability)`, probabilities relative to all samples of
    /// the cell.
    pub points: Vec<(f64, f64)>,
}

/// SINR or SIR CDF of every cell present in `rows`, in cell order. SIR
/// points above `sir_cap_db` (including infinite SIR) are left out.
pub fn cdf_series(rows: &[ResultRow], kind: PlotKind, sir_cap_db: f64) -> Vec<CdfSeries> {
    let mut per_cell: BTreeMap<u32, (CellKey, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let v = match kind {
            PlotKind::SirCdf => r.sir_db,
            _ => r.sinr_db,
        };
        per_cell
            .entry(r.cell_id)
            .or_insert_with(|| (r.cell(), Vec::new()))
            .1
            .push(v);
    }
    per_cell
        .into_values()
        .map(|(cell, values)| {
            let cdf = EmpiricalCdf::new(values);
            let points = cdf
                .points()
                .filter(|(v, _)| kind != PlotKind::SirCdf || *v <= sir_cap_db)
                .collect();
            CdfSeries { cell, points }
        })
        .collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "'"))
}

/// Writes the data of `kind` for the rows selected by `filter` into
/// `out_dir`, plus a gnuplot script rendering it. Returns the written files.
pub fn emit_plot_data(
    rows: &[ResultRow],
    kind: PlotKind,
    filter: &CellFilter,
    sir_cap_db: f64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let selected: Vec<ResultRow> = rows.iter().filter(|r| filter.matches(&r.cell())).copied().collect();
    if selected.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: no records match the filter",
            kind.stem()
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match kind {
        PlotKind::MeanSeHistogram => {
            let mut data = String::from("# scheme normalization power_dbw_mhz mean_se_bps_hz samples\n");
            for b in mean_se_histogram(&selected) {
                writeln!(
                    data,
                    "{} {} {} {} {}",
                    b.scheme.as_str(),
                    b.normalization.as_str(),
                    b.power_dbw_mhz,
                    b.mean_se,
                    b.samples
                )
                .unwrap();
            }
            let data_path = out_dir.join("mean_se_histogram.dat");
            write(&data_path, &data)?;
            let script = String::from(
                "set terminal pngcairo size 1000,500\n\
                 set output 'mean_se_histogram.png'\n\
                 set style data histograms\n\
                 set style fill solid 0.8 border -1\n\
                 set ylabel 'mean spectral efficiency [bit/s/Hz]'\n\
                 set xtics rotate by -45\n\
                 set key off\n\
                 plot 'mean_se_histogram.dat' using 4:xtic(stringcolumn(1).' '.stringcolumn(2).' '.stringcolumn(3))\n",
            );
            let script_path = out_dir.join("mean_se_histogram.gp");
            write(&script_path, &script)?;
            written.extend([data_path, script_path]);
        }
        PlotKind::SinrCdf | PlotKind::SirCdf => {
            let stem = kind.stem();
            let dir = out_dir.join(stem);
            std::fs::create_dir_all(&dir)?;
            let mut plots = Vec::new();
            for series in cdf_series(&selected, kind, sir_cap_db) {
                let name = format!("cell_{:05}.dat", series.cell.cell_id);
                let mut data = format!("# {}\n# value_db probability\n", series.cell.label());
                for (v, p) in &series.points {
                    writeln!(data, "{v} {p}").unwrap();
                }
                let path = dir.join(&name);
                write(&path, &data)?;
                plots.push(format!(
                    "'{stem}/{name}' using 1:2 with steps title {}",
                    quote(&series.cell.label())
                ));
                written.push(path);
            }
            let label = if kind == PlotKind::SirCdf { "SIR" } else { "SINR" };
            let script = format!(
                "set terminal pngcairo size 900,600\n\
                 set output '{stem}.png'\n\
                 set xlabel '{label} [dB]'\n\
                 set ylabel 'CDF'\n\
                 set yrange [0:1]\n\
                 set key bottom right noenhanced\n\
                 plot {}\n",
                plots.join(", \\\n     ")
            );
            let script_path = out_dir.join(format!("{stem}.gp"));
            write(&script_path, &script)?;
            written.push(script_path);
        }
    }
    Ok(written)
}
