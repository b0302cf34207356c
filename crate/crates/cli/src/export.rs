//! Flat result rows and their CSV / JSON Lines serialization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use locprec::channel::Propagation;
use locprec::geometry::{MobilityScenario, TerminalClass};
use locprec::simulation::CellSummary;
use locprec::{CellKey, KpiRecord, Normalization, Scheme, Space};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Version of the row schema below; bumped whenever columns change.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 14] = [
    "cell_id",
    "space",
    "terminal",
    "scenario",
    "propagation",
    "power_dbw_mhz",
    "scheme",
    "normalization",
    "iteration",
    "frame",
    "user_id",
    "sinr_db",
    "sir_db",
    "se_bps_hz",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

/// One exported record. Infinite SIR (no interference) is written as `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell_id: u32,
    pub space: Space,
    pub terminal: TerminalClass,
    pub scenario: MobilityScenario,
    pub propagation: Propagation,
    pub power_dbw_mhz: f64,
    pub scheme: Scheme,
    pub normalization: Normalization,
    pub iteration: u32,
    pub frame: u32,
    pub user_id: u32,
    #[serde(with = "extended_float")]
    pub sinr_db: f64,
    #[serde(with = "extended_float")]
    pub sir_db: f64,
    pub se_bps_hz: f64,
}

impl ResultRow {
    pub fn new(record: &KpiRecord, cell: &CellKey) -> Self {
        debug_assert_eq!(record.cell_id, cell.cell_id);
        ResultRow {
            cell_id: cell.cell_id,
            space: cell.space,
            terminal: cell.terminal,
            scenario: cell.scenario,
            propagation: cell.propagation,
            power_dbw_mhz: cell.power_dbw_mhz,
            scheme: cell.scheme,
            normalization: cell.normalization,
            iteration: record.iteration,
            frame: record.frame,
            user_id: record.user_id,
            sinr_db: record.sinr_db(),
            sir_db: record.sir_db(),
            se_bps_hz: record.se,
        }
    }

    pub fn cell(&self) -> CellKey {
        CellKey {
            cell_id: self.cell_id,
            space: self.space,
            terminal: self.terminal,
            scenario: self.scenario,
            propagation: self.propagation,
            power_dbw_mhz: self.power_dbw_mhz,
            scheme: self.scheme,
            normalization: self.normalization,
        }
    }
}

/// Rows for `records`; every record's cell must be in `cells`.
pub fn rows<'a>(records: &'a [KpiRecord], cells: &[CellKey]) -> impl Iterator<Item = ResultRow> + 'a {
    let by_id: HashMap<u32, CellKey> = cells.iter().map(|c| (c.cell_id, *c)).collect();
    records
        .iter()
        .map(move |r| ResultRow::new(r, by_id.get(&r.cell_id).expect("record of an unknown cell")))
}

/// Writes rows in the given order. CSV output always has a header line,
/// even without rows; JSON Lines output has one object per line.
pub fn export_results(rows: impl IntoIterator<Item = ResultRow>, path: &Path, format: OutputFormat) -> Result<usize> {
    let file = File::create(path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut n = 0;
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(BufWriter::new(file));
            w.write_record(CSV_COLUMNS)?;
            for row in rows {
                w.serialize(row)?;
                n += 1;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for row in rows {
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n")?;
                n += 1;
            }
            w.flush()?;
        }
    }
    Ok(n)
}

pub fn import_results(path: &Path, format: OutputFormat) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    match format {
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(BufReader::new(file));
            let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
            if header != CSV_COLUMNS {
                return Err(CliError::Runtime(format!(
                    "{}: unexpected header {header:?}",
                    path.display()
                )));
            }
            r.deserialize().map(|row| row.map_err(CliError::from)).collect()
        }
        OutputFormat::Jsonl => BufReader::new(file)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SummaryRow {
    cell_id: u32,
    space: Space,
    terminal: TerminalClass,
    scenario: MobilityScenario,
    propagation: Propagation,
    power_dbw_mhz: f64,
    scheme: Scheme,
    normalization: Normalization,
    samples: u64,
    mean_se_bps_hz: f64,
    #[serde(with = "extended_float")]
    mean_sinr_db: f64,
    #[serde(with = "extended_float")]
    mean_sir_db: f64,
    infinite_sir: u64,
}

/// Per-cell averages as CSV.
pub fn write_summary(summaries: &[CellSummary], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for s in summaries {
        let c = &s.cell;
        w.serialize(SummaryRow {
            cell_id: c.cell_id,
            space: c.space,
            terminal: c.terminal,
            scenario: c.scenario,
            propagation: c.propagation,
            power_dbw_mhz: c.power_dbw_mhz,
            scheme: c.scheme,
            normalization: c.normalization,
            samples: s.samples,
            mean_se_bps_hz: s.mean_se,
            mean_sinr_db: s.mean_sinr_db,
            mean_sir_db: s.mean_sir_db,
            infinite_sir: s.infinite_sir,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Floats that may be infinite or NaN, written as numbers when finite and
/// as `inf`, `-inf` or `nan` otherwise.
mod extended_float {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number, `inf`, `-inf` or `nan`")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => other
                    .parse()
                    .map_err(|_| E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use locprec::CampaignConfig;

    fn sample_rows() -> Vec<ResultRow> {
        let cells = CampaignConfig::default().cells();
        let mk = |cell: usize, user: u32, sinr: f64, sir: f64| {
            let c = &cells[cell];
            ResultRow::new(
                &KpiRecord {
                    fingerprint: 7,
                    cell_id: c.cell_id,
                    space: c.space,
                    scheme: c.scheme,
                    normalization: c.normalization,
                    iteration: 1,
                    frame: 2,
                    user_id: user,
                    sinr,
                    sir,
                    se: (1.0 + sinr).log2(),
                },
                c,
            )
        };
        vec![mk(0, 3, 12.5, 40.25), mk(0, 9, 0.1, f64::INFINITY), mk(5, 1, 0.0, 1e-3)]
    }

    #[test]
    fn empty_csv_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        assert_eq!(export_results(Vec::new(), &p, OutputFormat::Csv).unwrap(), 0);
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            format!("{}\n", CSV_COLUMNS.join(","))
        );
        assert!(import_results(&p, OutputFormat::Csv).unwrap().is_empty());
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample_rows();
        for format in [OutputFormat::Csv, OutputFormat::Jsonl] {
            let p = dir.path().join(format!("r.{}", format.extension()));
            export_results(rows.clone(), &p, format).unwrap();
            let back = import_results(&p, format).unwrap();
            assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                // -inf dB (sinr = 0) compares equal, NaN never appears
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn infinite_sir_is_spelled_out() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        export_results(sample_rows(), &p, OutputFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[2].contains(",inf,"), "{}", lines[2]);
        assert!(lines[3].contains(",-inf,"), "{}", lines[3]);
        assert!(
            lines[1].starts_with("0,feed,vsat,fixed,plos,0.0,mb,spc,1,2,3,"),
            "{}",
            lines[1]
        );
        let p = dir.path().join("r.jsonl");
        export_results(sample_rows(), &p, OutputFormat::Jsonl).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("\"sir_db\":\"inf\""));
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(import_results(&p, OutputFormat::Csv).is_err());
    }
}
