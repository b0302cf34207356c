//! Cell selection expressions such as `scheme=mmse|ss-mmse,power=4`.

use std::str::FromStr;

use locprec::channel::Propagation;
use locprec::geometry::{MobilityScenario, TerminalClass};
use locprec::{CellKey, Normalization, Scheme, Space};
use serde::de::DeserializeOwned;

use crate::error::{CliError, Result};

/// Conjunction of per-axis alternatives. An axis that is not mentioned
/// accepts every value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellFilter {
    space: Vec<Space>,
    terminal: Vec<TerminalClass>,
    scenario: Vec<MobilityScenario>,
    propagation: Vec<Propagation>,
    power: Vec<f64>,
    scheme: Vec<Scheme>,
    normalization: Vec<Normalization>,
}

fn parse_enum<T: DeserializeOwned>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| CliError::Config(format!("cell filter: unknown {key} `{value}`")))
}

fn accepts<T: PartialEq>(set: &[T], v: &T) -> bool {
    set.is_empty() || set.contains(v)
}

impl CellFilter {
    pub fn all() -> Self {
        CellFilter::default()
    }

    pub fn matches(&self, cell: &CellKey) -> bool {
        accepts(&self.space, &cell.space)
            && accepts(&self.terminal, &cell.terminal)
            && accepts(&self.scenario, &cell.scenario)
            && accepts(&self.propagation, &cell.propagation)
            && accepts(&self.power, &cell.power_dbw_mhz)
            && accepts(&self.scheme, &cell.scheme)
            && accepts(&self.normalization, &cell.normalization)
    }

    pub fn apply(&self, cells: &[CellKey]) -> Vec<CellKey> {
        cells.iter().filter(|c| self.matches(c)).copied().collect()
    }
}

impl FromStr for CellFilter {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = CellFilter::default();
        for clause in s.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let (key, values) = clause
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("cell filter: expected key=value, got `{clause}`")))?;
            let key = key.trim();
            for value in values.split('|').map(str::trim) {
                match key {
                    "space" => f.space.push(parse_enum(key, value)?),
                    "terminal" => f.terminal.push(parse_enum(key, value)?),
                    "scenario" => f.scenario.push(parse_enum(key, value)?),
                    "propagation" => f.propagation.push(parse_enum(key, value)?),
                    "scheme" => f.scheme.push(parse_enum(key, value)?),
                    "normalization" | "norm" => f.normalization.push(parse_enum(key, value)?),
                    "power" => f.power.push(
                        value
                            .parse()
                            .map_err(|_| CliError::Config(format!("cell filter: invalid power `{value}`")))?,
                    ),
                    other => return Err(CliError::Config(format!("cell filter: unknown key `{other}`"))),
                }
            }
        }
        Ok(f)
    }
}
