use serde::{Deserialize, Serialize};

use crate::config::CellKey;
use crate::constants::linear_to_db;
use crate::precoding::{Normalization, Scheme, Space};

/// KPIs of one user in one frame of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    /// Fingerprint of the configuration that produced the record.
    pub fingerprint: u64,
    pub cell_id: u32,
    pub space: Space,
    pub scheme: Scheme,
    pub normalization: Normalization,
    pub iteration: u32,
    pub frame: u32,
    pub user_id: u32,
    pub sinr: f64,
    /// `+inf` when the user saw no interference.
    pub sir: f64,
    /// `log2(1 + sinr)`.
    pub se: f64,
}

impl KpiRecord {
    pub fn sinr_db(&self) -> f64 {
        linear_to_db(self.sinr)
    }

    pub fn sir_db(&self) -> f64 {
        linear_to_db(self.sir)
    }

    /// Export order: cell, iteration, frame, user.
    pub fn sort_key(&self) -> (u32, u32, u32, u32) {
        (self.cell_id, self.iteration, self.frame, self.user_id)
    }
}

/// Empirical distribution of a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
    probabilities: Vec<f64>,
}

impl EmpiricalCdf {
    /// NaN samples are dropped; infinities are kept and sort last.
    pub fn new(samples: impl IntoIterator<Item = f64>) -> Self {
        let mut values: Vec<f64> = samples.into_iter().filter(|v| !v.is_nan()).collect();
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let probabilities = (1..=values.len()).map(|i| i as f64 / n).collect();
        EmpiricalCdf { values, probabilities }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(value, probability)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probabilities.iter().copied())
    }

    /// Fraction of samples `≤ x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.partition_point(|v| *v <= x) as f64 / self.values.len() as f64
    }

    /// Smallest sample whose cumulative probability reaches `p`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        if self.values.is_empty() || !(0.0..=1.0).contains(&p) {
            return None;
        }
        let i = self.probabilities.partition_point(|q| *q < p);
        Some(self.values[i.min(self.values.len() - 1)])
    }
}

/// Running sums for one cell, merged in a fixed order so that summaries do
/// not depend on thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Accumulator {
    pub samples: u64,
    pub sum_se: f64,
    pub sum_sinr: f64,
    pub sum_sir_finite: f64,
    pub infinite_sir: u64,
}

impl Accumulator {
    pub fn push(&mut self, sinr: f64, sir: f64, se: f64) {
        self.samples += 1;
        self.sum_se += se;
        self.sum_sinr += sinr;
        if sir.is_finite() {
            self.sum_sir_finite += sir;
        } else {
            self.infinite_sir += 1;
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.samples += other.samples;
        self.sum_se += other.sum_se;
        self.sum_sinr += other.sum_sinr;
        self.sum_sir_finite += other.sum_sir_finite;
        self.infinite_sir += other.infinite_sir;
    }
}

/// Averages of one cell over all iterations, frames and users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: CellKey,
    pub samples: u64,
    /// Mean spectral efficiency, bit/s/Hz.
    pub mean_se: f64,
    /// Mean linear SINR, in dB.
    pub mean_sinr_db: f64,
    /// Mean linear SIR over interference-limited samples, in dB.
    pub mean_sir_db: f64,
    /// Samples without interference (infinite SIR).
    pub infinite_sir: u64,
}

impl CellSummary {
    pub(crate) fn from_accumulator(cell: CellKey, acc: &Accumulator) -> Self {
        let n = acc.samples as f64;
        let finite = (acc.samples - acc.infinite_sir) as f64;
        CellSummary {
            cell,
            samples: acc.samples,
            mean_se: acc.sum_se / n,
            mean_sinr_db: linear_to_db(acc.sum_sinr / n),
            mean_sir_db: if finite > 0.0 {
                linear_to_db(acc.sum_sir_finite / finite)
            } else {
                f64::INFINITY
            },
            infinite_sir: acc.infinite_sir,
        }
    }
}
