//! Scheduling, KPI evaluation and the Monte Carlo campaign driver.

mod engine;
mod metrics;
mod schedule;
mod stats;

pub use engine::{CampaignOutput, IterationInfo, RunOptions, Simulator, SkippedCell, SystemModel};
pub use metrics::{frame_metrics, metrics_from_gain, spectral_efficiency, LinkMetrics};
pub use schedule::{schedule_frames, FrameSchedule};
pub use stats::{CellSummary, EmpiricalCdf, KpiRecord};
