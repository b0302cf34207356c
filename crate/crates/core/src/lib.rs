//! Monte Carlo simulator for downlink precoding from a single LEO satellite
//! with a planar phased array serving a moving multibeam lattice in full
//! frequency reuse.
//!
//! The crate covers the whole pipeline of one Monte Carlo campaign:
//!
//! - [`geometry`]: circular-orbit propagation, user drops and mobility,
//!   slant ranges, uv-coordinates, the hexagonal beam lattice and the
//!   estimation-to-transmission delay budget.
//! - [`antenna`]: the on-board array, element patterns, terminal receive
//!   profiles and the beamforming matrix.
//! - [`channel`]: noise-normalized feed-space channels, additional losses,
//!   beam-space conversion, beam-center approximate channels and scene
//!   evolution between estimation and transmission.
//! - [`precoding`]: multi-beam, MMSE and spatially sampled MMSE precoders
//!   with sum-power, per-antenna and maximum-power normalizations.
//! - [`simulation`]: random per-beam scheduling, SINR/SIR/spectral
//!   efficiency evaluation and the campaign driver.
//! - [`config`]: the campaign configuration and its validation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod channel;
pub mod config;
pub mod constants;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod precoding;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector, Vector3};
pub use num_complex::Complex64;

pub use antenna::{ArrayGeometry, BeamformingMatrix, ElementModel, TerminalRadioProfile};
pub use channel::{ChannelMatrix, ChannelModel, LossSample, LossTable, SceneSnapshot};
pub use config::{CampaignConfig, CellKey};
pub use geometry::{BeamLattice, DelayBudget, SatelliteState, UserTerminal};
pub use precoding::{Normalization, PrecodingMatrix, RegularizationVector, Scheme, Space};
pub use simulation::{CampaignOutput, EmpiricalCdf, FrameSchedule, KpiRecord, Simulator};
