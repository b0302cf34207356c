//! Noise-normalized channel synthesis.
//!
//! The feed-space coefficient between feed `n` and terminal `i` is
//!
//! ```text
//! h[i,n] = g_tx[n](dir_i) · g_rx,i / (4π (d_i/λ) √(L_i κ B T_i)) · exp(-j 2π d_i/λ)
//! ```
//!
//! with `d_i` the slant range, `L_i` the additional loss and `κ B T_i` the
//! terminal noise power, so the receiver noise has unit variance.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::antenna::{self, interpolate, ArrayGeometry, BeamformingMatrix, ElementModel, TerminalRadioProfile};
use crate::constants::{db_to_linear, BOLTZMANN};
use crate::error::{Error, Result};
use crate::geometry::{
    self, elevation, move_user, propagate_satellite, slant_range, uv_coordinates, uv_to_ground, BeamLattice,
    SatelliteState, TerminalClass, UserTerminal, Uv,
};
use crate::rng::{substream, Purpose};

/// Precoding dimension: feed space (columns are array elements) or beam
/// space (columns are beam ports of the beamforming matrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Space {
    #[serde(rename = "feed")]
    Feed,
    #[serde(rename = "beam")]
    Beam,
}

impl Space {
    pub const ALL: [Space; 2] = [Space::Feed, Space::Beam];

    pub fn as_str(self) -> &'static str {
        match self {
            Space::Feed => "feed",
            Space::Beam => "beam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Propagation {
    /// Free-space loss, noise and range phase only.
    #[serde(rename = "plos", alias = "pLOS")]
    PureLos,
    #[serde(rename = "nlos", alias = "NLOS")]
    Nlos,
}

impl Propagation {
    pub const ALL: [Propagation; 2] = [Propagation::PureLos, Propagation::Nlos];

    pub fn as_str(self) -> &'static str {
        match self {
            Propagation::PureLos => "plos",
            Propagation::Nlos => "nlos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Environment {
    #[default]
    #[serde(rename = "suburban")]
    Suburban,
}

/// Additional losses of one terminal, all in dB.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossSample {
    pub shadow_db: f64,
    pub atmospheric_db: f64,
    pub scintillation_db: f64,
    pub clutter_db: f64,
    pub total_db: f64,
}

impl LossSample {
    pub fn new(shadow_db: f64, atmospheric_db: f64, scintillation_db: f64, clutter_db: f64) -> Self {
        LossSample {
            shadow_db,
            atmospheric_db,
            scintillation_db,
            clutter_db,
            total_db: shadow_db + atmospheric_db + scintillation_db + clutter_db,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn total_linear(&self) -> f64 {
        db_to_linear(self.total_db)
    }
}

/// Elevation-indexed NLOS loss statistics.
///
/// Text format: one row per elevation with five columns
/// `elevation_deg shadow_sigma_db clutter_db atm_db scint_db`, separated by
/// whitespace or commas; `#` starts a comment. Rows must be sorted by
/// strictly increasing elevation. Lookups interpolate linearly and clamp at
/// the first and last rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    elevation_deg: Vec<f64>,
    shadow_sigma_db: Vec<f64>,
    clutter_db: Vec<f64>,
    atm_db: Vec<f64>,
    scint_db: Vec<f64>,
}

const DEFAULT_LOSS_TABLE: &str = include_str!("../data/loss_table_s_band_suburban.txt");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossStatistics {
    pub shadow_sigma_db: f64,
    pub clutter_db: f64,
    pub atm_db: f64,
    pub scint_db: f64,
}

impl LossTable {
    /// Built-in S-band suburban table.
    pub fn s_band_suburban() -> Self {
        Self::parse(DEFAULT_LOSS_TABLE).expect("built-in loss table is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::LossTable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = LossTable {
            elevation_deg: vec![],
            shadow_sigma_db: vec![],
            clutter_db: vec![],
            atm_db: vec![],
            scint_db: vec![],
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let values = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::LossTable(format!("line {}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != 5 {
                return Err(Error::LossTable(format!(
                    "line {}: expected 5 columns, found {}",
                    lineno + 1,
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::LossTable(format!("line {}: non-finite value", lineno + 1)));
            }
            if values[1] < 0.0 {
                return Err(Error::LossTable(format!("line {}: negative shadow sigma", lineno + 1)));
            }
            if let Some(&prev) = t.elevation_deg.last() {
                if values[0] <= prev {
                    return Err(Error::LossTable(format!(
                        "line {}: elevations must be strictly increasing",
                        lineno + 1
                    )));
                }
            }
            t.elevation_deg.push(values[0]);
            t.shadow_sigma_db.push(values[1]);
            t.clutter_db.push(values[2]);
            t.atm_db.push(values[3]);
            t.scint_db.push(values[4]);
        }
        if t.elevation_deg.is_empty() {
            return Err(Error::LossTable("no rows".into()));
        }
        Ok(t)
    }

    pub fn lookup(&self, elevation_deg: f64) -> LossStatistics {
        let x = &self.elevation_deg;
        LossStatistics {
            shadow_sigma_db: interpolate(x, &self.shadow_sigma_db, elevation_deg),
            clutter_db: interpolate(x, &self.clutter_db, elevation_deg),
            atm_db: interpolate(x, &self.atm_db, elevation_deg),
            scint_db: interpolate(x, &self.scint_db, elevation_deg),
        }
    }
}

/// Draws the additional losses of one terminal.
///
/// pLOS carries no additional loss. NLOS draws zero-mean Gaussian shadowing
/// (dB) with the tabulated σ, an exponentially distributed scintillation loss
/// with the tabulated mean, and takes clutter and gaseous absorption from the
/// table.
pub fn draw_losses<R: Rng + ?Sized>(
    table: &LossTable,
    environment: Environment,
    propagation: Propagation,
    elevation_deg: f64,
    min_elevation_deg: f64,
    rng: &mut R,
) -> Result<LossSample> {
    if elevation_deg < min_elevation_deg {
        return Err(Error::BelowHorizon {
            elevation_deg,
            min_deg: min_elevation_deg,
        });
    }
    match (environment, propagation) {
        (_, Propagation::PureLos) => Ok(LossSample::zero()),
        (Environment::Suburban, Propagation::Nlos) => {
            let s = table.lookup(elevation_deg);
            let z: f64 = StandardNormal.sample(rng);
            let e: f64 = Exp1.sample(rng);
            Ok(LossSample::new(
                s.shadow_sigma_db * z,
                s.atm_db,
                s.scint_db * e,
                s.clutter_db,
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// `n_users × n_cols`.
    pub entries: DMatrix<Complex64>,
    pub space: Space,
    pub epoch: f64,
    /// Entries are divided by the terminal noise amplitude. Always true for
    /// matrices built by [`ChannelModel`].
    pub noise_normalized: bool,
}

impl ChannelMatrix {
    pub fn n_users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn from_rows(rows: &[DVector<Complex64>], space: Space, epoch: f64) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch("channel rows of different length".into()));
        }
        let mut entries = DMatrix::zeros(rows.len(), n_cols);
        for (i, r) in rows.iter().enumerate() {
            entries.set_row(i, &r.transpose());
        }
        Ok(ChannelMatrix {
            entries,
            space,
            epoch,
            noise_normalized: true,
        })
    }
}

/// Converts a feed-space channel to beam space, `H_beam = H_feed · B`.
pub fn to_beam_space(h_feed: &ChannelMatrix, b: &BeamformingMatrix) -> Result<ChannelMatrix> {
    if h_feed.space != Space::Feed {
        return Err(Error::DimensionMismatch("input channel is not in feed space".into()));
    }
    if h_feed.n_cols() != b.n_feeds() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} columns, beamforming matrix has {} rows",
            h_feed.n_cols(),
            b.n_feeds()
        )));
    }
    Ok(ChannelMatrix {
        entries: &h_feed.entries * &b.entries,
        space: Space::Beam,
        epoch: h_feed.epoch,
        noise_normalized: h_feed.noise_normalized,
    })
}

/// Satellite, terminals and their loss draws at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSnapshot {
    pub sat: SatelliteState,
    pub users: Vec<UserTerminal>,
    pub losses: Vec<LossSample>,
    pub epoch: f64,
}

impl SceneSnapshot {
    pub fn new(sat: SatelliteState, users: Vec<UserTerminal>, losses: Vec<LossSample>) -> Result<Self> {
        if users.len() != losses.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} users but {} loss samples",
                users.len(),
                losses.len()
            )));
        }
        let epoch = sat.epoch;
        Ok(SceneSnapshot {
            sat,
            users,
            losses,
            epoch,
        })
    }
}

/// Everything needed to turn geometry into noise-normalized channels.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub array: ArrayGeometry,
    pub element: ElementModel,
    pub bandwidth_hz: f64,
    pub vsat: TerminalRadioProfile,
    pub handheld: TerminalRadioProfile,
    pub loss_table: LossTable,
    pub environment: Environment,
    pub min_elevation_deg: f64,
    /// Error (dB) of the noise temperature assumed by the transmitter for
    /// beam-center channels.
    pub noise_temperature_error_db: f64,
}

impl ChannelModel {
    pub fn profile(&self, class: TerminalClass) -> &TerminalRadioProfile {
        match class {
            TerminalClass::Vsat => &self.vsat,
            TerminalClass::Handheld => &self.handheld,
        }
    }

    pub fn min_elevation_rad(&self) -> f64 {
        self.min_elevation_deg.to_radians()
    }

    fn validate_bandwidth(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::invalid(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        Ok(())
    }

    /// Feed-independent part of the coefficient: receive gain, free-space
    /// attenuation, noise normalization and range phase.
    fn link_factor(&self, d: f64, loss: &LossSample, noise_temperature: f64, g_rx: Complex64) -> Result<Complex64> {
        self.validate_bandwidth()?;
        if !(d > 0.0) {
            return Err(Error::DegenerateGeometry("zero slant range".into()));
        }
        let lambda = self.array.wavelength;
        let denom =
            4.0 * PI * (d / lambda) * (loss.total_linear() * BOLTZMANN * self.bandwidth_hz * noise_temperature).sqrt();
        Ok(g_rx * Complex64::from_polar(1.0 / denom, -2.0 * PI * d / lambda))
    }

    fn user_link(&self, user: &UserTerminal, sat: &SatelliteState, loss: &LossSample) -> Result<(Uv, Complex64)> {
        let d = slant_range(user, sat, self.min_elevation_rad())?;
        let dir = uv_coordinates(&user.position, sat)?;
        let g_rx = antenna::rx_gain(self.profile(user.terminal_class), user.off_boresight(sat));
        Ok((dir, self.link_factor(d, loss, user.noise_temperature, g_rx)?))
    }

    /// One coefficient of the feed-space row.
    pub fn feed_channel_entry(
        &self,
        n: usize,
        user: &UserTerminal,
        sat: &SatelliteState,
        loss: &LossSample,
    ) -> Result<Complex64> {
        let (dir, common) = self.user_link(user, sat, loss)?;
        Ok(antenna::tx_feed_gain(n, dir, &self.array, &self.element) * common)
    }

    /// Feed-space CSI vector of one terminal.
    pub fn feed_channel_row(
        &self,
        user: &UserTerminal,
        sat: &SatelliteState,
        loss: &LossSample,
    ) -> Result<DVector<Complex64>> {
        let (dir, common) = self.user_link(user, sat, loss)?;
        Ok(DVector::from_iterator(
            self.array.n_feeds(),
            (0..self.array.n_feeds()).map(|n| antenna::tx_feed_gain(n, dir, &self.array, &self.element) * common),
        ))
    }

    /// Feed-space channel of every terminal in the scene.
    pub fn build_system_channel(&self, scene: &SceneSnapshot) -> Result<ChannelMatrix> {
        let all: Vec<usize> = (0..scene.users.len()).collect();
        self.scheduled_channel(scene, &all)
    }

    /// Feed-space channel restricted to the listed scene indices, in order.
    pub fn scheduled_channel(&self, scene: &SceneSnapshot, indices: &[usize]) -> Result<ChannelMatrix> {
        if indices.is_empty() {
            return Err(Error::invalid("channel requested for an empty user set"));
        }
        let rows = indices
            .iter()
            .map(|&i| self.feed_channel_row(&scene.users[i], &scene.sat, &scene.losses[i]))
            .collect::<Result<Vec<_>>>()?;
        ChannelMatrix::from_rows(&rows, Space::Feed, scene.epoch)
    }

    /// Transmitter-side noise temperature for a terminal class.
    pub fn representative_noise_temperature(&self, class: TerminalClass) -> f64 {
        self.profile(class).noise_temperature() * db_to_linear(self.noise_temperature_error_db)
    }

    /// Approximate CSI toward a beam center: the coefficient of a
    /// terminal of `class` standing at the center's ground projection,
    /// without additional losses.
    pub fn beam_center_channel_row(
        &self,
        center: Uv,
        class: TerminalClass,
        noise_temperature: f64,
        sat: &SatelliteState,
    ) -> Result<DVector<Complex64>> {
        let ground = uv_to_ground(center, sat)?;
        let el = elevation(&ground, &sat.position);
        if el < self.min_elevation_rad() {
            return Err(Error::BelowHorizon {
                elevation_deg: el.to_degrees(),
                min_deg: self.min_elevation_deg,
            });
        }
        let virtual_user = UserTerminal::fixed(usize::MAX, ground, class, noise_temperature, sat);
        let d = (ground - sat.position).norm();
        let g_rx = antenna::rx_gain(self.profile(class), virtual_user.off_boresight(sat));
        let common = self.link_factor(d, &LossSample::zero(), noise_temperature, g_rx)?;
        Ok(DVector::from_iterator(
            self.array.n_feeds(),
            (0..self.array.n_feeds()).map(|n| antenna::tx_feed_gain(n, center, &self.array, &self.element) * common),
        ))
    }

    /// Beam-center channel of every lattice beam (row ℓ ↔ beam ℓ).
    pub fn beam_center_channel(
        &self,
        lattice: &BeamLattice,
        class: TerminalClass,
        sat: &SatelliteState,
    ) -> Result<ChannelMatrix> {
        let t = self.representative_noise_temperature(class);
        let rows = lattice
            .centers
            .iter()
            .map(|c| self.beam_center_channel_row(*c, class, t, sat))
            .collect::<Result<Vec<_>>>()?;
        ChannelMatrix::from_rows(&rows, Space::Feed, sat.epoch)
    }

    /// Loss draws for every terminal, one counter-based substream per
    /// terminal id.
    pub fn draw_scene_losses(
        &self,
        users: &[UserTerminal],
        sat: &SatelliteState,
        propagation: Propagation,
        seed: u64,
        purpose: Purpose,
    ) -> Result<Vec<LossSample>> {
        users
            .iter()
            .map(|u| {
                if propagation == Propagation::PureLos {
                    return Ok(LossSample::zero());
                }
                let el = elevation(&u.position, &sat.position).to_degrees();
                let mut rng = substream(seed, purpose, u.id as u64);
                draw_losses(
                    &self.loss_table,
                    self.environment,
                    propagation,
                    el,
                    self.min_elevation_deg,
                    &mut rng,
                )
            })
            .collect()
    }

    /// Scene at t₁ = t₀ + Δt: satellite propagated, terminals moved (VSATs
    /// keep tracking the satellite) and every loss term re-drawn from the
    /// transmission-phase substreams of `loss_seed`.
    pub fn evolve_scene(
        &self,
        scene: &SceneSnapshot,
        delta_t: f64,
        propagation: Propagation,
        loss_seed: u64,
    ) -> Result<SceneSnapshot> {
        let sat = propagate_satellite(&scene.sat, delta_t)?;
        let users = scene
            .users
            .iter()
            .map(|u| {
                let mut moved = move_user(u, delta_t)?;
                if moved.terminal_class == TerminalClass::Vsat {
                    moved.repoint(&sat);
                }
                Ok(moved)
            })
            .collect::<Result<Vec<_>>>()?;
        let losses = self.draw_scene_losses(&users, &sat, propagation, loss_seed, Purpose::LossTransmission)?;
        SceneSnapshot::new(sat, users, losses)
    }
}

/// Convenience: elevation of a terminal in degrees.
pub fn user_elevation_deg(user: &UserTerminal, sat: &SatelliteState) -> f64 {
    geometry::elevation(&user.position, &sat.position).to_degrees()
}
