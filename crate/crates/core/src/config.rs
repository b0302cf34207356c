//! Campaign configuration.
//!
//! Every field has a default, so an empty document is a valid configuration
//! describing the full experiment matrix. Unknown keys are rejected during
//! deserialization.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::antenna::ElementModel;
use crate::channel::{Environment, Propagation, Space};
use crate::error::{Error, Result};
use crate::geometry::{ArchitectureMode, MobilityScenario, TerminalClass};
use crate::precoding::{Normalization, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub iterations: u32,
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub user_density_per_km2: f64,
    pub min_elevation_deg: f64,
    pub environment: Environment,

    pub spaces: Vec<Space>,
    pub terminals: Vec<TerminalClass>,
    pub scenarios: Vec<MobilityScenario>,
    pub propagations: Vec<Propagation>,
    pub power_density_dbw_mhz: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub normalizations: Vec<Normalization>,

    pub orbit: OrbitConfig,
    pub lattice: LatticeConfig,
    pub array: ArrayConfig,
    pub terminal: TerminalProfiles,
    pub channel: ChannelConfig,
    pub delay: DelayConfig,
    pub plot: PlotConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 1,
            iterations: 70,
            carrier_frequency_hz: 2e9,
            bandwidth_hz: 30e6,
            user_density_per_km2: 0.5,
            min_elevation_deg: 10.0,
            environment: Environment::Suburban,
            spaces: Space::ALL.to_vec(),
            terminals: TerminalClass::ALL.to_vec(),
            scenarios: MobilityScenario::ALL.to_vec(),
            propagations: Propagation::ALL.to_vec(),
            power_density_dbw_mhz: vec![0.0, 4.0, 8.0, 12.0],
            schemes: Scheme::ALL.to_vec(),
            normalizations: Normalization::ALL.to_vec(),
            orbit: OrbitConfig::default(),
            lattice: LatticeConfig::default(),
            array: ArrayConfig::default(),
            terminal: TerminalProfiles::default(),
            channel: ChannelConfig::default(),
            delay: DelayConfig::default(),
            plot: PlotConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub altitude_m: f64,
    pub inclination_deg: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            altitude_m: 600e3,
            inclination_deg: 53.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// 5 rings give 91 beams.
    pub n_rings: usize,
    /// Distance between adjacent beam centers in uv-space.
    pub spacing_uv: f64,
    /// Cap radius around each beam center, in units of half the distance
    /// to the nearest neighbour.
    pub footprint_overlap: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            n_rings: 5,
            spacing_uv: 0.1,
            footprint_overlap: 1.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub nx: usize,
    pub ny: usize,
    pub spacing_wavelengths: f64,
    pub element: ElementModel,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            nx: 16,
            ny: 16,
            spacing_wavelengths: 0.5,
            element: ElementModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RxPatternConfig {
    Isotropic,
    Airy {
        efficiency: f64,
    },
    Parabolic {
        beamwidth_3db_deg: f64,
        floor_db: f64,
    },
    /// Sampled `(angle_deg, gain_dbi)` table read from a file.
    Table {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalProfileConfig {
    pub peak_gain_dbi: f64,
    pub antenna_temperature_k: f64,
    pub noise_figure_db: f64,
    pub pattern: RxPatternConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminalProfiles {
    pub vsat: TerminalProfileConfig,
    pub handheld: TerminalProfileConfig,
}

impl Default for TerminalProfiles {
    fn default() -> Self {
        TerminalProfiles {
            vsat: TerminalProfileConfig {
                peak_gain_dbi: 39.7,
                antenna_temperature_k: 150.0,
                noise_figure_db: 1.2,
                pattern: RxPatternConfig::Airy { efficiency: 0.65 },
            },
            handheld: TerminalProfileConfig {
                peak_gain_dbi: 0.0,
                antenna_temperature_k: 290.0,
                noise_figure_db: 7.0,
                pattern: RxPatternConfig::Isotropic,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// NLOS loss table; the built-in S-band suburban table when unset.
    pub loss_table_file: Option<PathBuf>,
    /// Error of the noise temperature assumed for beam-center channels.
    pub noise_temperature_error_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub architecture: ArchitectureMode,
    /// Precoder computation time t_p.
    pub processing_s: f64,
    /// Additional delays t_ad (estimation to report, queuing, ...).
    pub additional_s: f64,
    /// Gateway latitude/longitude; the initial sub-satellite point when unset.
    pub gateway_lat_lon_deg: Option<[f64; 2]>,
    /// Replaces the composed Δt when set.
    pub delta_t_override_s: Option<f64>,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            architecture: ArchitectureMode::Centralised,
            processing_s: 5e-3,
            additional_s: 5.5e-3,
            gateway_lat_lon_deg: None,
            delta_t_override_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    /// SIR values above this (including infinite SIR) are left out of SIR
    /// CDF plot data.
    pub sir_cap_db: f64,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig { sir_cap_db: 100.0 }
    }
}

/// One point of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub cell_id: u32,
    pub space: Space,
    pub terminal: TerminalClass,
    pub scenario: MobilityScenario,
    pub propagation: Propagation,
    pub power_dbw_mhz: f64,
    pub scheme: Scheme,
    pub normalization: Normalization,
}

/// Cells that share users, schedules and loss draws within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SceneKey {
    pub terminal: TerminalClass,
    pub scenario: MobilityScenario,
    pub propagation: Propagation,
}

impl CellKey {
    pub fn scene(&self) -> SceneKey {
        SceneKey {
            terminal: self.terminal,
            scenario: self.scenario,
            propagation: self.propagation,
        }
    }

    /// Human-readable label, e.g. `beam/vsat/fixed/plos/4dBW/mmse/spc`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}dBW/{}/{}",
            self.space.as_str(),
            self.terminal.as_str(),
            self.scenario.as_str(),
            self.propagation.as_str(),
            self.power_dbw_mhz,
            self.scheme.as_str(),
            self.normalization.as_str()
        )
    }
}

impl CampaignConfig {
    /// Every cell of the matrix, ordered by space, terminal, scenario,
    /// propagation, power, scheme and normalization; ids follow that order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &space in &self.spaces {
            for &terminal in &self.terminals {
                for &scenario in &self.scenarios {
                    for &propagation in &self.propagations {
                        for &power_dbw_mhz in &self.power_density_dbw_mhz {
                            for &scheme in &self.schemes {
                                for &normalization in &self.normalizations {
                                    out.push(CellKey {
                                        cell_id: out.len() as u32,
                                        space,
                                        terminal,
                                        scenario,
                                        propagation,
                                        power_dbw_mhz,
                                        scheme,
                                        normalization,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Total on-board power in watts for a power density in dBW/MHz.
    pub fn total_power_w(&self, power_density_dbw_mhz: f64) -> f64 {
        10f64.powf((power_density_dbw_mhz + 10.0 * (self.bandwidth_hz / 1e6).log10()) / 10.0)
    }

    pub fn wavelength(&self) -> f64 {
        crate::constants::SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// FNV-1a hash of the materialized configuration.
    pub fn fingerprint(&self) -> u64 {
        let text = format!("{self:?}");
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        })
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        }
        fn non_negative(field: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    field,
                    format!("must be non-negative and finite, got {v}"),
                ))
            }
        }
        if self.iterations < 1 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        positive("carrier_frequency_hz", self.carrier_frequency_hz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("user_density_per_km2", self.user_density_per_km2)?;
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            return Err(Error::config(
                "min_elevation_deg",
                format!("must be in [0, 90), got {}", self.min_elevation_deg),
            ));
        }
        if self.normalizations.contains(&Normalization::Raw) {
            return Err(Error::config("normalizations", "raw is not a normalization"));
        }
        for (i, p) in self.power_density_dbw_mhz.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::config(format!("power_density_dbw_mhz[{i}]"), "must be finite"));
            }
        }
        positive("orbit.altitude_m", self.orbit.altitude_m)?;
        if !self.orbit.inclination_deg.is_finite() {
            return Err(Error::config("orbit.inclination_deg", "must be finite"));
        }
        positive("lattice.spacing_uv", self.lattice.spacing_uv)?;
        positive("lattice.footprint_overlap", self.lattice.footprint_overlap)?;
        if self.lattice.spacing_uv * self.lattice.n_rings as f64 >= 1.0 {
            return Err(Error::config(
                "lattice",
                format!(
                    "outer ring at uv radius {} is outside visible space",
                    self.lattice.spacing_uv * self.lattice.n_rings as f64
                ),
            ));
        }
        if self.array.nx == 0 || self.array.ny == 0 {
            return Err(Error::config("array", "nx and ny must be at least 1"));
        }
        positive("array.spacing_wavelengths", self.array.spacing_wavelengths)?;
        match self.array.element {
            ElementModel::CosineTaper { exponent } => non_negative("array.element.exponent", exponent)?,
            ElementModel::Isotropic { gain_dbi } => {
                if !gain_dbi.is_finite() {
                    return Err(Error::config("array.element.gain_dbi", "must be finite"));
                }
            }
        }
        for (name, p) in [
            ("terminal.vsat", &self.terminal.vsat),
            ("terminal.handheld", &self.terminal.handheld),
        ] {
            if !p.peak_gain_dbi.is_finite() {
                return Err(Error::config(format!("{name}.peak_gain_dbi"), "must be finite"));
            }
            non_negative(&format!("{name}.antenna_temperature_k"), p.antenna_temperature_k)?;
            non_negative(&format!("{name}.noise_figure_db"), p.noise_figure_db)?;
            match &p.pattern {
                RxPatternConfig::Airy { efficiency } if !(*efficiency > 0.0 && *efficiency <= 1.0) => {
                    return Err(Error::config(format!("{name}.pattern.efficiency"), "must be in (0, 1]"));
                }
                RxPatternConfig::Parabolic {
                    beamwidth_3db_deg,
                    floor_db,
                } => {
                    positive(&format!("{name}.pattern.beamwidth_3db_deg"), *beamwidth_3db_deg)?;
                    non_negative(&format!("{name}.pattern.floor_db"), *floor_db)?;
                }
                _ => {}
            }
        }
        if !self.channel.noise_temperature_error_db.is_finite() {
            return Err(Error::config("channel.noise_temperature_error_db", "must be finite"));
        }
        non_negative("delay.processing_s", self.delay.processing_s)?;
        non_negative("delay.additional_s", self.delay.additional_s)?;
        if let Some(dt) = self.delay.delta_t_override_s {
            non_negative("delay.delta_t_override_s", dt)?;
        }
        if let Some([lat, lon]) = self.delay.gateway_lat_lon_deg {
            if !(-90.0..=90.0).contains(&lat) || !lon.is_finite() {
                return Err(Error::config(
                    "delay.gateway_lat_lon_deg",
                    format!("invalid coordinates [{lat}, {lon}]"),
                ));
            }
        }
        if !self.plot.sir_cap_db.is_finite() {
            return Err(Error::config("plot.sir_cap_db", "must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_full_matrix() {
        let c = CampaignConfig::default();
        c.validate().unwrap();
        assert_eq!(c.cells().len(), 2 * 2 * 2 * 2 * 4 * 4 * 3);
        let ids: Vec<u32> = c.cells().iter().map(|k| k.cell_id).collect();
        assert_eq!(ids, (0..ids.len() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn total_power_from_density() {
        let c = CampaignConfig::default();
        // 0 dBW/MHz over 30 MHz = 30 W
        assert!((c.total_power_w(0.0) - 30.0).abs() < 1e-9);
        assert!((c.total_power_w(12.0) / c.total_power_w(0.0) - 10f64.powf(1.2)).abs() < 1e-9);
    }

    #[test]
    fn validation_names_the_field() {
        let c = CampaignConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "iterations"));
        let c = CampaignConfig {
            user_density_per_km2: 0.0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "user_density_per_km2"));
        let mut c = CampaignConfig::default();
        c.lattice.spacing_uv = 0.25;
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "lattice"));
    }

    #[test]
    fn empty_matrix_has_no_cells() {
        let mut c = CampaignConfig::default();
        c.schemes.clear();
        assert!(c.cells().is_empty());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = CampaignConfig::default();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 2;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
