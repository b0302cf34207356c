use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{
    beamforming_matrix, ArrayGeometry, BeamformingMatrix, GainTable, RxPattern, TerminalRadioProfile,
};
use crate::channel::{to_beam_space, ChannelMatrix, ChannelModel, LossTable, SceneSnapshot};
use crate::config::{CampaignConfig, CellKey, RxPatternConfig, SceneKey, TerminalProfileConfig};
use crate::constants::EARTH_RADIUS_M;
use crate::error::{Error, Result};
use crate::geometry::{
    build_beam_lattice, compute_delay_budget, drop_users, users_by_beam, BeamLattice, Footprint, SatelliteState,
    TerminalClass, UserTemplate,
};
use crate::precoding::{
    expected_snr, mmse_precoder, non_precoded, regularization_from_snr, ss_mmse_precoder, Normalization,
    RegularizationVector, Scheme, Space,
};
use crate::rng::{iteration_seed, substream, Purpose};
use crate::{Complex64, DMatrix, Vector3};

use super::metrics::{metrics_from_gain, spectral_efficiency};
use super::schedule::schedule_frames;
use super::stats::{Accumulator, CellSummary, KpiRecord};

/// Static part of the system: orbit at estimation time, lattice, array,
/// beamforming matrix, footprint, channel model and gateway.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub sat: SatelliteState,
    pub lattice: BeamLattice,
    pub beamforming: BeamformingMatrix,
    pub footprint: Footprint,
    pub channel: ChannelModel,
    pub gateway: Vector3<f64>,
}

impl SystemModel {
    pub fn new(config: &CampaignConfig) -> Result<Self> {
        config.validate()?;
        let sat = SatelliteState::circular(config.orbit.altitude_m, config.orbit.inclination_deg.to_radians())?;
        let lattice = build_beam_lattice(config.lattice.n_rings, config.lattice.spacing_uv)?;
        let wavelength = config.wavelength();
        let array = ArrayGeometry::rectangular(
            config.array.nx,
            config.array.ny,
            config.array.spacing_wavelengths * wavelength,
            wavelength,
        )?;
        let beamforming = beamforming_matrix(&lattice, &array)?;
        let footprint = Footprint::new(&lattice, &sat, config.lattice.footprint_overlap)?;
        let loss_table = match &config.channel.loss_table_file {
            Some(path) => LossTable::from_file(path)?,
            None => LossTable::s_band_suburban(),
        };
        let channel = ChannelModel {
            array,
            element: config.array.element,
            bandwidth_hz: config.bandwidth_hz,
            vsat: radio_profile(TerminalClass::Vsat, &config.terminal.vsat)?,
            handheld: radio_profile(TerminalClass::Handheld, &config.terminal.handheld)?,
            loss_table,
            environment: config.environment,
            min_elevation_deg: config.min_elevation_deg,
            noise_temperature_error_db: config.channel.noise_temperature_error_db,
        };
        let gateway = match config.delay.gateway_lat_lon_deg {
            Some([lat, lon]) => {
                let (lat, lon) = (lat.to_radians(), lon.to_radians());
                Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()) * EARTH_RADIUS_M
            }
            None => sat.sub_satellite_point(),
        };
        Ok(SystemModel {
            sat,
            lattice,
            beamforming,
            footprint,
            channel,
            gateway,
        })
    }
}

fn radio_profile(class: TerminalClass, cfg: &TerminalProfileConfig) -> Result<TerminalRadioProfile> {
    let pattern = match &cfg.pattern {
        RxPatternConfig::Isotropic => RxPattern::Isotropic,
        RxPatternConfig::Airy { efficiency } => RxPattern::Airy {
            efficiency: *efficiency,
        },
        RxPatternConfig::Parabolic {
            beamwidth_3db_deg,
            floor_db,
        } => RxPattern::Parabolic {
            beamwidth_3db_deg: *beamwidth_3db_deg,
            floor_db: *floor_db,
        },
        RxPatternConfig::Table { file } => {
            let text =
                std::fs::read_to_string(file).map_err(|e| Error::GainTable(format!("{}: {e}", file.display())))?;
            RxPattern::Table(GainTable::parse(&text)?)
        }
    };
    Ok(TerminalRadioProfile {
        terminal_class: class,
        peak_gain_dbi: cfg.peak_gain_dbi,
        pattern,
        antenna_temperature_k: cfg.antenna_temperature_k,
        noise_figure_db: cfg.noise_figure_db,
    })
}

/// What happened in one (scene, iteration) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationInfo {
    pub terminal: TerminalClass,
    pub scenario: crate::geometry::MobilityScenario,
    pub propagation: crate::channel::Propagation,
    pub iteration: u32,
    pub n_users: usize,
    pub n_frames: usize,
    /// Estimation-to-transmission delay applied, seconds.
    pub delta_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub cell: CellKey,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every per-user record; otherwise only summaries are produced.
    pub keep_records: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { keep_records: true }
    }
}

/// Result of a campaign. Records are sorted by cell, iteration, frame and
/// user; summaries and skipped cells are in cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub fingerprint: u64,
    pub records: Vec<KpiRecord>,
    pub summaries: Vec<CellSummary>,
    pub skipped: Vec<SkippedCell>,
    pub iterations: Vec<IterationInfo>,
}

impl CampaignOutput {
    pub fn records_for(&self, cell_id: u32) -> &[KpiRecord] {
        let lo = self.records.partition_point(|r| r.cell_id < cell_id);
        let hi = self.records.partition_point(|r| r.cell_id <= cell_id);
        &self.records[lo..hi]
    }

    pub fn summary(&self, cell_id: u32) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.cell.cell_id == cell_id)
    }
}

type PowerKey = u64;

fn power_key(p: f64) -> PowerKey {
    p.to_bits()
}

/// Beam-center precoding state of one terminal class at one power.
#[derive(Debug, Clone)]
struct BeamCenterState {
    alpha: RegularizationVector,
    /// SS-MMSE raw precoder per space.
    ss_mmse: BTreeMap<Space, std::result::Result<DMatrix<Complex64>, String>>,
}

/// Monte Carlo driver.
///
/// Cells that share terminal class, mobility scenario and propagation are
/// evaluated together: in every iteration they see the same drop, schedule,
/// delay and loss realisations, and differ only in space, power, scheme and
/// normalization.
#[derive(Debug)]
pub struct Simulator {
    config: CampaignConfig,
    model: SystemModel,
    beam_center: HashMap<(TerminalClass, PowerKey), std::result::Result<BeamCenterState, String>>,
    fingerprint: u64,
}

impl Simulator {
    pub fn new(config: CampaignConfig) -> Result<Self> {
        let model = SystemModel::new(&config)?;
        let mut beam_center = HashMap::new();
        for &terminal in &config.terminals {
            let h_hat = model
                .channel
                .beam_center_channel(&model.lattice, terminal, &model.sat)
                .and_then(|h| Ok((to_beam_space(&h, &model.beamforming)?, h)));
            for &p in &config.power_density_dbw_mhz {
                let state = match &h_hat {
                    Ok((beam, feed)) => {
                        beam_center_state(feed, beam, config.total_power_w(p)).map_err(|e| e.to_string())
                    }
                    Err(e) => Err(e.to_string()),
                };
                beam_center.insert((terminal, power_key(p)), state);
            }
        }
        let fingerprint = config.fingerprint();
        Ok(Simulator {
            config,
            model,
            beam_center,
            fingerprint,
        })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Records of every listed cell in one iteration, sorted by cell, frame
    /// and user.
    pub fn run_iteration(&self, cells: &[CellKey], iteration: u32) -> Result<Vec<KpiRecord>> {
        let mut records = Vec::new();
        for (_, group) in group_by_scene(cells) {
            let out = self.run_scene_iteration(&group, iteration, true)?;
            for (cell, result) in group.iter().zip(out.cells) {
                match result {
                    Ok(r) => records.extend(r.records),
                    Err(reason) => {
                        return Err(Error::invalid(format!("cell {}: {reason}", cell.label())));
                    }
                }
            }
        }
        records.sort_by_key(KpiRecord::sort_key);
        Ok(records)
    }

    /// Every configured cell over every iteration.
    pub fn run(&self) -> CampaignOutput {
        self.run_campaign(&self.config.cells(), RunOptions::default())
    }

    /// Runs `cells` over all configured iterations. Work is spread over the
    /// current rayon pool; output does not depend on the number of threads.
    /// Cells that fail in any iteration are reported in `skipped`.
    pub fn run_campaign(&self, cells: &[CellKey], options: RunOptions) -> CampaignOutput {
        let groups = group_by_scene(cells);
        let work: Vec<(usize, u32)> = (0..groups.len())
            .flat_map(|g| (0..self.config.iterations).map(move |i| (g, i)))
            .collect();
        let results: Vec<Result<SceneIterationOutput>> = work
            .par_iter()
            .map(|&(g, i)| self.run_scene_iteration(&groups[g].1, i, options.keep_records))
            .collect();

        let mut per_cell: BTreeMap<u32, (CellKey, Accumulator, Vec<KpiRecord>, Option<String>)> = cells
            .iter()
            .map(|c| (c.cell_id, (*c, Accumulator::default(), Vec::new(), None)))
            .collect();
        let mut iterations = Vec::new();
        for (&(g, iteration), result) in work.iter().zip(results) {
            let group = &groups[g].1;
            match result {
                Ok(out) => {
                    iterations.push(out.info);
                    for (cell, r) in group.iter().zip(out.cells) {
                        let entry = per_cell.get_mut(&cell.cell_id).expect("cell registered");
                        if entry.3.is_some() {
                            continue;
                        }
                        match r {
                            Ok(r) => {
                                entry.1.merge(&r.acc);
                                entry.2.extend(r.records);
                            }
                            Err(reason) => entry.3 = Some(format!("iteration {iteration}: {reason}")),
                        }
                    }
                }
                Err(e) => {
                    for cell in group {
                        let entry = per_cell.get_mut(&cell.cell_id).expect("cell registered");
                        if entry.3.is_none() {
                            entry.3 = Some(format!("iteration {iteration}: {e}"));
                        }
                    }
                }
            }
        }

        let mut output = CampaignOutput {
            fingerprint: self.fingerprint,
            records: Vec::new(),
            summaries: Vec::new(),
            skipped: Vec::new(),
            iterations,
        };
        for (_, (cell, acc, records, failure)) in per_cell {
            match failure {
                Some(reason) => output.skipped.push(SkippedCell { cell, reason }),
                None if acc.samples == 0 => output.skipped.push(SkippedCell {
                    cell,
                    reason: "no samples".into(),
                }),
                None => {
                    output.summaries.push(CellSummary::from_accumulator(cell, &acc));
                    output.records.extend(records);
                }
            }
        }
        output.records.sort_by_key(KpiRecord::sort_key);
        output
    }

    fn run_scene_iteration(
        &self,
        cells: &[CellKey],
        iteration: u32,
        keep_records: bool,
    ) -> Result<SceneIterationOutput> {
        let first = cells.first().ok_or_else(|| Error::invalid("empty cell group"))?;
        let scene_key = first.scene();
        let cfg = &self.config;
        let model = &self.model;
        let seed = iteration_seed(cfg.seed, iteration);

        let template = UserTemplate {
            terminal_class: scene_key.terminal,
            scenario: scene_key.scenario,
            noise_temperature: model.channel.profile(scene_key.terminal).noise_temperature(),
            heading_seed: seed,
        };
        let users = drop_users(
            &model.footprint,
            cfg.user_density_per_km2,
            &template,
            &mut substream(seed, Purpose::Drop, 0),
        )?;
        let groups = users_by_beam(&users, &model.lattice, &model.sat)?;
        let frames = schedule_frames(&groups, &mut substream(seed, Purpose::Schedule, 0))?;
        let losses = model.channel.draw_scene_losses(
            &users,
            &model.sat,
            scene_key.propagation,
            seed,
            Purpose::LossEstimation,
        )?;
        let scene0 = SceneSnapshot::new(model.sat.clone(), users, losses)?;
        let delta_t = match cfg.delay.delta_t_override_s {
            Some(dt) => dt,
            None => {
                compute_delay_budget(
                    &model.sat,
                    &scene0.users,
                    &model.gateway,
                    cfg.delay.processing_s,
                    cfg.delay.additional_s,
                    cfg.delay.architecture,
                    model.channel.min_elevation_rad(),
                )?
                .delta_t
            }
        };
        let scene1 = model
            .channel
            .evolve_scene(&scene0, delta_t, scene_key.propagation, seed)?;

        let needs_estimate = cells.iter().any(|c| c.scheme == Scheme::Mmse);
        let beams: Vec<usize> = (0..model.lattice.n_beams()).collect();
        let mut per_cell: Vec<std::result::Result<CellIterationOutput, String>> = cells
            .iter()
            .map(|_| {
                Ok(CellIterationOutput {
                    acc: Accumulator::default(),
                    records: Vec::new(),
                })
            })
            .collect();

        for frame in &frames {
            let scheduled = &frame.user_per_beam;
            let h1_feed = model.channel.scheduled_channel(&scene1, scheduled)?;
            let h0_feed = if needs_estimate {
                Some(model.channel.scheduled_channel(&scene0, scheduled)?)
            } else {
                None
            };
            let mut spaces: BTreeMap<Space, FrameSpace> = BTreeMap::new();
            let mut user_order: Vec<usize> = (0..scheduled.len()).collect();
            user_order.sort_by_key(|&k| scheduled[k]);

            for (cell, slot) in cells.iter().zip(per_cell.iter_mut()) {
                let Ok(out) = slot else { continue };
                let space = match spaces.entry(cell.space) {
                    std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::btree_map::Entry::Vacant(e) => e.insert(FrameSpace::new(
                        cell.space,
                        &h1_feed,
                        h0_feed.as_ref(),
                        &model.beamforming,
                    )?),
                };
                let p = cfg.total_power_w(cell.power_dbw_mhz);
                let metrics = match self.cell_metrics(cell, space, &beams, p) {
                    Ok(m) => m,
                    Err(e) => {
                        *slot = Err(format!("frame {}: {e}", frame.frame_index));
                        continue;
                    }
                };
                for &k in &user_order {
                    let m = metrics[k];
                    let se = spectral_efficiency(m.sinr);
                    out.acc.push(m.sinr, m.sir, se);
                    if keep_records {
                        out.records.push(KpiRecord {
                            fingerprint: self.fingerprint,
                            cell_id: cell.cell_id,
                            space: cell.space,
                            scheme: cell.scheme,
                            normalization: cell.normalization,
                            iteration,
                            frame: frame.frame_index as u32,
                            user_id: scheduled[k] as u32,
                            sinr: m.sinr,
                            sir: m.sir,
                            se,
                        });
                    }
                }
            }
        }

        Ok(SceneIterationOutput {
            info: IterationInfo {
                terminal: scene_key.terminal,
                scenario: scene_key.scenario,
                propagation: scene_key.propagation,
                iteration,
                n_users: scene0.users.len(),
                n_frames: frames.len(),
                delta_t,
            },
            cells: per_cell,
        })
    }

    fn cell_metrics(
        &self,
        cell: &CellKey,
        space: &mut FrameSpace,
        beams: &[usize],
        total_power: f64,
    ) -> Result<Vec<super::metrics::LinkMetrics>> {
        let pk = power_key(cell.power_dbw_mhz);
        let raw_key = match cell.scheme {
            Scheme::Mb | Scheme::None => RawKey::Beamforming,
            Scheme::SsMmse => RawKey::SsMmse(pk),
            Scheme::Mmse => RawKey::Mmse(pk),
        };
        if !space.gains.contains_key(&raw_key) {
            let w = match raw_key {
                RawKey::Beamforming => non_precoded(space.space, &self.model.beamforming, beams)?.entries,
                RawKey::SsMmse(_) => match &self.beam_center_state(cell)?.ss_mmse[&space.space] {
                    Ok(w) => w.clone(),
                    Err(e) => return Err(Error::invalid(e.clone())),
                },
                RawKey::Mmse(_) => {
                    let alpha = &self.beam_center_state(cell)?.alpha;
                    let h0 = space
                        .h0
                        .as_ref()
                        .ok_or_else(|| Error::invalid("missing estimated channel"))?;
                    mmse_precoder(h0, alpha)?.entries
                }
            };
            space.gains.insert(raw_key, RawGains::new(&space.h1.entries, w)?);
        }
        let gains = space.gains.get_mut(&raw_key).expect("inserted above");
        Ok(gains.metrics(&space.h1.entries, cell.normalization, total_power))
    }

    fn beam_center_state(&self, cell: &CellKey) -> Result<&BeamCenterState> {
        match self.beam_center.get(&(cell.terminal, power_key(cell.power_dbw_mhz))) {
            Some(Ok(s)) => Ok(s),
            Some(Err(e)) => Err(Error::invalid(format!("beam-center precoder: {e}"))),
            None => Err(Error::invalid(format!(
                "cell {} is outside the configured terminal/power axes",
                cell.label()
            ))),
        }
    }
}

fn beam_center_state(h_feed: &ChannelMatrix, h_beam: &ChannelMatrix, total_power: f64) -> Result<BeamCenterState> {
    let alpha = regularization_from_snr(&expected_snr(h_feed.n_users(), total_power))?;
    let mut ss_mmse = BTreeMap::new();
    for (space, h) in [(Space::Feed, h_feed), (Space::Beam, h_beam)] {
        ss_mmse.insert(
            space,
            ss_mmse_precoder(h, &alpha)
                .map(|w| w.entries)
                .map_err(|e| e.to_string()),
        );
    }
    Ok(BeamCenterState { alpha, ss_mmse })
}

fn group_by_scene(cells: &[CellKey]) -> Vec<(SceneKey, Vec<CellKey>)> {
    let mut groups: BTreeMap<SceneKey, Vec<CellKey>> = BTreeMap::new();
    for c in cells {
        groups.entry(c.scene()).or_default().push(*c);
    }
    groups.into_iter().collect()
}

struct SceneIterationOutput {
    info: IterationInfo,
    /// Aligned with the cells of the group.
    cells: Vec<std::result::Result<CellIterationOutput, String>>,
}

struct CellIterationOutput {
    acc: Accumulator,
    records: Vec<KpiRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RawKey {
    Beamforming,
    SsMmse(PowerKey),
    Mmse(PowerKey),
}

/// Channels of the scheduled users in one space, plus gains of every raw
/// precoder already evaluated in this frame.
struct FrameSpace {
    space: Space,
    h1: ChannelMatrix,
    h0: Option<ChannelMatrix>,
    gains: HashMap<RawKey, RawGains>,
}

impl FrameSpace {
    fn new(
        space: Space,
        h1_feed: &ChannelMatrix,
        h0_feed: Option<&ChannelMatrix>,
        b: &BeamformingMatrix,
    ) -> Result<Self> {
        let (h1, h0) = match space {
            Space::Feed => (h1_feed.clone(), h0_feed.cloned()),
            Space::Beam => (
                to_beam_space(h1_feed, b)?,
                h0_feed.map(|h| to_beam_space(h, b)).transpose()?,
            ),
        };
        Ok(FrameSpace {
            space,
            h1,
            h0,
            gains: HashMap::new(),
        })
    }
}

/// `H₁ W` for a raw precoder. Every normalization is a positive rescaling of
/// either `W` (SPC, MPC) or of `diag(1/‖w_j,:‖) W` (PAC), so the normalized
/// metrics follow from these two products and a power factor.
struct RawGains {
    w: DMatrix<Complex64>,
    g: DMatrix<Complex64>,
    g_pac: Option<DMatrix<Complex64>>,
    frobenius_sq: f64,
    max_row_sq: f64,
}

impl RawGains {
    fn new(h1: &DMatrix<Complex64>, w: DMatrix<Complex64>) -> Result<Self> {
        let frobenius_sq = w.norm_squared();
        if !(frobenius_sq > 0.0) || !frobenius_sq.is_finite() {
            return Err(Error::invalid("cannot normalize an all-zero or non-finite precoder"));
        }
        let max_row_sq = w.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        Ok(RawGains {
            g: h1 * &w,
            w,
            g_pac: None,
            frobenius_sq,
            max_row_sq,
        })
    }

    fn metrics(
        &mut self,
        h1: &DMatrix<Complex64>,
        mode: Normalization,
        total_power: f64,
    ) -> Vec<super::metrics::LinkMetrics> {
        let n = self.w.nrows() as f64;
        match mode {
            Normalization::Spc => metrics_from_gain(&self.g, total_power / self.frobenius_sq),
            Normalization::Mpc => metrics_from_gain(&self.g, total_power / (n * self.max_row_sq)),
            Normalization::Pac => {
                let w = &self.w;
                let g_pac = self.g_pac.get_or_insert_with(|| {
                    let mut unit = w.clone();
                    for mut row in unit.row_iter_mut() {
                        let norm = row.norm();
                        let s = if norm > 0.0 { 1.0 / norm } else { 0.0 };
                        row *= Complex64::new(s, 0.0);
                    }
                    h1 * unit
                });
                metrics_from_gain(g_pac, total_power / n)
            }
            Normalization::Raw => metrics_from_gain(&self.g, 1.0),
        }
    }
}
