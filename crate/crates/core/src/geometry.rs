//! Orbit, terminal and beam-lattice geometry.
//!
//! All positions are Earth-centred Cartesian coordinates in meters on a
//! spherical, non-rotating Earth of radius [`EARTH_RADIUS_M`]. The satellite
//! follows a circular Keplerian orbit. Its antenna frame has `z` pointing to
//! nadir, `x` along-track and `y = z × x`; uv-coordinates are the direction
//! cosines of a target along `x` and `y`.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::constants::{EARTH_MU, EARTH_RADIUS_M, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Public-safety terminal speed, 250 km/h in m/s.
pub const PUBLIC_SAFETY_SPEED_MPS: f64 = 250.0 / 3.6;

/// A point in the satellite antenna's direction-cosine plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Uv {
    pub u: f64,
    pub v: f64,
}

impl Uv {
    pub const BORESIGHT: Uv = Uv { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Uv { u, v }
    }

    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn distance(self, other: Uv) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    /// `cos θ` of the direction, i.e. the component along boresight.
    pub fn boresight_component(self) -> f64 {
        (1.0 - self.u * self.u - self.v * self.v).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TerminalClass {
    #[serde(rename = "vsat", alias = "VSAT")]
    Vsat,
    #[serde(rename = "handheld", alias = "hh")]
    Handheld,
}

impl TerminalClass {
    pub const ALL: [TerminalClass; 2] = [TerminalClass::Vsat, TerminalClass::Handheld];

    pub fn as_str(self) -> &'static str {
        match self {
            TerminalClass::Vsat => "vsat",
            TerminalClass::Handheld => "handheld",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MobilityScenario {
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "public-safety", alias = "public_safety")]
    PublicSafety,
}

impl MobilityScenario {
    pub const ALL: [MobilityScenario; 2] = [MobilityScenario::Fixed, MobilityScenario::PublicSafety];

    pub fn as_str(self) -> &'static str {
        match self {
            MobilityScenario::Fixed => "fixed",
            MobilityScenario::PublicSafety => "public-safety",
        }
    }

    pub fn speed_mps(self) -> f64 {
        match self {
            MobilityScenario::Fixed => 0.0,
            MobilityScenario::PublicSafety => PUBLIC_SAFETY_SPEED_MPS,
        }
    }
}

/// Unit vectors of the satellite antenna frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaFrame {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
}

impl AntennaFrame {
    pub fn direction(&self, uv: Uv) -> Vector3<f64> {
        self.x * uv.u + self.y * uv.v + self.z * uv.boresight_component()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState {
    pub epoch: f64,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub altitude: f64,
    /// Nadir-pointing unit vector.
    pub boresight: Vector3<f64>,
}

impl SatelliteState {
    /// Circular orbit starting over the equator at zero longitude, moving
    /// north-east with the given inclination.
    pub fn circular(altitude: f64, inclination_rad: f64) -> Result<Self> {
        if !(altitude > 0.0) {
            return Err(Error::invalid(format!("altitude must be positive, got {altitude}")));
        }
        let a = EARTH_RADIUS_M + altitude;
        let speed = (EARTH_MU / a).sqrt();
        let position = Vector3::new(a, 0.0, 0.0);
        let velocity = Vector3::new(0.0, inclination_rad.cos(), inclination_rad.sin()) * speed;
        Ok(SatelliteState {
            epoch: 0.0,
            position,
            velocity,
            altitude,
            boresight: -position.normalize(),
        })
    }

    pub fn semi_major_axis(&self) -> f64 {
        EARTH_RADIUS_M + self.altitude
    }

    /// Orbital angular rate ω = sqrt(μ/a³).
    pub fn angular_rate(&self) -> f64 {
        (EARTH_MU / self.semi_major_axis().powi(3)).sqrt()
    }

    pub fn period(&self) -> f64 {
        TAU / self.angular_rate()
    }

    pub fn speed(&self) -> f64 {
        (EARTH_MU / self.semi_major_axis()).sqrt()
    }

    pub fn sub_satellite_point(&self) -> Vector3<f64> {
        self.position.normalize() * EARTH_RADIUS_M
    }

    pub fn antenna_frame(&self) -> AntennaFrame {
        let z = self.boresight;
        let along = self.velocity - z * self.velocity.dot(&z);
        let x = along.normalize();
        let y = z.cross(&x);
        AntennaFrame { x, y, z }
    }
}

/// Advances a circular orbit by `dt` seconds.
pub fn propagate_satellite(state: &SatelliteState, dt: f64) -> Result<SatelliteState> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!(
            "propagation step must be non-negative, got {dt}"
        )));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let a = state.semi_major_axis();
    let r_hat = state.position.normalize();
    let t_hat = state.velocity.normalize();
    let angle = state.angular_rate() * dt;
    let (s, c) = angle.sin_cos();
    let speed = state.speed();
    let position = (r_hat * c + t_hat * s) * a;
    let velocity = (t_hat * c - r_hat * s) * speed;
    Ok(SatelliteState {
        epoch: state.epoch + dt,
        position,
        velocity,
        altitude: state.altitude,
        boresight: -position.normalize(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserTerminal {
    pub id: usize,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub terminal_class: TerminalClass,
    pub scenario: MobilityScenario,
    pub noise_temperature: f64,
    pub rx_boresight: Vector3<f64>,
}

impl UserTerminal {
    /// Fixed terminal at `position` with its antenna pointed at `sat`
    /// (VSAT) or at the local zenith (handheld).
    pub fn fixed(
        id: usize,
        position: Vector3<f64>,
        terminal_class: TerminalClass,
        noise_temperature: f64,
        sat: &SatelliteState,
    ) -> Self {
        let rx_boresight = pointing(terminal_class, &position, sat);
        UserTerminal {
            id,
            position,
            velocity: Vector3::zeros(),
            terminal_class,
            scenario: MobilityScenario::Fixed,
            noise_temperature,
            rx_boresight,
        }
    }

    /// Off-boresight angle of the satellite as seen by the receive antenna.
    pub fn off_boresight(&self, sat: &SatelliteState) -> f64 {
        let to_sat = (sat.position - self.position).normalize();
        to_sat.dot(&self.rx_boresight).clamp(-1.0, 1.0).acos()
    }

    /// Re-points a tracking (VSAT) antenna at `sat`.
    pub fn repoint(&mut self, sat: &SatelliteState) {
        self.rx_boresight = pointing(self.terminal_class, &self.position, sat);
    }
}

fn pointing(class: TerminalClass, position: &Vector3<f64>, sat: &SatelliteState) -> Vector3<f64> {
    match class {
        TerminalClass::Vsat => (sat.position - position).normalize(),
        TerminalClass::Handheld => position.normalize(),
    }
}

/// East and north unit vectors of the local tangent plane at `p`.
pub fn local_tangent(p: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let up = p.normalize();
    let pole = Vector3::z();
    let mut east = pole.cross(&up);
    if east.norm() < 1e-12 {
        east = Vector3::y().cross(&up);
    }
    let east = east.normalize();
    let north = up.cross(&east);
    (east, north)
}

/// Rodrigues rotation of `v` about unit `axis` by `angle`.
fn rotate(v: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// Moves a terminal along its (constant) heading for `dt` seconds, staying on
/// the Earth surface. Fixed terminals are returned unchanged.
pub fn move_user(user: &UserTerminal, dt: f64) -> Result<UserTerminal> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!("mobility step must be non-negative, got {dt}")));
    }
    let speed = user.velocity.norm();
    if speed == 0.0 || dt == 0.0 {
        return Ok(user.clone());
    }
    let r = user.position.norm();
    let axis = user.position.cross(&user.velocity).normalize();
    let angle = speed * dt / r;
    let mut moved = user.clone();
    moved.position = rotate(&user.position, &axis, angle);
    moved.velocity = rotate(&user.velocity, &axis, angle);
    moved.rx_boresight = rotate(&user.rx_boresight, &axis, angle);
    Ok(moved)
}

/// Elevation angle (radians) of `sat_position` seen from `ground`.
pub fn elevation(ground: &Vector3<f64>, sat_position: &Vector3<f64>) -> f64 {
    let los = sat_position - ground;
    let up = ground.normalize();
    (los.dot(&up) / los.norm()).clamp(-1.0, 1.0).asin()
}

/// Distance between terminal and satellite. Fails when the satellite is
/// below `min_elevation` (radians) for the terminal.
pub fn slant_range(user: &UserTerminal, sat: &SatelliteState, min_elevation: f64) -> Result<f64> {
    let el = elevation(&user.position, &sat.position);
    if el < min_elevation {
        return Err(Error::BelowHorizon {
            elevation_deg: el.to_degrees(),
            min_deg: min_elevation.to_degrees(),
        });
    }
    Ok((user.position - sat.position).norm())
}

/// Slant range for a given elevation on a spherical Earth.
pub fn slant_range_at_elevation(altitude: f64, elevation: f64) -> f64 {
    let r = EARTH_RADIUS_M;
    let s = elevation.sin();
    ((r * s).powi(2) + 2.0 * r * altitude + altitude * altitude).sqrt() - r * s
}

/// Direction cosines of `target` in the satellite antenna frame.
pub fn uv_coordinates(target: &Vector3<f64>, sat: &SatelliteState) -> Result<Uv> {
    let frame = sat.antenna_frame();
    let los = target - sat.position;
    let dist = los.norm();
    if dist == 0.0 {
        return Err(Error::DegenerateGeometry("target coincides with the satellite".into()));
    }
    let d = los / dist;
    if d.dot(&frame.z) <= 0.0 {
        return Err(Error::BehindArray);
    }
    Ok(Uv::new(d.dot(&frame.x), d.dot(&frame.y)))
}

/// Ground point seen by the satellite in direction `uv` (inverse of
/// [`uv_coordinates`] on the Earth surface).
pub fn uv_to_ground(uv: Uv, sat: &SatelliteState) -> Result<Vector3<f64>> {
    if uv.norm() >= 1.0 {
        return Err(Error::NoGroundIntersection);
    }
    let d = sat.antenna_frame().direction(uv);
    let p = sat.position;
    // |p + t d|² = R²
    let b = p.dot(&d);
    let c = p.norm_squared() - EARTH_RADIUS_M * EARTH_RADIUS_M;
    let disc = b * b - c;
    if disc < 0.0 {
        return Err(Error::NoGroundIntersection);
    }
    let t = -b - disc.sqrt();
    if t <= 0.0 {
        return Err(Error::NoGroundIntersection);
    }
    Ok(p + d * t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamLattice {
    pub centers: Vec<Uv>,
    pub spacing: f64,
    pub n_rings: usize,
}

impl BeamLattice {
    pub fn n_beams(&self) -> usize {
        self.centers.len()
    }

    /// Closest beam center; ties go to the lowest index.
    pub fn nearest_beam(&self, uv: Uv) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = (uv.u - c.u).powi(2) + (uv.v - c.v).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Hexagonal lattice: one center plus rings of 6, 12, ... beams, ordered ring
/// by ring and counter-clockwise within a ring starting on the +u axis.
pub fn build_beam_lattice(n_rings: usize, spacing: f64) -> Result<BeamLattice> {
    if !(spacing > 0.0) {
        return Err(Error::invalid(format!("beam spacing must be positive, got {spacing}")));
    }
    let dirs: [(f64, f64); 6] = std::array::from_fn(|k| {
        let a = k as f64 * PI / 3.0;
        (a.cos(), a.sin())
    });
    let mut centers = vec![Uv::BORESIGHT];
    for ring in 1..=n_rings {
        let r = ring as f64;
        for side in 0..6 {
            let (cx, cy) = dirs[side];
            let (sx, sy) = dirs[(side + 2) % 6];
            for step in 0..ring {
                let s = step as f64;
                centers.push(Uv::new(spacing * (r * cx + s * sx), spacing * (r * cy + s * sy)));
            }
        }
    }
    if let Some(c) = centers.iter().find(|c| c.norm() > 1.0) {
        return Err(Error::invalid(format!(
            "beam center ({:.4}, {:.4}) is outside visible uv-space",
            c.u, c.v
        )));
    }
    Ok(BeamLattice {
        centers,
        spacing,
        n_rings,
    })
}

/// Spherical cap on the Earth surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cap {
    pub center: Vector3<f64>,
    pub radius_rad: f64,
    cos_radius: f64,
}

impl Cap {
    pub fn new(center: Vector3<f64>, radius_rad: f64) -> Self {
        Cap {
            center: center.normalize(),
            radius_rad,
            cos_radius: radius_rad.cos(),
        }
    }

    pub fn contains(&self, unit: &Vector3<f64>) -> bool {
        self.center.dot(unit) >= self.cos_radius
    }

    pub fn area_m2(&self) -> f64 {
        TAU * EARTH_RADIUS_M * EARTH_RADIUS_M * (1.0 - self.cos_radius)
    }

    /// Uniform point in the cap, returned as a unit vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        let mu = 1.0 - rng.random::<f64>() * (1.0 - self.cos_radius);
        let phi = TAU * rng.random::<f64>();
        self.point(mu, phi)
    }

    fn point(&self, mu: f64, phi: f64) -> Vector3<f64> {
        let (e1, e2) = local_tangent(&self.center);
        let s = (1.0 - mu * mu).max(0.0).sqrt();
        (self.center * mu + (e1 * phi.cos() + e2 * phi.sin()) * s).normalize()
    }
}

/// Ground coverage: union of caps around the beam-center ground projections.
#[derive(Debug, Clone)]
pub struct Footprint {
    pub caps: Vec<Cap>,
    pub bounding: Cap,
    pub lattice: BeamLattice,
    pub sat: SatelliteState,
}

impl Footprint {
    /// Each cap radius is `overlap` times half the ground distance from the
    /// beam center to its nearest lattice neighbour position.
    pub fn new(lattice: &BeamLattice, sat: &SatelliteState, overlap: f64) -> Result<Self> {
        if lattice.centers.is_empty() {
            return Err(Error::invalid("empty beam lattice"));
        }
        if !(overlap > 0.0) {
            return Err(Error::invalid(format!(
                "overlap factor must be positive, got {overlap}"
            )));
        }
        let nadir = sat.sub_satellite_point().normalize();
        let mut caps = Vec::with_capacity(lattice.n_beams());
        let mut bounding_radius: f64 = 0.0;
        for c in &lattice.centers {
            let center = uv_to_ground(*c, sat)?.normalize();
            let mut nearest = f64::INFINITY;
            for k in 0..6 {
                let a = k as f64 * PI / 3.0;
                let n = Uv::new(c.u + lattice.spacing * a.cos(), c.v + lattice.spacing * a.sin());
                if let Ok(p) = uv_to_ground(n, sat) {
                    nearest = nearest.min(center.dot(&p.normalize()).clamp(-1.0, 1.0).acos());
                }
            }
            if !nearest.is_finite() || nearest <= 0.0 {
                return Err(Error::DegenerateGeometry("zero-area footprint".into()));
            }
            let radius = 0.5 * nearest * overlap;
            let from_nadir = nadir.dot(&center).clamp(-1.0, 1.0).acos();
            bounding_radius = bounding_radius.max(from_nadir + radius);
            caps.push(Cap::new(center, radius));
        }
        Ok(Footprint {
            caps,
            bounding: Cap::new(nadir, bounding_radius.min(PI)),
            lattice: lattice.clone(),
            sat: sat.clone(),
        })
    }

    pub fn contains(&self, unit: &Vector3<f64>) -> bool {
        self.caps.iter().any(|c| c.contains(unit))
    }

    /// Union area by midpoint quadrature on an equal-area grid of the
    /// bounding cap with `resolution`² cells.
    pub fn area_m2(&self, resolution: usize) -> f64 {
        let n = resolution.max(1);
        let cos_b = self.bounding.radius_rad.cos();
        let mut inside = 0usize;
        for i in 0..n {
            let mu = 1.0 - (i as f64 + 0.5) / n as f64 * (1.0 - cos_b);
            for j in 0..n {
                let phi = TAU * (j as f64 + 0.5) / n as f64;
                if self.contains(&self.bounding.point(mu, phi)) {
                    inside += 1;
                }
            }
        }
        self.bounding.area_m2() * inside as f64 / (n * n) as f64
    }
}

/// Attributes shared by every terminal of a drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTemplate {
    pub terminal_class: TerminalClass,
    pub scenario: MobilityScenario,
    pub noise_temperature: f64,
    /// Seed of the per-user heading substreams (public safety only).
    pub heading_seed: u64,
}

/// Uniform Poisson drop over the footprint. Beams left without users are
/// re-seeded with one user drawn uniformly inside the beam's own cap and
/// associated to that beam.
pub fn drop_users<R: Rng + ?Sized>(
    footprint: &Footprint,
    density_per_km2: f64,
    template: &UserTemplate,
    rng: &mut R,
) -> Result<Vec<UserTerminal>> {
    if !(density_per_km2 > 0.0) {
        return Err(Error::invalid(format!(
            "user density must be positive, got {density_per_km2}"
        )));
    }
    let mean = density_per_km2 * footprint.bounding.area_m2() / 1e6;
    if !(mean > 0.0) {
        return Err(Error::DegenerateGeometry("zero-area footprint".into()));
    }
    let count = Poisson::new(mean)
        .map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?
        .sample(rng) as usize;

    let sat = &footprint.sat;
    let mut users = Vec::new();
    let mut occupied = vec![false; footprint.lattice.n_beams()];
    for _ in 0..count {
        let unit = footprint.bounding.sample(rng);
        if !footprint.contains(&unit) {
            continue;
        }
        let position = unit * EARTH_RADIUS_M;
        let beam = footprint.lattice.nearest_beam(uv_coordinates(&position, sat)?);
        occupied[beam] = true;
        users.push(make_user(users.len(), position, template, sat));
    }

    for (beam, _) in occupied.iter().enumerate().filter(|(_, o)| !**o) {
        let cap = &footprint.caps[beam];
        let mut placed = false;
        for _ in 0..100_000 {
            let position = cap.sample(rng) * EARTH_RADIUS_M;
            if footprint.lattice.nearest_beam(uv_coordinates(&position, sat)?) == beam {
                users.push(make_user(users.len(), position, template, sat));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::EmptyBeam(beam));
        }
    }
    Ok(users)
}

fn make_user(id: usize, position: Vector3<f64>, template: &UserTemplate, sat: &SatelliteState) -> UserTerminal {
    let mut user = UserTerminal::fixed(id, position, template.terminal_class, template.noise_temperature, sat);
    user.scenario = template.scenario;
    let speed = template.scenario.speed_mps();
    if speed > 0.0 {
        let heading = TAU * rng::substream(template.heading_seed, Purpose::Heading, id as u64).random::<f64>();
        let (east, north) = local_tangent(&position);
        user.velocity = (east * heading.cos() + north * heading.sin()) * speed;
    }
    user
}

/// User indices grouped by nearest beam center at the satellite state `sat`.
pub fn users_by_beam(users: &[UserTerminal], lattice: &BeamLattice, sat: &SatelliteState) -> Result<Vec<Vec<usize>>> {
    let mut groups = vec![Vec::new(); lattice.n_beams()];
    for (i, u) in users.iter().enumerate() {
        groups[lattice.nearest_beam(uv_coordinates(&u.position, sat)?)].push(i);
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ArchitectureMode {
    /// Scheduling and precoding computed on ground.
    #[default]
    #[serde(rename = "cpc", alias = "CPC")]
    Centralised,
    /// Scheduling and precoding computed on board.
    #[serde(rename = "dpc", alias = "DPC")]
    Distributed,
}

/// Latency between channel estimation (t₀) and precoded transmission (t₁).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBudget {
    pub t_ut_max: f64,
    pub t_feeder: f64,
    pub t_p: f64,
    pub t_ad: f64,
    pub delta_t: f64,
    pub mode: ArchitectureMode,
}

impl DelayBudget {
    pub fn new(t_ut_max: f64, t_feeder: f64, t_p: f64, t_ad: f64, mode: ArchitectureMode) -> Result<Self> {
        for (name, v) in [
            ("t_ut_max", t_ut_max),
            ("t_feeder", t_feeder),
            ("t_p", t_p),
            ("t_ad", t_ad),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(DelayBudget {
            t_ut_max,
            t_feeder,
            t_p,
            t_ad,
            delta_t: Self::compose(t_ut_max, t_feeder, t_p, t_ad),
            mode,
        })
    }

    pub fn compose(t_ut_max: f64, t_feeder: f64, t_p: f64, t_ad: f64) -> f64 {
        t_ut_max + 2.0 * t_feeder + t_p + t_ad
    }
}

/// Both architectures need the full user-to-gateway loop to get the symbols
/// to precode, so the composition is the same; `mode` is kept for provenance.
pub fn compute_delay_budget(
    sat: &SatelliteState,
    users: &[UserTerminal],
    gateway: &Vector3<f64>,
    t_p: f64,
    t_ad: f64,
    mode: ArchitectureMode,
    min_elevation: f64,
) -> Result<DelayBudget> {
    if users.is_empty() {
        return Err(Error::invalid("delay budget needs at least one user"));
    }
    let mut d_max: f64 = 0.0;
    for u in users {
        d_max = d_max.max(slant_range(u, sat, min_elevation)?);
    }
    let gw_el = elevation(gateway, &sat.position);
    if gw_el < min_elevation {
        return Err(Error::BelowHorizon {
            elevation_deg: gw_el.to_degrees(),
            min_deg: min_elevation.to_degrees(),
        });
    }
    let feeder = (gateway - sat.position).norm();
    DelayBudget::new(d_max / SPEED_OF_LIGHT, feeder / SPEED_OF_LIGHT, t_p, t_ad, mode)
}
