//! Physical constants shared by every module.

/// Spherical Earth radius, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Earth gravitational parameter, m³/s².
pub const EARTH_MU: f64 = 3.986_004_418e14;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Reference temperature used to turn a noise figure into a noise temperature.
pub const REFERENCE_TEMPERATURE_K: f64 = 290.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}
