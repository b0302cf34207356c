//! Precoders and power normalizations.
//!
//! A precoding matrix is `N × N_sch`: rows are antennas (feed space) or beam
//! ports (beam space), column `k` carries the symbol of scheduled user `k`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::antenna::BeamformingMatrix;
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg::solve_hpd;

pub use crate::channel::Space;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Multi-beam codebook: each user gets the steering vector of its beam.
    #[serde(rename = "mb", alias = "MB")]
    Mb,
    /// MMSE on channels approximated at the beam centers.
    #[serde(rename = "ss-mmse", alias = "ss_mmse", alias = "SS-MMSE")]
    SsMmse,
    /// MMSE on the channels estimated by the users.
    #[serde(rename = "mmse", alias = "MMSE")]
    Mmse,
    /// No user-matched precoding: beams transmit with uniform power.
    #[serde(rename = "none")]
    None,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Mb, Scheme::SsMmse, Scheme::Mmse, Scheme::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mb => "mb",
            Scheme::SsMmse => "ss-mmse",
            Scheme::Mmse => "mmse",
            Scheme::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Normalization {
    /// Sum power constraint.
    #[serde(rename = "spc", alias = "SPC")]
    Spc,
    /// Per-antenna constraint.
    #[serde(rename = "pac", alias = "PAC")]
    Pac,
    /// Maximum (per-antenna) power constraint with a common scale factor.
    #[serde(rename = "mpc", alias = "MPC")]
    Mpc,
    #[serde(skip)]
    Raw,
}

impl Normalization {
    pub const ALL: [Normalization; 3] = [Normalization::Spc, Normalization::Pac, Normalization::Mpc];

    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Spc => "spc",
            Normalization::Pac => "pac",
            Normalization::Mpc => "mpc",
            Normalization::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub entries: DMatrix<Complex64>,
    pub space: Space,
    pub scheme: Scheme,
    pub normalization: Normalization,
}

impl PrecodingMatrix {
    /// `tr(W Wᴴ)`, the total transmitted power.
    pub fn total_power(&self) -> f64 {
        self.entries.norm_squared()
    }

    /// Squared norm of every row (power per antenna or beam port).
    pub fn row_powers(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.norm_squared()).collect()
    }
}

/// Strictly positive MMSE regularization factors, one per scheduled user.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationVector(Vec<f64>);

impl RegularizationVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid(format!(
                "regularization factors must be positive and finite, got {a}"
            )));
        }
        Ok(RegularizationVector(alpha))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `α_k = 1 / snr_k`.
pub fn regularization_from_snr(expected_snr: &[f64]) -> Result<RegularizationVector> {
    if let Some(s) = expected_snr.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::invalid(format!("expected SNR must be positive, got {s}")));
    }
    RegularizationVector::new(expected_snr.iter().map(|s| 1.0 / s).collect())
}

/// Expected SNR of each scheduled user at its share `P_t / N_sch` of the
/// power. Channels are normalized to unit noise, so this is `P_t / N_sch`
/// for every user and `α = N_sch / P_t`, the classic optimal regularization.
pub fn expected_snr(n_scheduled: usize, total_power: f64) -> Vec<f64> {
    vec![total_power / n_scheduled as f64; n_scheduled]
}

fn check_schedule(schedule: &[usize], n_beams: usize) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::invalid("empty schedule"));
    }
    if let Some(b) = schedule.iter().find(|b| **b >= n_beams) {
        return Err(Error::invalid(format!("schedule references beam {b} of {n_beams}")));
    }
    Ok(())
}

/// Feed-space multi-beam precoder: column `k` is the beamforming vector of
/// `schedule[k]`.
pub fn mb_precoder(b: &BeamformingMatrix, schedule: &[usize]) -> Result<PrecodingMatrix> {
    check_schedule(schedule, b.n_beams())?;
    Ok(PrecodingMatrix {
        entries: b.entries.select_columns(schedule),
        space: Space::Feed,
        scheme: Scheme::Mb,
        normalization: Normalization::Raw,
    })
}

/// Beam-space multi-beam precoder: column `k` selects beam port
/// `schedule[k]`.
pub fn beam_selection_precoder(n_beams: usize, schedule: &[usize]) -> Result<PrecodingMatrix> {
    check_schedule(schedule, n_beams)?;
    let mut entries = DMatrix::zeros(n_beams, schedule.len());
    for (k, &beam) in schedule.iter().enumerate() {
        entries[(beam, k)] = Complex64::new(1.0, 0.0);
    }
    Ok(PrecodingMatrix {
        entries,
        space: Space::Beam,
        scheme: Scheme::Mb,
        normalization: Normalization::Raw,
    })
}

/// Non-precoded baseline: the multi-beam precoder of the given space,
/// tagged [`Scheme::None`]. All three normalizations give uniform beam power.
pub fn non_precoded(space: Space, b: &BeamformingMatrix, schedule: &[usize]) -> Result<PrecodingMatrix> {
    let mut w = match space {
        Space::Feed => mb_precoder(b, schedule)?,
        Space::Beam => beam_selection_precoder(b.n_beams(), schedule)?,
    };
    w.scheme = Scheme::None;
    Ok(w)
}

/// Regularized zero-forcing `W = Hᴴ (H Hᴴ + diag(α))⁻¹`.
///
/// Computed as `W = Xᴴ` with `X` the Cholesky solution of
/// `(H Hᴴ + diag(α)) X = H`, which is valid because the Gram matrix is
/// Hermitian.
pub fn mmse_precoder(h: &ChannelMatrix, alpha: &RegularizationVector) -> Result<PrecodingMatrix> {
    regularized_zf(h, alpha, Scheme::Mmse)
}

/// [`mmse_precoder`] applied to beam-center channels.
pub fn ss_mmse_precoder(h_hat: &ChannelMatrix, alpha: &RegularizationVector) -> Result<PrecodingMatrix> {
    regularized_zf(h_hat, alpha, Scheme::SsMmse)
}

fn regularized_zf(h: &ChannelMatrix, alpha: &RegularizationVector, scheme: Scheme) -> Result<PrecodingMatrix> {
    let k = h.n_users();
    if alpha.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} regularization factors for {} users",
            alpha.len(),
            k
        )));
    }
    let x = mmse_intermediate(&h.entries, alpha.as_slice())?;
    Ok(PrecodingMatrix {
        entries: x.adjoint(),
        space: h.space,
        scheme,
        normalization: Normalization::Raw,
    })
}

/// `X = (H Hᴴ + diag(α))⁻¹ H`.
pub fn mmse_intermediate(h: &DMatrix<Complex64>, alpha: &[f64]) -> Result<DMatrix<Complex64>> {
    let mut gram = h * h.adjoint();
    for (i, a) in alpha.iter().enumerate() {
        gram[(i, i)] += Complex64::new(*a, 0.0);
    }
    solve_hpd(&gram, h)
}

/// Scales a raw precoder to total power `P_t` under the given constraint.
///
/// - SPC: `√P_t W / ‖W‖_F`
/// - PAC: `√(P_t/N) diag(1/‖w_j,:‖) W`; all-zero rows stay zero
/// - MPC: `√P_t W / √(N max_j ‖w_j,:‖²)`
pub fn normalize(w: &PrecodingMatrix, mode: Normalization, total_power: f64) -> Result<PrecodingMatrix> {
    if w.normalization != Normalization::Raw {
        return Err(Error::invalid("only raw precoders can be normalized"));
    }
    if !(total_power > 0.0) {
        return Err(Error::invalid(format!(
            "total power must be positive, got {total_power}"
        )));
    }
    let frob2 = w.entries.norm_squared();
    if !(frob2 > 0.0) || !frob2.is_finite() {
        return Err(Error::invalid("cannot normalize an all-zero or non-finite precoder"));
    }
    let n = w.entries.nrows() as f64;
    let entries = match mode {
        Normalization::Spc => &w.entries * Complex64::new((total_power / frob2).sqrt(), 0.0),
        Normalization::Pac => {
            let target = (total_power / n).sqrt();
            let scale = DVector::from_iterator(
                w.entries.nrows(),
                w.entries.row_iter().map(|r| {
                    let norm = r.norm();
                    Complex64::new(if norm > 0.0 { target / norm } else { 0.0 }, 0.0)
                }),
            );
            let mut out = w.entries.clone();
            for (mut row, s) in out.row_iter_mut().zip(scale.iter()) {
                row *= *s;
            }
            out
        }
        Normalization::Mpc => {
            let max_row = w.entries.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
            &w.entries * Complex64::new((total_power / (n * max_row)).sqrt(), 0.0)
        }
        Normalization::Raw => return Err(Error::invalid("RAW is not a normalization mode")),
    };
    Ok(PrecodingMatrix {
        entries,
        space: w.space,
        scheme: w.scheme,
        normalization: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::{beamforming_matrix, ArrayGeometry};
    use crate::geometry::build_beam_lattice;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn channel(entries: DMatrix<Complex64>) -> ChannelMatrix {
        ChannelMatrix {
            entries,
            space: Space::Feed,
            epoch: 0.0,
            noise_normalized: true,
        }
    }

    fn bf() -> BeamformingMatrix {
        let a = ArrayGeometry::rectangular(16, 16, 0.075, 0.15).unwrap();
        beamforming_matrix(&build_beam_lattice(5, 0.1).unwrap(), &a).unwrap()
    }

    #[test]
    fn identity_schedule_reproduces_b() {
        let b = bf();
        let sched: Vec<usize> = (0..91).collect();
        let w = mb_precoder(&b, &sched).unwrap();
        assert_eq!(w.entries, b.entries);
        let perm: Vec<usize> = (0..91).rev().collect();
        let wp = mb_precoder(&b, &perm).unwrap();
        assert_eq!(wp.entries.column(0), b.entries.column(90));
        for col in wp.entries.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        assert!(mb_precoder(&b, &[91]).is_err());
    }

    #[test]
    fn mmse_hand_solved_two_by_two() {
        let h = channel(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        ));
        let w = mmse_precoder(&h, &RegularizationVector::new(vec![1.0, 1.0]).unwrap()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.4, 0.0)]);
        assert!((w.entries - expected).norm() < 1e-15);
    }

    #[test]
    fn mmse_identity_channel_small_alpha() {
        let h = channel(DMatrix::identity(3, 3));
        let w = mmse_precoder(&h, &RegularizationVector::new(vec![1e-10; 3]).unwrap()).unwrap();
        assert!((w.entries - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-9);
    }

    #[test]
    fn mmse_orthogonal_rows_zero_force() {
        // rows of a scaled DFT are orthogonal
        let n = 4;
        let h = channel(DMatrix::from_fn(n, n, |i, j| {
            Complex64::from_polar(1.0 + i as f64, -2.0 * std::f64::consts::PI * (i * j) as f64 / n as f64)
        }));
        let w = mmse_precoder(&h, &RegularizationVector::new(vec![1e-9; n]).unwrap()).unwrap();
        let hw = &h.entries * &w.entries;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!(hw[(i, j)].norm() < 1e-10 * hw[(i, i)].norm());
                }
            }
        }
    }

    #[test]
    fn mmse_satisfies_normal_equations() {
        let h = channel(DMatrix::from_fn(3, 5, |i, j| {
            c((i * 7 + j) as f64 % 3.0 - 1.0, (i + 2 * j) as f64 * 0.1)
        }));
        let alpha = [0.3, 0.7, 1.1];
        let x = mmse_intermediate(&h.entries, &alpha).unwrap();
        let mut gram = &h.entries * h.entries.adjoint();
        for i in 0..3 {
            gram[(i, i)] += c(alpha[i], 0.0);
        }
        assert!((&gram * &x - &h.entries).norm() < 1e-10 * h.entries.norm());
        let w = mmse_precoder(&h, &RegularizationVector::new(alpha.to_vec()).unwrap()).unwrap();
        assert_eq!(w.entries.shape(), (5, 3));
        assert_eq!(w.entries, x.adjoint());
    }

    #[test]
    fn ss_mmse_matches_mmse_for_same_channel() {
        let h = channel(DMatrix::from_fn(2, 4, |i, j| c(1.0 + i as f64, j as f64 * 0.3)));
        let a = RegularizationVector::new(vec![0.5, 0.5]).unwrap();
        let w1 = mmse_precoder(&h, &a).unwrap();
        let w2 = ss_mmse_precoder(&h, &a).unwrap();
        assert_eq!(w1.entries, w2.entries);
        assert_eq!(w2.scheme, Scheme::SsMmse);
        let mut hb = h.clone();
        hb.space = Space::Beam;
        assert_eq!(ss_mmse_precoder(&hb, &a).unwrap().space, Space::Beam);
        assert!(mmse_precoder(&h, &RegularizationVector::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn regularization_is_reciprocal_snr() {
        assert_eq!(regularization_from_snr(&[1.0]).unwrap().as_slice(), &[1.0]);
        assert_eq!(regularization_from_snr(&[2.0, 4.0]).unwrap().as_slice(), &[0.5, 0.25]);
        assert!(regularization_from_snr(&[1.0, 0.0]).is_err());
        assert!(regularization_from_snr(&[-1.0]).is_err());
        let h = channel(DMatrix::from_fn(2, 3, |i, j| c(1.0 + i as f64, j as f64)));
        let a1 = regularization_from_snr(&expected_snr(h.n_users(), 10.0)).unwrap();
        let a2 = regularization_from_snr(&expected_snr(h.n_users(), 20.0)).unwrap();
        for (x, y) in a1.as_slice().iter().zip(a2.as_slice()) {
            assert!((x / y - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_normalizations_agree() {
        let w = PrecodingMatrix {
            entries: DMatrix::identity(2, 2),
            space: Space::Beam,
            scheme: Scheme::Mmse,
            normalization: Normalization::Raw,
        };
        let expected = DMatrix::<Complex64>::identity(2, 2) * c(2f64.sqrt(), 0.0);
        for mode in Normalization::ALL {
            let n = normalize(&w, mode, 4.0).unwrap();
            assert!((n.entries - &expected).norm() < 1e-15, "{mode:?}");
            assert_eq!(n.normalization, mode);
        }
    }

    #[test]
    fn normalization_errors() {
        let zero = PrecodingMatrix {
            entries: DMatrix::zeros(2, 2),
            space: Space::Feed,
            scheme: Scheme::Mmse,
            normalization: Normalization::Raw,
        };
        assert!(normalize(&zero, Normalization::Spc, 1.0).is_err());
        let mut ok = zero.clone();
        ok.entries[(0, 0)] = c(1.0, 0.0);
        assert!(normalize(&ok, Normalization::Spc, 0.0).is_err());
        let done = normalize(&ok, Normalization::Spc, 1.0).unwrap();
        assert!(normalize(&done, Normalization::Mpc, 1.0).is_err());
    }

    #[test]
    fn mb_normalizations_coincide() {
        let b = bf();
        let sched: Vec<usize> = (0..91).collect();
        let w = mb_precoder(&b, &sched).unwrap();
        let spc = normalize(&w, Normalization::Spc, 30.0).unwrap();
        let pac = normalize(&w, Normalization::Pac, 30.0).unwrap();
        let mpc = normalize(&w, Normalization::Mpc, 30.0).unwrap();
        let s = spc.entries.norm();
        assert!((&spc.entries - &pac.entries).norm() <= 1e-12 * s);
        assert!((&spc.entries - &mpc.entries).norm() <= 1e-12 * s);
        let beam = beam_selection_precoder(91, &sched).unwrap();
        let a = normalize(&beam, Normalization::Pac, 30.0).unwrap();
        let z = normalize(&beam, Normalization::Spc, 30.0).unwrap();
        assert!((a.entries - z.entries).norm() < 1e-12);
    }

    #[test]
    fn non_precoded_is_mb() {
        let b = bf();
        let sched: Vec<usize> = (0..91).collect();
        let none = non_precoded(Space::Feed, &b, &sched).unwrap();
        assert_eq!(none.entries, b.entries);
        assert_eq!(none.scheme, Scheme::None);
        let nb = non_precoded(Space::Beam, &b, &sched).unwrap();
        assert_eq!(nb.entries, DMatrix::<Complex64>::identity(91, 91));
    }
}
