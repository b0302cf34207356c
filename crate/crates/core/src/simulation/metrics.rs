use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::precoding::PrecodingMatrix;
use crate::{Complex64, DMatrix};

/// Per-user link quality of one frame, linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub sinr: f64,
    /// `+inf` when the user sees no interference.
    pub sir: f64,
}

/// SINR and SIR of every scheduled user when the precoder `w` (computed at
/// estimation time) is applied to the channel `h` at transmission time.
/// Noise has unit variance because channels are noise-normalized.
pub fn frame_metrics(h: &ChannelMatrix, w: &PrecodingMatrix) -> Result<Vec<LinkMetrics>> {
    if h.space != w.space {
        return Err(Error::DimensionMismatch(format!(
            "channel is in {} space, precoder in {} space",
            h.space.as_str(),
            w.space.as_str()
        )));
    }
    if h.n_cols() != w.entries.nrows() || h.n_users() != w.entries.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}, precoder is {}x{}",
            h.n_users(),
            h.n_cols(),
            w.entries.nrows(),
            w.entries.ncols()
        )));
    }
    Ok(metrics_from_gain(&(&h.entries * &w.entries), 1.0))
}

/// Metrics from the effective gain matrix `G = H W` scaled in power by
/// `power_scale`, i.e. the metrics of `H (√power_scale · W)`.
pub fn metrics_from_gain(g: &DMatrix<Complex64>, power_scale: f64) -> Vec<LinkMetrics> {
    (0..g.nrows())
        .map(|k| {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (i, x) in g.row(k).iter().enumerate() {
                if i == k {
                    signal = x.norm_sqr() * power_scale;
                } else {
                    interference += x.norm_sqr() * power_scale;
                }
            }
            let sir = if interference > 0.0 {
                signal / interference
            } else {
                f64::INFINITY
            };
            LinkMetrics {
                sinr: signal / (1.0 + interference),
                sir,
            }
        })
        .collect()
}

/// Achievable spectral efficiency `log2(1 + SINR)` in bit/s/Hz.
pub fn spectral_efficiency(sinr_linear: f64) -> f64 {
    (1.0 + sinr_linear).log2()
}
