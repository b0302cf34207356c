use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Users served in one time frame, one per beam.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub frame_index: usize,
    /// `user_per_beam[b]` is the id of the user served by beam `b`.
    pub user_per_beam: Vec<usize>,
}

/// Random full-buffer scheduler.
///
/// Each beam's users are served in a random order; the number of frames is
/// the largest beam occupancy. A beam whose queue runs out before the last
/// frame re-serves one of its users drawn uniformly, so every beam transmits
/// in every frame.
pub fn schedule_frames<R: Rng + ?Sized>(users_by_beam: &[Vec<usize>], rng: &mut R) -> Result<Vec<FrameSchedule>> {
    if let Some(b) = users_by_beam.iter().position(|u| u.is_empty()) {
        return Err(Error::EmptyBeam(b));
    }
    let orders: Vec<Vec<usize>> = users_by_beam
        .iter()
        .map(|users| {
            let mut order = users.clone();
            order.shuffle(rng);
            order
        })
        .collect();
    let n_frames = orders.iter().map(Vec::len).max().unwrap_or(0);
    let mut frames = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let user_per_beam = orders
            .iter()
            .map(|order| match order.get(f) {
                Some(&u) => u,
                None => order[rng.random_range(0..order.len())],
            })
            .collect();
        frames.push(FrameSchedule {
            frame_index: f,
            user_per_beam,
        });
    }
    Ok(frames)
}
