//! Pedestrians crossing the link perpendicular to it at constant speed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BlockerSlab, LinkGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockageError {
    #[error("pedestrian parameters invalid: {0}")]
    Pedestrian(String),
    #[error("blockage process invalid: {0}")]
    Process(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PedestrianParams {
    pub lateral_speed_mps: f64,
    pub body_width_m: f64,
    pub height_m: f64,
    pub h_low_m: f64,
    /// Distance from the link line where the walk starts (and ends, on the far side).
    pub start_offset_m: f64,
}

impl Default for PedestrianParams {
    fn default() -> Self {
        Self {
            lateral_speed_mps: 1.4,
            body_width_m: 0.3,
            height_m: 1.78,
            h_low_m: 0.6,
            start_offset_m: 2.0,
        }
    }
}

impl PedestrianParams {
    pub fn validate(&self) -> Result<(), BlockageError> {
        let bad = |m: &str| Err(BlockageError::Pedestrian(m.to_string()));
        if !(self.lateral_speed_mps > 0.0) {
            return bad("speed must be positive");
        }
        if !(self.body_width_m > 0.0) {
            return bad("body width must be positive");
        }
        if !(self.h_low_m >= 0.0 && self.height_m > self.h_low_m) {
            return bad("need 0 <= h_low < height");
        }
        if !(self.start_offset_m > self.body_width_m / 2.0) {
            return bad("start offset must clear the link by more than half the body width");
        }
        Ok(())
    }

    /// Time the body spends across the link line.
    pub fn occlusion_ms(&self) -> f64 {
        1000.0 * self.body_width_m / self.lateral_speed_mps
    }

    /// Time from start of walk to end of walk.
    pub fn walk_ms(&self) -> f64 {
        2000.0 * self.start_offset_m / self.lateral_speed_mps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianTrack {
    pub start_time_ms: f64,
    /// Distance from the receiver along the link line.
    pub crossing_point_m: f64,
    pub params: PedestrianParams,
}

impl PedestrianTrack {
    /// Signed lateral distance from the link line, or `None` outside the walk.
    pub fn lateral_offset_at(&self, time_ms: f64) -> Option<f64> {
        let dt_s = (time_ms - self.start_time_ms) / 1000.0;
        if dt_s < 0.0 {
            return None;
        }
        let lateral = self.params.start_offset_m - self.params.lateral_speed_mps * dt_s;
        (lateral >= -self.params.start_offset_m).then_some(lateral)
    }

    /// Time at which the pedestrian's center crosses the link line.
    pub fn crossing_time_ms(&self) -> f64 {
        self.start_time_ms + 1000.0 * self.params.start_offset_m / self.params.lateral_speed_mps
    }

    pub fn end_time_ms(&self) -> f64 {
        self.start_time_ms + self.params.walk_ms()
    }
}

pub fn blocker_at(track: &PedestrianTrack, geom: &LinkGeometry, time_ms: f64) -> Option<BlockerSlab> {
    let lateral = track.lateral_offset_at(time_ms)?;
    Some(BlockerSlab {
        center_xy: geom.point_from_rx(track.crossing_point_m, lateral),
        width_m: track.params.body_width_m,
        h_low_m: track.params.h_low_m,
        h_high_m: track.params.height_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockageProcess {
    pub arrival_rate_per_s: f64,
    pub crossing_point_range_m: (f64, f64),
    pub pedestrian: PedestrianParams,
    pub rng_seed: u64,
}

impl Default for BlockageProcess {
    fn default() -> Self {
        Self {
            arrival_rate_per_s: 0.5,
            crossing_point_range_m: (0.5, 3.0),
            pedestrian: PedestrianParams::default(),
            rng_seed: 0,
        }
    }
}

impl BlockageProcess {
    pub fn validate(&self, link_distance_m: f64) -> Result<(), BlockageError> {
        if !(self.arrival_rate_per_s >= 0.0) || !self.arrival_rate_per_s.is_finite() {
            return Err(BlockageError::Process("arrival rate must be finite and >= 0".into()));
        }
        let (lo, hi) = self.crossing_point_range_m;
        if !(lo > 0.0 && lo <= hi && hi < link_distance_m) {
            return Err(BlockageError::Process(format!(
                "crossing range [{lo}, {hi}] must lie inside (0, {link_distance_m})"
            )));
        }
        self.pedestrian.validate()
    }
}

/// Poisson arrivals over `[0, duration_ms)` with uniform crossing points.
pub fn generate_tracks(process: &BlockageProcess, duration_ms: f64, seed: u64) -> Vec<PedestrianTrack> {
    if !(process.arrival_rate_per_s > 0.0) || !(duration_ms > 0.0) {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(process.arrival_rate_per_s / 1000.0).expect("positive rate");
    let (lo, hi) = process.crossing_point_range_m;
    let mut tracks = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= duration_ms {
            break;
        }
        let crossing_point_m = if hi > lo { rng.random_range(lo..hi) } else { lo };
        tracks.push(PedestrianTrack {
            start_time_ms: t,
            crossing_point_m,
            params: process.pedestrian,
        });
    }
    tracks
}
