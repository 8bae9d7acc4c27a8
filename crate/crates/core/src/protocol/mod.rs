//! Receiver-side beam management: the ground-reflection fallback protocol
//! and a LoS-only baseline that must re-acquire after losing sync.
//!
//! Both machines are advanced once per tick through a [`MeasurementPort`].
//! A tick carries at most one radio activity: a measurement of some beam,
//! service on the current beam, or nothing (idle).

mod baseline;
mod terra;

pub use baseline::BaselineMachine;
pub use terra::TerraMachine;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("protocol config invalid: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscoveryMode {
    /// Neighbor beam search guided by the known link pose.
    Nbs,
    /// Exhaustive search.
    Es,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolState {
    BeamAdaptation { cursor: usize, best: Option<(usize, f64)> },
    GroundReflectionDiscovery { mode: DiscoveryMode, cursor: usize },
    LoSOperation,
    NLoSOperation,
    Reacquisition { remaining_ms: u64 },
}

impl ProtocolState {
    pub fn beam_adaptation() -> Self {
        ProtocolState::BeamAdaptation { cursor: 0, best: None }
    }

    pub fn label(&self) -> StateLabel {
        match self {
            ProtocolState::BeamAdaptation { .. } => StateLabel::Ba,
            ProtocolState::GroundReflectionDiscovery {
                mode: DiscoveryMode::Nbs,
                ..
            } => StateLabel::GrdNbs,
            ProtocolState::GroundReflectionDiscovery {
                mode: DiscoveryMode::Es,
                ..
            } => StateLabel::GrdEs,
            ProtocolState::LoSOperation => StateLabel::Los,
            ProtocolState::NLoSOperation => StateLabel::Nlos,
            ProtocolState::Reacquisition { .. } => StateLabel::Reacq,
        }
    }
}

/// Compact state name used in logs and output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateLabel {
    #[serde(rename = "BA")]
    Ba,
    #[serde(rename = "GRD-NBS")]
    GrdNbs,
    #[serde(rename = "GRD-ES")]
    GrdEs,
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
    #[serde(rename = "REACQ")]
    Reacq,
}

impl StateLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::Ba => "BA",
            StateLabel::GrdNbs => "GRD-NBS",
            StateLabel::GrdEs => "GRD-ES",
            StateLabel::Los => "LOS",
            StateLabel::Nlos => "NLOS",
            StateLabel::Reacq => "REACQ",
        }
    }

    pub fn is_discovery(self) -> bool {
        matches!(self, StateLabel::GrdNbs | StateLabel::GrdEs)
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "BA" => StateLabel::Ba,
            "GRD-NBS" => StateLabel::GrdNbs,
            "GRD-ES" => StateLabel::GrdEs,
            "LOS" => StateLabel::Los,
            "NLOS" => StateLabel::Nlos,
            "REACQ" => StateLabel::Reacq,
            other => return Err(format!("unknown state {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamCache {
    pub los_beam_id: usize,
    pub nlos_beam_id: Option<usize>,
    pub nominal_los_rss_dbm: f64,
    pub nlos_rss_at_discovery_dbm: Option<f64>,
    pub last_refresh_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub blockage_detect_drop_db: f64,
    pub detect_consecutive_ticks: u32,
    pub probe_period_ms: u64,
    pub revert_margin_db: f64,
    pub sync_timeout_ms: u64,
    pub reacq_sweep_ms: u64,
    pub reacq_initial_access_ms: u64,
    pub pose_available: bool,
    /// How long serving RSS may sit below `nominal − drop/2` before the LoS
    /// beam is re-adapted.
    pub drift_window_ms: u64,
    /// A discovery candidate qualifies at `noise floor + margin` or better.
    pub discovery_margin_db: f64,
    /// The baseline never steers below this zenith, so it cannot lock onto
    /// the ground reflection.
    pub baseline_min_zenith_deg: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            blockage_detect_drop_db: 10.0,
            detect_consecutive_ticks: 3,
            probe_period_ms: 20,
            revert_margin_db: 6.0,
            sync_timeout_ms: 100,
            reacq_sweep_ms: 1280,
            reacq_initial_access_ms: 50,
            pose_available: true,
            drift_window_ms: 200,
            discovery_margin_db: 10.0,
            baseline_min_zenith_deg: 0.0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: &str| Err(ProtocolError::Config(m.to_string()));
        if !(self.blockage_detect_drop_db > 0.0) {
            return bad("blockage_detect_drop_db must be positive");
        }
        if self.detect_consecutive_ticks == 0 {
            return bad("detect_consecutive_ticks must be positive");
        }
        if self.probe_period_ms == 0 || self.sync_timeout_ms == 0 || self.drift_window_ms == 0 {
            return bad("probe_period_ms, sync_timeout_ms and drift_window_ms must be positive");
        }
        if self.reacq_sweep_ms + self.reacq_initial_access_ms == 0 {
            return bad("reacquisition must take positive time");
        }
        if !(self.revert_margin_db > 0.0 && self.revert_margin_db < self.blockage_detect_drop_db) {
            return bad("need 0 < revert_margin_db < blockage_detect_drop_db");
        }
        if !(self.discovery_margin_db >= 0.0) {
            return bad("discovery_margin_db must be >= 0");
        }
        if !self.baseline_min_zenith_deg.is_finite() {
            return bad("baseline_min_zenith_deg must be finite");
        }
        Ok(())
    }

    pub fn reacquisition_ms(&self) -> u64 {
        self.reacq_sweep_ms + self.reacq_initial_access_ms
    }
}

/// Receiver thresholds the protocol needs to judge a reception.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptionThresholds {
    pub noise_floor_dbm: f64,
    pub ctrl_snr_db: f64,
}

impl ReceptionThresholds {
    pub fn ctrl_ok(&self, rss_dbm: f64) -> bool {
        rss_dbm >= self.noise_floor_dbm + self.ctrl_snr_db
    }
}

/// What the protocol can do to the radio in one tick.
pub trait MeasurementPort {
    /// Point the receiver at `beam_id` for a measurement; no data this tick.
    fn measure(&mut self, beam_id: usize) -> f64;
    /// Receive data on `beam_id`; returns the observed RSS.
    fn serve(&mut self, beam_id: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionEvent {
    Measure,
    Enter(StateLabel),
    LosSelected,
    NlosCached,
    DiscoveryFailed,
    BlockageDetected,
    Revert,
    StaleCache,
    DriftDetected,
    SyncLost,
}

impl fmt::Display for ActionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionEvent::Measure => f.write_str("measure"),
            ActionEvent::Enter(s) => write!(f, "enter:{s}"),
            ActionEvent::LosSelected => f.write_str("los-selected"),
            ActionEvent::NlosCached => f.write_str("nlos-cached"),
            ActionEvent::DiscoveryFailed => f.write_str("discovery-failed"),
            ActionEvent::BlockageDetected => f.write_str("blockage-detected"),
            ActionEvent::Revert => f.write_str("revert"),
            ActionEvent::StaleCache => f.write_str("stale-cache"),
            ActionEvent::DriftDetected => f.write_str("drift-detected"),
            ActionEvent::SyncLost => f.write_str("sync-lost"),
        }
    }
}

impl FromStr for ActionEvent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(state) = s.strip_prefix("enter:") {
            return Ok(ActionEvent::Enter(state.parse()?));
        }
        Ok(match s {
            "measure" => ActionEvent::Measure,
            "los-selected" => ActionEvent::LosSelected,
            "nlos-cached" => ActionEvent::NlosCached,
            "discovery-failed" => ActionEvent::DiscoveryFailed,
            "blockage-detected" => ActionEvent::BlockageDetected,
            "revert" => ActionEvent::Revert,
            "stale-cache" => ActionEvent::StaleCache,
            "drift-detected" => ActionEvent::DriftDetected,
            "sync-lost" => ActionEvent::SyncLost,
            other => return Err(format!("unknown event {other:?}")),
        })
    }
}

/// One entry of the event timeline: `(time_ms, state, event, beam_id, rss_dbm)`.
///
/// `state` is the state the machine was in when the action happened; a
/// transition is logged as `Enter(new)` under the old state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub time_ms: u64,
    pub state: StateLabel,
    pub event: ActionEvent,
    pub beam_id: Option<usize>,
    pub rss_dbm: Option<f64>,
}

pub trait LinkProtocol {
    fn step(&mut self, port: &mut dyn MeasurementPort, time_ms: u64) -> Vec<Action>;
    fn state(&self) -> &ProtocolState;
    fn cache(&self) -> Option<&BeamCache>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolSelector {
    Terra,
    Baseline,
}

impl fmt::Display for ProtocolSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolSelector::Terra => "terra",
            ProtocolSelector::Baseline => "baseline",
        })
    }
}

impl FromStr for ProtocolSelector {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "terra" => Ok(ProtocolSelector::Terra),
            "baseline" => Ok(ProtocolSelector::Baseline),
            other => Err(format!("unknown protocol {other:?} (expected terra or baseline)")),
        }
    }
}

/// Tracks how long control reception has been failing.
#[derive(Debug, Clone, Copy, Default)]
struct SyncTracker {
    failing_since_ms: Option<u64>,
}

impl SyncTracker {
    fn note(&mut self, time_ms: u64, ok: bool) {
        if ok {
            self.failing_since_ms = None;
        } else if self.failing_since_ms.is_none() {
            self.failing_since_ms = Some(time_ms);
        }
    }

    fn lost(&self, time_ms: u64, timeout_ms: u64) -> bool {
        self.failing_since_ms
            .is_some_and(|since| time_ms.saturating_sub(since) >= timeout_ms)
    }

    fn reset(&mut self) {
        self.failing_since_ms = None;
    }
}

/// One step of the sweep, keeping the strongest beam; ties keep the earlier one.
fn beam_adaptation_tick(
    port: &mut dyn MeasurementPort,
    beam_id: usize,
    best: Option<(usize, f64)>,
) -> (f64, Option<(usize, f64)>) {
    let rss = port.measure(beam_id);
    let best = match best {
        Some((_, b)) if b >= rss => best,
        _ => Some((beam_id, rss)),
    };
    (rss, best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryEpisode {
    pub mode: DiscoveryMode,
    pub start_ms: u64,
    pub measurements: usize,
    pub found: bool,
}

/// Split the action log into discovery episodes with their measurement counts.
pub fn discovery_episodes(log: &[Action]) -> Vec<DiscoveryEpisode> {
    let mut out: Vec<DiscoveryEpisode> = Vec::new();
    let mut open: Option<DiscoveryEpisode> = None;
    for a in log {
        match a.event {
            ActionEvent::Enter(next) => {
                if let Some(ep) = open.take() {
                    out.push(ep);
                }
                if next.is_discovery() {
                    open = Some(DiscoveryEpisode {
                        mode: if next == StateLabel::GrdNbs {
                            DiscoveryMode::Nbs
                        } else {
                            DiscoveryMode::Es
                        },
                        start_ms: a.time_ms,
                        measurements: 0,
                        found: false,
                    });
                }
            }
            ActionEvent::Measure if a.state.is_discovery() => {
                if let Some(ep) = open.as_mut() {
                    ep.measurements += 1;
                }
            }
            ActionEvent::NlosCached => {
                if let Some(ep) = open.as_mut() {
                    ep.found = true;
                }
            }
            _ => {}
        }
    }
    out.extend(open);
    out
}

/// Measurements spent in the most recent discovery episode.
pub fn discovery_cost(log: &[Action]) -> usize {
    discovery_episodes(log).last().map_or(0, |e| e.measurements)
}
