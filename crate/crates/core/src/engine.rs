//! Tick-driven simulation: pedestrians move, the channel is evaluated for the
//! beam the protocol touches, and every tick becomes one [`TickRecord`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockage::{blocker_at, generate_tracks, BlockageError, BlockageProcess, PedestrianTrack};
use crate::channel::{
    calibrate_surface, default_calibration_grid, ChannelError, LinkChannel, RadioConfig, Surface, SurfaceKind,
};
use crate::codebook::{Beam, BeamPattern, Codebook, CodebookError};
use crate::geometry::{
    departure_angles, direct_path, ground_reflected_path, path_blocked, BlockerSlab, GeometryError, LinkGeometry,
};
use crate::metrics::{packet_outcome, PacketKind, RunSummary};
use crate::protocol::{
    Action, BaselineMachine, LinkProtocol, MeasurementPort, ProtocolConfig, ProtocolError, ProtocolSelector,
    ReceptionThresholds, StateLabel, TerraMachine,
};
use crate::trace::RssTrace;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario invalid: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Blockage(#[from] BlockageError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invariant violated at t={time_ms} ms: {message}")]
    Invariant { time_ms: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub tx_height_m: f64,
    pub rx_height_m: f64,
    pub distance_m: f64,
    pub rx_heading_deg: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            tx_height_m: 2.5,
            rx_height_m: 1.0,
            distance_m: 6.0,
            rx_heading_deg: 0.0,
        }
    }
}

impl GeometryConfig {
    pub fn link(&self) -> Result<LinkGeometry, GeometryError> {
        Ok(
            LinkGeometry::planar(self.tx_height_m, self.rx_height_m, self.distance_m)?
                .with_rx_heading(self.rx_heading_deg),
        )
    }
}

/// Ground surface: either a fixed reflection loss or a target median
/// additional loss that is solved for by calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: SurfaceKind,
    /// Overrides the kind's measured value as the calibration target.
    pub target_additional_loss_db: Option<f64>,
    /// Skips calibration entirely.
    pub reflection_loss_db: Option<f64>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            kind: SurfaceKind::Concrete,
            target_additional_loss_db: None,
            reflection_loss_db: None,
        }
    }
}

impl SurfaceConfig {
    pub fn resolve(&self, radio: &RadioConfig) -> Result<Surface, EngineError> {
        if let Some(loss) = self.reflection_loss_db {
            return Ok(Surface::new(self.kind, loss)?);
        }
        let target = self
            .target_additional_loss_db
            .or(self.kind.measured_additional_loss_db())
            .ok_or_else(|| {
                EngineError::Config(format!(
                    "surface {:?} has no measured loss; set target_additional_loss_db or reflection_loss_db",
                    self.kind
                ))
            })?;
        Ok(calibrate_surface(self.kind, radio, &default_calibration_grid(), target)?.surface)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    pub az_grid_deg: Vec<f64>,
    pub zen_grid_deg: Vec<f64>,
    pub pattern: BeamPattern,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        let cb = Codebook::default_codebook();
        Self {
            az_grid_deg: cb.az_grid().to_vec(),
            zen_grid_deg: cb.zen_grid().to_vec(),
            pattern: cb.pattern(),
        }
    }
}

impl CodebookConfig {
    pub fn build(&self) -> Result<Codebook, CodebookError> {
        Codebook::grid(self.az_grid_deg.clone(), self.zen_grid_deg.clone(), self.pattern)
    }
}

/// The base station's fixed beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxBeamConfig {
    pub pattern: BeamPattern,
    pub azimuth_deg: f64,
    /// Defaults to halfway between the direct and ground departure elevations.
    pub zenith_deg: Option<f64>,
}

impl Default for TxBeamConfig {
    fn default() -> Self {
        Self {
            pattern: BeamPattern::default(),
            azimuth_deg: 0.0,
            zenith_deg: None,
        }
    }
}

impl TxBeamConfig {
    pub fn beam(&self, geom: &LinkGeometry) -> Result<Beam, CodebookError> {
        self.pattern.validate()?;
        let zenith = self.zenith_deg.unwrap_or_else(|| {
            let d = departure_angles(geom, &direct_path(geom)).elevation_deg;
            let g = departure_angles(geom, &ground_reflected_path(geom)).elevation_deg;
            0.5 * (d + g)
        });
        Ok(Beam::aimed(self.azimuth_deg, zenith, self.pattern))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_ms: u64,
    pub tick_ms: u64,
    pub protocol: ProtocolSelector,
    pub geometry: GeometryConfig,
    pub radio: RadioConfig,
    pub surface: SurfaceConfig,
    /// Receive codebook.
    pub codebook: CodebookConfig,
    pub tx_beam: TxBeamConfig,
    pub blockage: BlockageProcess,
    pub protocol_config: ProtocolConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            duration_ms: 100_000,
            tick_ms: 1,
            protocol: ProtocolSelector::Terra,
            geometry: GeometryConfig::default(),
            radio: RadioConfig::default(),
            surface: SurfaceConfig::default(),
            codebook: CodebookConfig::default(),
            tx_beam: TxBeamConfig::default(),
            blockage: BlockageProcess::default(),
            protocol_config: ProtocolConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// 2 m base station, 1 m receiver 6 m away over concrete, with a receive
    /// array narrow enough in zenith to tell the direct and ground rays apart.
    pub fn concrete_6m() -> Self {
        Self {
            geometry: GeometryConfig {
                tx_height_m: 2.0,
                rx_height_m: 1.0,
                distance_m: 6.0,
                rx_heading_deg: 0.0,
            },
            codebook: CodebookConfig {
                zen_grid_deg: vec![10.0, 0.0, -10.0, -25.0, -40.0],
                pattern: BeamPattern {
                    peak_gain_dbi: 17.0,
                    bw_az_deg: 18.0,
                    bw_zen_deg: 14.0,
                    sidelobe_floor_db: 40.0,
                },
                ..CodebookConfig::default()
            },
            blockage: BlockageProcess {
                crossing_point_range_m: (1.0, 3.0),
                ..BlockageProcess::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.tick_ms == 0 {
            return Err(EngineError::Config("tick_ms must be positive".into()));
        }
        if self.duration_ms == 0 || !self.duration_ms.is_multiple_of(self.tick_ms) {
            return Err(EngineError::Config(format!(
                "duration_ms ({}) must be a positive multiple of tick_ms ({})",
                self.duration_ms, self.tick_ms
            )));
        }
        self.radio.validate()?;
        self.protocol_config.validate()?;
        let geom = self.geometry.link()?;
        self.blockage.validate(geom.horizontal_distance())?;
        self.codebook.build()?;
        self.tx_beam.beam(&geom)?;
        Ok(())
    }

    pub fn ticks(&self) -> u64 {
        self.duration_ms / self.tick_ms
    }

    pub fn thresholds(&self) -> ReceptionThresholds {
        ReceptionThresholds {
            noise_floor_dbm: self.radio.noise_floor_dbm,
            ctrl_snr_db: self.radio.ctrl_snr_db,
        }
    }

    /// Seed of the pedestrian stream.
    pub fn blockage_seed(&self) -> u64 {
        self.seed.wrapping_add(self.blockage.rng_seed)
    }

    /// Validate and precompute everything a run needs.
    pub fn resolve(&self) -> Result<ResolvedScenario, EngineError> {
        self.validate()?;
        let geometry = self.geometry.link()?;
        let surface = self.surface.resolve(&self.radio)?;
        let codebook = self.codebook.build()?;
        let tx_beam = self.tx_beam.beam(&geometry)?;
        let channel = LinkChannel::new(&self.radio, &geometry, &surface, &tx_beam)?;
        let tracks = generate_tracks(&self.blockage, self.duration_ms as f64, self.blockage_seed());
        Ok(ResolvedScenario {
            config: self.clone(),
            geometry,
            surface,
            codebook,
            tx_beam,
            channel,
            tracks,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub geometry: LinkGeometry,
    pub surface: Surface,
    pub codebook: Codebook,
    pub tx_beam: Beam,
    pub channel: LinkChannel,
    pub tracks: Vec<PedestrianTrack>,
}

impl ResolvedScenario {
    pub fn blockers_at(&self, time_ms: u64) -> Vec<BlockerSlab> {
        self.tracks
            .iter()
            .filter_map(|tr| blocker_at(tr, &self.geometry, time_ms as f64))
            .collect()
    }

    /// Strongest beam RSS with nobody in the way.
    pub fn nominal_los_rss_dbm(&self) -> f64 {
        self.codebook
            .beams()
            .iter()
            .map(|b| self.channel.observe(b, &[]).rss_dbm)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Tick intervals during which each track occludes the direct path.
    pub fn occlusion_intervals(&self) -> Vec<OcclusionInterval> {
        let tick = self.config.tick_ms;
        let direct = direct_path(&self.geometry);
        let mut out: Vec<OcclusionInterval> = self
            .tracks
            .iter()
            .filter_map(|tr| {
                let first = (tr.start_time_ms / tick as f64).ceil() as u64;
                let last = (tr.end_time_ms() / tick as f64).floor() as u64;
                let blocked = |i: u64| {
                    blocker_at(tr, &self.geometry, (i * tick) as f64).is_some_and(|b| path_blocked(&direct, &b))
                };
                let start = (first..=last).find(|&i| blocked(i))?;
                let end = (start..=last + 1).find(|&i| !blocked(i)).unwrap_or(last + 1);
                let n = self.config.ticks();
                (start < n).then(|| OcclusionInterval {
                    start_ms: start * tick,
                    end_ms: end.min(n) * tick,
                })
            })
            .collect();
        out.sort_by_key(|iv| (iv.start_ms, iv.end_ms));
        out
    }
}

/// `[start_ms, end_ms)` in which the direct path is occluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcclusionInterval {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl OcclusionInterval {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Data,
    Measurement,
    Idle,
}

impl Activity {
    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Data => "data",
            Activity::Measurement => "measurement",
            Activity::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub time_ms: u64,
    /// State after the tick's step.
    pub state: StateLabel,
    pub activity: Activity,
    /// Served beam on data ticks, measured beam on measurement ticks.
    pub serving_beam_id: Option<usize>,
    /// RSS on `serving_beam_id`; `-inf` when idle.
    pub serving_rss_dbm: f64,
    /// Per-path split of `serving_rss_dbm`, when the source knows it.
    pub los_rss_dbm: Option<f64>,
    pub ground_rss_dbm: Option<f64>,
    pub los_occluded: bool,
    /// `None` unless this is a data tick.
    pub data_pkt_ok: Option<bool>,
    pub ctrl_ok: bool,
}

/// What a channel reports for one beam at the current tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamReading {
    pub rss_dbm: f64,
    pub los_rss_dbm: Option<f64>,
    pub ground_rss_dbm: Option<f64>,
}

/// Anything that can answer "what would beam b see now": the simulator or a
/// recorded trace.
pub trait ChannelSource {
    fn beam_count(&self) -> usize;
    fn tick_ms(&self) -> u64;
    fn tick_count(&self) -> u64;
    fn time_ms(&self, index: u64) -> u64;
    /// Move to tick `index`.
    fn seek(&mut self, index: u64);
    fn read(&self, beam_id: usize) -> BeamReading;
    fn los_occluded(&self) -> bool;
}

struct SimSource<'a> {
    scenario: &'a ResolvedScenario,
    blockers: Vec<BlockerSlab>,
}

impl ChannelSource for SimSource<'_> {
    fn beam_count(&self) -> usize {
        self.scenario.codebook.len()
    }
    fn tick_ms(&self) -> u64 {
        self.scenario.config.tick_ms
    }
    fn tick_count(&self) -> u64 {
        self.scenario.config.ticks()
    }
    fn time_ms(&self, index: u64) -> u64 {
        index * self.scenario.config.tick_ms
    }
    fn seek(&mut self, index: u64) {
        self.blockers = self.scenario.blockers_at(self.time_ms(index));
    }
    fn read(&self, beam_id: usize) -> BeamReading {
        let beam = &self.scenario.codebook.beams()[beam_id];
        let obs = self.scenario.channel.observe(beam, &self.blockers);
        BeamReading {
            rss_dbm: obs.rss_dbm,
            los_rss_dbm: Some(obs.los_rss_dbm),
            ground_rss_dbm: Some(obs.ground_rss_dbm),
        }
    }
    fn los_occluded(&self) -> bool {
        self.scenario.channel.los_occluded(&self.blockers)
    }
}

/// Port handed to the protocol for one tick; remembers what it was asked.
struct TickPort<'a> {
    source: &'a dyn ChannelSource,
    used: Vec<(Activity, usize, BeamReading)>,
}

impl TickPort<'_> {
    fn access(&mut self, activity: Activity, beam_id: usize) -> f64 {
        let reading = if beam_id < self.source.beam_count() {
            self.source.read(beam_id)
        } else {
            BeamReading {
                rss_dbm: f64::NEG_INFINITY,
                los_rss_dbm: None,
                ground_rss_dbm: None,
            }
        };
        self.used.push((activity, beam_id, reading));
        reading.rss_dbm
    }
}

impl MeasurementPort for TickPort<'_> {
    fn measure(&mut self, beam_id: usize) -> f64 {
        self.access(Activity::Measurement, beam_id)
    }
    fn serve(&mut self, beam_id: usize) -> f64 {
        self.access(Activity::Data, beam_id)
    }
}

pub fn build_protocol(
    selector: ProtocolSelector,
    config: &ProtocolConfig,
    codebook: &Codebook,
    thresholds: ReceptionThresholds,
    pose: Option<LinkGeometry>,
    tick_ms: u64,
) -> Result<Box<dyn LinkProtocol + Send>, ProtocolError> {
    Ok(match selector {
        ProtocolSelector::Terra => Box::new(TerraMachine::new(*config, codebook.clone(), thresholds, pose, tick_ms)?),
        ProtocolSelector::Baseline => Box::new(BaselineMachine::new(*config, codebook, thresholds, tick_ms)?),
    })
}

/// Drive `protocol` over every tick of `source`.
pub fn drive(
    source: &mut dyn ChannelSource,
    protocol: &mut dyn LinkProtocol,
    radio: &RadioConfig,
) -> Result<(Vec<TickRecord>, Vec<Action>), EngineError> {
    let n = source.tick_count();
    let mut records = Vec::with_capacity(n as usize);
    let mut actions = Vec::new();
    for i in 0..n {
        source.seek(i);
        let time_ms = source.time_ms(i);
        let mut port = TickPort {
            source: &*source,
            used: Vec::with_capacity(1),
        };
        actions.extend(protocol.step(&mut port, time_ms));
        if port.used.len() > 1 {
            return Err(EngineError::Invariant {
                time_ms,
                message: format!("{} radio accesses in one tick", port.used.len()),
            });
        }
        if let Some(&(_, beam, _)) = port.used.first() {
            if beam >= source.beam_count() {
                return Err(EngineError::Invariant {
                    time_ms,
                    message: format!("beam {beam} outside the codebook"),
                });
            }
        }
        let record = match port.used.first() {
            Some(&(activity, beam, reading)) => TickRecord {
                time_ms,
                state: protocol.state().label(),
                activity,
                serving_beam_id: Some(beam),
                serving_rss_dbm: reading.rss_dbm,
                los_rss_dbm: reading.los_rss_dbm,
                ground_rss_dbm: reading.ground_rss_dbm,
                los_occluded: source.los_occluded(),
                data_pkt_ok: (activity == Activity::Data)
                    .then(|| packet_outcome(reading.rss_dbm, radio, PacketKind::Data)),
                ctrl_ok: packet_outcome(reading.rss_dbm, radio, PacketKind::Control),
            },
            None => TickRecord {
                time_ms,
                state: protocol.state().label(),
                activity: Activity::Idle,
                serving_beam_id: None,
                serving_rss_dbm: f64::NEG_INFINITY,
                los_rss_dbm: None,
                ground_rss_dbm: None,
                los_occluded: source.los_occluded(),
                data_pkt_ok: None,
                ctrl_ok: false,
            },
        };
        records.push(record);
    }
    Ok((records, actions))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TickRecord>,
    pub actions: Vec<Action>,
    pub intervals: Vec<OcclusionInterval>,
    pub tracks: Vec<PedestrianTrack>,
    /// Resolved ground surface; absent for trace replays.
    pub surface: Option<Surface>,
    pub summary: RunSummary,
}

pub fn run(config: &ScenarioConfig) -> Result<RunOutput, EngineError> {
    let scenario = config.resolve()?;
    run_resolved(&scenario)
}

pub fn run_resolved(scenario: &ResolvedScenario) -> Result<RunOutput, EngineError> {
    let cfg = &scenario.config;
    let mut protocol = build_protocol(
        cfg.protocol,
        &cfg.protocol_config,
        &scenario.codebook,
        cfg.thresholds(),
        Some(scenario.geometry),
        cfg.tick_ms,
    )?;
    let mut source = SimSource {
        scenario,
        blockers: Vec::new(),
    };
    let (records, actions) = drive(&mut source, protocol.as_mut(), &cfg.radio)?;
    let intervals = scenario.occlusion_intervals();
    let summary = RunSummary::from_records(
        &records,
        &actions,
        &intervals,
        scenario.nominal_los_rss_dbm(),
        &cfg.radio,
        cfg.tick_ms,
    );
    Ok(RunOutput {
        records,
        actions,
        intervals,
        tracks: scenario.tracks.clone(),
        surface: Some(scenario.surface),
        summary,
    })
}

/// Every beam's RSS at every tick, for export and replay.
pub fn ground_truth_trace(scenario: &ResolvedScenario) -> RssTrace {
    let mut source = SimSource {
        scenario,
        blockers: Vec::new(),
    };
    let beams = source.beam_count();
    let rows = (0..source.tick_count())
        .map(|i| {
            source.seek(i);
            let rss = (0..beams).map(|b| source.read(b).rss_dbm).collect();
            (source.time_ms(i), rss)
        })
        .collect();
    RssTrace::new(scenario.config.tick_ms, rows).expect("simulated trace is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ActionEvent;
    use approx::assert_abs_diff_eq;

    fn quiet(protocol: ProtocolSelector) -> ScenarioConfig {
        ScenarioConfig {
            duration_ms: 2_000,
            protocol,
            blockage: BlockageProcess {
                arrival_rate_per_s: 0.0,
                ..ScenarioConfig::concrete_6m().blockage
            },
            ..ScenarioConfig::concrete_6m()
        }
    }

    #[test]
    fn config_validation() {
        assert!(ScenarioConfig::default().validate().is_ok());
        assert!(ScenarioConfig::concrete_6m().validate().is_ok());
        let bad = ScenarioConfig {
            tick_ms: 3,
            duration_ms: 100,
            ..ScenarioConfig::default()
        };
        assert!(matches!(bad.validate(), Err(EngineError::Config(_))));
        let bad = ScenarioConfig {
            tick_ms: 0,
            ..ScenarioConfig::default()
        };
        assert!(bad.validate().is_err());
        let mut bad = ScenarioConfig::default();
        bad.geometry.distance_m = 2.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn custom_surface_needs_a_target() {
        let mut cfg = ScenarioConfig::default();
        cfg.surface.kind = SurfaceKind::Custom;
        assert!(cfg.resolve().is_err());
        cfg.surface.target_additional_loss_db = Some(6.0);
        assert!(cfg.resolve().is_ok());
        cfg.surface.reflection_loss_db = Some(3.0);
        assert_eq!(cfg.resolve().unwrap().surface.reflection_loss_db, 3.0);
    }

    #[test]
    fn bundled_link_budget() {
        let s = ScenarioConfig::concrete_6m().resolve().unwrap();
        let nominal = s.nominal_los_rss_dbm();
        assert_abs_diff_eq!(nominal, -30.0, epsilon = 0.3);
        let ground = s
            .codebook
            .beams()
            .iter()
            .find(|b| b.zenith_deg == -25.0 && b.azimuth_deg == 0.0)
            .unwrap();
        let g = s.channel.observe(ground, &[]).rss_dbm;
        assert!(nominal - g > 4.0 && nominal - g < 6.0, "{}", nominal - g);
    }

    #[test]
    fn quiet_terra_run_settles_in_los() {
        let out = run(&quiet(ProtocolSelector::Terra)).unwrap();
        assert_eq!(out.records.len(), 2000);
        // Sweep of 25 beams, one pose-guided measurement, then service.
        assert!(out.records[..26].iter().all(|r| r.activity == Activity::Measurement));
        assert!(out.records[26..]
            .iter()
            .all(|r| r.activity == Activity::Data && r.state == StateLabel::Los));
        assert!(out.actions.iter().any(|a| a.event == ActionEvent::NlosCached));
        assert_eq!(out.summary.event_count, 0);
        assert_eq!(out.summary.outage_fraction, 0.0);
        assert_eq!(out.summary.within6db_fraction, 1.0);
        assert_eq!(out.summary.total_outage_ms, 0);
    }

    #[test]
    fn quiet_baseline_run_settles_in_los() {
        let out = run(&quiet(ProtocolSelector::Baseline)).unwrap();
        let sweep = out
            .records
            .iter()
            .take_while(|r| r.activity == Activity::Measurement)
            .count();
        assert_eq!(sweep, 10);
        assert!(out.records[sweep..].iter().all(|r| r.data_pkt_ok == Some(true)));
    }

    #[test]
    fn deterministic() {
        let cfg = ScenarioConfig {
            duration_ms: 10_000,
            seed: 4,
            ..ScenarioConfig::concrete_6m()
        };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.actions, b.actions);
    }

    #[test]
    fn occlusion_interval_length() {
        let mut cfg = ScenarioConfig::concrete_6m();
        cfg.duration_ms = 5_000;
        let mut s = cfg.resolve().unwrap();
        s.tracks = vec![PedestrianTrack {
            start_time_ms: 500.0,
            crossing_point_m: 2.0,
            params: cfg.blockage.pedestrian,
        }];
        let iv = s.occlusion_intervals();
        assert_eq!(iv.len(), 1);
        assert!((213..=215).contains(&iv[0].duration_ms()), "{:?}", iv[0]);
    }

    #[test]
    fn ground_truth_matches_records() {
        let cfg = ScenarioConfig {
            duration_ms: 3_000,
            ..ScenarioConfig::concrete_6m()
        };
        let s = cfg.resolve().unwrap();
        let out = run_resolved(&s).unwrap();
        let trace = ground_truth_trace(&s);
        for (r, (t, row)) in out.records.iter().zip(trace.rows()) {
            assert_eq!(r.time_ms, *t);
            if let Some(b) = r.serving_beam_id {
                assert_eq!(r.serving_rss_dbm, row[b]);
            }
        }
    }
}
