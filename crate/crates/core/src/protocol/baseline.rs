use crate::codebook::Codebook;

use super::{
    beam_adaptation_tick, Action, ActionEvent, BeamCache, LinkProtocol, MeasurementPort, ProtocolConfig, ProtocolError,
    ProtocolState, ReceptionThresholds, SyncTracker,
};

/// LoS-only receiver: sweep, serve the best beam, and when control has been
/// failing for the sync timeout, go silent for a full re-acquisition.
#[derive(Debug, Clone)]
pub struct BaselineMachine {
    config: ProtocolConfig,
    thresholds: ReceptionThresholds,
    tick_ms: u64,
    /// Beams the sweep visits, in id order.
    sweep: Vec<usize>,
    state: ProtocolState,
    cache: Option<BeamCache>,
    sync: SyncTracker,
}

impl BaselineMachine {
    pub fn new(
        config: ProtocolConfig,
        codebook: &Codebook,
        thresholds: ReceptionThresholds,
        tick_ms: u64,
    ) -> Result<Self, ProtocolError> {
        config.validate()?;
        if tick_ms == 0 {
            return Err(ProtocolError::Config("tick_ms must be positive".into()));
        }
        let sweep: Vec<usize> = codebook
            .beams()
            .iter()
            .filter(|b| b.zenith_deg >= config.baseline_min_zenith_deg)
            .map(|b| b.id)
            .collect();
        if sweep.is_empty() {
            return Err(ProtocolError::Config(format!(
                "no beam at or above baseline_min_zenith_deg = {}",
                config.baseline_min_zenith_deg
            )));
        }
        Ok(Self {
            config,
            thresholds,
            tick_ms,
            sweep,
            state: ProtocolState::beam_adaptation(),
            cache: None,
            sync: SyncTracker::default(),
        })
    }

    /// Beams visited by a sweep, in order.
    pub fn sweep(&self) -> &[usize] {
        &self.sweep
    }

    pub fn with_state(mut self, state: ProtocolState, cache: Option<BeamCache>) -> Self {
        self.state = state;
        self.cache = cache;
        self
    }

    fn push(&self, log: &mut Vec<Action>, time_ms: u64, event: ActionEvent, beam: Option<usize>, rss: Option<f64>) {
        log.push(Action {
            time_ms,
            state: self.state.label(),
            event,
            beam_id: beam,
            rss_dbm: rss,
        });
    }

    fn enter(&mut self, time_ms: u64, next: ProtocolState, log: &mut Vec<Action>) {
        self.push(log, time_ms, ActionEvent::Enter(next.label()), None, None);
        self.state = next;
    }
}

impl LinkProtocol for BaselineMachine {
    fn step(&mut self, port: &mut dyn MeasurementPort, time_ms: u64) -> Vec<Action> {
        let mut log = Vec::new();
        if !matches!(self.state, ProtocolState::Reacquisition { .. })
            && self.sync.lost(time_ms, self.config.sync_timeout_ms)
        {
            self.push(&mut log, time_ms, ActionEvent::SyncLost, None, None);
            let remaining_ms = self.config.reacquisition_ms();
            self.enter(time_ms, ProtocolState::Reacquisition { remaining_ms }, &mut log);
        }
        match self.state.clone() {
            ProtocolState::Reacquisition { remaining_ms } => {
                let left = remaining_ms.saturating_sub(self.tick_ms);
                if left == 0 {
                    self.sync.reset();
                    self.enter(time_ms, ProtocolState::beam_adaptation(), &mut log);
                } else {
                    self.state = ProtocolState::Reacquisition { remaining_ms: left };
                }
            }
            ProtocolState::BeamAdaptation { cursor, best } => {
                let beam = self.sweep[cursor];
                let (rss, best) = beam_adaptation_tick(port, beam, best);
                self.sync.note(time_ms, self.thresholds.ctrl_ok(rss));
                self.push(&mut log, time_ms, ActionEvent::Measure, Some(beam), Some(rss));
                if cursor + 1 < self.sweep.len() {
                    self.state = ProtocolState::BeamAdaptation {
                        cursor: cursor + 1,
                        best,
                    };
                } else {
                    let (los, nominal) = best.expect("sweep measured at least one beam");
                    self.cache = Some(BeamCache {
                        los_beam_id: los,
                        nlos_beam_id: None,
                        nominal_los_rss_dbm: nominal,
                        nlos_rss_at_discovery_dbm: None,
                        last_refresh_ms: time_ms,
                    });
                    self.push(&mut log, time_ms, ActionEvent::LosSelected, Some(los), Some(nominal));
                    self.enter(time_ms, ProtocolState::LoSOperation, &mut log);
                }
            }
            ProtocolState::LoSOperation => match self.cache {
                Some(c) => {
                    let rss = port.serve(c.los_beam_id);
                    self.sync.note(time_ms, self.thresholds.ctrl_ok(rss));
                }
                None => self.enter(time_ms, ProtocolState::beam_adaptation(), &mut log),
            },
            // The baseline has no fallback beam; treat these as plain service.
            ProtocolState::GroundReflectionDiscovery { .. } | ProtocolState::NLoSOperation => {
                self.enter(time_ms, ProtocolState::LoSOperation, &mut log)
            }
        }
        log
    }

    fn state(&self) -> &ProtocolState {
        &self.state
    }

    fn cache(&self) -> Option<&BeamCache> {
        self.cache.as_ref()
    }
}
