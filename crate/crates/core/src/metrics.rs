//! Packet outcomes and the per-run scores computed from tick records.

use serde::{Deserialize, Serialize};

use crate::channel::RadioConfig;
use crate::engine::{Activity, OcclusionInterval, TickRecord};
use crate::protocol::{discovery_episodes, Action, DiscoveryEpisode, StateLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketKind {
    Data,
    Control,
}

/// Step-function decoder: success iff `rss >= noise floor + required SNR`.
pub fn packet_outcome(rss_dbm: f64, radio: &RadioConfig, kind: PacketKind) -> bool {
    let snr = match kind {
        PacketKind::Data => radio.data_snr_db,
        PacketKind::Control => radio.ctrl_snr_db,
    };
    rss_dbm >= radio.noise_floor_dbm + snr
}

/// Ticks inside an occlusion or spent idle re-acquiring.
pub fn is_affected(r: &TickRecord) -> bool {
    r.los_occluded || r.activity == Activity::Idle
}

/// Fraction of affected ticks whose RSS is at or above the noise floor;
/// 1.0 when nothing was affected.
pub fn outage_fraction_outside(records: &[TickRecord], radio: &RadioConfig) -> f64 {
    fraction(records.iter().filter(|r| is_affected(r)), |r| {
        r.serving_rss_dbm >= radio.noise_floor_dbm
    })
}

/// Fraction of affected ticks within `margin_db` of the nominal LoS RSS.
pub fn within_margin_fraction(records: &[TickRecord], nominal_los_rss_dbm: f64, margin_db: f64) -> f64 {
    fraction(records.iter().filter(|r| is_affected(r)), |r| {
        r.serving_rss_dbm >= nominal_los_rss_dbm - margin_db
    })
}

fn fraction<'a>(ticks: impl Iterator<Item = &'a TickRecord>, pred: impl Fn(&TickRecord) -> bool) -> f64 {
    let (mut n, mut hit) = (0usize, 0usize);
    for r in ticks {
        n += 1;
        hit += pred(r) as usize;
    }
    if n == 0 {
        1.0
    } else {
        hit as f64 / n as f64
    }
}

/// Packet errors over one blockage event.
///
/// The window opens when the direct path is first occluded and closes at the
/// first tick, at or after the occlusion ends, on which the protocol is back
/// in LoS operation (or at the end of the run).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub occlusion_start_ms: u64,
    pub occlusion_end_ms: u64,
    pub window_end_ms: u64,
    pub data_ticks: usize,
    pub data_errors: usize,
    /// `None` when the window held no data ticks.
    pub per: Option<f64>,
}

pub fn event_outcomes(records: &[TickRecord], intervals: &[OcclusionInterval], tick_ms: u64) -> Vec<EventOutcome> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let t0 = first.time_ms;
    let index = |t: u64| (t.saturating_sub(t0) / tick_ms) as usize;
    intervals
        .iter()
        .map(|iv| {
            let start = index(iv.start_ms).min(records.len());
            let end = index(iv.end_ms).min(records.len());
            let close = records[end..]
                .iter()
                .position(|r| r.state == StateLabel::Los)
                .map_or(records.len(), |p| end + p);
            let window = &records[start..close];
            let data_ticks = window.iter().filter(|r| r.data_pkt_ok.is_some()).count();
            let data_errors = window.iter().filter(|r| r.data_pkt_ok == Some(false)).count();
            EventOutcome {
                occlusion_start_ms: iv.start_ms,
                occlusion_end_ms: iv.end_ms,
                window_end_ms: records
                    .get(close)
                    .map_or(t0 + records.len() as u64 * tick_ms, |r| r.time_ms),
                data_ticks,
                data_errors,
                per: (data_ticks > 0).then(|| data_errors as f64 / data_ticks as f64),
            }
        })
        .collect()
}

pub fn event_per(records: &[TickRecord], intervals: &[OcclusionInterval], tick_ms: u64) -> Vec<Option<f64>> {
    event_outcomes(records, intervals, tick_ms)
        .iter()
        .map(|e| e.per)
        .collect()
}

/// Ticks in outage: service below the floor, plus idle ticks. Measurement
/// ticks are not counted.
pub fn total_outage_ms(records: &[TickRecord], radio: &RadioConfig, tick_ms: u64) -> u64 {
    let n = records
        .iter()
        .filter(|r| r.activity != Activity::Measurement && !(r.serving_rss_dbm >= radio.noise_floor_dbm))
        .count() as u64;
    n * tick_ms
}

/// Right-continuous empirical CDF: one point per distinct value.
pub fn cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut n, mut s) = (0usize, 0.0);
    for v in values {
        n += 1;
        s += v;
    }
    (n > 0).then(|| s / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ticks: usize,
    pub affected_ticks: usize,
    pub data_ticks: usize,
    pub delivered_packets: usize,
    pub nominal_los_rss_dbm: f64,
    /// Over affected ticks: share below the noise floor.
    pub outage_fraction: f64,
    pub outside_outage_fraction: f64,
    pub within6db_fraction: f64,
    /// The same two fractions over every tick of the run.
    pub full_run_outside_outage_fraction: f64,
    pub full_run_within6db_fraction: f64,
    pub event_count: usize,
    pub per_blockage_event_per: Vec<Option<f64>>,
    pub mean_event_per: Option<f64>,
    pub discovery_costs: Vec<usize>,
    pub discovery_episodes: Vec<DiscoveryEpisode>,
    pub total_outage_ms: u64,
}

impl RunSummary {
    pub fn from_records(
        records: &[TickRecord],
        actions: &[Action],
        intervals: &[OcclusionInterval],
        nominal_los_rss_dbm: f64,
        radio: &RadioConfig,
        tick_ms: u64,
    ) -> Self {
        let outside = outage_fraction_outside(records, radio);
        let per = event_per(records, intervals, tick_ms);
        let episodes = discovery_episodes(actions);
        Self {
            ticks: records.len(),
            affected_ticks: records.iter().filter(|r| is_affected(r)).count(),
            data_ticks: records.iter().filter(|r| r.data_pkt_ok.is_some()).count(),
            delivered_packets: records.iter().filter(|r| r.data_pkt_ok == Some(true)).count(),
            nominal_los_rss_dbm,
            outage_fraction: 1.0 - outside,
            outside_outage_fraction: outside,
            within6db_fraction: within_margin_fraction(records, nominal_los_rss_dbm, 6.0),
            full_run_outside_outage_fraction: fraction(records.iter(), |r| r.serving_rss_dbm >= radio.noise_floor_dbm),
            full_run_within6db_fraction: fraction(records.iter(), |r| r.serving_rss_dbm >= nominal_los_rss_dbm - 6.0),
            event_count: intervals.len(),
            mean_event_per: mean(per.iter().flatten().copied()),
            per_blockage_event_per: per,
            discovery_costs: episodes.iter().map(|e| e.measurements).collect(),
            discovery_episodes: episodes,
            total_outage_ms: total_outage_ms(records, radio, tick_ms),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tick(t: u64, state: StateLabel, activity: Activity, rss: f64, occluded: bool) -> TickRecord {
        let radio = RadioConfig::default();
        TickRecord {
            time_ms: t,
            state,
            activity,
            serving_beam_id: (activity != Activity::Idle).then_some(0),
            serving_rss_dbm: rss,
            los_rss_dbm: None,
            ground_rss_dbm: None,
            los_occluded: occluded,
            data_pkt_ok: (activity == Activity::Data).then(|| packet_outcome(rss, &radio, PacketKind::Data)),
            ctrl_ok: packet_outcome(rss, &radio, PacketKind::Control),
        }
    }

    #[test]
    fn packet_thresholds() {
        let r = RadioConfig::default();
        assert!(packet_outcome(-34.2, &r, PacketKind::Data));
        assert!(!packet_outcome(-74.7, &r, PacketKind::Control));
        assert!(packet_outcome(-60.0, &r, PacketKind::Data));
        assert!(!packet_outcome(-60.000001, &r, PacketKind::Data));
        assert!(packet_outcome(-67.0, &r, PacketKind::Control));
        assert!(!packet_outcome(f64::NEG_INFINITY, &r, PacketKind::Control));
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(cdf(&[1.0, 1.0, 2.0]), vec![(1.0, 2.0 / 3.0), (2.0, 1.0)]);
        assert!(cdf(&[]).is_empty());
        assert_eq!(cdf(&[7.5]), vec![(7.5, 1.0)]);
        assert_eq!(cdf(&[3.0, 1.0, 2.0]).last().unwrap().1, 1.0);
    }

    #[test]
    fn fractions() {
        let r = RadioConfig::default();
        let recs = vec![
            tick(0, StateLabel::Los, Activity::Data, -30.0, false),
            tick(1, StateLabel::Los, Activity::Data, -74.0, true),
            tick(2, StateLabel::Nlos, Activity::Data, -35.0, true),
            tick(3, StateLabel::Nlos, Activity::Measurement, -74.0, true),
            tick(4, StateLabel::Reacq, Activity::Idle, f64::NEG_INFINITY, false),
        ];
        assert_eq!(outage_fraction_outside(&recs, &r), 0.25);
        assert_eq!(within_margin_fraction(&recs, -30.0, 6.0), 0.25);
        assert_eq!(within_margin_fraction(&recs, -30.0, 0.0), 0.0);
        assert_eq!(within_margin_fraction(&recs, -30.0, f64::INFINITY), 1.0);
        assert_eq!(total_outage_ms(&recs, &r, 1), 2);
        assert_eq!(outage_fraction_outside(&recs[..1], &r), 1.0);
        assert_eq!(within_margin_fraction(&[], -30.0, 6.0), 1.0);
        let s = RunSummary::from_records(&recs, &[], &[], -30.0, &r, 1);
        assert_eq!(s.full_run_outside_outage_fraction, 0.4);
        assert_eq!(s.full_run_within6db_fraction, 0.4);
    }

    #[test]
    fn event_window_closes_on_return_to_los() {
        let mut recs = Vec::new();
        for t in 0..10 {
            let occluded = (2..5).contains(&t);
            let (state, act, rss) = match t {
                2 => (StateLabel::Los, Activity::Data, -74.0),
                3..=5 => (StateLabel::Nlos, Activity::Data, -35.0),
                6 => (StateLabel::Nlos, Activity::Measurement, -30.0),
                _ => (StateLabel::Los, Activity::Data, -30.0),
            };
            recs.push(tick(t, state, act, rss, occluded));
        }
        let iv = [OcclusionInterval { start_ms: 2, end_ms: 5 }];
        let out = event_outcomes(&recs, &iv, 1);
        assert_eq!(out[0].window_end_ms, 7);
        assert_eq!((out[0].data_ticks, out[0].data_errors), (4, 1));
        assert_eq!(out[0].per, Some(0.25));
    }

    #[test]
    fn event_without_data_has_no_per() {
        let recs: Vec<_> = (0..5)
            .map(|t| tick(t, StateLabel::Reacq, Activity::Idle, f64::NEG_INFINITY, t < 3))
            .collect();
        let per = event_per(&recs, &[OcclusionInterval { start_ms: 0, end_ms: 3 }], 1);
        assert_eq!(per, vec![None]);
    }
}
