use terra_core::engine::{ground_truth_trace, run_resolved, Activity, ScenarioConfig};
use terra_core::protocol::{ActionEvent, ProtocolSelector, StateLabel};
use terra_core::trace::{parse_trace, replay, RssTrace};

fn short(seed: u64, protocol: ProtocolSelector) -> ScenarioConfig {
    let mut c = ScenarioConfig::concrete_6m();
    c.seed = seed;
    c.duration_ms = 20_000;
    c.protocol = protocol;
    c
}

#[test]
fn export_then_replay_reproduces_decisions() {
    for protocol in [ProtocolSelector::Terra, ProtocolSelector::Baseline] {
        for seed in [2, 5] {
            let cfg = short(seed, protocol);
            let s = cfg.resolve().unwrap();
            let sim = run_resolved(&s).unwrap();
            let text = ground_truth_trace(&s).to_csv();
            let back = replay(&parse_trace(&text).unwrap(), &cfg).unwrap();
            assert_eq!(sim.actions, back.actions);
            let states = |o: &terra_core::engine::RunOutput| -> Vec<(StateLabel, Activity, Option<usize>)> {
                o.records
                    .iter()
                    .map(|r| (r.state, r.activity, r.serving_beam_id))
                    .collect()
            };
            assert_eq!(states(&sim), states(&back));
            let serving = |o: &terra_core::engine::RunOutput| -> Vec<u64> {
                o.records.iter().map(|r| r.serving_rss_dbm.to_bits()).collect()
            };
            assert_eq!(serving(&sim), serving(&back));
            // Overlapping crossings merge into one inferred interval.
            assert!(!back.intervals.is_empty() && back.intervals.len() <= sim.intervals.len());
        }
    }
}

fn unblocked_rows(cfg: &ScenarioConfig, ticks: u64) -> (Vec<f64>, Vec<(u64, Vec<f64>)>) {
    let s = cfg.resolve().unwrap();
    let row: Vec<f64> = s
        .codebook
        .beams()
        .iter()
        .map(|b| s.channel.observe(b, &[]).rss_dbm)
        .collect();
    let rows = (0..ticks).map(|t| (t, row.clone())).collect();
    (row, rows)
}

#[test]
fn constant_trace_settles_in_los() {
    let cfg = short(0, ProtocolSelector::Terra);
    let (_, rows) = unblocked_rows(&cfg, 1_000);
    let out = replay(&RssTrace::new(1, rows).unwrap(), &cfg).unwrap();
    let settled = out.records.iter().position(|r| r.state == StateLabel::Los).unwrap();
    assert!(settled <= 26);
    assert!(out.records[settled..].iter().all(|r| r.state == StateLabel::Los));
    assert_eq!(out.summary.event_count, 0);
}

#[test]
fn dip_on_upper_beams_falls_back_and_reverts() {
    let cfg = short(0, ProtocolSelector::Terra);
    let cb = cfg.codebook.build().unwrap();
    let (_, mut rows) = unblocked_rows(&cfg, 1_000);
    for (t, row) in rows.iter_mut() {
        if (400..600).contains(t) {
            for b in cb.beams().iter().filter(|b| b.zenith_deg >= 0.0) {
                row[b.id] -= 45.0;
            }
        }
    }
    let out = replay(&RssTrace::new(1, rows).unwrap(), &cfg).unwrap();
    let blocked = out
        .actions
        .iter()
        .find(|a| a.event == ActionEvent::BlockageDetected)
        .unwrap();
    assert_eq!(blocked.time_ms, 402);
    let nlos_beam = out.records[403].serving_beam_id.unwrap();
    assert!(cb.beam(nlos_beam).unwrap().zenith_deg < 0.0);
    let revert = out.actions.iter().find(|a| a.event == ActionEvent::Revert).unwrap();
    assert!(revert.time_ms >= 600 && revert.time_ms <= 620, "{revert:?}");
    assert_eq!(out.intervals.len(), 1);
    assert_eq!((out.intervals[0].start_ms, out.intervals[0].end_ms), (400, 600));
    assert!(out.records[403..600]
        .iter()
        .all(|r| r.activity != Activity::Data || r.data_pkt_ok == Some(true)));
}

#[test]
fn wrong_width_is_rejected() {
    let cfg = short(0, ProtocolSelector::Terra);
    let t = RssTrace::new(1, vec![(0, vec![-30.0; 3])]).unwrap();
    assert!(replay(&t, &cfg).is_err());
}
