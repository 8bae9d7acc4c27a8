//! Output bundle: per-tick, per-event and per-action CSV tables, CDF tables,
//! the resolved scenario and a JSON summary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use terra_core::engine::{RunOutput, ScenarioConfig, TickRecord};
use terra_core::metrics::{cdf, event_outcomes, is_affected, RunSummary};
use terra_core::protocol::Action;
use terra_core::trace::format_rss;

use crate::config::to_toml;
use crate::CliError;

pub const TICKS: &str = "ticks.csv";
pub const EVENTS: &str = "events.csv";
pub const ACTIONS: &str = "actions.csv";
pub const CDF_EVENT_PER: &str = "cdf_event_per.csv";
pub const CDF_AFFECTED_RSS: &str = "cdf_affected_rss.csv";
pub const SUMMARY: &str = "summary.json";
pub const CONFIG: &str = "config.toml";

/// In-memory files, written only once everything has been rendered.
#[derive(Debug, Default)]
pub struct Files(pub Vec<(String, Vec<u8>)>);

impl Files {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.0.push((name.into(), bytes.into()));
    }

    /// Each file lands atomically: written to a temporary sibling, then renamed.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let mut staged = Vec::with_capacity(self.0.len());
        for (name, bytes) in &self.0 {
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| CliError::Runtime(format!("cannot stage {name}: {e}")))?;
            tmp.write_all(bytes)
                .and_then(|_| tmp.flush())
                .map_err(|e| CliError::Runtime(format!("cannot write {name}: {e}")))?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn opt_rss(v: Option<f64>) -> String {
    v.map_or_else(String::new, format_rss)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn ticks_csv(records: &[TickRecord]) -> Vec<u8> {
    csv_bytes(
        &[
            "time_ms",
            "state",
            "activity",
            "serving_beam_id",
            "serving_rss_dbm",
            "los_rss_dbm",
            "ground_rss_dbm",
            "los_occluded",
            "data_pkt_ok",
            "ctrl_ok",
        ],
        records.iter().map(|r| {
            vec![
                r.time_ms.to_string(),
                r.state.to_string(),
                r.activity.as_str().to_string(),
                opt(r.serving_beam_id),
                format_rss(r.serving_rss_dbm),
                opt_rss(r.los_rss_dbm),
                opt_rss(r.ground_rss_dbm),
                r.los_occluded.to_string(),
                opt(r.data_pkt_ok),
                r.ctrl_ok.to_string(),
            ]
        }),
    )
}

pub fn actions_csv(actions: &[Action]) -> Vec<u8> {
    csv_bytes(
        &["time_ms", "state", "event", "beam_id", "rss_dbm"],
        actions.iter().map(|a| {
            vec![
                a.time_ms.to_string(),
                a.state.to_string(),
                a.event.to_string(),
                opt(a.beam_id),
                opt_rss(a.rss_dbm),
            ]
        }),
    )
}

pub fn events_csv(out: &RunOutput, tick_ms: u64) -> Vec<u8> {
    csv_bytes(
        &[
            "event",
            "occlusion_start_ms",
            "occlusion_end_ms",
            "occlusion_ms",
            "window_end_ms",
            "data_ticks",
            "data_errors",
            "per",
        ],
        event_outcomes(&out.records, &out.intervals, tick_ms)
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                vec![
                    i.to_string(),
                    e.occlusion_start_ms.to_string(),
                    e.occlusion_end_ms.to_string(),
                    (e.occlusion_end_ms - e.occlusion_start_ms).to_string(),
                    e.window_end_ms.to_string(),
                    e.data_ticks.to_string(),
                    e.data_errors.to_string(),
                    opt(e.per),
                ]
            }),
    )
}

pub fn cdf_csv(value_name: &str, values: &[f64]) -> Vec<u8> {
    csv_bytes(
        &[value_name, "fraction"],
        cdf(values).into_iter().map(|(v, f)| vec![format_rss(v), f.to_string()]),
    )
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub generated_at_unix_s: u64,
}

impl Metadata {
    pub fn now(command: &str) -> Self {
        Self {
            tool: "terra",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            generated_at_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SummaryDoc<'a> {
    pub metadata: Metadata,
    pub seed: u64,
    pub protocol: String,
    pub config: &'a ScenarioConfig,
    /// Reflection loss the surface resolved to; absent for replays.
    pub surface_reflection_loss_db: Option<f64>,
    pub trace: Option<String>,
    pub summary: &'a RunSummary,
}

/// Render a run into bundle files.
pub fn render(out: &RunOutput, cfg: &ScenarioConfig, command: &str, trace: Option<String>) -> Files {
    let mut files = Files::default();
    let tick = out
        .records
        .get(1)
        .map_or(cfg.tick_ms, |r| r.time_ms - out.records[0].time_ms);
    files.add(TICKS, ticks_csv(&out.records));
    files.add(EVENTS, events_csv(out, tick));
    files.add(ACTIONS, actions_csv(&out.actions));
    let pers: Vec<f64> = out.summary.per_blockage_event_per.iter().flatten().copied().collect();
    files.add(CDF_EVENT_PER, cdf_csv("event_per", &pers));
    let rel: Vec<f64> = out
        .records
        .iter()
        .filter(|r| is_affected(r))
        .map(|r| r.serving_rss_dbm - out.summary.nominal_los_rss_dbm)
        .collect();
    files.add(CDF_AFFECTED_RSS, cdf_csv("rss_rel_nominal_db", &rel));
    let doc = SummaryDoc {
        metadata: Metadata::now(command),
        seed: cfg.seed,
        protocol: cfg.protocol.to_string(),
        config: cfg,
        surface_reflection_loss_db: out.surface.map(|s| s.reflection_loss_db),
        trace,
        summary: &out.summary,
    };
    let mut json = serde_json::to_vec_pretty(&doc).expect("summary serializes");
    json.push(b'\n');
    files.add(SUMMARY, json);
    files.add(CONFIG, to_toml(cfg));
    files
}
