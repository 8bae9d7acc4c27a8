//! Per-beam RSS traces: CSV I/O and replay through the same tick driver as
//! the simulator.
//!
//! Format: header `time_ms,rss_b0,...,rss_b{N-1}`, one row per tick, integer
//! times, uniform spacing. The only non-numeric value allowed is `-inf`.

use thiserror::Error;

use crate::channel::median;
use crate::engine::{
    build_protocol, drive, BeamReading, ChannelSource, EngineError, OcclusionInterval, RunOutput, ScenarioConfig,
};
use crate::metrics::RunSummary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("trace has no rows")]
    Empty,
    #[error("bad header: {0}")]
    Header(String),
    #[error("{0}")]
    Shape(String),
}

fn line_err(line: u64, message: impl Into<String>) -> TraceError {
    TraceError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RssTrace {
    tick_ms: u64,
    rows: Vec<(u64, Vec<f64>)>,
}

impl RssTrace {
    /// Checks column count, ordering and spacing.
    pub fn new(tick_ms: u64, rows: Vec<(u64, Vec<f64>)>) -> Result<Self, TraceError> {
        if rows.is_empty() {
            return Err(TraceError::Empty);
        }
        if tick_ms == 0 {
            return Err(TraceError::Shape("tick must be positive".into()));
        }
        let width = rows[0].1.len();
        if width == 0 {
            return Err(TraceError::Shape("trace needs at least one beam column".into()));
        }
        for (i, (t, v)) in rows.iter().enumerate() {
            if v.len() != width {
                return Err(TraceError::Shape(format!(
                    "row {i} has {} beams, expected {width}",
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().find(|x| x.is_nan() || **x == f64::INFINITY) {
                return Err(TraceError::Shape(format!("row {i} holds {bad}")));
            }
            if i > 0 && *t != rows[i - 1].0 + tick_ms {
                return Err(TraceError::Shape(format!(
                    "row {i} at {t} ms breaks the {tick_ms} ms tick"
                )));
            }
        }
        Ok(Self { tick_ms, rows })
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    pub fn beam_count(&self) -> usize {
        self.rows[0].1.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(u64, Vec<f64>)] {
        &self.rows
    }

    pub fn column(&self, beam_id: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |(_, v)| v[beam_id])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_ms");
        for b in 0..self.beam_count() {
            out.push_str(&format!(",rss_b{b}"));
        }
        out.push('\n');
        for (t, v) in &self.rows {
            out.push_str(&t.to_string());
            for x in v {
                out.push(',');
                out.push_str(&format_rss(*x));
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest text that parses back to the same value; `-inf` for the sentinel.
pub fn format_rss(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        x.to_string()
    }
}

pub fn parse_rss(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell == "-inf" {
        return Some(f64::NEG_INFINITY);
    }
    cell.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn parse_trace(text: &str) -> Result<RssTrace, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| TraceError::Header(e.to_string()))?.clone();
    if header.get(0) != Some("time_ms") {
        return Err(TraceError::Header("first column must be time_ms".into()));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("rss_b{i}") {
            return Err(TraceError::Header(format!(
                "column {} is {name:?}, expected rss_b{i}",
                i + 1
            )));
        }
    }
    let width = header.len() - 1;
    if width == 0 {
        return Err(TraceError::Header("no beam columns".into()));
    }
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            line_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width + 1 {
            return Err(line_err(line, format!("{} fields, expected {}", rec.len(), width + 1)));
        }
        let t: u64 = rec[0]
            .parse()
            .map_err(|_| line_err(line, format!("time {:?} is not a non-negative integer", &rec[0])))?;
        if let Some((prev, _)) = rows.last() {
            if t <= *prev {
                return Err(line_err(line, format!("time {t} does not increase (previous {prev})")));
            }
            if rows.len() >= 2 {
                let tick = rows[1].0 - rows[0].0;
                if t - prev != tick {
                    return Err(line_err(
                        line,
                        format!("time step {} differs from tick {tick}", t - prev),
                    ));
                }
            }
        }
        let values = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(b, cell)| {
                parse_rss(cell)
                    .ok_or_else(|| line_err(line, format!("rss_b{b} value {cell:?} is not a finite number or -inf")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((t, values));
    }
    let tick = if rows.len() >= 2 { rows[1].0 - rows[0].0 } else { 1 };
    RssTrace::new(tick, rows)
}

/// The LoS column (highest median) and its median.
fn los_reference(trace: &RssTrace) -> (usize, f64) {
    (0..trace.beam_count())
        .map(|b| {
            let mut col: Vec<f64> = trace.column(b).collect();
            (b, median(&mut col).unwrap_or(f64::NEG_INFINITY))
        })
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (b, m)| if m > best.1 { (b, m) } else { best },
        )
}

struct TraceSource<'a> {
    trace: &'a RssTrace,
    index: usize,
    los_beam: usize,
    occluded_below_dbm: f64,
}

impl ChannelSource for TraceSource<'_> {
    fn beam_count(&self) -> usize {
        self.trace.beam_count()
    }
    fn tick_ms(&self) -> u64 {
        self.trace.tick_ms
    }
    fn tick_count(&self) -> u64 {
        self.trace.len() as u64
    }
    fn time_ms(&self, index: u64) -> u64 {
        self.trace.rows[index as usize].0
    }
    fn seek(&mut self, index: u64) {
        self.index = index as usize;
    }
    fn read(&self, beam_id: usize) -> BeamReading {
        BeamReading {
            rss_dbm: self.trace.rows[self.index].1[beam_id],
            los_rss_dbm: None,
            ground_rss_dbm: None,
        }
    }
    fn los_occluded(&self) -> bool {
        self.trace.rows[self.index].1[self.los_beam] < self.occluded_below_dbm
    }
}

/// Run the configured protocol against a recorded trace.
///
/// Occlusions are inferred from the trace: the column with the highest
/// median is taken as the LoS beam, and a tick is occluded when that column
/// sits more than the blockage-detection drop below its median.
pub fn replay(trace: &RssTrace, config: &ScenarioConfig) -> Result<RunOutput, EngineError> {
    config.radio.validate()?;
    config.protocol_config.validate()?;
    let codebook = config.codebook.build()?;
    if codebook.len() != trace.beam_count() {
        return Err(EngineError::Config(format!(
            "trace has {} beam columns but the codebook has {} beams",
            trace.beam_count(),
            codebook.len()
        )));
    }
    let pose = config.geometry.link()?;
    let (los_beam, nominal) = los_reference(trace);
    let mut source = TraceSource {
        trace,
        index: 0,
        los_beam,
        occluded_below_dbm: nominal - config.protocol_config.blockage_detect_drop_db,
    };
    let mut protocol = build_protocol(
        config.protocol,
        &config.protocol_config,
        &codebook,
        config.thresholds(),
        Some(pose),
        trace.tick_ms,
    )?;
    let (records, actions) = drive(&mut source, protocol.as_mut(), &config.radio)?;
    let mut intervals = Vec::new();
    let mut open: Option<u64> = None;
    for r in &records {
        match (r.los_occluded, open) {
            (true, None) => open = Some(r.time_ms),
            (false, Some(start)) => {
                intervals.push(OcclusionInterval {
                    start_ms: start,
                    end_ms: r.time_ms,
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        intervals.push(OcclusionInterval {
            start_ms: start,
            end_ms: records.last().map_or(start, |r| r.time_ms + trace.tick_ms),
        });
    }
    let summary = RunSummary::from_records(&records, &actions, &intervals, nominal, &config.radio, trace.tick_ms);
    Ok(RunOutput {
        records,
        actions,
        intervals,
        tracks: Vec::new(),
        surface: None,
        summary,
    })
}
