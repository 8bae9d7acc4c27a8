//! The four subcommands.

use std::path::Path;

use serde::Serialize;
use terra_core::channel::{calibrate_surface, default_calibration_grid, ChannelError, SurfaceKind};
use terra_core::engine::{ground_truth_trace, run_resolved, EngineError, RunOutput, ScenarioConfig};
use terra_core::metrics::{event_outcomes, mean, EventOutcome};
use terra_core::protocol::ProtocolSelector;
use terra_core::trace::{parse_trace, replay};

use crate::bundle::{self, Files, Metadata};
use crate::config::{self, Overrides};
use crate::{CliError, Command, ScenarioArgs, WORKERS_ENV};

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            scenario,
            out,
            export_trace,
        } => cmd_run(&scenario, &out, export_trace.as_deref()),
        Command::Compare { scenario, out, seeds } => cmd_compare(&scenario, &seeds, &out),
        Command::Calibrate {
            surface,
            target,
            config,
        } => cmd_calibrate(&surface, target, config.as_deref()),
        Command::Replay { trace, scenario, out } => cmd_replay(&trace, &scenario, &out),
    }
}

fn engine_err(e: EngineError) -> CliError {
    match e {
        EngineError::Config(m) => CliError::Config(m),
        e @ EngineError::Invariant { .. } => CliError::Invariant(e.to_string()),
        e => CliError::Runtime(e.to_string()),
    }
}

fn simulate(cfg: &ScenarioConfig) -> Result<(terra_core::engine::ResolvedScenario, RunOutput), CliError> {
    let scenario = cfg.resolve().map_err(engine_err)?;
    let out = run_resolved(&scenario).map_err(engine_err)?;
    Ok((scenario, out))
}

fn report(out_dir: &Path, files: &Files) -> Result<(), CliError> {
    for path in files.write_to(out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_run(args: &ScenarioArgs, out_dir: &Path, export_trace: Option<&Path>) -> Result<(), CliError> {
    let cfg = config::resolve(args.config.as_deref(), &args.overrides())?;
    let (scenario, out) = simulate(&cfg)?;
    let files = bundle::render(&out, &cfg, "run", None);
    if let Some(path) = export_trace {
        let name = path
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("--export-trace {} has no file name", path.display())))?;
        let csv = ground_truth_trace(&scenario).to_csv();
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let mut trace = Files::default();
        trace.add(name.to_string_lossy(), csv);
        report(dir, &trace)?;
    }
    let s = &out.summary;
    println!(
        "{} seed {}: {} events, outside-outage {:.3}, within-6dB {:.3}, mean event PER {}",
        cfg.protocol,
        cfg.seed,
        s.event_count,
        s.outside_outage_fraction,
        s.within6db_fraction,
        s.mean_event_per.map_or("n/a".to_string(), |p| format!("{p:.3}"))
    );
    report(out_dir, &files)
}

/// Comma-separated seeds and inclusive `a-b` ranges, sorted and deduplicated.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = |part: &str| CliError::Usage(format!("bad seed {part:?} in --seeds"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
                if b < a {
                    return Err(bad(part));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.is_empty() {
        return Err(CliError::Usage("--seeds is empty".into()));
    }
    Ok(seeds)
}

fn worker_count() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedEvent {
    pub seed: u64,
    pub event: usize,
    pub occlusion_start_ms: u64,
    pub occlusion_end_ms: u64,
    pub terra_per: Option<f64>,
    pub baseline_per: Option<f64>,
}

struct SeedPair {
    seed: u64,
    terra: RunOutput,
    baseline: RunOutput,
    terra_events: Vec<EventOutcome>,
    baseline_events: Vec<EventOutcome>,
}

fn run_pair(base: &ScenarioConfig, seed: u64) -> Result<SeedPair, CliError> {
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.protocol = ProtocolSelector::Terra;
    let (_, terra) = simulate(&cfg)?;
    cfg.protocol = ProtocolSelector::Baseline;
    let (_, baseline) = simulate(&cfg)?;
    let tick = cfg.tick_ms;
    Ok(SeedPair {
        seed,
        terra_events: event_outcomes(&terra.records, &terra.intervals, tick),
        baseline_events: event_outcomes(&baseline.records, &baseline.intervals, tick),
        terra,
        baseline,
    })
}

#[derive(Debug, Serialize)]
pub struct ProtocolAggregate {
    pub mean_outside_outage_fraction: f64,
    pub mean_within6db_fraction: f64,
    /// Over every event with data ticks, pooled across seeds.
    pub mean_event_per: Option<f64>,
    pub total_outage_ms: u64,
    pub events_with_per: usize,
}

impl ProtocolAggregate {
    fn of<'a>(runs: impl Iterator<Item = &'a RunOutput> + Clone) -> Self {
        Self {
            mean_outside_outage_fraction: mean(runs.clone().map(|r| r.summary.outside_outage_fraction)).unwrap_or(1.0),
            mean_within6db_fraction: mean(runs.clone().map(|r| r.summary.within6db_fraction)).unwrap_or(1.0),
            mean_event_per: mean(
                runs.clone()
                    .flat_map(|r| r.summary.per_blockage_event_per.iter().flatten().copied()),
            ),
            total_outage_ms: runs.clone().map(|r| r.summary.total_outage_ms).sum(),
            events_with_per: runs
                .map(|r| r.summary.per_blockage_event_per.iter().flatten().count())
                .sum(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CompareDoc<'a> {
    pub metadata: Metadata,
    pub config: &'a ScenarioConfig,
    pub seeds: &'a [u64],
    pub events: usize,
    pub terra: ProtocolAggregate,
    pub baseline: ProtocolAggregate,
    /// Baseline minus Terra.
    pub delta_mean_event_per: Option<f64>,
    pub delta_outside_outage_fraction: f64,
    pub violations: &'a [String],
}

fn violations(pair: &SeedPair) -> Vec<String> {
    let mut v = Vec::new();
    let (t, b) = (&pair.terra.summary, &pair.baseline.summary);
    if t.outside_outage_fraction < b.outside_outage_fraction {
        v.push(format!(
            "seed {}: terra outside-outage {} below baseline {}",
            pair.seed, t.outside_outage_fraction, b.outside_outage_fraction
        ));
    }
    if t.total_outage_ms > b.total_outage_ms {
        v.push(format!(
            "seed {}: terra outage {} ms above baseline {} ms",
            pair.seed, t.total_outage_ms, b.total_outage_ms
        ));
    }
    if pair.terra.intervals != pair.baseline.intervals {
        v.push(format!(
            "seed {}: occlusion intervals differ between protocols",
            pair.seed
        ));
        return v;
    }
    for (i, (te, be)) in pair.terra_events.iter().zip(&pair.baseline_events).enumerate() {
        if let (Some(tp), Some(bp)) = (te.per, be.per) {
            if tp > bp {
                v.push(format!(
                    "seed {} event {i}: terra PER {tp} above baseline {bp}",
                    pair.seed
                ));
            }
        }
    }
    v
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn cmd_compare(args: &ScenarioArgs, seeds: &str, out_dir: &Path) -> Result<(), CliError> {
    let seeds = parse_seeds(seeds)?;
    let base = config::resolve(args.config.as_deref(), &args.overrides())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start workers: {e}")))?;
    // `collect` keeps seed order regardless of completion order.
    let pairs: Vec<SeedPair> = pool.install(|| {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| run_pair(&base, s)).collect::<Result<_, _>>()
    })?;

    let mut paired = Vec::new();
    let mut problems = Vec::new();
    for pair in &pairs {
        problems.extend(violations(pair));
        for (i, (te, be)) in pair.terra_events.iter().zip(&pair.baseline_events).enumerate() {
            paired.push(PairedEvent {
                seed: pair.seed,
                event: i,
                occlusion_start_ms: te.occlusion_start_ms,
                occlusion_end_ms: te.occlusion_end_ms,
                terra_per: te.per,
                baseline_per: be.per,
            });
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed",
        "event",
        "occlusion_start_ms",
        "occlusion_end_ms",
        "terra_per",
        "baseline_per",
    ])
    .expect("in-memory write");
    for p in &paired {
        w.write_record([
            p.seed.to_string(),
            p.event.to_string(),
            p.occlusion_start_ms.to_string(),
            p.occlusion_end_ms.to_string(),
            opt(p.terra_per),
            opt(p.baseline_per),
        ])
        .expect("in-memory write");
    }
    let paired_csv = w.into_inner().expect("in-memory flush");

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed",
        "protocol",
        "event_count",
        "outside_outage_fraction",
        "within6db_fraction",
        "mean_event_per",
        "total_outage_ms",
        "discovery_episodes",
    ])
    .expect("in-memory write");
    for pair in &pairs {
        for (name, run) in [("terra", &pair.terra), ("baseline", &pair.baseline)] {
            let s = &run.summary;
            w.write_record([
                pair.seed.to_string(),
                name.to_string(),
                s.event_count.to_string(),
                s.outside_outage_fraction.to_string(),
                s.within6db_fraction.to_string(),
                opt(s.mean_event_per),
                s.total_outage_ms.to_string(),
                s.discovery_episodes.len().to_string(),
            ])
            .expect("in-memory write");
        }
    }
    let seeds_csv = w.into_inner().expect("in-memory flush");

    let terra = ProtocolAggregate::of(pairs.iter().map(|p| &p.terra));
    let baseline = ProtocolAggregate::of(pairs.iter().map(|p| &p.baseline));
    let doc = CompareDoc {
        metadata: Metadata::now("compare"),
        config: &base,
        seeds: &seeds,
        events: paired.len(),
        delta_mean_event_per: baseline.mean_event_per.zip(terra.mean_event_per).map(|(b, t)| b - t),
        delta_outside_outage_fraction: terra.mean_outside_outage_fraction - baseline.mean_outside_outage_fraction,
        terra,
        baseline,
        violations: &problems,
    };
    let mut json = serde_json::to_vec_pretty(&doc).expect("summary serializes");
    json.push(b'\n');

    let mut files = Files::default();
    files.add("paired_events.csv", paired_csv);
    files.add("seeds.csv", seeds_csv);
    files.add(bundle::SUMMARY, json);
    report(out_dir, &files)?;

    let fmt = |p: Option<f64>| p.map_or("n/a".to_string(), |p| format!("{p:.3}"));
    println!(
        "{} seeds, {} events: mean event PER terra {} baseline {}; outside-outage terra {:.3} baseline {:.3}",
        seeds.len(),
        doc.events,
        fmt(doc.terra.mean_event_per),
        fmt(doc.baseline.mean_event_per),
        doc.terra.mean_outside_outage_fraction,
        doc.baseline.mean_outside_outage_fraction
    );
    if problems.is_empty() {
        Ok(())
    } else {
        for p in &problems {
            eprintln!("violation: {p}");
        }
        Err(CliError::Invariant(format!(
            "{} paired comparison violation(s)",
            problems.len()
        )))
    }
}

pub fn parse_surface(s: &str) -> Result<SurfaceKind, CliError> {
    toml::Value::String(s.to_string()).try_into().map_err(|_| {
        CliError::Usage(format!(
            "unknown surface {s:?} (concrete, gravel, ceramic-tile, custom)"
        ))
    })
}

pub fn cmd_calibrate(surface: &str, target: Option<f64>, config_source: Option<&str>) -> Result<(), CliError> {
    let kind = parse_surface(surface)?;
    let target = target
        .or_else(|| kind.measured_additional_loss_db())
        .ok_or_else(|| CliError::Usage(format!("surface {surface} has no measured loss; pass --target")))?;
    let radio = match config_source {
        Some(_) => config::resolve(config_source, &Overrides::default())?.radio,
        None => Default::default(),
    };
    match calibrate_surface(kind, &radio, &default_calibration_grid(), target) {
        Ok(rep) => {
            println!("surface {surface}");
            println!("target_additional_loss_db {}", rep.target_db);
            println!("reflection_loss_db {:.6}", rep.surface.reflection_loss_db);
            println!("median_additional_loss_db {:.6}", rep.median_additional_loss_db);
            Ok(())
        }
        Err(e @ ChannelError::CalibrationInput) => Err(CliError::Usage(e.to_string())),
        Err(e) => Err(CliError::Runtime(format!("calibration failed: {e}"))),
    }
}

pub fn cmd_replay(trace_path: &Path, args: &ScenarioArgs, out_dir: &Path) -> Result<(), CliError> {
    let cfg = config::resolve(args.config.as_deref(), &args.overrides())?;
    let text = std::fs::read_to_string(trace_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", trace_path.display())))?;
    let trace = parse_trace(&text).map_err(|e| CliError::Config(format!("{}: {e}", trace_path.display())))?;
    let out = replay(&trace, &cfg).map_err(engine_err)?;
    let files = bundle::render(&out, &cfg, "replay", Some(trace_path.display().to_string()));
    println!(
        "{} replay of {} ticks: {} inferred events, outside-outage {:.3}",
        cfg.protocol,
        trace.len(),
        out.summary.event_count,
        out.summary.outside_outage_fraction
    );
    report(out_dir, &files)
}
