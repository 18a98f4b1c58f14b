//! Serial and parallel execution over a multi-channel deployment.
//!
//! Work is split into one task per (channel, weighting). Each task filters,
//! detects and extracts its stream independently; the merged records are
//! sorted before writing, so the catalog does not depend on worker count or
//! completion order.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::catalog::{write_catalog, CatalogSummary};
use crate::error::{ChannelFailure, Error, Result};
use crate::pipeline::{extract_series, sort_records, FeatureRecord, RunLedger, SeriesExtraction, SeriesId};
use crate::pulse_detect::{detect_in, DetectorConfig, PulseEvent};
use crate::signal_io::{ChannelManifest, SampleBuffer};
use crate::stream::SampleStream;
use crate::weighting::{design_filter, Weighting};

pub const DEFAULT_CHUNK_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Serial,
    Parallel,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Serial => "serial",
            Mode::Parallel => "parallel",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(Mode::Serial),
            "parallel" => Ok(Mode::Parallel),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?} (expected serial or parallel)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub worker_count: usize,
    pub channels: Vec<u32>,
    pub weightings: Vec<Weighting>,
    pub detector: DetectorConfig,
    /// Length of the chunks read from disk, seconds.
    pub chunk_s: f64,
    pub run_id: String,
    pub output: PathBuf,
}

impl RunConfig {
    /// Serial run over every channel of `manifests` with all three weightings.
    pub fn new(manifests: &[ChannelManifest], output: impl Into<PathBuf>) -> Self {
        Self {
            mode: Mode::Serial,
            worker_count: 1,
            channels: manifests.iter().map(|m| m.channel_id).collect(),
            weightings: Weighting::ALL.to_vec(),
            detector: DetectorConfig::default(),
            chunk_s: DEFAULT_CHUNK_S,
            run_id: "run".into(),
            output: output.into(),
        }
    }

    pub fn parallel(mut self, workers: usize) -> Self {
        self.mode = Mode::Parallel;
        self.worker_count = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidConfig(m));
        if self.worker_count == 0 {
            return invalid("worker count must be positive".into());
        }
        if self.mode == Mode::Serial && self.worker_count != 1 {
            return invalid(format!("serial mode runs one worker, got {}", self.worker_count));
        }
        if self.channels.is_empty() {
            return invalid("no channels selected".into());
        }
        if self.weightings.is_empty() {
            return invalid("no weightings selected".into());
        }
        if !(self.chunk_s.is_finite() && self.chunk_s > 0.0) {
            return invalid(format!("chunk length must be positive, got {}", self.chunk_s));
        }
        if self.run_id.contains(['\n', '\r']) {
            return invalid("run id must be a single line".into());
        }
        self.detector.validate()
    }
}

/// Wall-clock accounting of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeReport {
    pub mode: Mode,
    pub worker_count: usize,
    /// Wall seconds per channel, in channel order.
    pub channel_seconds: Vec<(u32, f64)>,
    pub total_seconds: f64,
    pub channel_hours: f64,
    pub points: u64,
}

impl RuntimeReport {
    pub fn max_channel_seconds(&self) -> f64 {
        self.channel_seconds.iter().map(|&(_, s)| s).fold(0.0, f64::max)
    }

    /// Table-style text followed by `key=value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "RUNTIME PERFORMANCE");
        let _ = writeln!(s, "{:<24}{:>24}{:>24}", "", "Runtime (per channel)", "Runtime (all channels)");
        let label = format!("{} ({} worker{})", self.mode, self.worker_count, plural(self.worker_count));
        let _ = writeln!(
            s,
            "{label:<24}{:>24}{:>24}",
            format!("{:.3} s", self.max_channel_seconds()),
            format!("{:.3} s", self.total_seconds)
        );
        s.push('\n');
        let _ = writeln!(s, "mode={}", self.mode);
        let _ = writeln!(s, "worker_count={}", self.worker_count);
        for (ch, secs) in &self.channel_seconds {
            let _ = writeln!(s, "channel_{ch}_wall_seconds={secs:.6}");
        }
        let _ = writeln!(s, "total_wall_seconds={:.6}", self.total_seconds);
        let _ = writeln!(s, "channel_hours={:.6}", self.channel_hours);
        let _ = writeln!(s, "points={}", self.points);
        s
    }
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

/// Result of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub catalog_path: PathBuf,
    pub catalog: CatalogSummary,
    pub ledger: RunLedger,
    pub report: RuntimeReport,
    /// Detected pulses per (channel, weighting), in channel then weighting order.
    pub pulses: Vec<(SeriesId, u64)>,
}

impl RunOutcome {
    /// Plain-text run summary: ledger, runtime and output metadata.
    pub fn render_summary(&self, config: &RunConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "run_id={}", config.run_id);
        let _ = writeln!(s, "catalog={}", self.catalog_path.display());
        let _ = writeln!(s, "records={}", self.catalog.records);
        let _ = writeln!(s, "points={}", self.catalog.points);
        let _ = writeln!(s, "detection_stream=per-weighting");
        let _ = writeln!(s, "csel_scope=run");
        for (id, n) in &self.pulses {
            let _ = writeln!(s, "pulses_channel_{}_{}={n}", id.channel_id, id.weighting);
        }
        s.push('\n');
        s.push_str(&self.ledger.render());
        s.push('\n');
        s.push_str(&self.report.render());
        s
    }
}

/// Chunks of one channel passed through a weighting filter.
pub fn weighted_stream<'a>(
    manifest: &'a ChannelManifest,
    weighting: Weighting,
    chunk_s: f64,
) -> Result<SampleStream<impl Iterator<Item = Result<SampleBuffer>> + 'a>> {
    let fs = manifest.sample_rate_hz();
    let mut filter = design_filter(weighting.spec(), fs)?;
    let chunks = manifest.chunks(chunk_s).map(move |chunk| {
        let mut chunk = chunk?;
        filter.process(&mut chunk.samples);
        Ok(chunk)
    });
    Ok(SampleStream::new(chunks, fs, manifest.start_time_s()))
}

/// Detects pulses on one weighted channel.
pub fn detect_channel(
    manifest: &ChannelManifest,
    weighting: Weighting,
    detector: &DetectorConfig,
    chunk_s: f64,
) -> Result<Vec<PulseEvent>> {
    detector.validate()?;
    let mut stream = weighted_stream(manifest, weighting, chunk_s)?;
    detect_in(&mut stream, detector)
}

/// Extracts every record of one weighted channel.
pub fn extract_channel(
    manifest: &ChannelManifest,
    weighting: Weighting,
    detector: &DetectorConfig,
    chunk_s: f64,
) -> Result<SeriesExtraction> {
    let mut stream = weighted_stream(manifest, weighting, chunk_s)?;
    let id = SeriesId {
        channel_id: manifest.channel_id,
        weighting,
    };
    extract_series(&mut stream, id, detector)
}

struct TaskResult {
    id: SeriesId,
    started: f64,
    finished: f64,
    outcome: Result<Vec<FeatureRecord>>,
}

fn partial_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    output.with_file_name(name)
}

fn select<'a>(config: &RunConfig, manifests: &'a [ChannelManifest]) -> Result<Vec<&'a ChannelManifest>> {
    let mut selected = Vec::with_capacity(config.channels.len());
    for ch in &config.channels {
        let m = manifests
            .iter()
            .find(|m| m.channel_id == *ch)
            .ok_or_else(|| Error::InvalidConfig(format!("channel {ch} is not in the manifest")))?;
        if selected.iter().any(|s: &&ChannelManifest| s.channel_id == *ch) {
            return Err(Error::InvalidConfig(format!("channel {ch} selected twice")));
        }
        selected.push(m);
    }
    selected.sort_by_key(|m| m.channel_id);
    Ok(selected)
}

/// Runs the full pipeline and writes the catalog to `config.output`.
///
/// Any task failure aborts the run: the error lists every failed channel and
/// no catalog is left behind.
pub fn run(config: &RunConfig, manifests: &[ChannelManifest]) -> Result<RunOutcome> {
    config.validate()?;
    let channels = select(config, manifests)?;
    let mut weightings = config.weightings.clone();
    weightings.sort();
    weightings.dedup();

    let tasks: Vec<(&ChannelManifest, Weighting)> = channels
        .iter()
        .flat_map(|m| weightings.iter().map(move |&w| (*m, w)))
        .collect();

    let clock = Instant::now();
    let run_task = |&(m, w): &(&ChannelManifest, Weighting)| {
        let started = clock.elapsed().as_secs_f64();
        let outcome = extract_channel(m, w, &config.detector, config.chunk_s).map(|s| s.records);
        TaskResult {
            id: SeriesId {
                channel_id: m.channel_id,
                weighting: w,
            },
            started,
            finished: clock.elapsed().as_secs_f64(),
            outcome,
        }
    };
    let results: Vec<TaskResult> = match config.mode {
        Mode::Serial => tasks.iter().map(run_task).collect(),
        Mode::Parallel => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.worker_count)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
            pool.install(|| tasks.par_iter().map(run_task).collect())
        }
    };
    let processing_seconds = clock.elapsed().as_secs_f64();

    let mut failures: Vec<ChannelFailure> = Vec::new();
    let mut records = Vec::new();
    let mut pulses = Vec::with_capacity(results.len());
    for r in &results {
        match &r.outcome {
            Ok(recs) => pulses.push((r.id, recs.len() as u64)),
            Err(e) => {
                if !failures.iter().any(|f| f.channel_id == r.id.channel_id) {
                    failures.push(ChannelFailure {
                        channel_id: r.id.channel_id,
                        message: format!("{} weighting: {e}", r.id.weighting),
                    });
                }
            }
        }
    }
    if !failures.is_empty() {
        let _ = fs::remove_file(&config.output);
        return Err(Error::Run(failures));
    }
    for r in results.iter() {
        if let Ok(recs) = &r.outcome {
            records.extend_from_slice(recs);
        }
    }
    sort_records(&mut records);

    let tmp = partial_path(&config.output);
    let catalog = match write_catalog(&tmp, &config.run_id, &records).and_then(|s| {
        fs::rename(&tmp, &config.output)?;
        Ok(s)
    }) {
        Ok(s) => s,
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
    };

    let channel_seconds: Vec<(u32, f64)> = channels
        .iter()
        .map(|m| {
            let mine = results.iter().filter(|r| r.id.channel_id == m.channel_id);
            let secs = match config.mode {
                Mode::Serial => mine.map(|r| r.finished - r.started).sum(),
                Mode::Parallel => {
                    let (lo, hi) = mine.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.started), hi.max(r.finished)));
                    if lo.is_finite() {
                        hi - lo
                    } else {
                        0.0
                    }
                }
            };
            (m.channel_id, secs)
        })
        .collect();
    let total_seconds = match config.mode {
        Mode::Serial => channel_seconds.iter().map(|&(_, s)| s).sum(),
        Mode::Parallel => processing_seconds,
    };
    let report = RuntimeReport {
        mode: config.mode,
        worker_count: config.worker_count,
        channel_seconds,
        total_seconds,
        channel_hours: channels.iter().map(|m| m.duration_s() / 3600.0).sum(),
        points: catalog.points,
    };
    let counts: Vec<u64> = pulses.iter().map(|&(_, n)| n).collect();
    let ledger = RunLedger::new(weightings.len(), channels.len(), &counts, catalog.points);
    Ok(RunOutcome {
        catalog_path: config.output.clone(),
        catalog,
        ledger,
        report,
        pulses,
    })
}

/// Serial runtime for `total_channels` channels from one measured channel.
pub fn estimate_serial(total_channels: usize, measured_channel_seconds: f64) -> f64 {
    total_channels as f64 * measured_channel_seconds
}

/// Serial versus parallel comparison over the same input.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub serial: RunOutcome,
    pub parallel: RunOutcome,
    pub identical: bool,
}

impl BenchReport {
    /// Serial wall time over parallel wall time.
    pub fn speedup(&self) -> f64 {
        self.serial.report.total_seconds / self.parallel.report.total_seconds
    }

    pub fn render(&self) -> String {
        let (s, p) = (&self.serial.report, &self.parallel.report);
        let first = s.channel_seconds.first().map_or(0.0, |&(_, t)| t);
        let mut out = String::new();
        let _ = writeln!(out, "RUNTIME PERFORMANCE");
        let _ = writeln!(out, "{:<28}{:>24}{:>24}", "", "Runtime (one channel)", "Runtime (all channels)");
        let _ = writeln!(
            out,
            "{:<28}{:>24}{:>24}",
            "Serial Method",
            format!("{first:.3} s"),
            format!("{:.3} s", s.total_seconds)
        );
        let _ = writeln!(
            out,
            "{:<28}{:>24}{:>24}",
            format!("Parallel Method ({} workers)", p.worker_count),
            format!("{:.3} s", p.max_channel_seconds()),
            format!("{:.3} s", p.total_seconds)
        );
        out.push('\n');
        let _ = writeln!(out, "serial_seconds={:.6}", s.total_seconds);
        let _ = writeln!(
            out,
            "serial_estimate_seconds={:.6}",
            estimate_serial(s.channel_seconds.len(), first)
        );
        let _ = writeln!(out, "parallel_seconds={:.6}", p.total_seconds);
        let _ = writeln!(out, "workers={}", p.worker_count);
        let _ = writeln!(out, "speedup={:.3}", self.speedup());
        let _ = writeln!(out, "parallel_over_serial={:.3}", p.total_seconds / s.total_seconds);
        let _ = writeln!(out, "available_cores={}", available_cores());
        let mark = if self.identical { "✓" } else { "✗" };
        let _ = writeln!(out, "identical_catalogs={} {mark}", self.identical);
        out
    }
}

/// Logical cores visible to this process.
pub fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}{ext}"))
}

/// Runs serially, then with `config.worker_count` workers, and compares the catalogs byte for byte.
///
/// Catalogs go to `<output stem>.serial.<ext>` and `<output stem>.parallel.<ext>`.
pub fn bench(config: &RunConfig, manifests: &[ChannelManifest]) -> Result<BenchReport> {
    let mut serial_cfg = config.clone();
    serial_cfg.mode = Mode::Serial;
    serial_cfg.worker_count = 1;
    serial_cfg.output = with_suffix(&config.output, "serial");
    let mut parallel_cfg = config.clone();
    parallel_cfg.mode = Mode::Parallel;
    parallel_cfg.output = with_suffix(&config.output, "parallel");

    let serial = run(&serial_cfg, manifests)?;
    let parallel = run(&parallel_cfg, manifests)?;
    let identical = fs::read(&serial.catalog_path)? == fs::read(&parallel.catalog_path)?;
    Ok(BenchReport {
        serial,
        parallel,
        identical,
    })
}
