use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use pulsecat::pulse_detect::DetectorConfig;
use pulsecat::runner::{self, Mode, RunConfig, DEFAULT_CHUNK_S};
use pulsecat::signal_io::{open_manifest, ChannelManifest};
use pulsecat::synth::{self, SurveySpec};
use pulsecat::weighting::{design_filter, Weighting};

#[derive(Debug, Parser)]
#[command(name = "pulsecat", version, about = "Airgun pulse detection and acoustic feature catalogs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic survey: WAV files, manifest.txt and ground_truth.csv
    Synth(SynthArgs),
    /// Detect pulses and write the event list as CSV
    Detect(DetectArgs),
    /// Run the full feature extraction and write the catalog
    Extract(ExtractArgs),
    /// Run serially, then in parallel, and compare runtime and output
    Bench(ExtractArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// key=value file supplying defaults for any flag below; flags take precedence
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DetectorArgs {
    /// Detection threshold, dB re 1 μPa [default: 140]
    #[arg(long, value_name = "DB")]
    threshold_db: Option<f64>,
    /// Minimum time between accepted peaks, s [default: 5]
    #[arg(long, value_name = "S")]
    min_ipi_s: Option<f64>,
    /// Direct-pulse search window length, s [default: 1.5]
    #[arg(long, value_name = "S")]
    search_window_s: Option<f64>,
    /// Part of the search window before the peak, s [default: 0.5]
    #[arg(long, value_name = "S")]
    pre_peak_s: Option<f64>,
    /// Length of the chunks read from disk, s [default: 60]
    #[arg(long, value_name = "S")]
    chunk_s: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Output directory (required)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of channels [default: 1]
    #[arg(long)]
    channels: Option<u32>,
    /// Recording length per channel, s [default: 60]
    #[arg(long, value_name = "S")]
    duration_s: Option<f64>,
    /// Sample rate, Hz [default: 16000]
    #[arg(long, value_name = "HZ")]
    sample_rate_hz: Option<u32>,
    /// Inter-pulse interval, s [default: 10]
    #[arg(long, value_name = "S")]
    ipi_s: Option<f64>,
    /// Onset of the first pulse, s [default: 1]
    #[arg(long, value_name = "S")]
    first_pulse_s: Option<f64>,
    /// Onset delay added per channel index, s [default: 0.25]
    #[arg(long, value_name = "S")]
    channel_delay_s: Option<f64>,
    /// Peak pressure of each pulse, μPa [default: 1e8]
    #[arg(long, value_name = "UPA")]
    peak_upa: Option<f64>,
    /// Attack time, s [default: 0.004]
    #[arg(long, value_name = "S")]
    attack_s: Option<f64>,
    /// Decay constant of the direct pulse, s [default: 0.05]
    #[arg(long, value_name = "S")]
    decay_s: Option<f64>,
    /// Oscillation frequency of the direct pulse, Hz [default: 120]
    #[arg(long, value_name = "HZ")]
    carrier_hz: Option<f64>,
    /// Reverberation tail amplitude, μPa [default: 3e5]
    #[arg(long, value_name = "UPA")]
    tail_level_upa: Option<f64>,
    /// Reverberation tail decay constant, s [default: 3]
    #[arg(long, value_name = "S")]
    tail_decay_s: Option<f64>,
    /// White noise RMS, μPa [default: 0]
    #[arg(long, value_name = "UPA")]
    noise_rms_upa: Option<f64>,
    /// Hydrophone sensitivity at full scale, dB re 1 μPa [default: 170]
    #[arg(long, value_name = "DB")]
    sensitivity_db: Option<f64>,
    /// Significant bits per sample, 12 or 16 [default: 16]
    #[arg(long)]
    bits: Option<u16>,
    /// Split each channel into files of this length, s [default: one file]
    #[arg(long, value_name = "S")]
    file_duration_s: Option<f64>,
    /// Random seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Manifest listing the audio files (required)
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Output CSV of pulse events (required)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Comma-separated channel ids [default: all]
    #[arg(long, value_name = "IDS")]
    channels: Option<String>,
    /// Comma-separated weightings from Linear, LFC, MFC [default: Linear]
    #[arg(long, value_name = "LIST")]
    weightings: Option<String>,
    #[command(flatten)]
    detector: DetectorArgs,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Manifest listing the audio files (required)
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Output catalog CSV (required)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Run summary path [default: <out>.summary.txt]
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
    /// serial or parallel [default: serial for extract, parallel for bench]
    #[arg(long)]
    mode: Option<String>,
    /// Worker threads in parallel mode [default: available cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated channel ids [default: all]
    #[arg(long, value_name = "IDS")]
    channels: Option<String>,
    /// Comma-separated weightings from Linear, LFC, MFC [default: Linear,LFC,MFC]
    #[arg(long, value_name = "LIST")]
    weightings: Option<String>,
    /// Identifier written in every catalog row [default: run]
    #[arg(long)]
    run_id: Option<String>,
    /// Also write the realized filter coefficients to this file [default: not written]
    #[arg(long, value_name = "FILE")]
    dump_filters: Option<PathBuf>,
    #[command(flatten)]
    detector: DetectorArgs,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<pulsecat::Error> for Failure {
    fn from(e: pulsecat::Error) -> Self {
        match e {
            pulsecat::Error::InvalidConfig(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

/// Flag, config-file and default layering; records where each value came from.
struct Settings {
    file: BTreeMap<String, String>,
    used: Vec<(String, String, &'static str)>,
}

impl Settings {
    fn load(arg: &ConfigArg, allowed: &[&str]) -> CliResult<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = &arg.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Failure::Usage(format!("{}:{}: expected key=value", path.display(), i + 1))
                })?;
                let key = k.trim().replace('-', "_");
                if !allowed.contains(&key.as_str()) {
                    return Err(Failure::Usage(format!(
                        "{}:{}: unknown key {key:?} for this subcommand",
                        path.display(),
                        i + 1
                    )));
                }
                file.insert(key, v.trim().to_string());
            }
        }
        Ok(Self { file, used: Vec::new() })
    }

    fn raw(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        let (value, source) = match flag {
            Some(v) => (v, "flag"),
            None => (self.file.get(key)?.clone(), "config"),
        };
        self.used.push((key.into(), value.clone(), source));
        Some(value)
    }

    fn opt<T: FromStr + ToString>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>> {
        match self.raw(key, flag.map(|v| v.to_string())) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("invalid value {v:?} for {key}"))),
            None => Ok(None),
        }
    }

    fn get<T: FromStr + ToString>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        match self.opt(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.used.push((key.into(), default.to_string(), "default"));
                Ok(default)
            }
        }
    }

    fn required(&mut self, key: &str, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        self.raw(key, flag.map(|p| p.display().to_string()))
            .map(PathBuf::from)
            .ok_or_else(|| Failure::Usage(format!("missing required --{}", key.replace('_', "-"))))
    }

    fn render(&self) -> String {
        let mut s = String::from("# effective configuration\n");
        for (k, v, source) in &self.used {
            let _ = writeln!(s, "{k}={v}  # {source}");
        }
        s
    }
}

const DETECTOR_KEYS: [&str; 5] = ["threshold_db", "min_ipi_s", "search_window_s", "pre_peak_s", "chunk_s"];

fn detector(settings: &mut Settings, args: DetectorArgs) -> CliResult<(DetectorConfig, f64)> {
    let d = DetectorConfig::default();
    let cfg = DetectorConfig {
        threshold_db: settings.get("threshold_db", args.threshold_db, d.threshold_db)?,
        min_ipi_s: settings.get("min_ipi_s", args.min_ipi_s, d.min_ipi_s)?,
        search_window_s: settings.get("search_window_s", args.search_window_s, d.search_window_s)?,
        pre_peak_s: settings.get("pre_peak_s", args.pre_peak_s, d.pre_peak_s)?,
    };
    cfg.validate()?;
    let chunk_s = settings.get("chunk_s", args.chunk_s, DEFAULT_CHUNK_S)?;
    Ok((cfg, chunk_s))
}

fn parse_list<T: FromStr>(key: &str, list: &str) -> CliResult<Vec<T>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Failure::Usage(format!("invalid {key} entry {s:?}"))))
        .collect()
}

fn select_channels(settings: &mut Settings, flag: Option<String>, manifests: &[ChannelManifest]) -> CliResult<Vec<u32>> {
    match settings.raw("channels", flag) {
        Some(list) => {
            let ids: Vec<u32> = parse_list("channels", &list)?;
            if ids.is_empty() {
                return Err(Failure::Usage("channel list is empty".into()));
            }
            Ok(ids)
        }
        None => Ok(manifests.iter().map(|m| m.channel_id).collect()),
    }
}

fn select_weightings(settings: &mut Settings, flag: Option<String>, default: &[Weighting]) -> CliResult<Vec<Weighting>> {
    let list = settings.raw("weightings", flag);
    let ws: Vec<Weighting> = match list {
        Some(list) => parse_list("weightings", &list)?,
        None => default.to_vec(),
    };
    if ws.is_empty() {
        return Err(Failure::Usage("weighting list is empty".into()));
    }
    Ok(ws)
}

fn load_manifests(path: &Path) -> CliResult<Vec<ChannelManifest>> {
    open_manifest(path).map_err(|e| Failure::Runtime(e.to_string()))
}

const SYNTH_KEYS: [&str; 18] = [
    "out",
    "channels",
    "duration_s",
    "sample_rate_hz",
    "ipi_s",
    "first_pulse_s",
    "channel_delay_s",
    "peak_upa",
    "attack_s",
    "decay_s",
    "carrier_hz",
    "tail_level_upa",
    "tail_decay_s",
    "noise_rms_upa",
    "sensitivity_db",
    "bits",
    "file_duration_s",
    "seed",
];

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let mut s = Settings::load(&args.config, &SYNTH_KEYS)?;
    let out = s.required("out", args.out)?;
    let d = SurveySpec::default();
    let mut spec = SurveySpec {
        channel_count: s.get("channels", args.channels, d.channel_count)?,
        duration_s: s.get("duration_s", args.duration_s, d.duration_s)?,
        sample_rate_hz: s.get("sample_rate_hz", args.sample_rate_hz, d.sample_rate_hz)?,
        ipi_s: s.get("ipi_s", args.ipi_s, d.ipi_s)?,
        first_pulse_s: s.get("first_pulse_s", args.first_pulse_s, d.first_pulse_s)?,
        channel_delay_s: s.get("channel_delay_s", args.channel_delay_s, d.channel_delay_s)?,
        noise_rms_upa: s.get("noise_rms_upa", args.noise_rms_upa, d.noise_rms_upa)?,
        sensitivity_db: s.get("sensitivity_db", args.sensitivity_db, d.sensitivity_db)?,
        bits: s.get("bits", args.bits, d.bits)?,
        file_duration_s: s.opt("file_duration_s", args.file_duration_s)?,
        seed: s.get("seed", args.seed, d.seed)?,
        ..d
    };
    let p = &mut spec.pulse;
    p.peak_upa = s.get("peak_upa", args.peak_upa, p.peak_upa)?;
    p.attack_s = s.get("attack_s", args.attack_s, p.attack_s)?;
    p.decay_s = s.get("decay_s", args.decay_s, p.decay_s)?;
    p.carrier_hz = s.get("carrier_hz", args.carrier_hz, p.carrier_hz)?;
    p.tail_level_upa = s.get("tail_level_upa", args.tail_level_upa, p.tail_level_upa)?;
    p.tail_decay_s = s.get("tail_decay_s", args.tail_decay_s, p.tail_decay_s)?;
    spec.validate()?;
    let survey = synth::generate(&spec, &out)?;
    println!(
        "wrote {} file(s), {} pulse(s); manifest {}",
        survey.wav_files.len(),
        survey.pulses.len(),
        survey.manifest.display()
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.digits$}"))
}

fn cmd_detect(args: DetectArgs) -> CliResult<()> {
    let mut keys = vec!["manifest", "out", "channels", "weightings"];
    keys.extend(DETECTOR_KEYS);
    let mut s = Settings::load(&args.config, &keys)?;
    let manifest = s.required("manifest", args.manifest)?;
    let out = s.required("out", args.out)?;
    let (cfg, chunk_s) = detector(&mut s, args.detector)?;
    let manifests = load_manifests(&manifest)?;
    let channels = select_channels(&mut s, args.channels, &manifests)?;
    let weightings = select_weightings(&mut s, args.weightings, &[Weighting::Linear])?;

    let mut csv = String::from("channel_id,weighting,pulse_index,t_a_s,p_a_upa,p_a_db,t_b_s,p_b_upa,p_b_db,p_pp_db,ipi_s\n");
    for ch in &channels {
        let m = manifests
            .iter()
            .find(|m| m.channel_id == *ch)
            .ok_or_else(|| Failure::Usage(format!("channel {ch} is not in the manifest")))?;
        for &w in &weightings {
            let events = runner::detect_channel(m, w, &cfg, chunk_s)?;
            eprintln!("channel {ch} {w}: {} pulse(s)", events.len());
            for (i, e) in events.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{ch},{w},{i},{:.9},{:.6},{},{:.9},{:.6},{},{},{}",
                    e.t_a_s,
                    e.p_a_upa,
                    fmt_opt(e.p_a_db, 6),
                    e.t_b_s,
                    e.p_b_upa,
                    fmt_opt(e.p_b_db, 6),
                    fmt_opt(e.p_pp_db, 6),
                    fmt_opt(e.ipi_s, 9)
                );
            }
        }
    }
    fs::write(&out, csv).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", out.display())))?;
    Ok(())
}

fn default_summary(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".summary.txt");
    out.with_file_name(name)
}

struct Prepared {
    config: RunConfig,
    manifests: Vec<ChannelManifest>,
    summary: PathBuf,
    dump_filters: Option<PathBuf>,
    settings: Settings,
}

fn run_config(args: ExtractArgs, bench: bool) -> CliResult<Prepared> {
    let mut keys = vec![
        "manifest",
        "out",
        "summary",
        "mode",
        "workers",
        "channels",
        "weightings",
        "run_id",
        "dump_filters",
    ];
    keys.extend(DETECTOR_KEYS);
    let mut s = Settings::load(&args.config, &keys)?;
    let manifest = s.required("manifest", args.manifest)?;
    let out = s.required("out", args.out)?;
    let summary = s.get("summary", args.summary.map(|p| p.display().to_string()), default_summary(&out).display().to_string())?;
    let default_mode = if bench { Mode::Parallel } else { Mode::Serial };
    let mode: Mode = s.get("mode", args.mode, default_mode.to_string())?.parse()?;
    let default_workers = match mode {
        Mode::Serial if !bench => 1,
        _ => runner::available_cores(),
    };
    let workers = s.get("workers", args.workers, default_workers)?;
    let run_id = s.get("run_id", args.run_id, "run".to_string())?;
    let dump = s.opt("dump_filters", args.dump_filters.map(|p| p.display().to_string()))?;
    let (cfg, chunk_s) = detector(&mut s, args.detector)?;
    let manifests = load_manifests(&manifest)?;
    let channels = select_channels(&mut s, args.channels, &manifests)?;
    let weightings = select_weightings(&mut s, args.weightings, &Weighting::ALL)?;
    let config = RunConfig {
        mode,
        worker_count: workers,
        channels,
        weightings,
        detector: cfg,
        chunk_s,
        run_id,
        output: out,
    };
    if !bench {
        config.validate()?;
    }
    Ok(Prepared {
        config,
        manifests,
        summary: PathBuf::from(summary),
        dump_filters: dump.map(PathBuf::from),
        settings: s,
    })
}

fn dump_filters(path: &Path, config: &RunConfig, manifests: &[ChannelManifest]) -> CliResult<()> {
    let mut rates: Vec<f64> = manifests
        .iter()
        .filter(|m| config.channels.contains(&m.channel_id))
        .map(ChannelManifest::sample_rate_hz)
        .collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let mut text = String::new();
    for fs in rates {
        for &w in &config.weightings {
            text.push_str(&design_filter(w.spec(), fs)?.describe());
        }
    }
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn cmd_extract(args: ExtractArgs) -> CliResult<()> {
    let Prepared {
        config,
        manifests,
        summary,
        dump_filters: dump,
        settings,
    } = run_config(args, false)?;
    if let Some(path) = &dump {
        dump_filters(path, &config, &manifests)?;
    }
    let outcome = runner::run(&config, &manifests)?;
    for (id, n) in &outcome.pulses {
        eprintln!("channel {} {}: {n} pulse(s)", id.channel_id, id.weighting);
    }
    let mut text = settings.render();
    text.push('\n');
    text.push_str(&outcome.render_summary(&config));
    write_text(&summary, &text)?;
    println!(
        "wrote {} record(s), {} feature point(s) to {}",
        outcome.catalog.records,
        outcome.catalog.points,
        outcome.catalog_path.display()
    );
    Ok(())
}

fn cmd_bench(args: ExtractArgs) -> CliResult<()> {
    let Prepared {
        config,
        manifests,
        summary,
        dump_filters: dump,
        settings,
    } = run_config(args, true)?;
    if let Some(path) = &dump {
        dump_filters(path, &config, &manifests)?;
    }
    let report = runner::bench(&config, &manifests)?;
    let table = report.render();
    print!("{table}");
    let mut text = settings.render();
    text.push('\n');
    text.push_str(&table);
    write_text(&summary, &text)?;
    if report.identical {
        Ok(())
    } else {
        Err(Failure::Runtime("serial and parallel catalogs differ".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
