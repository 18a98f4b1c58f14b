use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A failure attributed to one channel during a multi-channel run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFailure {
    pub channel_id: u32,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unparseable manifest {}:{line}: {message}", path.display())]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("channel {channel_id}: {detail}")]
    Discontinuity { channel_id: u32, detail: String },

    #[error("span outside coverage: requested samples [{start}, {end}) of {available}")]
    OutOfCoverage {
        start: i64,
        end: i64,
        available: usize,
    },

    #[error("wav error in {}: {source}", path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("unsupported audio in {}: {detail}", path.display())]
    UnsupportedAudio { path: PathBuf, detail: String },

    #[error("band above Nyquist: f_lo {f_lo_hz} Hz >= Nyquist {nyquist_hz} Hz")]
    BandAboveNyquist { f_lo_hz: f64, nyquist_hz: f64 },

    #[error("sample-rate mismatch: expected {expected} Hz, got {found} Hz")]
    SampleRateMismatch { expected: f64, found: f64 },

    #[error("discontinuous stream: chunk starts at {found} s, expected {expected} s")]
    Discontinuous { expected: f64, found: f64 },

    #[error("stream position {requested} already released (buffer starts at {base})")]
    Released { requested: usize, base: usize },

    #[error("no peak: window is all zeros")]
    NoPeak,

    #[error("zero energy")]
    ZeroEnergy,

    #[error("zero signal")]
    ZeroSignal,

    #[error("empty buffer")]
    EmptyBuffer,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("catalog: {0}")]
    Csv(#[from] csv::Error),

    #[error("catalog parse error: {0}")]
    CatalogParse(String),

    #[error("run failed on {} channel(s): {}", .0.len(), format_failures(.0))]
    Run(Vec<ChannelFailure>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_failures(failures: &[ChannelFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("channel {}: {}", f.channel_id, f.message))
        .collect::<Vec<_>>()
        .join("; ")
}
