//! M-weighting band filters.
//!
//! Each weighting is a high-pass at `f_lo` cascaded with a low-pass at
//! `f_hi`, both Butterworth of order [`BUTTERWORTH_ORDER`] with −3 dB at the
//! cutoff, realized as biquads via the prewarped bilinear transform. The
//! low-pass stage is dropped when `f_hi` sits at or above 95% of Nyquist.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal_io::SampleBuffer;

pub const BUTTERWORTH_ORDER: usize = 4;

/// Fraction of Nyquist at or above which the low-pass edge is omitted.
pub const LOWPASS_OMIT_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weighting {
    Linear,
    Lfc,
    Mfc,
}

impl Weighting {
    pub const ALL: [Weighting; 3] = [Weighting::Linear, Weighting::Lfc, Weighting::Mfc];

    pub fn name(self) -> &'static str {
        match self {
            Weighting::Linear => "Linear",
            Weighting::Lfc => "LFC",
            Weighting::Mfc => "MFC",
        }
    }

    pub fn spec(self) -> WeightingSpec {
        match self {
            Weighting::Linear => WeightingSpec {
                kind: self,
                f_lo_hz: None,
                f_hi_hz: None,
            },
            Weighting::Lfc => WeightingSpec {
                kind: self,
                f_lo_hz: Some(7.0),
                f_hi_hz: Some(22_000.0),
            },
            Weighting::Mfc => WeightingSpec {
                kind: self,
                f_lo_hz: Some(150.0),
                f_hi_hz: Some(160_000.0),
            },
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Weighting::Linear),
            "lfc" => Ok(Weighting::Lfc),
            "mfc" => Ok(Weighting::Mfc),
            _ => Err(Error::InvalidConfig(format!("unknown weighting `{s}`"))),
        }
    }
}

/// Pass band of a weighting; `None` edges are flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightingSpec {
    pub kind: Weighting,
    pub f_lo_hz: Option<f64>,
    pub f_hi_hz: Option<f64>,
}

/// Normalized biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn highpass(cutoff_hz: f64, sample_rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let k = (1.0 + cos) / 2.0;
        Self {
            b0: k / a0,
            b1: -2.0 * k / a0,
            b2: k / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn lowpass(cutoff_hz: f64, sample_rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        // 1 - cos(w0), without cancellation at low cutoffs
        let k = (w0 / 2.0).sin().powi(2);
        Self {
            b0: k / a0,
            b1: 2.0 * k / a0,
            b2: k / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }
}

/// Q of each section of an even-order Butterworth cascade.
fn butterworth_qs(order: usize) -> impl Iterator<Item = f64> {
    (0..order / 2).map(move |k| 1.0 / (2.0 * ((2 * k + 1) as f64 * PI / (2 * order) as f64).sin()))
}

/// A realized weighting filter with its streaming delay state.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub spec: WeightingSpec,
    pub sample_rate_hz: f64,
    sections: Vec<Biquad>,
    delay: Vec<[f64; 2]>,
}

/// Realizes `spec` at `sample_rate_hz`.
pub fn design_filter(spec: WeightingSpec, sample_rate_hz: f64) -> Result<FilterState> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::InvalidConfig(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    if let (Some(lo), Some(hi)) = (spec.f_lo_hz, spec.f_hi_hz) {
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::InvalidConfig(format!("band edges must satisfy 0 < f_lo < f_hi, got {lo}, {hi}")));
        }
    }
    let nyquist = sample_rate_hz / 2.0;
    let mut sections = Vec::new();
    if let Some(lo) = spec.f_lo_hz {
        if lo >= nyquist {
            return Err(Error::BandAboveNyquist {
                f_lo_hz: lo,
                nyquist_hz: nyquist,
            });
        }
        sections.extend(butterworth_qs(BUTTERWORTH_ORDER).map(|q| Biquad::highpass(lo, sample_rate_hz, q)));
    }
    if let Some(hi) = spec.f_hi_hz {
        if hi < LOWPASS_OMIT_FRACTION * nyquist {
            sections.extend(butterworth_qs(BUTTERWORTH_ORDER).map(|q| Biquad::lowpass(hi, sample_rate_hz, q)));
        }
    }
    Ok(FilterState {
        spec,
        sample_rate_hz,
        delay: vec![[0.0; 2]; sections.len()],
        sections,
    })
}

impl FilterState {
    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn is_identity(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Clears the delay state.
    pub fn reset(&mut self) {
        self.delay.iter_mut().for_each(|d| *d = [0.0; 2]);
    }

    /// Filters samples in place, carrying state across calls (transposed direct form II).
    pub fn process(&mut self, samples: &mut [f64]) {
        for (s, d) in self.sections.iter().zip(self.delay.iter_mut()) {
            let [mut z1, mut z2] = *d;
            for x in samples.iter_mut() {
                let y = s.b0 * *x + z1;
                z1 = s.b1 * *x - s.a1 * y + z2;
                z2 = s.b2 * *x - s.a2 * y;
                *x = y;
            }
            *d = [z1, z2];
        }
    }

    /// Filters one chunk of a channel; consecutive chunks must be fed in order.
    pub fn apply(&mut self, buffer: &SampleBuffer) -> Result<SampleBuffer> {
        if buffer.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::SampleRateMismatch {
                expected: self.sample_rate_hz,
                found: buffer.sample_rate_hz,
            });
        }
        let mut out = buffer.clone();
        self.process(&mut out.samples);
        Ok(out)
    }

    /// Human-readable coefficient dump.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "# weighting={} sample_rate_hz={} f_lo_hz={} f_hi_hz={} sections={}\n",
            self.spec.kind,
            self.sample_rate_hz,
            edge(self.spec.f_lo_hz),
            edge(self.spec.f_hi_hz),
            self.sections.len()
        );
        if self.sections.is_empty() {
            out.push_str("# identity\n");
        }
        for (i, s) in self.sections.iter().enumerate() {
            out.push_str(&format!(
                "{i} b0={:.17e} b1={:.17e} b2={:.17e} a1={:.17e} a2={:.17e}\n",
                s.b0, s.b1, s.b2, s.a1, s.a2
            ));
        }
        out
    }
}

fn edge(f: Option<f64>) -> String {
    f.map_or_else(|| "flat".to_string(), |v| v.to_string())
}
