//! Synthetic seismic-survey recordings with ground truth.
//!
//! Each pulse is a sin² attack up to the peak pressure `P`, followed by
//! `P·e^(−u/τ)·cos(2π f₀ u)`: a positive peak, a negative overshoot and an
//! exponentially decaying tail. A weak reverberation tail (a few random
//! partials under a rise/decay envelope) follows each pulse, and optional white
//! Gaussian noise is added on top. The analytic SEL in the ground truth covers
//! the direct pulse only.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::exposure_db;
use crate::signal_io::{render_manifest, CalibrationSpec, GapPolicy};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const GROUND_TRUTH_HEADER: [&str; 5] = ["channel_id", "pulse_index", "t_true_s", "p_peak_pa", "sel_analytic_db"];

/// No pulse is scheduled within this long of the end of the recording.
pub const END_CLEARANCE_S: f64 = 1.0;
const TAIL_PARTIALS: usize = 8;
const RENDER_BLOCK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PulseModel {
    pub peak_upa: f64,
    /// Rise time from onset to peak; rounded to whole samples.
    pub attack_s: f64,
    /// Decay constant τ of the direct pulse.
    pub decay_s: f64,
    /// Oscillation frequency of the direct pulse; 0 gives a pure exponential.
    pub carrier_hz: f64,
    /// Amplitude of the reverberation tail; 0 disables it.
    pub tail_level_upa: f64,
    pub tail_rise_s: f64,
    pub tail_decay_s: f64,
}

impl Default for PulseModel {
    fn default() -> Self {
        Self {
            peak_upa: 1e8,
            attack_s: 0.004,
            decay_s: 0.05,
            carrier_hz: 120.0,
            tail_level_upa: 3e5,
            tail_rise_s: 0.05,
            tail_decay_s: 3.0,
        }
    }
}

impl PulseModel {
    fn attack_samples(&self, fs: f64) -> usize {
        (self.attack_s * fs).round() as usize
    }

    /// Closed-form `∫p²dt` of the direct pulse, μPa²·s.
    pub fn analytic_exposure(&self, sample_rate_hz: f64) -> f64 {
        let p2 = self.peak_upa * self.peak_upa;
        let attack = self.attack_samples(sample_rate_hz) as f64 / sample_rate_hz;
        let a = 2.0 / self.decay_s;
        let b = 4.0 * PI * self.carrier_hz;
        // ∫ sin⁴ over the attack, plus ∫ e^(−au)·(1 + cos bu)/2 over the decay
        p2 * (0.375 * attack + 0.5 / a + 0.5 * a / (a * a + b * b))
    }

    pub fn analytic_sel_db(&self, sample_rate_hz: f64) -> f64 {
        exposure_db(self.analytic_exposure(sample_rate_hz))
    }

    fn direct(&self, j: usize, attack: usize, fs: f64) -> f64 {
        if j < attack {
            let s = (0.5 * PI * j as f64 / attack as f64).sin();
            self.peak_upa * s * s
        } else {
            let u = (j - attack) as f64 / fs;
            self.peak_upa * (-u / self.decay_s).exp() * (2.0 * PI * self.carrier_hz * u).cos()
        }
    }

    /// Samples after the onset beyond which a pulse contributes nothing audible.
    fn support(&self, fs: f64) -> usize {
        let direct = 40.0 * self.decay_s;
        let tail = if self.tail_level_upa > 0.0 {
            self.tail_rise_s + 8.0 * self.tail_decay_s
        } else {
            0.0
        };
        self.attack_samples(fs) + (direct.max(tail) * fs).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveySpec {
    pub channel_count: u32,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub ipi_s: f64,
    /// Onset of the first pulse on channel 0.
    pub first_pulse_s: f64,
    /// Extra onset delay per channel index, mimicking source-receiver range.
    pub channel_delay_s: f64,
    pub pulse: PulseModel,
    pub noise_rms_upa: f64,
    pub sensitivity_db: f64,
    /// Significant bits per sample, 12 or 16; always stored in 16-bit words.
    pub bits: u16,
    /// Splits each channel into files of this length.
    pub file_duration_s: Option<f64>,
    pub seed: u64,
}

impl Default for SurveySpec {
    fn default() -> Self {
        Self {
            channel_count: 1,
            duration_s: 60.0,
            sample_rate_hz: 16_000,
            ipi_s: 10.0,
            first_pulse_s: 1.0,
            channel_delay_s: 0.25,
            pulse: PulseModel::default(),
            noise_rms_upa: 0.0,
            sensitivity_db: 170.0,
            bits: 16,
            file_duration_s: None,
            seed: 0,
        }
    }
}

impl SurveySpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_s", self.duration_s),
            ("ipi_s", self.ipi_s),
            ("peak_upa", self.pulse.peak_upa),
            ("decay_s", self.pulse.decay_s),
            ("tail_rise_s", self.pulse.tail_rise_s),
            ("tail_decay_s", self.pulse.tail_decay_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("first_pulse_s", self.first_pulse_s),
            ("channel_delay_s", self.channel_delay_s),
            ("attack_s", self.pulse.attack_s),
            ("carrier_hz", self.pulse.carrier_hz),
            ("tail_level_upa", self.pulse.tail_level_upa),
            ("noise_rms_upa", self.noise_rms_upa),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.channel_count == 0 {
            return Err(Error::InvalidConfig("channel_count must be positive".into()));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::InvalidConfig("sample_rate_hz must be positive".into()));
        }
        if self.total_samples() == 0 {
            return Err(Error::InvalidConfig("duration_s is shorter than one sample".into()));
        }
        if !matches!(self.bits, 12 | 16) {
            return Err(Error::InvalidConfig(format!("bits must be 12 or 16, got {}", self.bits)));
        }
        if let Some(d) = self.file_duration_s {
            if !(d.is_finite() && d * self.sample_rate_hz as f64 >= 1.0) {
                return Err(Error::InvalidConfig(format!("file_duration_s must cover a sample, got {d}")));
            }
        }
        if !self.sensitivity_db.is_finite() {
            return Err(Error::InvalidConfig("sensitivity_db must be finite".into()));
        }
        Ok(())
    }

    pub fn calibration(&self) -> CalibrationSpec {
        CalibrationSpec {
            counts_full_scale: 1 << (self.bits - 1),
            sensitivity_db: self.sensitivity_db,
        }
    }

    fn fs(&self) -> f64 {
        self.sample_rate_hz as f64
    }

    fn total_samples(&self) -> usize {
        (self.duration_s * self.fs()).round() as usize
    }

    /// Onset sample indices of one channel's pulses.
    fn onsets(&self, channel: u32) -> Vec<usize> {
        let fs = self.fs();
        let first = ((self.first_pulse_s + channel as f64 * self.channel_delay_s) * fs).round() as usize;
        let step = (self.ipi_s * fs).round() as usize;
        let last = self.duration_s - END_CLEARANCE_S;
        (0..)
            .map(|k| first + k * step.max(1))
            .take_while(|&i| (i as f64) / fs <= last)
            .collect()
    }

    /// Ground truth computed from the spec alone.
    pub fn ground_truth(&self) -> Vec<TruePulse> {
        let fs = self.fs();
        let attack = self.pulse.attack_samples(fs);
        let sel = self.pulse.analytic_sel_db(fs);
        (0..self.channel_count)
            .flat_map(|ch| {
                self.onsets(ch).into_iter().enumerate().map(move |(k, onset)| TruePulse {
                    channel_id: ch,
                    pulse_index: k as u64,
                    t_true_s: (onset + attack) as f64 / fs,
                    p_peak_upa: self.pulse.peak_upa,
                    sel_analytic_db: sel,
                })
            })
            .collect()
    }
}

/// One synthesized pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct TruePulse {
    pub channel_id: u32,
    pub pulse_index: u64,
    /// Time of the positive peak.
    pub t_true_s: f64,
    pub p_peak_upa: f64,
    pub sel_analytic_db: f64,
}

/// Paths written by [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSurvey {
    pub manifest: PathBuf,
    pub ground_truth: PathBuf,
    pub wav_files: Vec<PathBuf>,
    pub pulses: Vec<TruePulse>,
}

#[derive(Debug, Clone, Copy)]
struct Partial {
    amp: f64,
    freq_hz: f64,
    phase: f64,
}

struct ChannelRender<'a> {
    spec: &'a SurveySpec,
    onsets: Vec<usize>,
    partials: Vec<[Partial; TAIL_PARTIALS]>,
    rng: ChaCha8Rng,
}

impl<'a> ChannelRender<'a> {
    fn new(spec: &'a SurveySpec, channel: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(channel as u64);
        let onsets = spec.onsets(channel);
        let norm = (2.0 / TAIL_PARTIALS as f64).sqrt();
        let partials = onsets
            .iter()
            .map(|_| {
                std::array::from_fn(|_| Partial {
                    amp: norm * rng.random_range(0.5..1.5),
                    freq_hz: rng.random_range(20.0..400.0),
                    phase: rng.random_range(0.0..2.0 * PI),
                })
            })
            .collect();
        Self {
            spec,
            onsets,
            partials,
            rng,
        }
    }

    /// Pressure of samples `[start, start + out.len())`.
    ///
    /// Oscillators run as phasor recurrences seeded exactly at `start`, so
    /// callers render on a fixed block grid to keep output reproducible.
    fn render(&mut self, start: usize, out: &mut [f64]) {
        let spec = self.spec;
        let model = &spec.pulse;
        let fs = spec.fs();
        let attack = model.attack_samples(fs);
        let support = model.support(fs);
        let end = start + out.len();
        out.iter_mut().for_each(|x| *x = 0.0);
        for (&onset, partials) in self.onsets.iter().zip(&self.partials) {
            let (lo, hi) = (onset.max(start), (onset + support).min(end));
            if lo >= hi {
                continue;
            }
            for i in lo..hi {
                out[i - start] += model.direct(i - onset, attack, fs);
            }
            if model.tail_level_upa > 0.0 {
                add_tail(model, partials, fs, lo - onset, &mut out[lo - start..hi - start]);
            }
        }
        if spec.noise_rms_upa > 0.0 {
            for x in out.iter_mut() {
                let n: f64 = self.rng.sample(StandardNormal);
                *x += spec.noise_rms_upa * n;
            }
        }
    }
}

/// Adds the reverberation tail for samples `first..first + out.len()` after onset.
fn add_tail(model: &PulseModel, partials: &[Partial; TAIL_PARTIALS], fs: f64, first: usize, out: &mut [f64]) {
    let u0 = first as f64 / fs;
    let mut carrier = vec![0.0; out.len()];
    for q in partials {
        let (mut re, mut im) = {
            let phase = 2.0 * PI * q.freq_hz * u0 + q.phase;
            (phase.cos(), phase.sin())
        };
        let (c, s) = {
            let step = 2.0 * PI * q.freq_hz / fs;
            (step.cos(), step.sin())
        };
        for x in carrier.iter_mut() {
            *x += q.amp * re;
            (re, im) = (re * c - im * s, re * s + im * c);
        }
    }
    let mut decay = model.tail_level_upa * (-u0 / model.tail_decay_s).exp();
    let mut rise = (-u0 / model.tail_rise_s).exp();
    let decay_step = (-1.0 / (fs * model.tail_decay_s)).exp();
    let rise_step = (-1.0 / (fs * model.tail_rise_s)).exp();
    for (x, c) in out.iter_mut().zip(carrier) {
        *x += decay * (1.0 - rise) * c;
        decay *= decay_step;
        rise *= rise_step;
    }
}

/// Quantizes pressure to left-aligned 16-bit words.
fn to_word(p: f64, cal: &CalibrationSpec) -> i16 {
    let fs = cal.counts_full_scale as f64;
    let count = (p / cal.full_scale_upa() * fs).round().clamp(-fs, fs - 1.0);
    let align = (1u32 << 15) / cal.counts_full_scale;
    (count as i32 * align as i32) as i16
}

fn wav_writer(path: &Path, rate: u32) -> Result<hound::WavWriter<std::io::BufWriter<fs::File>>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    hound::WavWriter::create(path, spec).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders one channel into one or more WAV files; returns `(file name, start time)` pairs.
fn write_channel(spec: &SurveySpec, channel: u32, dir: &Path) -> Result<Vec<(String, f64)>> {
    let fs = spec.fs();
    let cal = spec.calibration();
    let total = spec.total_samples();
    let file_len = spec
        .file_duration_s
        .map_or(total, |d| (d * fs).round() as usize)
        .max(1);
    let mut render = ChannelRender::new(spec, channel);
    let mut files = Vec::new();
    let mut block = vec![0.0; RENDER_BLOCK];
    let mut writer: Option<(PathBuf, hound::WavWriter<_>, usize)> = None;
    let finish = |(path, w, _): (PathBuf, hound::WavWriter<_>, usize)| {
        w.finalize().map_err(|source| Error::Wav { path, source })
    };
    for block_start in (0..total).step_by(RENDER_BLOCK) {
        let n = RENDER_BLOCK.min(total - block_start);
        render.render(block_start, &mut block[..n]);
        for (i, &p) in block[..n].iter().enumerate() {
            let at = block_start + i;
            if writer.as_ref().is_none_or(|(_, _, end)| at >= *end) {
                if let Some(done) = writer.take() {
                    finish(done)?;
                }
                let name = format!("ch{channel:02}_{:04}.wav", files.len());
                let path = dir.join(&name);
                writer = Some((path.clone(), wav_writer(&path, spec.sample_rate_hz)?, at + file_len));
                files.push((name, at as f64 / fs));
            }
            let (path, w, _) = writer.as_mut().expect("writer opened above");
            w.write_sample(to_word(p, &cal)).map_err(|source| Error::Wav {
                path: path.clone(),
                source,
            })?;
        }
    }
    if let Some(done) = writer.take() {
        finish(done)?;
    }
    Ok(files)
}

/// Renders the ground truth as CSV; pressures in pascals.
pub fn render_ground_truth(pulses: &[TruePulse]) -> String {
    let mut s = GROUND_TRUTH_HEADER.join(",");
    s.push('\n');
    for p in pulses {
        let _ = writeln!(
            s,
            "{},{},{:.9},{:.9},{:.6}",
            p.channel_id,
            p.pulse_index,
            p.t_true_s,
            p.p_peak_upa * 1e-6,
            p.sel_analytic_db
        );
    }
    s
}

/// Parses a ground-truth CSV written by [`generate`].
pub fn read_ground_truth(path: &Path) -> Result<Vec<TruePulse>> {
    let mut reader = csv::Reader::from_path(path)?;
    if reader.headers()?.iter().ne(GROUND_TRUTH_HEADER) {
        return Err(Error::CatalogParse(format!("{}: unexpected ground-truth header", path.display())));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::CatalogParse(format!("{}: short ground-truth row", path.display())))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|_| Error::CatalogParse(format!("{}: bad number in ground truth", path.display())))
        };
        out.push(TruePulse {
            channel_id: field(0)?
                .parse()
                .map_err(|_| Error::CatalogParse("bad channel_id".into()))?,
            pulse_index: field(1)?
                .parse()
                .map_err(|_| Error::CatalogParse("bad pulse_index".into()))?,
            t_true_s: num(2)?,
            p_peak_upa: num(3)? * 1e6,
            sel_analytic_db: num(4)?,
        });
    }
    Ok(out)
}

/// Writes WAV files, `manifest.txt` and `ground_truth.csv` into `dir`.
pub fn generate(spec: &SurveySpec, dir: &Path) -> Result<GeneratedSurvey> {
    spec.validate()?;
    fs::create_dir_all(dir)?;
    let channels: Vec<Vec<(String, f64)>> = (0..spec.channel_count)
        .into_par_iter()
        .map(|ch| write_channel(spec, ch, dir))
        .collect::<Result<_>>()?;

    let cal = spec.calibration();
    let entries: Vec<_> = channels
        .iter()
        .enumerate()
        .map(|(ch, files)| (ch as u32, cal, GapPolicy::Error, files.clone()))
        .collect();
    let manifest = dir.join(MANIFEST_FILE);
    fs::write(&manifest, render_manifest(&entries))?;

    let pulses = spec.ground_truth();
    let ground_truth = dir.join(GROUND_TRUTH_FILE);
    fs::write(&ground_truth, render_ground_truth(&pulses))?;
    Ok(GeneratedSurvey {
        manifest,
        ground_truth,
        wav_files: channels.iter().flatten().map(|(name, _)| dir.join(name)).collect(),
        pulses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_spacing() {
        let spec = SurveySpec {
            duration_s: 30.0,
            ..SurveySpec::default()
        };
        let gt = spec.ground_truth();
        let t: Vec<f64> = gt.iter().map(|p| p.t_true_s).collect();
        assert_eq!(t.len(), 3);
        assert!((t[1] - t[0] - 10.0).abs() < 1e-9 && (t[2] - t[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn pure_exponential_energy() {
        let model = PulseModel {
            attack_s: 0.0,
            carrier_hz: 0.0,
            ..PulseModel::default()
        };
        let expected = model.peak_upa.powi(2) * model.decay_s / 2.0;
        assert!((model.analytic_exposure(16_000.0) / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_pulse_peaks_at_attack_end() {
        let model = PulseModel::default();
        let fs = 16_000.0;
        let attack = model.attack_samples(fs);
        let samples: Vec<f64> = (0..8000).map(|j| model.direct(j, attack, fs)).collect();
        let (argmax, max) = samples
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        assert_eq!(argmax, attack);
        assert_eq!(max, model.peak_upa);
        assert!(samples.iter().any(|&v| v < -0.5 * model.peak_upa));
    }

    #[test]
    fn twelve_bit_words_are_left_aligned() {
        let cal = CalibrationSpec {
            counts_full_scale: 2048,
            sensitivity_db: 0.0,
        };
        assert_eq!(to_word(3.0 / 2048.0, &cal), 48);
        assert_eq!(to_word(10.0, &cal), 2047 * 16);
        assert_eq!(to_word(-10.0, &cal), -32768);
    }

    #[test]
    fn invalid_specs_rejected() {
        for spec in [
            SurveySpec {
                bits: 8,
                ..SurveySpec::default()
            },
            SurveySpec {
                ipi_s: 0.0,
                ..SurveySpec::default()
            },
            SurveySpec {
                channel_count: 0,
                ..SurveySpec::default()
            },
        ] {
            assert!(spec.validate().is_err());
        }
    }
}
