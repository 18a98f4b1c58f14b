//! Calibrated PCM ingest.
//!
//! A deployment is described by a plain-text manifest listing, per channel,
//! the WAV files that make up the recording and the calibration that maps
//! integer counts to pressure in μPa. Channels are exposed as one continuous
//! sample timeline; reads may straddle file boundaries.
//!
//! Manifest format (whitespace separated, `#` starts a comment):
//!
//! ```text
//! calibration <channel_id> <counts_full_scale> <sensitivity_db> [error|zero_fill]
//! file        <channel_id> <start_time_s> <path>
//! ```
//!
//! `path` is the rest of the line and may contain spaces; relative paths are
//! resolved against the manifest's directory. Every channel needs exactly one
//! calibration row and at least one file row.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Highest sample rate accepted from audio files.
pub const MAX_SAMPLE_RATE_HZ: u32 = 512_000;

/// Calibrated pressure samples (μPa) for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    /// Absolute time of `samples[0]`, seconds since the deployment epoch.
    pub start_time_s: f64,
    pub channel_id: u32,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, start_time_s: f64, channel_id: u32) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            start_time_s,
            channel_id,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Absolute time of sample `index`.
    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time_s + index as f64 / self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Nearest sample index for absolute time `t`; may be negative or past the end.
    pub fn index_of(&self, t: f64) -> i64 {
        ((t - self.start_time_s) * self.sample_rate_hz).round() as i64
    }

    /// Copy of samples `[start, end)` with the start time adjusted.
    pub fn slice(&self, start: usize, end: usize) -> SampleBuffer {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        SampleBuffer {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
            start_time_s: self.time_at(start),
            channel_id: self.channel_id,
        }
    }
}

/// Linear map from integer counts to pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSpec {
    /// Count value that represents full scale at the true bit depth (2048 for 12-bit data).
    pub counts_full_scale: u32,
    /// Pressure at full scale, dB re 1 μPa.
    pub sensitivity_db: f64,
}

impl CalibrationSpec {
    pub fn new(counts_full_scale: u32, sensitivity_db: f64) -> Result<Self> {
        if counts_full_scale == 0 {
            return Err(Error::InvalidConfig("counts_full_scale must be positive".into()));
        }
        if !sensitivity_db.is_finite() {
            return Err(Error::InvalidConfig("sensitivity_db must be finite".into()));
        }
        Ok(Self {
            counts_full_scale,
            sensitivity_db,
        })
    }

    /// Pressure at full scale in μPa.
    pub fn full_scale_upa(&self) -> f64 {
        10f64.powf(self.sensitivity_db / 20.0)
    }

    pub fn pressure_upa(&self, count: i64) -> f64 {
        (count as f64 / self.counts_full_scale as f64) * self.full_scale_upa()
    }

    /// Pressure represented by one count.
    pub fn quantization_step_upa(&self) -> f64 {
        self.full_scale_upa() / self.counts_full_scale as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    #[default]
    Error,
    ZeroFill,
}

impl FromStr for GapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "zero_fill" => Ok(Self::ZeroFill),
            other => Err(Error::InvalidConfig(format!("unknown gap policy `{other}`"))),
        }
    }
}

impl fmt::Display for GapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Error => "error",
            Self::ZeroFill => "zero_fill",
        })
    }
}

/// One audio file of a channel, as found on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFile {
    pub path: PathBuf,
    pub start_time_s: f64,
    pub sample_rate_hz: u32,
    pub frames: usize,
    pub bits_per_sample: u16,
}

/// Placement of a file's samples on the channel timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FileSpan {
    file: usize,
    /// Channel sample index of the first used sample.
    offset: usize,
    /// Samples skipped at the head of the file (overlap trimmed under zero-fill).
    skip: usize,
    len: usize,
}

/// Time-ordered audio files and calibration for one recording channel.
#[derive(Debug, Clone)]
pub struct ChannelManifest {
    pub channel_id: u32,
    pub files: Vec<AudioFile>,
    pub calibration: CalibrationSpec,
    pub gap_policy: GapPolicy,
    spans: Vec<FileSpan>,
    total_len: usize,
}

impl ChannelManifest {
    /// Builds a channel from file entries, probing each file's header.
    ///
    /// Files are ordered by start time. With [`GapPolicy::Error`] any gap or
    /// overlap larger than one sample period is rejected; offsets within one
    /// sample are snapped to contiguity.
    pub fn new(
        channel_id: u32,
        entries: Vec<(PathBuf, f64)>,
        calibration: CalibrationSpec,
        gap_policy: GapPolicy,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig(format!("channel {channel_id} has no files")));
        }
        let mut files = entries
            .into_iter()
            .map(|(path, start)| probe_file(path, start))
            .collect::<Result<Vec<_>>>()?;
        files.sort_by(|a, b| a.start_time_s.total_cmp(&b.start_time_s));

        let rate = files[0].sample_rate_hz;
        for f in &files {
            if f.sample_rate_hz != rate {
                return Err(Error::SampleRateMismatch {
                    expected: rate as f64,
                    found: f.sample_rate_hz as f64,
                });
            }
            let container_full_scale = 1u64 << (f.bits_per_sample - 1);
            let cfs = calibration.counts_full_scale as u64;
            if cfs > container_full_scale || !container_full_scale.is_multiple_of(cfs) {
                return Err(Error::UnsupportedAudio {
                    path: f.path.clone(),
                    detail: format!(
                        "counts_full_scale {cfs} does not divide the {}-bit container full scale",
                        f.bits_per_sample
                    ),
                });
            }
        }
        for pair in files.windows(2) {
            if pair[1].start_time_s <= pair[0].start_time_s {
                return Err(Error::Discontinuity {
                    channel_id,
                    detail: format!(
                        "files {} and {} share start time {}",
                        pair[0].path.display(),
                        pair[1].path.display(),
                        pair[0].start_time_s
                    ),
                });
            }
        }

        let fs = rate as f64;
        let t0 = files[0].start_time_s;
        let mut spans = Vec::with_capacity(files.len());
        let mut end = 0usize;
        for (i, f) in files.iter().enumerate() {
            let nominal = ((f.start_time_s - t0) * fs).round() as i64;
            let delta = nominal - end as i64;
            let (offset, skip) = if delta.abs() <= 1 {
                (end, 0)
            } else if delta > 0 {
                if gap_policy == GapPolicy::Error {
                    return Err(Error::Discontinuity {
                        channel_id,
                        detail: format!("gap of {delta} samples before {}", f.path.display()),
                    });
                }
                (nominal as usize, 0)
            } else {
                let overlap = (-delta) as usize;
                if gap_policy == GapPolicy::Error || overlap >= f.frames {
                    return Err(Error::Discontinuity {
                        channel_id,
                        detail: format!("overlap of {overlap} samples at {}", f.path.display()),
                    });
                }
                (end, overlap)
            };
            let len = f.frames - skip;
            spans.push(FileSpan {
                file: i,
                offset,
                skip,
                len,
            });
            end = offset + len;
        }

        Ok(Self {
            channel_id,
            files,
            calibration,
            gap_policy,
            spans,
            total_len: end,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.files[0].sample_rate_hz as f64
    }

    /// Absolute time of channel sample 0.
    pub fn start_time_s(&self) -> f64 {
        self.files[0].start_time_s
    }

    /// Number of samples on the channel timeline, gaps included.
    pub fn total_samples(&self) -> usize {
        self.total_len
    }

    pub fn duration_s(&self) -> f64 {
        self.total_len as f64 / self.sample_rate_hz()
    }

    pub fn end_time_s(&self) -> f64 {
        self.start_time_s() + self.duration_s()
    }

    /// Reads `len` samples starting at channel sample `start`.
    pub fn read_samples(&self, start: usize, len: usize) -> Result<SampleBuffer> {
        let end = start + len;
        if end > self.total_len {
            return Err(Error::OutOfCoverage {
                start: start as i64,
                end: end as i64,
                available: self.total_len,
            });
        }
        let mut out = vec![0.0; len];
        for span in &self.spans {
            let lo = start.max(span.offset);
            let hi = end.min(span.offset + span.len);
            if lo >= hi {
                continue;
            }
            let file = &self.files[span.file];
            let first = span.skip + (lo - span.offset);
            read_file_range(file, &self.calibration, first, &mut out[lo - start..hi - start])?;
        }
        SampleBuffer::new(out, self.sample_rate_hz(), self.time_at(start), self.channel_id)
    }

    fn time_at(&self, index: usize) -> f64 {
        self.start_time_s() + index as f64 / self.sample_rate_hz()
    }

    /// Consecutive chunks covering the whole channel, each `chunk_s` long except the last.
    pub fn chunks(&self, chunk_s: f64) -> Chunks<'_> {
        let chunk_len = ((chunk_s * self.sample_rate_hz()).round() as usize).max(1);
        Chunks {
            manifest: self,
            next: 0,
            chunk_len,
        }
    }
}

/// Iterator over consecutive chunks of a channel.
pub struct Chunks<'a> {
    manifest: &'a ChannelManifest,
    next: usize,
    chunk_len: usize,
}

impl Iterator for Chunks<'_> {
    type Item = Result<SampleBuffer>;

    fn next(&mut self) -> Option<Self::Item> {
        let total = self.manifest.total_samples();
        if self.next >= total {
            return None;
        }
        let len = self.chunk_len.min(total - self.next);
        let start = self.next;
        self.next += len;
        Some(self.manifest.read_samples(start, len))
    }
}

fn probe_file(path: PathBuf, start_time_s: f64) -> Result<AudioFile> {
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let reader = hound::WavReader::open(&path).map_err(|source| Error::Wav {
        path: path.clone(),
        source,
    })?;
    let spec = reader.spec();
    let unsupported = |detail: String| Error::UnsupportedAudio {
        path: path.clone(),
        detail,
    };
    if spec.channels != 1 {
        return Err(unsupported(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || !(8..=32).contains(&spec.bits_per_sample) {
        return Err(unsupported("expected integer PCM".into()));
    }
    if spec.sample_rate == 0 || spec.sample_rate > MAX_SAMPLE_RATE_HZ {
        return Err(unsupported(format!("sample rate {} Hz not supported", spec.sample_rate)));
    }
    if !start_time_s.is_finite() {
        return Err(unsupported("start time is not finite".into()));
    }
    Ok(AudioFile {
        frames: reader.duration() as usize,
        sample_rate_hz: spec.sample_rate,
        bits_per_sample: spec.bits_per_sample,
        start_time_s,
        path,
    })
}

fn read_file_range(file: &AudioFile, cal: &CalibrationSpec, first: usize, out: &mut [f64]) -> Result<()> {
    let wav_err = |source| Error::Wav {
        path: file.path.clone(),
        source,
    };
    let mut reader = hound::WavReader::open(&file.path).map_err(wav_err)?;
    reader.seek(first as u32).map_err(|e| wav_err(hound::Error::IoError(e)))?;
    // Data narrower than the container is left-aligned; drop the padding bits.
    let align = ((1u64 << (file.bits_per_sample - 1)) / cal.counts_full_scale as u64) as i64;
    let mut n = 0;
    for (slot, word) in out.iter_mut().zip(reader.samples::<i32>()) {
        let word = word.map_err(wav_err)? as i64;
        *slot = cal.pressure_upa(word.div_euclid(align));
        n += 1;
    }
    if n != out.len() {
        return Err(Error::UnsupportedAudio {
            path: file.path.clone(),
            detail: format!("file ended after {n} of {} requested samples", out.len()),
        });
    }
    Ok(())
}

/// Parses a manifest and probes every file it names.
///
/// Returns one [`ChannelManifest`] per channel, ordered by channel id.
pub fn open_manifest(manifest_path: &Path) -> Result<Vec<ChannelManifest>> {
    if !manifest_path.is_file() {
        return Err(Error::MissingFile(manifest_path.to_path_buf()));
    }
    let text = fs::read_to_string(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let parsed = parse_manifest(&text, manifest_path)?;

    let mut out = Vec::with_capacity(parsed.len());
    for (channel_id, entry) in parsed {
        let (calibration, policy) = entry.calibration.ok_or_else(|| Error::Manifest {
            path: manifest_path.to_path_buf(),
            line: 0,
            message: format!("channel {channel_id} has no calibration row"),
        })?;
        if entry.files.is_empty() {
            return Err(Error::Manifest {
                path: manifest_path.to_path_buf(),
                line: 0,
                message: format!("channel {channel_id} has no file rows"),
            });
        }
        let files = entry
            .files
            .into_iter()
            .map(|(p, t)| (if p.is_absolute() { p } else { base.join(p) }, t))
            .collect();
        out.push(ChannelManifest::new(channel_id, files, calibration, policy)?);
    }
    Ok(out)
}

#[derive(Default)]
struct ParsedChannel {
    calibration: Option<(CalibrationSpec, GapPolicy)>,
    files: Vec<(PathBuf, f64)>,
}

fn parse_manifest(text: &str, path: &Path) -> Result<BTreeMap<u32, ParsedChannel>> {
    let mut channels: BTreeMap<u32, ParsedChannel> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let bad = |message: String| Error::Manifest {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (kind, rest) = next_token(line);
        match kind {
            "calibration" => {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if !(3..=4).contains(&fields.len()) {
                    return Err(bad(format!("calibration row needs 3 or 4 fields, found {}", fields.len())));
                }
                let channel: u32 = fields[0].parse().map_err(|_| bad(format!("bad channel id `{}`", fields[0])))?;
                let cfs: u32 = fields[1]
                    .parse()
                    .map_err(|_| bad(format!("bad counts_full_scale `{}`", fields[1])))?;
                let sens: f64 = fields[2]
                    .parse()
                    .map_err(|_| bad(format!("bad sensitivity_db `{}`", fields[2])))?;
                let policy = match fields.get(3) {
                    Some(p) => p.parse().map_err(|_| bad(format!("bad gap policy `{p}`")))?,
                    None => GapPolicy::default(),
                };
                let cal = CalibrationSpec::new(cfs, sens).map_err(|e| bad(e.to_string()))?;
                let entry = channels.entry(channel).or_default();
                if entry.calibration.is_some() {
                    return Err(bad(format!("duplicate calibration for channel {channel}")));
                }
                entry.calibration = Some((cal, policy));
            }
            "file" => {
                let (channel, rest) = next_token(rest);
                let (start, file) = next_token(rest);
                let channel: u32 = channel.parse().map_err(|_| bad(format!("bad channel id `{channel}`")))?;
                let start: f64 = start.parse().map_err(|_| bad(format!("bad start_time_s `{start}`")))?;
                if file.is_empty() {
                    return Err(bad("file row is missing a path".into()));
                }
                channels.entry(channel).or_default().files.push((PathBuf::from(file), start));
            }
            other => return Err(bad(format!("unknown row type `{other}`"))),
        }
    }
    if channels.is_empty() {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            line: 0,
            message: "no channels".into(),
        });
    }
    Ok(channels)
}

fn next_token(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim()),
        None => (s, ""),
    }
}

/// One channel of a manifest to render: id, calibration, gap policy and `(path, start time)` pairs.
pub type ManifestEntry = (u32, CalibrationSpec, GapPolicy, Vec<(String, f64)>);

/// Renders a manifest in the format read by [`open_manifest`].
pub fn render_manifest(channels: &[ManifestEntry]) -> String {
    let mut out = String::from(
        "# calibration <channel_id> <counts_full_scale> <sensitivity_db> <gap_policy>\n\
         # file <channel_id> <start_time_s> <path>\n",
    );
    for (channel, cal, policy, files) in channels {
        out.push_str(&format!(
            "calibration {channel} {} {} {policy}\n",
            cal.counts_full_scale, cal.sensitivity_db
        ));
        for (path, start) in files {
            out.push_str(&format!("file {channel} {start} {path}\n"));
        }
    }
    out
}

/// Reads `duration_s` seconds starting at absolute time `start_s`.
pub fn read_chunk(manifest: &ChannelManifest, start_s: f64, duration_s: f64) -> Result<SampleBuffer> {
    let fs = manifest.sample_rate_hz();
    let start = ((start_s - manifest.start_time_s()) * fs).round() as i64;
    let len = (duration_s * fs).round() as i64;
    if start < 0 || len <= 0 || start + len > manifest.total_samples() as i64 {
        return Err(Error::OutOfCoverage {
            start,
            end: start + len.max(0),
            available: manifest.total_samples(),
        });
    }
    manifest.read_samples(start as usize, len as usize)
}

/// Writes integer PCM words to a mono WAV file.
#[cfg(test)]
pub(crate) fn write_wav(path: &Path, sample_rate_hz: u32, words: &[i16]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    {
        let mut w = writer.get_i16_writer(words.len() as u32);
        for &s in words {
            w.write_sample(s);
        }
        w.flush().map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav(dir: &Path, name: &str, rate: u32, words: &[i16]) -> PathBuf {
        let p = dir.join(name);
        write_wav(&p, rate, words).unwrap();
        p
    }

    #[test]
    fn full_scale_count_maps_to_sensitivity() {
        let cal = CalibrationSpec::new(32768, 120.0).unwrap();
        assert!((cal.pressure_upa(32768) - 1e6).abs() < 1e-6);
        assert_eq!(cal.pressure_upa(0), 0.0);
    }

    #[test]
    fn rejects_zero_full_scale() {
        assert!(CalibrationSpec::new(0, 120.0).is_err());
    }

    #[test]
    fn manifest_lists_channels_and_sorts_files() {
        let dir = tempfile::tempdir().unwrap();
        let words: Vec<i16> = (0..100).collect();
        wav(dir.path(), "b.wav", 1000, &words);
        wav(dir.path(), "a.wav", 1000, &words);
        let text = "calibration 1 32768 120\nfile 1 0.1 b.wav\nfile 1 0.0 a.wav\n";
        let m = dir.path().join("m.txt");
        fs::write(&m, text).unwrap();
        let chans = open_manifest(&m).unwrap();
        assert_eq!(chans.len(), 1);
        assert!(chans[0].files[0].path.ends_with("a.wav"));
        assert!(chans[0].files[1].path.ends_with("b.wav"));
        assert_eq!(chans[0].total_samples(), 200);
    }

    #[test]
    fn five_channel_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::new();
        for ch in 1..=5 {
            wav(dir.path(), &format!("c{ch}.wav"), 8000, &[1, 2, 3]);
            text.push_str(&format!("calibration {ch} 32768 150 error\nfile {ch} 0 c{ch}.wav\n"));
        }
        let m = dir.path().join("m.txt");
        fs::write(&m, text).unwrap();
        let chans = open_manifest(&m).unwrap();
        assert_eq!(chans.len(), 5);
        assert!(chans.iter().all(|c| c.files.len() == 1));
        assert_eq!(chans.iter().map(|c| c.channel_id).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.txt");
        fs::write(&m, "calibration 1 32768 120\nfile 1 0 nope.wav\n").unwrap();
        let err = open_manifest(&m).unwrap_err();
        assert!(err.to_string().starts_with("missing file"), "{err}");
    }

    #[test]
    fn garbage_manifest_is_unparseable() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.txt");
        fs::write(&m, "calibration one 32768 120\n").unwrap();
        assert!(matches!(open_manifest(&m), Err(Error::Manifest { line: 1, .. })));
        fs::write(&m, "stuff 1 2 3\n").unwrap();
        assert!(matches!(open_manifest(&m), Err(Error::Manifest { .. })));
    }

    #[test]
    fn overlap_and_gap_rejected_under_error_policy() {
        let dir = tempfile::tempdir().unwrap();
        let words = vec![5i16; 1000];
        wav(dir.path(), "a.wav", 1000, &words);
        wav(dir.path(), "b.wav", 1000, &words);
        let m = dir.path().join("m.txt");
        fs::write(&m, "calibration 1 32768 120\nfile 1 0 a.wav\nfile 1 0.5 b.wav\n").unwrap();
        assert!(matches!(open_manifest(&m), Err(Error::Discontinuity { .. })));
        fs::write(&m, "calibration 1 32768 120\nfile 1 0 a.wav\nfile 1 2.0 b.wav\n").unwrap();
        assert!(matches!(open_manifest(&m), Err(Error::Discontinuity { .. })));
        // one sample of slack is snapped
        fs::write(&m, "calibration 1 32768 120\nfile 1 0 a.wav\nfile 1 1.001 b.wav\n").unwrap();
        assert_eq!(open_manifest(&m).unwrap()[0].total_samples(), 2000);
    }

    #[test]
    fn zero_fill_pads_gaps() {
        let dir = tempfile::tempdir().unwrap();
        wav(dir.path(), "a.wav", 1000, &[100; 10]);
        wav(dir.path(), "b.wav", 1000, &[200; 10]);
        let m = dir.path().join("m.txt");
        fs::write(&m, "calibration 1 32768 120 zero_fill\nfile 1 0 a.wav\nfile 1 0.015 b.wav\n").unwrap();
        let ch = &open_manifest(&m).unwrap()[0];
        assert_eq!(ch.total_samples(), 25);
        let buf = ch.read_samples(0, 25).unwrap();
        assert!(buf.samples[10..15].iter().all(|&x| x == 0.0));
        assert!(buf.samples[15] > buf.samples[0]);
    }

    #[test]
    fn twelve_bit_left_aligned_words() {
        let dir = tempfile::tempdir().unwrap();
        // 12-bit counts 2047, -2048, 1 shifted into the top of 16-bit words
        wav(dir.path(), "a.wav", 1000, &[2047 << 4, -2048 << 4, 1 << 4]);
        let m = dir.path().join("m.txt");
        fs::write(&m, "calibration 3 2048 120\nfile 3 0 a.wav\n").unwrap();
        let ch = &open_manifest(&m).unwrap()[0];
        let buf = ch.read_samples(0, 3).unwrap();
        let cal = ch.calibration;
        assert_eq!(buf.samples, vec![cal.pressure_upa(2047), cal.pressure_upa(-2048), cal.pressure_upa(1)]);
        assert!((buf.samples[1] + 1e6).abs() < 1e-6);
    }

    #[test]
    fn read_chunk_bounds() {
        let dir = tempfile::tempdir().unwrap();
        wav(dir.path(), "a.wav", 1000, &[1; 1000]);
        let m = dir.path().join("m.txt");
        fs::write(&m, "calibration 1 32768 120\nfile 1 10.0 a.wav\n").unwrap();
        let ch = &open_manifest(&m).unwrap()[0];
        let buf = read_chunk(ch, 10.25, 0.5).unwrap();
        assert_eq!(buf.len(), 500);
        assert!((buf.start_time_s - 10.25).abs() < 1e-12);
        assert!(matches!(read_chunk(ch, 9.0, 0.5), Err(Error::OutOfCoverage { .. })));
        assert!(matches!(read_chunk(ch, 10.8, 0.5), Err(Error::OutOfCoverage { .. })));
    }

    #[test]
    fn chunks_cover_channel() {
        let dir = tempfile::tempdir().unwrap();
        let words: Vec<i16> = (0..2500).map(|i| (i % 300) as i16).collect();
        wav(dir.path(), "a.wav", 1000, &words);
        let m = dir.path().join("m.txt");
        fs::write(&m, "calibration 1 32768 120\nfile 1 0 a.wav\n").unwrap();
        let ch = &open_manifest(&m).unwrap()[0];
        let chunks: Vec<_> = ch.chunks(1.0).collect::<Result<_>>().unwrap();
        assert_eq!(chunks.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![1000, 1000, 500]);
        assert!((chunks[2].start_time_s - 2.0).abs() < 1e-12);
        let joined: Vec<f64> = chunks.iter().flat_map(|c| c.samples.clone()).collect();
        assert_eq!(joined, ch.read_samples(0, 2500).unwrap().samples);
    }

    #[test]
    fn render_then_parse() {
        let cal = CalibrationSpec::new(2048, 165.5).unwrap();
        let text = render_manifest(&[(7, cal, GapPolicy::ZeroFill, vec![("dir with space/x.wav".into(), 12.5)])]);
        let parsed = parse_manifest(&text, Path::new("m.txt")).unwrap();
        let ch = &parsed[&7];
        assert_eq!(ch.calibration, Some((cal, GapPolicy::ZeroFill)));
        assert_eq!(ch.files, vec![(PathBuf::from("dir with space/x.wav"), 12.5)]);
    }
}
