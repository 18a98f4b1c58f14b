//! Airgun pulse detection and peak measurement.
//!
//! Detection is threshold peak picking with a refractory period. A sample at
//! or above the threshold triggers a candidate; the candidate climbs forward
//! to the largest sample within the post-peak span, and is accepted only if
//! it also dominates the preceding span. The next search resumes
//! `min_ipi_s` after the accepted peak.

use crate::error::{Error, Result};
use crate::signal_io::SampleBuffer;
use crate::stream::{SampleSource, SampleStream};

/// Samples scanned per stream request while looking for a trigger.
const SCAN_BLOCK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Positive peak pressure required to declare a pulse, dB re 1 μPa.
    pub threshold_db: f64,
    /// Refractory period between accepted peaks.
    pub min_ipi_s: f64,
    /// Length of the direct-pulse window around each peak.
    pub search_window_s: f64,
    /// Part of the search window that precedes the peak.
    pub pre_peak_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold_db: 140.0,
            min_ipi_s: 5.0,
            search_window_s: 1.5,
            pre_peak_s: 0.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold_db.is_finite() {
            return Err(Error::InvalidConfig("threshold_db must be finite".into()));
        }
        if self.search_window_s.is_nan() || self.search_window_s <= 0.0 {
            return Err(Error::InvalidConfig("search_window_s must be positive".into()));
        }
        if self.min_ipi_s.is_nan() || self.min_ipi_s <= self.search_window_s {
            return Err(Error::InvalidConfig(format!(
                "min_ipi_s ({}) must exceed search_window_s ({})",
                self.min_ipi_s, self.search_window_s
            )));
        }
        if !(self.pre_peak_s >= 0.0 && self.pre_peak_s < self.search_window_s) {
            return Err(Error::InvalidConfig("pre_peak_s must lie inside the search window".into()));
        }
        Ok(())
    }

    pub fn threshold_upa(&self) -> f64 {
        10f64.powf(self.threshold_db / 20.0)
    }

    pub fn post_peak_s(&self) -> f64 {
        self.search_window_s - self.pre_peak_s
    }
}

/// Sample-count form of the detector geometry at one sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct WindowGeometry {
    pub pre: usize,
    pub post: usize,
    /// Span behind a peak it must strictly dominate.
    pub back: usize,
    /// Span ahead of a peak it must dominate.
    pub ahead: usize,
    pub refractory: usize,
}

impl WindowGeometry {
    pub fn new(cfg: &DetectorConfig, sample_rate_hz: f64) -> Self {
        let n = |s: f64| (s * sample_rate_hz).round() as usize;
        let half = cfg.search_window_s / 2.0;
        Self {
            pre: n(cfg.pre_peak_s),
            post: n(cfg.post_peak_s()),
            back: n(cfg.pre_peak_s.max(half)),
            ahead: n(cfg.post_peak_s().max(half)),
            refractory: n(cfg.min_ipi_s).max(1),
        }
    }

    /// Search window `[start, end)` around a peak, before clipping at the data end.
    pub fn window(&self, peak: usize) -> (usize, usize) {
        (peak.saturating_sub(self.pre), peak + self.post)
    }
}

/// Outcome of a bounded scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scan {
    Peak(usize),
    /// No trigger before the limit; scanning resumes there.
    Limit,
    End,
}

/// Incremental detector over a [`SampleSource`].
#[derive(Debug, Clone)]
pub(crate) struct PulseDetector {
    threshold: f64,
    geometry: WindowGeometry,
    next: usize,
}

impl PulseDetector {
    pub fn new(cfg: &DetectorConfig, sample_rate_hz: f64) -> Self {
        Self {
            threshold: cfg.threshold_upa(),
            geometry: WindowGeometry::new(cfg, sample_rate_hz),
            next: 0,
        }
    }

    pub fn geometry(&self) -> WindowGeometry {
        self.geometry
    }

    /// Earliest sample the detector may still read.
    pub fn retain_from(&self) -> usize {
        self.next.saturating_sub(self.geometry.back)
    }

    /// Finds the next peak whose trigger lies before `limit`.
    ///
    /// Samples before `keep_from` that the detector no longer needs are released.
    pub fn scan<S: SampleSource>(&mut self, src: &mut S, limit: Option<usize>, keep_from: usize) -> Result<Scan> {
        loop {
            let stop = limit.map_or(usize::MAX, |l| l.max(self.next));
            if self.next >= stop {
                return Ok(Scan::Limit);
            }
            src.release_before(keep_from.min(self.retain_from()));
            let block_end = stop.min(self.next.saturating_add(SCAN_BLOCK));
            let block = src.range(self.next, block_end)?;
            if block.is_empty() {
                return Ok(Scan::End);
            }
            let len = block.len();
            let Some(offset) = block.iter().position(|&x| x >= self.threshold) else {
                self.next += len;
                continue;
            };
            let trigger = self.next + offset;
            let peak = self.climb(src, trigger)?;
            if self.dominates_back(src, peak)? {
                self.next = peak + self.geometry.refractory;
                return Ok(Scan::Peak(peak));
            }
            self.next = peak + 1;
        }
    }

    /// Moves forward to the earliest maximum until nothing larger lies ahead.
    fn climb<S: SampleSource>(&self, src: &mut S, mut peak: usize) -> Result<usize> {
        loop {
            let ahead = src.range(peak, peak + self.geometry.ahead + 1)?;
            let best = argmax_earliest(ahead).expect("peak sample is buffered");
            if best == 0 {
                return Ok(peak);
            }
            peak += best;
        }
    }

    fn dominates_back<S: SampleSource>(&self, src: &mut S, peak: usize) -> Result<bool> {
        let start = peak.saturating_sub(self.geometry.back);
        let span = src.range(start, peak + 1)?;
        let value = span[span.len() - 1];
        Ok(span[..span.len() - 1].iter().all(|&x| x < value))
    }
}

fn argmax_earliest(samples: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in samples.iter().enumerate() {
        if best.is_none_or(|(_, b)| x > b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

fn argmin_earliest(samples: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in samples.iter().enumerate() {
        if best.is_none_or(|(_, b)| x < b) {
            best = Some((i, x));
        }
    }
    best.map(|(i, _)| i)
}

fn level_db(pressure_upa: f64) -> Option<f64> {
    let p = pressure_upa.abs();
    (p > 0.0).then(|| 20.0 * p.log10())
}

/// Positive and negative peaks of a window.
///
/// The dB fields are `None` when the corresponding pressure is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMeasures {
    pub t_a_s: f64,
    pub p_a_upa: f64,
    pub p_a_db: Option<f64>,
    pub t_b_s: f64,
    pub p_b_upa: f64,
    pub p_b_db: Option<f64>,
}

/// Index-space peaks: (argmax, argmin), earliest sample winning ties.
pub(crate) fn peak_indices(samples: &[f64]) -> Result<(usize, usize)> {
    if samples.iter().all(|&x| x == 0.0) {
        return Err(Error::NoPeak);
    }
    let a = argmax_earliest(samples).expect("non-empty");
    let b = argmin_earliest(samples).expect("non-empty");
    Ok((a, b))
}

pub(crate) fn peaks_at(samples: &[f64], a: usize, b: usize, time_of: impl Fn(usize) -> f64) -> PeakMeasures {
    PeakMeasures {
        t_a_s: time_of(a),
        p_a_upa: samples[a],
        p_a_db: level_db(samples[a]),
        t_b_s: time_of(b),
        p_b_upa: samples[b],
        p_b_db: level_db(samples[b]),
    }
}

/// Positive peak (argmax) and negative peak (argmin) of a window.
pub fn measure_peaks(window: &SampleBuffer) -> Result<PeakMeasures> {
    let (a, b) = peak_indices(&window.samples)?;
    Ok(peaks_at(&window.samples, a, b, |i| window.time_at(i)))
}

/// One detected airgun pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEvent {
    pub t_a_s: f64,
    pub p_a_upa: f64,
    pub p_a_db: Option<f64>,
    pub t_b_s: f64,
    pub p_b_upa: f64,
    pub p_b_db: Option<f64>,
    /// Peak-to-peak level, dB re 1 μPa.
    pub p_pp_db: Option<f64>,
    /// Time to the next pulse's positive peak; `None` for the last pulse.
    pub ipi_s: Option<f64>,
}

impl PulseEvent {
    pub fn from_peaks(peaks: PeakMeasures) -> Self {
        Self {
            t_a_s: peaks.t_a_s,
            p_a_upa: peaks.p_a_upa,
            p_a_db: peaks.p_a_db,
            t_b_s: peaks.t_b_s,
            p_b_upa: peaks.p_b_upa,
            p_b_db: peaks.p_b_db,
            p_pp_db: level_db(peaks.p_a_upa - peaks.p_b_upa),
            ipi_s: None,
        }
    }
}

/// A detected peak with its measured search window, in sample indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DetectedPulse {
    pub peak: usize,
    pub window: (usize, usize),
    pub event: PulseEvent,
}

/// Measures the search window of a detected peak.
pub(crate) fn measure_detected<S: SampleSource>(src: &mut S, geometry: WindowGeometry, peak: usize) -> Result<DetectedPulse> {
    let (start, end) = geometry.window(peak);
    let fs = src.sample_rate_hz();
    let t0 = src.start_time_s();
    let samples = src.range(start, end)?;
    let end = start + samples.len();
    let (a, b) = peak_indices(samples)?;
    debug_assert_eq!(start + a, peak);
    let peaks = peaks_at(samples, a, b, |i| t0 + (start + i) as f64 / fs);
    Ok(DetectedPulse {
        peak,
        window: (start, end),
        event: PulseEvent::from_peaks(peaks),
    })
}

/// Detects pulses over time-contiguous chunks of one channel and weighting.
pub fn detect_pulses<I>(chunks: I, cfg: &DetectorConfig) -> Result<Vec<PulseEvent>>
where
    I: IntoIterator<Item = SampleBuffer>,
{
    cfg.validate()?;
    let mut chunks = chunks.into_iter().peekable();
    let Some(first) = chunks.peek() else {
        return Ok(Vec::new());
    };
    let (fs, t0) = (first.sample_rate_hz, first.start_time_s);
    let mut stream = SampleStream::new(chunks.map(Ok), fs, t0);
    detect_in(&mut stream, cfg)
}

/// Detects all pulses of a source.
pub(crate) fn detect_in<S: SampleSource>(src: &mut S, cfg: &DetectorConfig) -> Result<Vec<PulseEvent>> {
    let mut detector = PulseDetector::new(cfg, src.sample_rate_hz());
    let geometry = detector.geometry();
    let mut events: Vec<(usize, PulseEvent)> = Vec::new();
    // each pulse is measured before the next scan, so nothing needs pinning
    while let Scan::Peak(peak) = detector.scan(src, None, usize::MAX)? {
        let pulse = measure_detected(src, geometry, peak)?;
        if let Some((prev, ev)) = events.last_mut() {
            ev.ipi_s = Some((peak - *prev) as f64 / src.sample_rate_hz());
        }
        events.push((peak, pulse.event));
    }
    Ok(events.into_iter().map(|(_, e)| e).collect())
}
