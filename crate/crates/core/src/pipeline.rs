//! Per-pulse feature records and run accounting.
//!
//! A record carries 61 feature values for one pulse on one weighted stream:
//!
//! | group | features | content |
//! |-------|----------|---------|
//! | 2     | 1        | early interval (5th, 95th percentile times) |
//! | 3     | 10       | late window start times |
//! | 4–9   | 6        | `t_A`, `P_A` (μPa, dB), `t_B`, `P_B` (μPa, dB) |
//! | 10    | 4        | early SPL, SEL, L_EQ, CSEL |
//! | 11    | 40       | SPL, SEL, L_EQ, CSEL of each late window |
//!
//! Late windows that do not fit before the next pulse carry absent values.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measures::{window_levels, CselAccumulator, LevelSet};
use crate::pulse_detect::{measure_detected, DetectedPulse, DetectorConfig, PulseDetector, PulseEvent, Scan};
use crate::stream::SampleSource;
use crate::weighting::Weighting;
use crate::windows::{energy_bound_indices, plan_late_windows, EnergyBounds, WindowLayout, LATE_WINDOW_COUNT, LATE_WINDOW_S};

/// Early features per record (groups 2 and 4–10).
pub const EARLY_FEATURES: usize = 11;
/// Late features per record (groups 3 and 11).
pub const LATE_FEATURES: usize = 50;
pub const FEATURES_PER_RECORD: usize = EARLY_FEATURES + LATE_FEATURES;

/// Feature values of one pulse on one weighted stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub channel_id: u32,
    pub weighting: Weighting,
    pub pulse_index: u64,
    pub early: EnergyBounds,
    pub late_starts_s: [f64; LATE_WINDOW_COUNT],
    pub t_a_s: f64,
    pub p_a_upa: f64,
    pub p_a_db: Option<f64>,
    pub t_b_s: f64,
    pub p_b_upa: f64,
    pub p_b_db: Option<f64>,
    pub early_levels: LevelSet,
    pub late_levels: [Option<LevelSet>; LATE_WINDOW_COUNT],
    /// Not one of the 61 features; carried alongside for convenience.
    pub ipi_s: Option<f64>,
}

impl FeatureRecord {
    /// Number of absent feature values (invalid late windows, undefined dB values).
    pub fn absent_count(&self) -> usize {
        self.late_levels.iter().filter(|l| l.is_none()).count() * 4
            + usize::from(self.p_a_db.is_none())
            + usize::from(self.p_b_db.is_none())
    }

    fn sort_key(&self) -> (u32, u64, Weighting) {
        (self.channel_id, self.pulse_index, self.weighting)
    }
}

/// Orders records by channel, pulse index, then weighting.
pub fn sort_records(records: &mut [FeatureRecord]) {
    records.sort_by_key(FeatureRecord::sort_key);
}

pub(crate) fn is_sorted(records: &[FeatureRecord]) -> bool {
    records.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key())
}

/// Cumulative exposure series of one (channel, weighting): the early slot and each late slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CselState {
    pub early: CselAccumulator,
    pub late: [CselAccumulator; LATE_WINDOW_COUNT],
}

/// Identifies the series a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesId {
    pub channel_id: u32,
    pub weighting: Weighting,
}

fn index_at<S: SampleSource>(src: &S, t: f64) -> Result<usize> {
    let i = src.index_of(t);
    usize::try_from(i).map_err(|_| Error::OutOfCoverage {
        start: i,
        end: i + 1,
        available: 0,
    })
}

/// Computes the record of one pulse.
///
/// Records of a series must be extracted in pulse order with the same
/// `csel`, since the cumulative levels depend on every earlier pulse.
pub fn extract_record<S: SampleSource>(
    series: SeriesId,
    pulse_index: u64,
    pulse: &PulseEvent,
    layout: &WindowLayout,
    src: &mut S,
    csel: &mut CselState,
) -> Result<FeatureRecord> {
    let fs = src.sample_rate_hz();
    let i5 = index_at(src, layout.early.t_5th_s)?;
    let i95 = index_at(src, layout.early.t_95th_s)?;
    let early = src.range(i5, i95 + 1)?;
    if early.len() != i95 + 1 - i5 {
        return Err(Error::OutOfCoverage {
            start: i5 as i64,
            end: i95 as i64 + 1,
            available: i5 + early.len(),
        });
    }
    let early_levels = window_levels(early, fs, &mut csel.early)?;

    let width = (LATE_WINDOW_S * fs).round() as usize;
    let mut late_levels = [None; LATE_WINDOW_COUNT];
    for (k, slot) in late_levels.iter_mut().enumerate() {
        if !layout.late_valid[k] {
            continue;
        }
        let start = index_at(src, layout.late_starts[k])?;
        let samples = src.range(start, start + width)?;
        if samples.len() != width {
            return Err(Error::OutOfCoverage {
                start: start as i64,
                end: (start + width) as i64,
                available: start + samples.len(),
            });
        }
        *slot = match window_levels(samples, fs, &mut csel.late[k]) {
            Ok(levels) => Some(levels),
            Err(Error::ZeroEnergy) => None,
            Err(e) => return Err(e),
        };
    }

    let mut late_starts_s = [0.0; LATE_WINDOW_COUNT];
    late_starts_s.copy_from_slice(&layout.late_starts);
    Ok(FeatureRecord {
        channel_id: series.channel_id,
        weighting: series.weighting,
        pulse_index,
        early: layout.early,
        late_starts_s,
        t_a_s: pulse.t_a_s,
        p_a_upa: pulse.p_a_upa,
        p_a_db: pulse.p_a_db,
        t_b_s: pulse.t_b_s,
        p_b_upa: pulse.p_b_upa,
        p_b_db: pulse.p_b_db,
        early_levels,
        late_levels,
        ipi_s: pulse.ipi_s,
    })
}

/// Detected pulse with its early interval in sample indices.
struct LocatedPulse {
    detected: DetectedPulse,
    early: (usize, usize),
}

fn locate<S: SampleSource>(src: &mut S, detector: &PulseDetector, peak: usize) -> Result<LocatedPulse> {
    let detected = measure_detected(src, detector.geometry(), peak)?;
    let (start, end) = detected.window;
    let (lo, hi) = energy_bound_indices(src.range(start, end)?)?;
    Ok(LocatedPulse {
        detected,
        early: (start + lo, start + hi),
    })
}

/// Output of one (channel, weighting) pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesExtraction {
    pub events: Vec<PulseEvent>,
    pub records: Vec<FeatureRecord>,
}

/// Detects pulses on a weighted stream and extracts every record, in pulse order.
///
/// Memory stays bounded: only the current pulse's span and the detector's
/// look-behind are buffered.
pub fn extract_series<S: SampleSource>(src: &mut S, series: SeriesId, cfg: &DetectorConfig) -> Result<SeriesExtraction> {
    cfg.validate()?;
    let fs = src.sample_rate_hz();
    let t0 = src.start_time_s();
    let time = |i: usize| t0 + i as f64 / fs;
    let mut detector = PulseDetector::new(cfg, fs);
    let geometry = detector.geometry();
    let width = (LATE_WINDOW_S * fs).round() as usize;
    let late_span = LATE_WINDOW_COUNT * width;

    let mut csel = CselState::default();
    let mut out = SeriesExtraction::default();
    let mut peaks = Vec::new();

    let mut current = match detector.scan(src, None, usize::MAX)? {
        Scan::Peak(p) => Some(locate(src, &detector, p)?),
        _ => None,
    };
    while let Some(cur) = current {
        // a later trigger cannot produce an early interval that cuts into this pulse's late windows
        let horizon = cur.detected.peak + geometry.pre + geometry.post + late_span;
        let next = match detector.scan(src, Some(horizon), cur.detected.window.0)? {
            Scan::Peak(p) => Some(locate(src, &detector, p)?),
            Scan::Limit | Scan::End => None,
        };

        let (i5, i95) = cur.early;
        let available = src.range(i95, i95 + late_span)?.len();
        let data_limit = (available < late_span).then_some(i95 + available);
        let limit = match (next.as_ref().map(|n| n.early.0), data_limit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let plan = plan_late_windows(i95 as i64, width as i64, limit.map(|l| l as i64));
        let layout = WindowLayout {
            early: EnergyBounds {
                t_5th_s: time(i5),
                t_95th_s: time(i95),
            },
            late_starts: plan.iter().map(|&(s, _)| time(s as usize)).collect(),
            late_valid: plan.iter().map(|&(_, v)| v).collect(),
        };
        let event = cur.detected.event;
        let record = extract_record(series, out.records.len() as u64, &event, &layout, src, &mut csel)?;
        out.records.push(record);
        out.events.push(event);
        peaks.push(cur.detected.peak);

        current = match next {
            Some(n) => Some(n),
            None => match detector.scan(src, None, usize::MAX)? {
                Scan::Peak(p) => Some(locate(src, &detector, p)?),
                _ => None,
            },
        };
    }

    for (i, pair) in peaks.windows(2).enumerate() {
        let ipi = (pair[1] - pair[0]) as f64 / fs;
        out.events[i].ipi_s = Some(ipi);
        out.records[i].ipi_s = Some(ipi);
    }
    Ok(out)
}

/// Total feature points `A·(B+C)·D·E`.
pub fn ledger_total(a: u64, b: u64, c: u64, d: u64, e: u64) -> u64 {
    a * (b + c) * d * e
}

/// Feature-count accounting of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLedger {
    /// A: weighting filters.
    pub weightings: u64,
    /// B: early features per record.
    pub early_features: u64,
    /// C: late features per record.
    pub late_features: u64,
    /// D: recording units.
    pub units: u64,
    /// E: pulses per unit and weighting, when every series detected the same number.
    pub pulses: Option<u64>,
    /// Feature cells actually written to the catalog.
    pub total_points: u64,
}

impl RunLedger {
    /// Builds the ledger from per-series pulse counts and the written cell count.
    pub fn new(weightings: usize, units: usize, series_pulses: &[u64], total_points: u64) -> Self {
        let pulses = match series_pulses.split_first() {
            Some((first, rest)) if rest.iter().all(|n| n == first) => Some(*first),
            Some(_) => None,
            None => Some(0),
        };
        Self {
            weightings: weightings as u64,
            early_features: EARLY_FEATURES as u64,
            late_features: LATE_FEATURES as u64,
            units: units as u64,
            pulses,
            total_points,
        }
    }

    /// `A·(B+C)·D·E`, when E is well defined.
    pub fn formula_total(&self) -> Option<u64> {
        self.pulses
            .map(|e| ledger_total(self.weightings, self.early_features, self.late_features, self.units, e))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let e = self.pulses.map_or_else(|| "varies by series".to_string(), |e| e.to_string());
        let formula = self.formula_total().map_or_else(|| "n/a".to_string(), |t| t.to_string());
        let _ = writeln!(s, "NUMBER OF EXTRACTED FEATURES");
        let _ = writeln!(s, "A\tNumber of weighting filters (signal streams)\t{}", self.weightings);
        let _ = writeln!(s, "B\tEarly Time Features (feature points)\t{}", self.early_features);
        let _ = writeln!(s, "C\tLate Time Features (feature points)\t{}", self.late_features);
        let _ = writeln!(s, "D\tNumber of recording units\t{}", self.units);
        let _ = writeln!(s, "E\tPulses detected per unit\t{e}");
        let _ = writeln!(s, "\tTotal number of data points extracted (A)(B+C)(D)(E)\t{formula}");
        let _ = writeln!(s, "\tFeature cells written\t{}", self.total_points);
        s
    }
}
