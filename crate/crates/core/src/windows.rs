//! Early-time bounds and late-time window layout.
//!
//! The early interval runs from the first sample at which the cumulative
//! squared pressure of the search window reaches 5% of its total to the first
//! sample reaching 95%, both inclusive. Late windows are [`LATE_WINDOW_COUNT`]
//! back-to-back windows of [`LATE_WINDOW_S`] starting at the 95% bound; a
//! window is valid only if it ends no later than the next pulse's 5% bound
//! and the end of the data.

use crate::error::{Error, Result};
use crate::signal_io::SampleBuffer;

pub const LATE_WINDOW_COUNT: usize = 10;
pub const LATE_WINDOW_S: f64 = 1.0;
pub const LOWER_PERCENTILE: f64 = 0.05;
pub const UPPER_PERCENTILE: f64 = 0.95;

/// Start and end of the early (direct pulse) interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBounds {
    pub t_5th_s: f64,
    pub t_95th_s: f64,
}

impl EnergyBounds {
    pub fn span_s(&self) -> f64 {
        self.t_95th_s - self.t_5th_s
    }
}

/// Indices of the 5th and 95th cumulative-energy percentiles.
pub(crate) fn energy_bound_indices(samples: &[f64]) -> Result<(usize, usize)> {
    let total: f64 = samples.iter().map(|p| p * p).sum();
    if total == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let lo_target = LOWER_PERCENTILE * total;
    let hi_target = UPPER_PERCENTILE * total;
    let mut cumulative = 0.0;
    let mut lo = None;
    for (i, p) in samples.iter().enumerate() {
        cumulative += p * p;
        if lo.is_none() && cumulative >= lo_target {
            lo = Some(i);
        }
        if cumulative >= hi_target {
            return Ok((lo.unwrap_or(i), i));
        }
    }
    // only reachable with non-finite input: the running sum ends at `total`
    let last = samples.len() - 1;
    Ok((lo.unwrap_or(last), last))
}

/// 5th/95th percentile bounds of a window's energy.
pub fn energy_bounds(window: &SampleBuffer) -> Result<EnergyBounds> {
    let (lo, hi) = energy_bound_indices(&window.samples)?;
    Ok(EnergyBounds {
        t_5th_s: window.time_at(lo),
        t_95th_s: window.time_at(hi),
    })
}

/// Early interval plus the late-window grid of one pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLayout {
    pub early: EnergyBounds,
    pub late_starts: Vec<f64>,
    pub late_valid: Vec<bool>,
}

impl WindowLayout {
    pub fn valid_count(&self) -> usize {
        self.late_valid.iter().filter(|&&v| v).count()
    }
}

/// Late window grid in integer units: starts at `first`, `width` apart, valid
/// while the window end stays within `limit`.
pub(crate) fn plan_late_windows(first: i64, width: i64, limit: Option<i64>) -> Vec<(i64, bool)> {
    (0..LATE_WINDOW_COUNT as i64)
        .map(|k| {
            let start = first + k * width;
            (start, limit.is_none_or(|l| start + width <= l))
        })
        .collect()
}

const TICKS_PER_S: f64 = 1e9;

fn ticks(t: f64) -> i64 {
    (t * TICKS_PER_S).round() as i64
}

/// Lays out the late windows following `this`.
///
/// `next` is the following pulse's early interval, if any; `data_end_s` is the
/// end of the recording when known. Times are compared at nanosecond resolution.
pub fn layout_windows(this: &EnergyBounds, next: Option<&EnergyBounds>, data_end_s: Option<f64>) -> WindowLayout {
    let limit = match (next.map(|n| ticks(n.t_5th_s)), data_end_s.map(ticks)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let plan = plan_late_windows(0, ticks(LATE_WINDOW_S), limit.map(|l| l - ticks(this.t_95th_s)));
    WindowLayout {
        early: *this,
        late_starts: plan.iter().map(|&(s, _)| this.t_95th_s + s as f64 / TICKS_PER_S).collect(),
        late_valid: plan.iter().map(|&(_, v)| v).collect(),
    }
}
