//! Level metrics over a window of calibrated pressure.
//!
//! All levels use the underwater reference pressure of 1 μPa and the
//! rectangle rule at the native sample period. SPL over a window is the peak
//! level, `20·log10(max|p|)`.

use crate::error::{Error, Result};
use crate::signal_io::SampleBuffer;

/// Reference pressure, μPa.
pub const REFERENCE_PRESSURE_UPA: f64 = 1.0;

/// Squared-pressure integral `Σ p²·Δt` in μPa²·s.
pub fn exposure(samples: &[f64], sample_rate_hz: f64) -> f64 {
    samples.iter().map(|p| p * p).sum::<f64>() / sample_rate_hz
}

fn peak_abs(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0f64, |m, p| m.max(p.abs()))
}

pub(crate) fn spl_peak_db(samples: &[f64]) -> Result<f64> {
    let peak = peak_abs(samples);
    if peak == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(20.0 * (peak / REFERENCE_PRESSURE_UPA).log10())
}

/// Level of an exposure, dB re 1 μPa²s.
pub fn exposure_db(exposure_upa2s: f64) -> f64 {
    10.0 * (exposure_upa2s / (REFERENCE_PRESSURE_UPA * REFERENCE_PRESSURE_UPA)).log10()
}

fn sel_db(samples: &[f64], sample_rate_hz: f64) -> Result<f64> {
    let e = exposure(samples, sample_rate_hz);
    if e == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(exposure_db(e))
}

fn leq_db(samples: &[f64], sample_rate_hz: f64) -> Result<f64> {
    let e = exposure(samples, sample_rate_hz);
    if e == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let duration_s = samples.len() as f64 / sample_rate_hz;
    Ok(exposure_db(e / duration_s))
}

/// Peak sound pressure level, dB re 1 μPa.
pub fn spl(window: &SampleBuffer) -> Result<f64> {
    spl_peak_db(&window.samples)
}

/// Sound exposure level, dB re 1 μPa²s.
pub fn sel(window: &SampleBuffer) -> Result<f64> {
    sel_db(&window.samples, window.sample_rate_hz)
}

/// Equivalent continuous level, dB re 1 μPa². Equal to [`sel`] for 1 s windows.
pub fn leq(window: &SampleBuffer) -> Result<f64> {
    leq_db(&window.samples, window.sample_rate_hz)
}

/// The four levels of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSet {
    pub spl_peak_db: f64,
    pub sel_db: f64,
    pub leq_db: f64,
    pub csel_db: f64,
}

/// Running sum of per-pulse exposure for one (channel, weighting, window slot) series.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CselAccumulator {
    linear_sum: f64,
}

impl CselAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accumulated exposure, μPa²·s.
    pub fn linear_sum(&self) -> f64 {
        self.linear_sum
    }

    pub fn add_exposure(&mut self, exposure_upa2s: f64) {
        debug_assert!(exposure_upa2s >= 0.0);
        self.linear_sum += exposure_upa2s;
    }

    /// Cumulative SEL; `None` until something non-zero has been added.
    pub fn level_db(&self) -> Option<f64> {
        (self.linear_sum > 0.0).then(|| exposure_db(self.linear_sum))
    }
}

/// Adds one window to the series and returns the updated cumulative level.
pub fn csel_update(mut acc: CselAccumulator, window: &SampleBuffer) -> (CselAccumulator, Option<f64>) {
    acc.add_exposure(exposure(&window.samples, window.sample_rate_hz));
    let level = acc.level_db();
    (acc, level)
}

/// SPL, SEL, L_EQ and the updated CSEL of a window.
pub(crate) fn window_levels(samples: &[f64], sample_rate_hz: f64, acc: &mut CselAccumulator) -> Result<LevelSet> {
    let e = exposure(samples, sample_rate_hz);
    if e == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let duration_s = samples.len() as f64 / sample_rate_hz;
    acc.add_exposure(e);
    Ok(LevelSet {
        spl_peak_db: spl_peak_db(samples)?,
        sel_db: exposure_db(e),
        leq_db: exposure_db(e / duration_s),
        csel_db: acc.level_db().expect("accumulator holds positive exposure"),
    })
}

/// Combines per-pulse SELs into a cumulative level, `10·log10(Σ 10^(SEL/10))`.
pub fn csel_from_sels(sels_db: &[f64]) -> Option<f64> {
    let sum: f64 = sels_db.iter().map(|s| 10f64.powf(s / 10.0)).sum();
    (sum > 0.0).then(|| 10.0 * sum.log10())
}
