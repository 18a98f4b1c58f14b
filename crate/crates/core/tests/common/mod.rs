#![allow(dead_code)]

use std::path::Path;

use pulsecat::catalog::{header, ID_COLUMNS};
use pulsecat::signal_io::{open_manifest, ChannelManifest};
use pulsecat::synth::{generate, GeneratedSurvey, SurveySpec};
use pulsecat::weighting::FilterState;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use tempfile::TempDir;

pub struct Survey {
    pub dir: TempDir,
    pub generated: GeneratedSurvey,
    pub manifests: Vec<ChannelManifest>,
}

impl Survey {
    pub fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
}

pub fn survey(spec: &SurveySpec) -> Survey {
    let dir = TempDir::new().unwrap();
    let generated = generate(spec, dir.path()).unwrap();
    let manifests = open_manifest(&generated.manifest).unwrap();
    Survey {
        dir,
        generated,
        manifests,
    }
}

/// Gain in dB at `freq_hz`, from the FFT of the filter's impulse response.
///
/// The record is `seconds` long; the bin nearest `freq_hz` is used, so pick a
/// length that puts `freq_hz` on a bin.
pub fn response_db(filter: &FilterState, freq_hz: f64, seconds: f64) -> f64 {
    let fs = filter.sample_rate_hz;
    let n = (fs * seconds).round() as usize;
    let mut f = filter.clone();
    f.reset();
    let mut h = vec![0.0; n];
    h[0] = 1.0;
    f.process(&mut h);
    let mut spectrum: Vec<Complex<f64>> = h.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut spectrum);
    let bin = (freq_hz * n as f64 / fs).round() as usize;
    20.0 * spectrum[bin].norm().log10()
}

/// 5th/95th cumulative-energy crossing times of a continuous pressure signal,
/// integrated on a grid 10× finer than the native sample period.
///
/// The integration covers the `n` native sample cells `[t_i − Δ/2, t_i + Δ/2)`
/// with `t_i = t0 + i/fs`, using the midpoint rule on the fine grid.
pub fn oversampled_bounds(p: impl Fn(f64) -> f64, t0: f64, n: usize, fs: f64) -> (f64, f64) {
    const OVERSAMPLE: usize = 10;
    let dt = 1.0 / (fs * OVERSAMPLE as f64);
    let time = |k: usize| t0 - 0.5 / fs + (k as f64 + 0.5) * dt;
    let fine: Vec<f64> = (0..n * OVERSAMPLE)
        .map(|k| {
            let v = p(time(k));
            v * v * dt
        })
        .collect();
    let total: f64 = fine.iter().sum();
    let mut acc = 0.0;
    let mut lo = None;
    for (k, e) in fine.iter().enumerate() {
        acc += e;
        if lo.is_none() && acc >= 0.05 * total {
            lo = Some(k);
        }
        if acc >= 0.95 * total {
            return (time(lo.unwrap()), time(k));
        }
    }
    unreachable!("cumulative sum reaches its total")
}

/// (rows, feature cells) counted directly from a catalog file.
pub fn count_catalog_cells(path: &Path) -> (u64, u64) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let columns: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(columns, header());
    let feature_columns: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| !ID_COLUMNS.contains(&c.as_str()) && c.as_str() != "ipi_s")
        .map(|(i, _)| i)
        .collect();
    let mut rows = 0;
    let mut cells = 0;
    for row in reader.records() {
        let row = row.unwrap();
        rows += 1;
        cells += feature_columns.iter().filter(|&&i| row.get(i).is_some_and(|c| !c.is_empty())).count() as u64;
    }
    (rows, cells)
}
