mod common;

use proptest::prelude::*;
use pulsecat::signal_io::SampleBuffer;
use pulsecat::weighting::{design_filter, Weighting, WeightingSpec};

use common::response_db;

#[test]
fn passband_is_flat_and_stopband_falls_off() {
    let fs = 96_000.0;
    let lfc = design_filter(Weighting::Lfc.spec(), fs).unwrap();
    assert!(response_db(&lfc, 1000.0, 4.0).abs() < 0.05);
    // fourth-order slope: about -24 dB per octave well below the corner
    let below = response_db(&lfc, 1.75, 4.0);
    assert!((below + 48.0).abs() < 1.5, "{below}");

    let mfc = design_filter(Weighting::Mfc.spec(), fs).unwrap();
    assert_eq!(mfc.sections().len(), 2, "low-pass omitted above 0.95 Nyquist");
    assert!(response_db(&mfc, 20_000.0, 4.0).abs() < 0.05);
    assert!(response_db(&mfc, 37.5, 4.0) < -45.0);
}

#[test]
fn chunked_filtering_matches_one_pass() {
    let fs = 16_000.0;
    let samples: Vec<f64> = (0..50_000).map(|i| ((i * 7919) % 1013) as f64 - 506.0).collect();
    let whole = SampleBuffer::new(samples.clone(), fs, 0.0, 0).unwrap();
    let mut f = design_filter(Weighting::Lfc.spec(), fs).unwrap();
    let once = f.apply(&whole).unwrap();
    f.reset();
    let mut pieces = Vec::new();
    for c in samples.chunks(3331) {
        let mut part = c.to_vec();
        f.process(&mut part);
        pieces.extend(part);
    }
    assert_eq!(pieces, once.samples);
}

proptest! {
    #[test]
    fn any_valid_band_is_stable(lo in 1.0f64..2000.0, ratio in 1.5f64..200.0, fs in 8000.0f64..512_000.0) {
        let spec = WeightingSpec { kind: Weighting::Lfc, f_lo_hz: Some(lo), f_hi_hz: Some(lo * ratio) };
        let filter = design_filter(spec, fs).unwrap();
        prop_assert!(filter.is_stable());
    }

    #[test]
    fn linear_is_identity(samples in proptest::collection::vec(-1e9f64..1e9, 1..500)) {
        let input = SampleBuffer::new(samples, 8000.0, 0.0, 0).unwrap();
        let out = design_filter(Weighting::Linear.spec(), 8000.0).unwrap().apply(&input).unwrap();
        prop_assert_eq!(out.samples, input.samples);
    }
}
