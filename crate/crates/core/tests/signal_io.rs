mod common;

use std::fs;

use pulsecat::signal_io::{open_manifest, read_chunk, render_manifest, CalibrationSpec, GapPolicy};
use pulsecat::synth::SurveySpec;
use pulsecat::Error;

use common::survey;

fn short_spec() -> SurveySpec {
    SurveySpec {
        duration_s: 25.0,
        sample_rate_hz: 8000,
        seed: 11,
        noise_rms_upa: 2e4,
        ..SurveySpec::default()
    }
}

#[test]
fn split_files_read_back_identical_to_single_file() {
    let whole = survey(&short_spec());
    let split = survey(&SurveySpec {
        file_duration_s: Some(7.3),
        ..short_spec()
    });
    assert_eq!(split.manifests[0].files.len(), 4);
    let (a, b) = (&whole.manifests[0], &split.manifests[0]);
    assert_eq!(a.total_samples(), b.total_samples());
    let sa = a.read_samples(0, a.total_samples()).unwrap();
    let sb = b.read_samples(0, b.total_samples()).unwrap();
    assert_eq!(sa.samples, sb.samples);
    // a read straddling a file boundary
    let straddle = read_chunk(b, 7.0, 1.0).unwrap();
    assert_eq!(straddle.samples, sa.samples[56_000..64_000]);
}

#[test]
fn twelve_bit_survey_reads_calibrated_pressure() {
    let s16 = survey(&short_spec());
    let s12 = survey(&SurveySpec {
        bits: 12,
        ..short_spec()
    });
    let m12 = &s12.manifests[0];
    assert_eq!(m12.calibration.counts_full_scale, 2048);
    let a = s16.manifests[0].read_samples(0, 80_000).unwrap();
    let b = m12.read_samples(0, 80_000).unwrap();
    let step = m12.calibration.quantization_step_upa();
    let worst = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst <= step, "worst {worst} vs step {step}");
    // every value is a whole number of 12-bit steps
    assert!(b.samples.iter().all(|p| ((p / step) - (p / step).round()).abs() < 1e-6));
}

#[test]
fn missing_and_garbled_manifests() {
    let s = survey(&short_spec());
    let wav = s.generated.wav_files[0].file_name().unwrap().to_string_lossy().into_owned();
    let cal = CalibrationSpec::new(32768, 170.0).unwrap();
    let bad = s.path("missing.txt");
    fs::write(
        &bad,
        render_manifest(&[(0, cal, GapPolicy::Error, vec![(wav.clone(), 0.0), ("nope.wav".into(), 25.0)])]),
    )
    .unwrap();
    assert!(matches!(open_manifest(&bad), Err(Error::MissingFile(p)) if p.ends_with("nope.wav")));

    let garbled = s.path("garbled.txt");
    fs::write(&garbled, format!("calibration 0 32768 170\nfile 0 zero {wav}\n")).unwrap();
    assert!(matches!(open_manifest(&garbled), Err(Error::Manifest { line: 2, .. })));
}

#[test]
fn gap_between_files_depends_on_policy() {
    let s = survey(&SurveySpec {
        file_duration_s: Some(10.0),
        ..short_spec()
    });
    let names: Vec<String> = s
        .generated
        .wav_files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let cal = CalibrationSpec::new(32768, 170.0).unwrap();
    let write = |policy, name: &str| {
        let path = s.path(name);
        let files = vec![(names[0].clone(), 0.0), (names[1].clone(), 12.0)];
        fs::write(&path, render_manifest(&[(0, cal, policy, files)])).unwrap();
        path
    };
    assert!(matches!(
        open_manifest(&write(GapPolicy::Error, "strict.txt")),
        Err(Error::Discontinuity { .. })
    ));
    let filled = open_manifest(&write(GapPolicy::ZeroFill, "filled.txt")).unwrap();
    let m = &filled[0];
    assert_eq!(m.total_samples(), 22 * 8000);
    let gap = read_chunk(m, 10.0, 2.0).unwrap();
    assert!(gap.samples.iter().all(|&p| p == 0.0));
}

#[test]
fn chunks_cover_the_channel_once() {
    let s = survey(&SurveySpec {
        file_duration_s: Some(6.0),
        ..short_spec()
    });
    let m = &s.manifests[0];
    let whole = m.read_samples(0, m.total_samples()).unwrap();
    let mut joined = Vec::new();
    let mut expected_start = m.start_time_s();
    for chunk in m.chunks(4.4) {
        let chunk = chunk.unwrap();
        assert!((chunk.start_time_s - expected_start).abs() < 1e-9);
        expected_start += chunk.duration_s();
        joined.extend(chunk.samples);
    }
    assert_eq!(joined, whole.samples);
}
