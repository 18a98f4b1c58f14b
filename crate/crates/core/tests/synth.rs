mod common;

use pulsecat::measures::{exposure, exposure_db};
use pulsecat::runner::detect_channel;
use pulsecat::pulse_detect::DetectorConfig;
use pulsecat::synth::{read_ground_truth, PulseModel, SurveySpec};
use pulsecat::weighting::Weighting;

use common::survey;

#[test]
fn three_pulses_at_ten_seconds() {
    let s = survey(&SurveySpec {
        duration_s: 30.0,
        ..SurveySpec::default()
    });
    let gt = read_ground_truth(&s.generated.ground_truth).unwrap();
    let t0 = gt[0].t_true_s;
    let times: Vec<f64> = gt.iter().map(|p| p.t_true_s - t0).collect();
    assert_eq!(times, [0.0, 10.0, 20.0]);
    for (read, made) in gt.iter().zip(&s.generated.pulses) {
        assert_eq!((read.channel_id, read.pulse_index), (made.channel_id, made.pulse_index));
        assert!((read.t_true_s - made.t_true_s).abs() < 1e-9);
        assert!((read.p_peak_upa / made.p_peak_upa - 1.0).abs() < 1e-12);
        assert!((read.sel_analytic_db - made.sel_analytic_db).abs() < 1e-6);
    }
}

#[test]
fn same_seed_same_bytes() {
    let spec = SurveySpec {
        channel_count: 2,
        duration_s: 20.0,
        noise_rms_upa: 3e4,
        seed: 41,
        ..SurveySpec::default()
    };
    let (a, b) = (survey(&spec), survey(&spec));
    for (x, y) in a.generated.wav_files.iter().zip(&b.generated.wav_files) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let c = survey(&SurveySpec { seed: 42, ..spec });
    assert_ne!(
        std::fs::read(&a.generated.wav_files[0]).unwrap(),
        std::fs::read(&c.generated.wav_files[0]).unwrap()
    );
}

#[test]
fn analytic_sel_matches_numeric_integration() {
    let fs = 16_000.0;
    for model in [
        PulseModel {
            attack_s: 0.0,
            carrier_hz: 0.0,
            ..PulseModel::default()
        },
        PulseModel::default(),
        PulseModel {
            decay_s: 0.01,
            carrier_hz: 400.0,
            attack_s: 0.001,
            ..PulseModel::default()
        },
    ] {
        // oracle: rectangle rule on the closed-form waveform
        let attack = (model.attack_s * fs).round() as usize;
        let samples: Vec<f64> = (0..(3.0 * fs) as usize)
            .map(|j| {
                if j < attack {
                    model.peak_upa * (0.5 * std::f64::consts::PI * j as f64 / attack as f64).sin().powi(2)
                } else {
                    let u = (j - attack) as f64 / fs;
                    model.peak_upa * (-u / model.decay_s).exp() * (2.0 * std::f64::consts::PI * model.carrier_hz * u).cos()
                }
            })
            .collect();
        let numeric = exposure_db(exposure(&samples, fs));
        assert!((numeric - model.analytic_sel_db(fs)).abs() < 0.1, "{numeric} vs {}", model.analytic_sel_db(fs));
    }
}

#[test]
fn noisy_survey_still_recovers_every_pulse() {
    let spec = SurveySpec {
        channel_count: 2,
        duration_s: 80.0,
        noise_rms_upa: 1e5,
        seed: 43,
        ..SurveySpec::default()
    };
    let s = survey(&spec);
    for m in &s.manifests {
        let events = detect_channel(m, Weighting::Linear, &DetectorConfig::default(), 60.0).unwrap();
        let truth: Vec<f64> = spec
            .ground_truth()
            .iter()
            .filter(|p| p.channel_id == m.channel_id)
            .map(|p| p.t_true_s)
            .collect();
        assert_eq!(events.len(), truth.len());
        for (e, t) in events.iter().zip(&truth) {
            assert!((e.t_a_s - t).abs() <= 2.0 / 16_000.0, "{} vs {t}", e.t_a_s);
        }
    }
}

#[test]
fn file_splitting_does_not_change_samples() {
    let spec = SurveySpec {
        duration_s: 15.0,
        noise_rms_upa: 1e4,
        seed: 44,
        ..SurveySpec::default()
    };
    let whole = survey(&spec);
    let split = survey(&SurveySpec {
        file_duration_s: Some(2.5),
        ..spec
    });
    let a = &whole.manifests[0];
    let b = &split.manifests[0];
    assert_eq!(b.files.len(), 6);
    assert_eq!(
        a.read_samples(0, a.total_samples()).unwrap().samples,
        b.read_samples(0, b.total_samples()).unwrap().samples
    );
}
