use proptest::prelude::*;
use pulsecat::measures::{csel_from_sels, csel_update, exposure, leq, sel, spl, CselAccumulator};
use pulsecat::signal_io::SampleBuffer;
use pulsecat::windows::{energy_bounds, layout_windows, EnergyBounds};

fn window(samples: Vec<f64>, fs: f64) -> SampleBuffer {
    SampleBuffer::new(samples, fs, 0.0, 0).unwrap()
}

fn nonzero_samples() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1e8f64..1e8, 1..400).prop_filter("needs energy", |v| v.iter().any(|&x| x.abs() > 1e-3))
}

proptest! {
    #[test]
    fn levels_are_ordered_and_scale(samples in nonzero_samples(), gain_db in -40.0f64..40.0) {
        let fs = 1000.0;
        let w = window(samples.clone(), fs);
        let g = 10f64.powf(gain_db / 20.0);
        let scaled = window(samples.iter().map(|x| x * g).collect(), fs);
        prop_assert!((spl(&scaled).unwrap() - spl(&w).unwrap() - gain_db).abs() < 1e-9);
        prop_assert!((sel(&scaled).unwrap() - sel(&w).unwrap() - gain_db).abs() < 1e-9);
        // mean square never exceeds peak square
        prop_assert!(leq(&w).unwrap() <= spl(&w).unwrap() + 1e-9);
    }

    #[test]
    fn csel_is_order_independent(mut sels in proptest::collection::vec(60.0f64..220.0, 1..80), seed in any::<u64>()) {
        let forward = csel_from_sels(&sels).unwrap();
        let n = sels.len();
        sels.rotate_left((seed % n as u64) as usize);
        sels.reverse();
        let mut acc = CselAccumulator::new();
        for s in &sels {
            acc.add_exposure(10f64.powf(s / 10.0));
        }
        prop_assert!((acc.level_db().unwrap() - forward).abs() < 1e-9);
        prop_assert!(forward >= sels.iter().cloned().fold(f64::MIN, f64::max) - 1e-9);
    }

    #[test]
    fn csel_update_adds_exposure(a in nonzero_samples(), b in nonzero_samples()) {
        let (wa, wb) = (window(a, 500.0), window(b, 500.0));
        let (acc, _) = csel_update(CselAccumulator::new(), &wa);
        let (acc, level) = csel_update(acc, &wb);
        let expected = exposure(&wa.samples, 500.0) + exposure(&wb.samples, 500.0);
        prop_assert!((acc.linear_sum() / expected - 1.0).abs() < 1e-12);
        prop_assert!((level.unwrap() - csel_from_sels(&[sel(&wa).unwrap(), sel(&wb).unwrap()]).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn energy_bounds_capture_ninety_percent(samples in nonzero_samples(), t0 in 0.0f64..1e4) {
        let fs = 250.0;
        let w = SampleBuffer::new(samples.clone(), fs, t0, 0).unwrap();
        let b = energy_bounds(&w).unwrap();
        let lo = w.index_of(b.t_5th_s) as usize;
        let hi = w.index_of(b.t_95th_s) as usize;
        prop_assert!(lo <= hi && hi < samples.len());
        let total: f64 = samples.iter().map(|x| x * x).sum();
        let inside: f64 = samples[lo..=hi].iter().map(|x| x * x).sum();
        let slack = samples[lo].powi(2) + samples[hi].powi(2);
        prop_assert!(inside >= 0.9 * total * (1.0 - 1e-12));
        prop_assert!(inside <= 0.9 * total + slack + 1e-9 * total);
    }

    #[test]
    fn late_windows_valid_iff_they_fit(t95 in 0.0f64..1000.0, gap in 0.0f64..15.0) {
        let this = EnergyBounds { t_5th_s: t95 - 0.1, t_95th_s: t95 };
        let next = EnergyBounds { t_5th_s: t95 + gap, t_95th_s: t95 + gap + 0.1 };
        let layout = layout_windows(&this, Some(&next), None);
        prop_assert_eq!(layout.late_starts.len(), 10);
        for (k, (&start, &valid)) in layout.late_starts.iter().zip(&layout.late_valid).enumerate() {
            prop_assert!((start - (t95 + k as f64)).abs() < 1e-6);
            // oracle with a tolerance band around the exact boundary
            let end = t95 + k as f64 + 1.0;
            if end < next.t_5th_s - 1e-6 {
                prop_assert!(valid);
            } else if end > next.t_5th_s + 1e-6 {
                prop_assert!(!valid);
            }
        }
        // valid windows form a prefix
        let n = layout.valid_count();
        prop_assert!(layout.late_valid[..n].iter().all(|&v| v));
    }
}
