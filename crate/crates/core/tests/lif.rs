use cochlea_feast::cochlea::CochleaConfig;
use cochlea_feast::spikegen::{
    first_spike_steps, lateral_inhibition, lif_step, LifConfig, LifState, SpikeEncoder,
    ThresholdLevel,
};
use proptest::prelude::*;

fn single(threshold: f64, tau: f64, v_reset: f64) -> LifConfig {
    LifConfig {
        tau_lif: tau,
        thresholds: vec![ThresholdLevel {
            id: 0,
            value: threshold,
        }],
        v_reset,
        li_alpha: 0.0,
        neurons_per_threshold: 1,
        input_gain: 1.0,
    }
}

/// Smallest n with I (1 - (1 - c)^n) > theta.
fn oracle_steps(drive: f64, threshold: f64, c: f64) -> u64 {
    let n = (-threshold / drive).ln_1p() / (-c).ln_1p();
    n.ceil().max(1.0) as u64
}

fn simulate_first_spike(drive: f64, threshold: f64, tau: f64, fs: u32, limit: u64) -> Option<u64> {
    let mut state = LifState::<f64>::new(1, &single(threshold, tau, 0.0), fs).unwrap();
    (0..limit).find(|&t| !lif_step(&mut state, &[drive], t).is_empty()).map(|t| t + 1)
}

#[test]
fn first_spike_matches_closed_form() {
    let fs = 16_000;
    for &tau in &[0.001, 0.005, 0.01, 0.05] {
        for &threshold in &[1e-4, 4e-4, 1e-2, 0.3] {
            for &ratio in &[1.001, 1.05, 1.5, 3.0, 20.0, 1000.0] {
                let drive = threshold * ratio;
                let c = 1.0 / (fs as f64 * tau);
                let expected = oracle_steps(drive, threshold, c);
                let sim = simulate_first_spike(drive, threshold, tau, fs, 10 * expected + 10)
                    .expect("a supra-threshold drive must fire");
                assert!(sim.abs_diff(expected) <= 1, "tau {tau} th {threshold} I {drive}: sim {sim} oracle {expected}");
                let closed = first_spike_steps(drive, threshold, c).unwrap();
                assert!(closed.abs_diff(expected) <= 1);
            }
        }
    }
}

#[test]
fn sub_threshold_drive_never_fires() {
    let fs = 16_000;
    for &(threshold, ratio) in &[(4e-4, 1.0), (4e-4, 0.999), (0.5, 0.5), (1e-3, 0.0)] {
        let drive = threshold * ratio;
        assert!(simulate_first_spike(drive, threshold, 0.01, fs, 1_000_000).is_none());
        assert!(first_spike_steps(drive, threshold, 1.0 / (fs as f64 * 0.01)).is_none());
    }
}

#[test]
fn constant_drive_fires_periodically() {
    let fs = 16_000;
    let mut state = LifState::<f64>::new(1, &single(0.01, 0.002, 0.0), fs).unwrap();
    let times: Vec<u64> = (0..5_000)
        .filter(|&t| !lif_step(&mut state, &[0.05], t).is_empty())
        .collect();
    assert!(times.len() > 10);
    let gaps: Vec<u64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.iter().all(|&g| g == gaps[0]));
    assert_eq!(gaps[0], times[0] + 1);
}

#[test]
fn multiple_levels_emit_ids_in_order() {
    let cfg = LifConfig {
        thresholds: vec![
            ThresholdLevel { id: 0, value: 0.01 },
            ThresholdLevel { id: 1, value: 0.02 },
        ],
        neurons_per_threshold: 2,
        ..single(0.01, 0.001, 0.0)
    };
    assert_eq!(cfg.neurons(), vec![(0, 0.01), (1, 0.01), (2, 0.02), (3, 0.02)]);
    let mut state = LifState::<f64>::new(2, &cfg, 16_000).unwrap();
    let mut all = Vec::new();
    for t in 0..200 {
        all.extend(lif_step(&mut state, &[1.0, 1.0], t));
    }
    let keys: Vec<_> = all.iter().map(|e| (e.t, e.ch, e.id)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(all.iter().any(|e| e.id == 3));
}

#[test]
fn tau_below_one_sample_is_rejected() {
    assert!(LifState::<f64>::new(1, &single(0.1, 1e-5, 0.0), 16_000).is_err());
}

#[test]
fn encoder_is_silent_on_silence_and_sorted_on_sound() {
    let cochlea = CochleaConfig {
        n_channels: 32,
        ..CochleaConfig::default()
    }
    .with_sample_rate(8_000)
    .unwrap();
    let enc = SpikeEncoder::<f64>::new(&cochlea, &LifConfig::default()).unwrap();
    assert!(enc.encode(&vec![0.0; 4_000]).unwrap().is_empty());
    let x: Vec<f64> = (0..4_000)
        .map(|t| 0.3 * (2.0 * std::f64::consts::PI * 440.0 * t as f64 / 8_000.0).sin())
        .collect();
    let s = enc.encode(&x).unwrap();
    assert!(!s.is_empty());
    assert_eq!(s.n_channels, 32);
    assert!(s
        .events
        .windows(2)
        .all(|w| (w[0].t, w[0].ch, w[0].id) < (w[1].t, w[1].ch, w[1].id)));
}

fn li_oracle(x: &[f64], alpha: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|s| {
            let mut nb = Vec::new();
            if s > 0 {
                nb.push(x[s - 1]);
            }
            if s + 1 < n {
                nb.push(x[s + 1]);
            }
            let mean = if nb.is_empty() {
                0.0
            } else {
                nb.iter().sum::<f64>() / nb.len() as f64
            };
            (x[s] - alpha * mean).max(0.0)
        })
        .collect()
}

proptest! {
    #[test]
    fn lateral_inhibition_matches_oracle(
        x in prop::collection::vec(0.0f64..1.0, 1..40),
        alpha in 0.0f64..=1.0,
    ) {
        let mut out = vec![0.0; x.len()];
        lateral_inhibition(&x, alpha, &mut out);
        let want = li_oracle(&x, alpha);
        for ((o, w), xi) in out.iter().zip(&want).zip(&x) {
            prop_assert!((o - w).abs() <= 1e-15);
            prop_assert!(*o >= 0.0 && *o <= *xi);
        }
    }

    #[test]
    fn zero_alpha_is_identity_on_non_negative_input(x in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let mut out = vec![0.0; x.len()];
        lateral_inhibition(&x, 0.0, &mut out);
        prop_assert_eq!(out, x);
    }

    #[test]
    fn membrane_stays_below_threshold_between_spikes(
        drives in prop::collection::vec(0.0f64..0.1, 1..500),
        threshold in 1e-3f64..0.05,
    ) {
        let mut state = LifState::<f64>::new(1, &single(threshold, 0.002, 0.0), 16_000).unwrap();
        for (t, &d) in drives.iter().enumerate() {
            let before = state.potential(0, 0);
            let fired = !lif_step(&mut state, &[d], t as u64).is_empty();
            let next = before + state.coefficient() * (d - before);
            prop_assert_eq!(fired, next > threshold);
            prop_assert!(state.potential(0, 0) <= threshold);
        }
    }
}
