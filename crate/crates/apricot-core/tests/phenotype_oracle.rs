//! Brute-force cross-check of window labeling on randomized admissions.
//!
//! The oracle never reasons about intervals: it samples each window at
//! 1/128 h resolution and asks pointwise "is any therapy running here, is
//! the trailing 24 h transfusion burden at or over 10 units here". With
//! interval endpoints and transfusion times on the 0.25 h grid, pointwise
//! sampling at that density detects exactly the positive-measure overlaps,
//! so the two derivations must agree bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use apricot_core::phenotype::{label_states, transition_matrix, window_labels};
use apricot_core::types::{
    AcuityState, AdmissionRecord, Disposition, StaticProfile, TherapyInterval, TherapyKind,
    Transfusion, WINDOW_H,
};

const PROBE_STEP_H: f64 = 1.0 / 128.0;

fn grid(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    // random point on the quarter-hour grid in [lo, hi)
    let steps = ((hi - lo) / 0.25) as u64;
    lo + 0.25 * rng.random_range(0..steps.max(1)) as f64
}

fn random_admission(rng: &mut ChaCha20Rng, id: usize) -> AdmissionRecord {
    let los_h = grid(rng, 12.0, 200.0) + 0.25;
    let mut therapies = Vec::new();
    for kind in TherapyKind::ALL {
        for _ in 0..rng.random_range(0..3) {
            let start = grid(rng, 0.0, los_h - 0.25);
            let end = grid(rng, start + 0.25, los_h) + 0.25;
            therapies.push(TherapyInterval { therapy: kind, start_h: start, end_h: end.min(los_h) });
        }
    }
    let mut transfusions = Vec::new();
    for _ in 0..rng.random_range(0..8) {
        transfusions.push(Transfusion {
            time_h: grid(rng, 0.0, los_h),
            // fractional units exercise the threshold arithmetic
            units: rng.random_range(1..=16) as f64 * 0.5,
        });
    }
    let disposition = if rng.random::<f64>() < 0.5 {
        Disposition::Deceased
    } else {
        Disposition::DischargedAlive
    };
    AdmissionRecord {
        admission_id: format!("r{id}"),
        patient_id: format!("r{id}"),
        los_h,
        disposition,
        events: Vec::new(),
        therapies,
        transfusions,
        statics: StaticProfile {
            age_years: Some(50.0),
            bmi: None,
            sex: Some("F".into()),
            race: Some("Other".into()),
            cci: Some(1.0),
            comorbidities: Vec::new(),
        },
    }
}

fn therapy_running_at(adm: &AdmissionRecord, kind: TherapyKind, t: f64) -> bool {
    adm.therapies
        .iter()
        .any(|iv| iv.therapy == kind && iv.start_h <= t && t < iv.end_h)
}

fn burden_at(adm: &AdmissionRecord, t: f64) -> f64 {
    adm.transfusions
        .iter()
        .filter(|tx| tx.time_h <= t && t < tx.time_h + 24.0)
        .map(|tx| tx.units)
        .sum()
}

/// Pointwise window scan: any probe with a running therapy or a qualifying
/// transfusion burden makes the window unstable.
fn sampled_states(adm: &AdmissionRecord) -> Vec<AcuityState> {
    let n = adm.n_windows();
    (0..n)
        .map(|w| {
            if w == n - 1 {
                return match adm.disposition {
                    Disposition::Deceased => AcuityState::Deceased,
                    Disposition::DischargedAlive => AcuityState::Discharge,
                };
            }
            let lo = w as f64 * WINDOW_H;
            let hi = ((w + 1) as f64 * WINDOW_H).min(adm.los_h);
            let mut t = lo;
            while t < hi {
                let therapy = TherapyKind::ALL.iter().any(|&k| therapy_running_at(adm, k, t));
                if therapy || burden_at(adm, t) >= 10.0 {
                    return AcuityState::Unstable;
                }
                t += PROBE_STEP_H;
            }
            AcuityState::Stable
        })
        .collect()
}

#[test]
fn interval_labeling_matches_pointwise_probing_on_1000_admissions() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xACE5);
    let mut sequences = Vec::new();
    for i in 0..1000 {
        let adm = random_admission(&mut rng, i);
        let expected = sampled_states(&adm);
        let got = label_states(&adm).unwrap();
        assert_eq!(got, expected, "admission {i}: {adm:?}");
        sequences.push(got);
    }
    // the same sequences feed the transition summary; observed rows are
    // probability distributions
    let tm = transition_matrix(&sequences);
    let expected_transitions: usize = sequences.iter().map(|s| s.len() - 1).sum();
    let counted: usize = tm.counts.iter().flatten().sum();
    assert_eq!(counted, expected_transitions);
    for row in &tm.probs {
        let s: f64 = row.iter().sum();
        assert!(s == 0.0 || (s - 1.0).abs() < 1e-9, "row sums to {s}");
    }
}

#[test]
fn per_window_targets_and_onsets_match_probed_activity() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xBEE);
    for i in 0..300 {
        let adm = random_admission(&mut rng, i);
        let states = sampled_states(&adm);
        let samples = window_labels(&adm).unwrap();
        assert_eq!(samples.len(), states.len() - 1);
        for (t, s) in samples.iter().enumerate() {
            assert_eq!(s.current_state, states[t]);
            assert_eq!(s.target_state, states[t + 1]);
            // probe therapy activity window by window for the onset bits
            for (kind, head) in [(TherapyKind::Mv, 6), (TherapyKind::Vp, 7), (TherapyKind::Crrt, 8)]
            {
                let active = |w: usize| {
                    let lo = w as f64 * WINDOW_H;
                    let hi = ((w + 1) as f64 * WINDOW_H).min(adm.los_h);
                    let mut x = lo;
                    while x < hi {
                        if therapy_running_at(&adm, kind, x) {
                            return true;
                        }
                        x += PROBE_STEP_H;
                    }
                    false
                };
                let expected = !active(t) && active(t + 1);
                assert_eq!(s.labels.bit(head), expected, "admission {i} window {t} {kind:?}");
            }
        }
    }
}
