//! Computable acuity phenotyping.
//!
//! A stay is cut into 4-hour windows. A non-terminal window is Unstable when
//! any life-sustaining therapy is active inside it for a positive amount of
//! time: mechanical ventilation, vasopressors, or CRRT from recorded
//! intervals, plus blood-transfusion intervals derived from the transfusion
//! events themselves. The window containing the end of the stay takes the
//! disposition (Discharge or Deceased) regardless of concurrent therapy; all
//! remaining windows are Stable.
//!
//! Per predicted window the nine training targets are the one-hot state,
//! the two stability transition flags, and the three therapy onset flags
//! (a therapy inactive in the observed window and active in the next).
//! Transfusion has no onset head.

use serde::{Deserialize, Serialize};

use crate::types::{
    AcuityState, AdmissionRecord, LabelVector, TherapyKind, Transfusion, WINDOW_H,
};
use crate::Error;

/// Trailing accumulation window for transfusion burden, in hours.
pub const BT_WINDOW_H: f64 = 24.0;
/// Units within the trailing window at or above which transfusion counts as
/// an active therapy.
pub const BT_THRESHOLD_UNITS: f64 = 10.0;

/// Maximal intervals [start, end) within [0, los) where the trailing 24-hour
/// transfusion unit sum is at least [`BT_THRESHOLD_UNITS`].
///
/// The sum at time t counts events with timestamp in the half-open window
/// (t - 24, t], so an event's contribution starts at its own timestamp and
/// expires exactly 24 hours later.
pub fn bt_intervals(transfusions: &[Transfusion], los_h: f64) -> Result<Vec<(f64, f64)>, Error> {
    if !(los_h > 0.0) || !los_h.is_finite() {
        return Err(Error::Phenotype(format!("length of stay must be positive, got {los_h}")));
    }
    for t in transfusions {
        if !t.units.is_finite() || t.units < 0.0 || !t.time_h.is_finite() || t.time_h < 0.0 {
            return Err(Error::Phenotype(format!(
                "invalid transfusion event at time {} with {} units",
                t.time_h, t.units
            )));
        }
    }

    // Sweep the piecewise-constant sum: +units at the event time, -units at
    // its expiry 24h later. Ties apply all deltas before evaluating, which
    // makes the sum right-continuous.
    let mut deltas: Vec<(f64, f64)> = Vec::with_capacity(transfusions.len() * 2);
    for t in transfusions {
        deltas.push((t.time_h, t.units));
        deltas.push((t.time_h + BT_WINDOW_H, -t.units));
    }
    deltas.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut intervals = Vec::new();
    let mut sum = 0.0;
    let mut open: Option<f64> = None;
    let mut i = 0;
    while i < deltas.len() {
        let t = deltas[i].0;
        while i < deltas.len() && deltas[i].0 == t {
            sum += deltas[i].1;
            i += 1;
        }
        if open.is_none() && sum >= BT_THRESHOLD_UNITS {
            open = Some(t);
        } else if let Some(start) = open {
            if sum < BT_THRESHOLD_UNITS {
                intervals.push((start, t));
                open = None;
            }
        }
    }
    if let Some(start) = open {
        intervals.push((start, f64::INFINITY));
    }

    // clip to the stay
    let mut clipped = Vec::new();
    for (s, e) in intervals {
        let s = s.max(0.0);
        let e = e.min(los_h);
        if s < e {
            clipped.push((s, e));
        }
    }
    Ok(clipped)
}

fn overlaps(start: f64, end: f64, w_start: f64, w_end: f64) -> bool {
    start.max(w_start) < end.min(w_end)
}

/// True when any interval of `kind` overlaps window `w` with positive measure.
pub fn therapy_active(adm: &AdmissionRecord, kind: TherapyKind, w: usize) -> bool {
    let (w_start, w_end) = (w as f64 * WINDOW_H, (w as f64 + 1.0) * WINDOW_H);
    adm.therapies
        .iter()
        .any(|iv| iv.therapy == kind && overlaps(iv.start_h, iv.end_h, w_start, w_end))
}

/// Acuity state of every window of the stay, in window order.
pub fn label_states(adm: &AdmissionRecord) -> Result<Vec<AcuityState>, Error> {
    let n = adm.n_windows();
    if n == 0 {
        return Err(Error::Phenotype(format!(
            "admission {} has no windows (los {})",
            adm.admission_id, adm.los_h
        )));
    }
    let bt = bt_intervals(&adm.transfusions, adm.los_h)?;
    let terminal = match adm.disposition {
        crate::types::Disposition::Deceased => AcuityState::Deceased,
        crate::types::Disposition::DischargedAlive => AcuityState::Discharge,
    };
    let mut states = Vec::with_capacity(n);
    for w in 0..n {
        if w == n - 1 {
            states.push(terminal);
            continue;
        }
        let (ws, we) = (w as f64 * WINDOW_H, (w as f64 + 1.0) * WINDOW_H);
        let therapy = adm
            .therapies
            .iter()
            .any(|iv| overlaps(iv.start_h, iv.end_h, ws, we))
            || bt.iter().any(|&(s, e)| overlaps(s, e, ws, we));
        states.push(if therapy { AcuityState::Unstable } else { AcuityState::Stable });
    }
    Ok(states)
}

/// Labels for one observed/predicted window pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowLabel {
    /// Observed window index t; the targets describe window t+1.
    pub observed: usize,
    pub current_state: AcuityState,
    pub target_state: AcuityState,
    pub labels: LabelVector,
}

/// Per-window training targets for an admission: one entry per observed
/// window t in 0..n_windows-1, each labeling window t+1. A stay shorter than
/// two windows yields no samples.
pub fn window_labels(adm: &AdmissionRecord) -> Result<Vec<WindowLabel>, Error> {
    let states = label_states(adm)?;
    let n = states.len();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        let (cur, next) = (states[t], states[t + 1]);
        let active = |k: TherapyKind, w: usize| therapy_active(adm, k, w);
        let labels = LabelVector {
            discharge: next == AcuityState::Discharge,
            stable: next == AcuityState::Stable,
            unstable: next == AcuityState::Unstable,
            deceased: next == AcuityState::Deceased,
            unstable_to_stable: cur == AcuityState::Unstable && next == AcuityState::Stable,
            stable_to_unstable: cur == AcuityState::Stable && next == AcuityState::Unstable,
            onset_mv: !active(TherapyKind::Mv, t) && active(TherapyKind::Mv, t + 1),
            onset_vp: !active(TherapyKind::Vp, t) && active(TherapyKind::Vp, t + 1),
            onset_crrt: !active(TherapyKind::Crrt, t) && active(TherapyKind::Crrt, t + 1),
        };
        out.push(WindowLabel { observed: t, current_state: cur, target_state: next, labels });
    }
    Ok(out)
}

/// Row-stochastic transition matrix between consecutive window states.
/// Rows are the origin states Stable and Unstable; columns are
/// [Stable, Unstable, Discharge, Deceased]. A row with no observed
/// transitions is all zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub counts: [[usize; 4]; 2],
    pub probs: [[f64; 4]; 2],
}

pub fn transition_matrix(sequences: &[Vec<AcuityState>]) -> TransitionMatrix {
    let mut counts = [[0usize; 4]; 2];
    for seq in sequences {
        for pair in seq.windows(2) {
            let row = match pair[0] {
                AcuityState::Stable => 0,
                AcuityState::Unstable => 1,
                // terminal states have no outgoing transitions
                _ => continue,
            };
            counts[row][pair[1].index()] += 1;
        }
    }
    let mut probs = [[0.0; 4]; 2];
    for r in 0..2 {
        let total: usize = counts[r].iter().sum();
        if total > 0 {
            for c in 0..4 {
                probs[r][c] = counts[r][c] as f64 / total as f64;
            }
        }
    }
    TransitionMatrix { counts, probs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Disposition, StaticProfile, TherapyInterval};

    fn base_admission(los_h: f64, disposition: Disposition) -> AdmissionRecord {
        AdmissionRecord {
            admission_id: "A1".into(),
            patient_id: "P1".into(),
            los_h,
            disposition,
            events: vec![],
            therapies: vec![],
            transfusions: vec![],
            statics: StaticProfile {
                age_years: Some(60.0),
                bmi: Some(25.0),
                sex: Some("F".into()),
                race: Some("White".into()),
                cci: Some(1.0),
                comorbidities: vec![],
            },
        }
    }

    #[test]
    fn bt_one_unit_per_hour_crosses_at_nine() {
        // 1 unit at each of hours 0..=9: the sum reaches 10 at t=9 and the
        // hour-0 unit expires at t=24.
        let tx: Vec<Transfusion> =
            (0..10).map(|h| Transfusion { time_h: h as f64, units: 1.0 }).collect();
        let iv = bt_intervals(&tx, 100.0).unwrap();
        assert_eq!(iv, vec![(9.0, 24.0)]);
    }

    #[test]
    fn bt_single_large_transfusion_runs_24h() {
        let tx = vec![Transfusion { time_h: 5.0, units: 12.0 }];
        assert_eq!(bt_intervals(&tx, 100.0).unwrap(), vec![(5.0, 29.0)]);
        // clipped by end of stay
        assert_eq!(bt_intervals(&tx, 20.0).unwrap(), vec![(5.0, 20.0)]);
    }

    #[test]
    fn bt_nine_units_total_never_qualifies() {
        let tx: Vec<Transfusion> =
            (0..9).map(|h| Transfusion { time_h: h as f64, units: 1.0 }).collect();
        assert!(bt_intervals(&tx, 100.0).unwrap().is_empty());
    }

    #[test]
    fn bt_threshold_is_inclusive_and_negative_units_rejected() {
        let tx = vec![Transfusion { time_h: 2.0, units: 10.0 }];
        assert_eq!(bt_intervals(&tx, 50.0).unwrap(), vec![(2.0, 26.0)]);
        let bad = vec![Transfusion { time_h: 2.0, units: -1.0 }];
        assert!(bt_intervals(&bad, 50.0).is_err());
    }

    #[test]
    fn mv_interval_marks_overlapped_windows() {
        // MV on [10, 20) overlaps windows 2 ([8,12)), 3, and 4 ([16,20)).
        let mut adm = base_admission(40.0, Disposition::DischargedAlive);
        adm.therapies.push(TherapyInterval { therapy: TherapyKind::Mv, start_h: 10.0, end_h: 20.0 });
        let states = label_states(&adm).unwrap();
        assert_eq!(states.len(), 10);
        for (w, s) in states.iter().enumerate() {
            let expect = match w {
                2..=4 => AcuityState::Unstable,
                9 => AcuityState::Discharge,
                _ => AcuityState::Stable,
            };
            assert_eq!(*s, expect, "window {w}");
        }
    }

    #[test]
    fn boundary_touching_interval_is_not_overlap() {
        // [8, 12) touches window 1 ([4,8)) only at its closed end: no overlap.
        let mut adm = base_admission(16.0, Disposition::DischargedAlive);
        adm.therapies.push(TherapyInterval { therapy: TherapyKind::Vp, start_h: 8.0, end_h: 12.0 });
        let states = label_states(&adm).unwrap();
        assert_eq!(
            states,
            vec![
                AcuityState::Stable,
                AcuityState::Stable,
                AcuityState::Unstable,
                AcuityState::Discharge
            ]
        );
    }

    #[test]
    fn discharge_without_therapy() {
        let adm = base_admission(14.0, Disposition::DischargedAlive);
        let states = label_states(&adm).unwrap();
        assert_eq!(
            states,
            vec![
                AcuityState::Stable,
                AcuityState::Stable,
                AcuityState::Stable,
                AcuityState::Discharge
            ]
        );
    }

    #[test]
    fn death_dominates_active_therapy_in_terminal_window() {
        let mut adm = base_admission(14.0, Disposition::Deceased);
        adm.therapies.push(TherapyInterval { therapy: TherapyKind::Vp, start_h: 12.0, end_h: 14.0 });
        let states = label_states(&adm).unwrap();
        assert_eq!(states[3], AcuityState::Deceased);
        assert_eq!(states[..3], [AcuityState::Stable, AcuityState::Stable, AcuityState::Stable]);
    }

    #[test]
    fn transition_flags_fire_on_state_changes() {
        // States S,S,U,U,S: stable_to_unstable at t=1, unstable_to_stable at t=3.
        let mut adm = base_admission(20.0, Disposition::DischargedAlive);
        adm.therapies.push(TherapyInterval { therapy: TherapyKind::Mv, start_h: 8.0, end_h: 16.0 });
        adm.los_h = 24.0; // windows 0..5, terminal 5
        let labels = window_labels(&adm).unwrap();
        let s2u: Vec<usize> =
            labels.iter().filter(|l| l.labels.stable_to_unstable).map(|l| l.observed).collect();
        let u2s: Vec<usize> =
            labels.iter().filter(|l| l.labels.unstable_to_stable).map(|l| l.observed).collect();
        assert_eq!(s2u, vec![1]);
        assert_eq!(u2s, vec![3]);
    }

    #[test]
    fn onset_fires_only_at_activation() {
        // MV active in windows 3 and 4 only: onset_mv at observed t=2 only.
        let mut adm = base_admission(28.0, Disposition::DischargedAlive);
        adm.therapies.push(TherapyInterval { therapy: TherapyKind::Mv, start_h: 12.0, end_h: 20.0 });
        let labels = window_labels(&adm).unwrap();
        let onsets: Vec<usize> =
            labels.iter().filter(|l| l.labels.onset_mv).map(|l| l.observed).collect();
        assert_eq!(onsets, vec![2]);
    }

    #[test]
    fn exactly_one_state_bit_per_label() {
        let mut adm = base_admission(36.0, Disposition::Deceased);
        adm.therapies.push(TherapyInterval { therapy: TherapyKind::Crrt, start_h: 9.0, end_h: 30.0 });
        adm.transfusions = (0..12).map(|h| Transfusion { time_h: h as f64, units: 1.0 }).collect();
        for l in window_labels(&adm).unwrap() {
            let arr = l.labels.as_array();
            let state_bits: f64 = arr[..4].iter().sum();
            assert_eq!(state_bits, 1.0, "window {}", l.observed);
        }
    }

    #[test]
    fn transition_matrix_frozen_examples() {
        use AcuityState::*;
        let tm = transition_matrix(&[vec![Stable, Stable, Unstable, Unstable, Discharge]]);
        assert_eq!(tm.probs[0], [0.5, 0.5, 0.0, 0.0]);
        assert_eq!(tm.probs[1], [0.0, 0.5, 0.5, 0.0]);

        let tm2 = transition_matrix(&[vec![Stable, Deceased]]);
        assert_eq!(tm2.probs[0], [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(tm2.probs[1], [0.0; 4]);
    }

    #[test]
    fn transition_rows_sum_to_one_when_observed() {
        use AcuityState::*;
        let tm = transition_matrix(&[
            vec![Stable, Unstable, Unstable, Stable, Discharge],
            vec![Unstable, Deceased],
        ]);
        for r in 0..2 {
            let total: usize = tm.counts[r].iter().sum();
            if total > 0 {
                let sum: f64 = tm.probs[r].iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }
}
