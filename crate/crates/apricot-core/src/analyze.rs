//! Post-hoc analyses over thresholded window predictions: how early false
//! positives fire relative to the real outcome, how predicted states confuse
//! with true states, and how acuity evolves by ICU day.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::AcuityState;

/// Thresholded predictions and labels for one admission's window sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissionSeries {
    pub admission_id: String,
    /// Window start times in hours, ascending.
    pub window_starts: Vec<f64>,
    pub preds: Vec<bool>,
    pub labels: Vec<bool>,
    pub end_h: f64,
}

/// What a false positive's lead time is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeadReference {
    /// First positive-label window start (instability-style outcomes).
    FirstPositiveWindow,
    /// End of stay (mortality: the positive window is terminal by
    /// construction, and the clinically meaningful distance is to death).
    EndOfStay,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountedRates {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub sensitivity: Option<f64>,
    pub ppv: Option<f64>,
}

impl CountedRates {
    fn finish(mut self) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        self.sensitivity = ratio(self.tp, self.tp + self.fn_);
        self.ppv = ratio(self.tp, self.tp + self.fp);
        self
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// One 4-hour-wide lead histogram bin covering [lo_h, lo_h + 4).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadBin {
    pub lo_h: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadTimeReport {
    pub raw: CountedRates,
    pub adjusted: CountedRates,
    /// False positives inside admissions that have at least one positive
    /// window; only these appear in the histogram.
    pub fp_outcome_bearing: usize,
    pub fp_outcome_free: usize,
    pub lead_histogram: Vec<LeadBin>,
}

const LEAD_BIN_H: f64 = 4.0;

/// Classify every window, then recount as true positives the false
/// positives that precede some positive-label window by at least
/// `horizon_h`. Lead times are signed: a false positive firing after the
/// reference has a negative lead and is never adjusted.
pub fn fp_lead_analysis(
    series: &[AdmissionSeries],
    reference: LeadReference,
    horizon_h: f64,
) -> LeadTimeReport {
    let mut raw = CountedRates::default();
    let mut adjusted = CountedRates::default();
    let mut fp_bearing = 0usize;
    let mut fp_free = 0usize;
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();

    for adm in series {
        assert_eq!(adm.window_starts.len(), adm.preds.len());
        assert_eq!(adm.preds.len(), adm.labels.len());
        let positive_starts: Vec<f64> = adm
            .window_starts
            .iter()
            .zip(&adm.labels)
            .filter(|(_, &l)| l)
            .map(|(&t, _)| t)
            .collect();
        let reference_time = match reference {
            LeadReference::FirstPositiveWindow => positive_starts.first().copied(),
            LeadReference::EndOfStay => {
                if positive_starts.is_empty() {
                    None
                } else {
                    Some(adm.end_h)
                }
            }
        };
        for ((&t, &pred), &label) in
            adm.window_starts.iter().zip(&adm.preds).zip(&adm.labels)
        {
            match (pred, label) {
                (true, true) => {
                    raw.tp += 1;
                    adjusted.tp += 1;
                }
                (false, false) => {
                    raw.tn += 1;
                    adjusted.tn += 1;
                }
                (false, true) => {
                    raw.fn_ += 1;
                    adjusted.fn_ += 1;
                }
                (true, false) => {
                    raw.fp += 1;
                    match reference_time {
                        None => {
                            fp_free += 1;
                            adjusted.fp += 1;
                        }
                        Some(ref_t) => {
                            fp_bearing += 1;
                            let lead = ref_t - t;
                            *hist.entry((lead / LEAD_BIN_H).floor() as i64).or_insert(0) += 1;
                            let early_enough =
                                positive_starts.iter().any(|&p| p - t >= horizon_h);
                            if early_enough {
                                adjusted.tp += 1;
                            } else {
                                adjusted.fp += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    LeadTimeReport {
        raw: raw.finish(),
        adjusted: adjusted.finish(),
        fp_outcome_bearing: fp_bearing,
        fp_outcome_free: fp_free,
        lead_histogram: hist
            .into_iter()
            .map(|(bin, count)| LeadBin { lo_h: bin as f64 * LEAD_BIN_H, count })
            .collect(),
    }
}

/// Predicted-state distribution per true state. Rows are predicted states,
/// columns are true states (both in [Stable, Unstable, Discharge, Deceased]
/// order); observed columns sum to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusConfusion {
    pub counts: [[usize; 4]; 4],
    pub proportions: [[f64; 4]; 4],
}

pub fn status_confusion(predicted: &[AcuityState], truth: &[AcuityState]) -> StatusConfusion {
    assert_eq!(predicted.len(), truth.len());
    let mut counts = [[0usize; 4]; 4];
    for (p, t) in predicted.iter().zip(truth) {
        counts[p.index()][t.index()] += 1;
    }
    let mut proportions = [[0.0; 4]; 4];
    for col in 0..4 {
        let total: usize = (0..4).map(|row| counts[row][col]).sum();
        if total > 0 {
            for row in 0..4 {
                proportions[row][col] = counts[row][col] as f64 / total as f64;
            }
        }
    }
    StatusConfusion { counts, proportions }
}

/// True and predicted state proportions for one ICU day (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyRow {
    pub day: usize,
    pub n_windows: usize,
    pub truth: [f64; 4],
    pub predicted: [f64; 4],
}

/// Tally per-day state proportions. A day holds six 4-hour windows; windows
/// past `max_day` days are ignored.
pub fn daily_distribution(
    windows: &[(usize, AcuityState, AcuityState)],
    max_day: usize,
) -> Vec<DailyRow> {
    let mut per_day: BTreeMap<usize, ([usize; 4], [usize; 4], usize)> = BTreeMap::new();
    for &(window_index, truth, pred) in windows {
        let day = window_index / 6 + 1;
        if day > max_day {
            continue;
        }
        let slot = per_day.entry(day).or_default();
        slot.0[truth.index()] += 1;
        slot.1[pred.index()] += 1;
        slot.2 += 1;
    }
    per_day
        .into_iter()
        .map(|(day, (t_counts, p_counts, n))| DailyRow {
            day,
            n_windows: n,
            truth: t_counts.map(|c| c as f64 / n as f64),
            predicted: p_counts.map(|c| c as f64 / n as f64),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(preds: &[u8], labels: &[u8], end_h: f64) -> AdmissionSeries {
        AdmissionSeries {
            admission_id: "a".into(),
            window_starts: (0..preds.len()).map(|i| i as f64 * 4.0).collect(),
            preds: preds.iter().map(|&p| p == 1).collect(),
            labels: labels.iter().map(|&l| l == 1).collect(),
            end_h,
        }
    }

    #[test]
    fn early_false_positive_becomes_adjusted_true_positive() {
        let r = fp_lead_analysis(
            &[series(&[1, 0, 0, 1], &[0, 0, 0, 1], 16.0)],
            LeadReference::FirstPositiveWindow,
            4.0,
        );
        assert_eq!((r.raw.tp, r.raw.fp, r.raw.tn, r.raw.fn_), (1, 1, 2, 0));
        assert_eq!((r.adjusted.tp, r.adjusted.fp), (2, 0));
        assert_eq!(r.raw.ppv, Some(0.5));
        assert_eq!(r.adjusted.ppv, Some(1.0));
        assert_eq!(r.fp_outcome_bearing, 1);
        assert_eq!(r.lead_histogram, vec![LeadBin { lo_h: 12.0, count: 1 }]);
        assert_eq!(r.raw.total(), r.adjusted.total());
    }

    #[test]
    fn outcome_free_false_positive_is_never_adjusted() {
        let r = fp_lead_analysis(
            &[series(&[0, 1, 0], &[0, 0, 0], 12.0)],
            LeadReference::FirstPositiveWindow,
            4.0,
        );
        assert_eq!(r.raw.fp, 1);
        assert_eq!(r.adjusted.fp, 1);
        assert_eq!(r.fp_outcome_free, 1);
        assert_eq!(r.fp_outcome_bearing, 0);
        assert!(r.lead_histogram.is_empty());
    }

    #[test]
    fn no_false_positives_means_adjusted_equals_raw() {
        let r = fp_lead_analysis(
            &[series(&[0, 0, 1], &[0, 0, 1], 12.0)],
            LeadReference::FirstPositiveWindow,
            4.0,
        );
        assert_eq!(r.raw, r.adjusted);
    }

    #[test]
    fn late_false_positive_keeps_negative_lead() {
        // positive at window 0, FP at window 2 (8 h after): lead −8, stays FP
        let r = fp_lead_analysis(
            &[series(&[0, 0, 1], &[1, 0, 0], 12.0)],
            LeadReference::FirstPositiveWindow,
            4.0,
        );
        assert_eq!(r.adjusted.fp, 1);
        assert_eq!(r.lead_histogram, vec![LeadBin { lo_h: -8.0, count: 1 }]);
    }

    #[test]
    fn end_of_stay_reference_measures_to_death() {
        // FP at 0 h, death (positive terminal label) with stay ending 14 h in
        let mut s = series(&[1, 0, 0, 1], &[0, 0, 0, 1], 14.0);
        s.window_starts = vec![0.0, 4.0, 8.0, 12.0];
        let r = fp_lead_analysis(&[s], LeadReference::EndOfStay, 4.0);
        // lead 14 h lands in the [12,16) bin
        assert_eq!(r.lead_histogram, vec![LeadBin { lo_h: 12.0, count: 1 }]);
        assert_eq!(r.adjusted.tp, 2);
    }

    #[test]
    fn adjusted_rates_never_fall_below_raw() {
        let many = vec![
            series(&[1, 1, 0, 0, 1], &[0, 0, 0, 1, 1], 20.0),
            series(&[1, 0, 1], &[0, 0, 0], 12.0),
            series(&[0, 1, 1, 1], &[1, 0, 0, 1], 16.0),
        ];
        let r = fp_lead_analysis(&many, LeadReference::FirstPositiveWindow, 4.0);
        assert!(r.adjusted.sensitivity >= r.raw.sensitivity);
        assert!(r.adjusted.ppv >= r.raw.ppv);
        assert_eq!(r.raw.total(), r.adjusted.total());
        let hist_total: usize = r.lead_histogram.iter().map(|b| b.count).sum();
        assert_eq!(hist_total, r.fp_outcome_bearing);
    }

    #[test]
    fn confusion_columns_are_normalized() {
        use AcuityState::*;
        let perfect = status_confusion(&[Stable, Unstable, Deceased], &[Stable, Unstable, Deceased]);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j && (i != 2) { 1.0 } else { 0.0 };
                assert_eq!(perfect.proportions[i][j], expect, "({i},{j})");
            }
        }
        let constant = status_confusion(&[Unstable; 4], &[Stable, Unstable, Discharge, Deceased]);
        assert_eq!(constant.proportions[Unstable.index()], [1.0, 1.0, 1.0, 1.0]);

        let mixed = status_confusion(
            &[Stable, Stable, Unstable, Discharge],
            &[Stable, Unstable, Unstable, Unstable],
        );
        assert_eq!(mixed.counts[Stable.index()][Unstable.index()], 1);
        let col: f64 = (0..4).map(|r| mixed.proportions[r][Unstable.index()]).sum();
        assert!((col - 1.0).abs() < 1e-12);
    }

    #[test]
    fn days_group_six_windows() {
        use AcuityState::*;
        let windows = vec![
            (0, Stable, Stable),
            (5, Stable, Unstable),
            (6, Unstable, Unstable), // first window of day 2
            (95, Deceased, Deceased), // day 16: beyond max_day, ignored
        ];
        let rows = daily_distribution(&windows, 15);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].day, 1);
        assert_eq!(rows[0].n_windows, 2);
        assert_eq!(rows[0].truth[Stable.index()], 1.0);
        assert_eq!(rows[0].predicted[Unstable.index()], 0.5);
        assert_eq!(rows[1].day, 2);
        for row in &rows {
            assert!((row.truth.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((row.predicted.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
