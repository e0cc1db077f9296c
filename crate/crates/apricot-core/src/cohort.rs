//! Inclusion filters, variable vocabulary, scaling statistics, and the
//! conversion of an admission into per-window model samples.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::phenotype::WindowLabel;
use crate::types::{
    AcuityState, AdmissionId, AdmissionRecord, CohortSchema, LabelVector, PatientId, StaticProfile,
    WINDOW_H,
};
use crate::Error;

/// Length-of-stay inclusion bounds in hours, both ends inclusive.
pub const MIN_LOS_H: f64 = 12.0;
pub const MAX_LOS_H: f64 = 720.0;
/// Minimum fraction of admissions a variable must appear in.
pub const MIN_PREVALENCE: f64 = 0.05;

/// An admission dropped by assembly or filtering, with the first reason found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub admission_id: AdmissionId,
    pub reason: String,
}

fn reject(id: &str, reason: impl Into<String>) -> Rejection {
    Rejection { admission_id: id.to_string(), reason: reason.into() }
}

/// First structural problem in a record, if any. Separated from the
/// eligibility rules so the reason strings stay specific.
fn malformed_reason(adm: &AdmissionRecord, schema: &CohortSchema) -> Option<String> {
    if !adm.los_h.is_finite() || adm.los_h <= 0.0 {
        return Some(format!("non-positive length of stay {}", adm.los_h));
    }
    for e in &adm.events {
        if !e.time_h.is_finite() || e.time_h < 0.0 || e.time_h > adm.los_h {
            return Some(format!("event {:?} at time {} outside stay", e.variable, e.time_h));
        }
        if !e.value.is_finite() {
            return Some(format!("event {:?} has non-finite value", e.variable));
        }
    }
    for iv in &adm.therapies {
        if !iv.start_h.is_finite()
            || !iv.end_h.is_finite()
            || iv.start_h < 0.0
            || iv.start_h >= iv.end_h
            || iv.end_h > adm.los_h
        {
            return Some(format!(
                "{} interval [{}, {}) invalid for stay of {} h",
                iv.therapy.name(),
                iv.start_h,
                iv.end_h,
                adm.los_h
            ));
        }
    }
    for t in &adm.transfusions {
        if !t.time_h.is_finite() || t.time_h < 0.0 || t.time_h > adm.los_h {
            return Some(format!("transfusion at time {} outside stay", t.time_h));
        }
        if !t.units.is_finite() || t.units < 0.0 {
            return Some(format!("transfusion with invalid units {}", t.units));
        }
    }
    if adm.statics.comorbidities.len() != schema.comorbidity_flags.len() {
        return Some(format!(
            "comorbidity vector has {} entries, schema expects {}",
            adm.statics.comorbidities.len(),
            schema.comorbidity_flags.len()
        ));
    }
    None
}

/// Eligibility: stay between 12 hours and 30 days, demographics present, and
/// at least one recording of each routine vital. Malformed records are
/// rejected with a specific reason. The input order of survivors is kept.
pub fn apply_admission_filters(
    admissions: Vec<AdmissionRecord>,
    schema: &CohortSchema,
) -> (Vec<AdmissionRecord>, Vec<Rejection>) {
    let mut kept = Vec::with_capacity(admissions.len());
    let mut rejections = Vec::new();
    'adm: for adm in admissions {
        if let Some(reason) = malformed_reason(&adm, schema) {
            rejections.push(reject(&adm.admission_id, reason));
            continue;
        }
        if adm.los_h < MIN_LOS_H || adm.los_h > MAX_LOS_H {
            rejections.push(reject(
                &adm.admission_id,
                format!("length of stay {} h outside [{MIN_LOS_H}, {MAX_LOS_H}]", adm.los_h),
            ));
            continue;
        }
        if adm.statics.age_years.is_none()
            || adm.statics.sex.is_none()
            || adm.statics.race.is_none()
        {
            rejections.push(reject(&adm.admission_id, "missing age, sex, or race"));
            continue;
        }
        let seen: HashSet<&str> = adm.events.iter().map(|e| e.variable.as_str()).collect();
        for vital in &schema.routine_vitals {
            if !seen.contains(vital.as_str()) {
                rejections.push(reject(&adm.admission_id, format!("no {vital} recordings")));
                continue 'adm;
            }
        }
        kept.push(adm);
    }
    (kept, rejections)
}

/// Dense variable-name coding, order of first appearance in the cohort.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn code(&self, variable: &str) -> Option<usize> {
        self.names.iter().position(|n| n == variable)
    }

    pub fn name(&self, code: usize) -> Option<&str> {
        self.names.get(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Codes are assigned in order of first appearance across the admission
/// iteration order; a variable qualifies when it appears in at least
/// `min_prevalence` of admissions (the boundary is inclusive).
pub fn build_vocabulary(
    admissions: &[AdmissionRecord],
    min_prevalence: f64,
) -> Result<Vocabulary, Error> {
    if admissions.is_empty() {
        return Err(Error::Data("cannot build a vocabulary from zero admissions".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for adm in admissions {
        let mut here: HashSet<&str> = HashSet::new();
        for e in &adm.events {
            if here.insert(&e.variable) {
                *counts.entry(&e.variable).or_insert(0) += 1;
            }
        }
    }
    // tolerance keeps an exact-boundary count (5 of 100) inclusive under
    // float rounding
    let needed = min_prevalence * admissions.len() as f64 - 1e-9;
    let mut names = Vec::new();
    let mut taken: HashSet<&str> = HashSet::new();
    for adm in admissions {
        for e in &adm.events {
            if taken.contains(e.variable.as_str()) {
                continue;
            }
            if counts[e.variable.as_str()] as f64 >= needed {
                taken.insert(&e.variable);
                names.push(e.variable.clone());
            }
        }
    }
    if names.is_empty() {
        return Err(Error::Data(format!(
            "no variable reaches {min_prevalence} prevalence across {} admissions",
            admissions.len()
        )));
    }
    Ok(Vocabulary { names })
}

/// Percentile by linear interpolation between order statistics: position
/// q·(n−1) on the sorted values, fractional part interpolated.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    assert!((0.0..=1.0).contains(&q), "quantile {q} outside [0,1]");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-variable outlier bounds and post-bounding range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableScale {
    pub p1: f64,
    pub p99: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-static-column imputation mean and range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticScale {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Scaling statistics fitted on the development split only. `variables` is
/// indexed by vocabulary code, `statics` by schema static column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub variables: Vec<VariableScale>,
    pub statics: Vec<StaticScale>,
}

/// Raw static feature vector in schema column order; None means missing.
/// Layout: age, bmi, cci, sex_male, race one-hot (black, white, other),
/// comorbidity flags.
pub fn static_raw(profile: &StaticProfile, schema: &CohortSchema) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(schema.n_static());
    out.push(profile.age_years);
    out.push(profile.bmi);
    out.push(profile.cci);
    out.push(profile.sex.as_deref().and_then(|s| match s.to_ascii_lowercase().as_str() {
        "m" | "male" => Some(1.0),
        "f" | "female" => Some(0.0),
        _ => None,
    }));
    match profile.race.as_deref().map(str::to_ascii_lowercase) {
        Some(r) => {
            out.push(Some(if r == "black" { 1.0 } else { 0.0 }));
            out.push(Some(if r == "white" { 1.0 } else { 0.0 }));
            out.push(Some(if r != "black" && r != "white" { 1.0 } else { 0.0 }));
        }
        None => {
            out.extend([None, None, None]);
        }
    }
    for flag in &profile.comorbidities {
        out.push(*flag);
    }
    debug_assert_eq!(out.len(), schema.n_static());
    out
}

/// Fit outlier bounds (1st/99th percentile), post-bounding min/max, and
/// static means/ranges on the given admissions.
pub fn fit_scaler(
    admissions: &[AdmissionRecord],
    vocabulary: &Vocabulary,
    schema: &CohortSchema,
) -> Result<ScalerStats, Error> {
    if admissions.is_empty() {
        return Err(Error::Data("cannot fit a scaler on zero admissions".into()));
    }
    let mut per_var: Vec<Vec<f64>> = vec![Vec::new(); vocabulary.len()];
    for adm in admissions {
        for e in &adm.events {
            if let Some(code) = vocabulary.code(&e.variable) {
                per_var[code].push(e.value);
            }
        }
    }
    let mut variables = Vec::with_capacity(vocabulary.len());
    for values in &mut per_var {
        if values.is_empty() {
            variables.push(VariableScale { p1: 0.0, p99: 0.0, min: 0.0, max: 0.0 });
            continue;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p1 = percentile_linear(values, 0.01);
        let p99 = percentile_linear(values, 0.99);
        let surviving: Vec<f64> =
            values.iter().copied().filter(|v| *v >= p1 && *v <= p99).collect();
        let (min, max) = match (surviving.first(), surviving.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (p1, p1),
        };
        variables.push(VariableScale { p1, p99, min, max });
    }

    let n_static = schema.n_static();
    let mut col_values: Vec<Vec<f64>> = vec![Vec::new(); n_static];
    for adm in admissions {
        for (col, v) in static_raw(&adm.statics, schema).into_iter().enumerate() {
            if let Some(v) = v {
                if v.is_finite() {
                    col_values[col].push(v);
                }
            }
        }
    }
    let statics = col_values
        .into_iter()
        .map(|vals| {
            if vals.is_empty() {
                StaticScale { mean: 0.0, min: 0.0, max: 0.0 }
            } else {
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                StaticScale { mean, min, max }
            }
        })
        .collect();

    Ok(ScalerStats { variables, statics })
}

fn minmax(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// One retained, scaled event. `time_h` stays in hours; windowing turns it
/// into a within-window offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedEvent {
    pub time_h: f64,
    pub code: usize,
    pub value: f64,
}

/// An admission after vocabulary filtering, outlier removal, and scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedAdmission {
    pub admission_id: AdmissionId,
    pub patient_id: PatientId,
    pub n_windows: usize,
    pub events: Vec<PreparedEvent>,
    pub static_vec: Vec<f64>,
}

/// Drop unknown-variable and out-of-bound events, scale survivors to [0,1],
/// impute and scale the static vector.
pub fn preprocess_admission(
    adm: &AdmissionRecord,
    vocabulary: &Vocabulary,
    scaler: &ScalerStats,
    schema: &CohortSchema,
) -> PreparedAdmission {
    let mut events = Vec::with_capacity(adm.events.len());
    for e in &adm.events {
        let Some(code) = vocabulary.code(&e.variable) else { continue };
        let vs = &scaler.variables[code];
        if e.value < vs.p1 || e.value > vs.p99 {
            continue;
        }
        events.push(PreparedEvent { time_h: e.time_h, code, value: minmax(e.value, vs.min, vs.max) });
    }
    let static_vec = static_raw(&adm.statics, schema)
        .into_iter()
        .zip(&scaler.statics)
        .map(|(v, s)| minmax(v.unwrap_or(s.mean), s.min, s.max))
        .collect();
    PreparedAdmission {
        admission_id: adm.admission_id.clone(),
        patient_id: adm.patient_id.clone(),
        n_windows: adm.n_windows(),
        events,
        static_vec,
    }
}

/// Model input for one observation window plus the targets of the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub admission_id: AdmissionId,
    pub patient_id: PatientId,
    /// Observation window t; targets describe window t+1.
    pub window_index: usize,
    /// Within-window offsets in [0,1), parallel with codes and values.
    pub times: Vec<f64>,
    pub codes: Vec<usize>,
    /// Min-max scaled measurements in [0,1].
    pub values: Vec<f64>,
    pub static_vec: Vec<f64>,
    pub current_state: AcuityState,
    pub target_state: AcuityState,
    pub targets: LabelVector,
}

/// One sample per labeled window pair: the events of observation window t
/// with times re-expressed as offsets, joined with the phenotype targets of
/// window t+1.
pub fn window_events(prepared: &PreparedAdmission, labels: &[WindowLabel]) -> Vec<WindowSample> {
    let mut buckets: Vec<Vec<&PreparedEvent>> = vec![Vec::new(); prepared.n_windows];
    for e in &prepared.events {
        let w = (e.time_h / WINDOW_H).floor() as usize;
        if w < buckets.len() {
            buckets[w].push(e);
        }
    }
    labels
        .iter()
        .map(|label| {
            let t = label.observed;
            let window_start = t as f64 * WINDOW_H;
            let bucket = buckets.get(t).map(Vec::as_slice).unwrap_or(&[]);
            WindowSample {
                admission_id: prepared.admission_id.clone(),
                patient_id: prepared.patient_id.clone(),
                window_index: t,
                times: bucket.iter().map(|e| (e.time_h - window_start) / WINDOW_H).collect(),
                codes: bucket.iter().map(|e| e.code).collect(),
                values: bucket.iter().map(|e| e.value).collect(),
                static_vec: prepared.static_vec.clone(),
                current_state: label.current_state,
                target_state: label.target_state,
                targets: label.labels,
            }
        })
        .collect()
}
