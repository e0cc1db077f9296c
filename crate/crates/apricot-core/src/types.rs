//! Shared domain types for ICU admissions and their acuity labels.

use serde::{Deserialize, Serialize};

pub type PatientId = String;
pub type AdmissionId = String;

/// Hours per labeling window.
pub const WINDOW_H: f64 = 4.0;

/// Life-sustaining therapies recorded as explicit intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TherapyKind {
    #[serde(rename = "MV")]
    Mv,
    #[serde(rename = "VP")]
    Vp,
    #[serde(rename = "CRRT")]
    Crrt,
}

impl TherapyKind {
    pub const ALL: [TherapyKind; 3] = [TherapyKind::Mv, TherapyKind::Vp, TherapyKind::Crrt];

    pub fn name(self) -> &'static str {
        match self {
            TherapyKind::Mv => "MV",
            TherapyKind::Vp => "VP",
            TherapyKind::Crrt => "CRRT",
        }
    }
}

impl std::str::FromStr for TherapyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MV" => Ok(TherapyKind::Mv),
            "VP" => Ok(TherapyKind::Vp),
            "CRRT" => Ok(TherapyKind::Crrt),
            other => Err(format!("unknown therapy {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disposition {
    DischargedAlive,
    Deceased,
}

/// Acuity state of one 4-hour window. Discharge and Deceased occur only at
/// the terminal window of a stay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AcuityState {
    Stable,
    Unstable,
    Discharge,
    Deceased,
}

impl AcuityState {
    pub const ALL: [AcuityState; 4] = [
        AcuityState::Stable,
        AcuityState::Unstable,
        AcuityState::Discharge,
        AcuityState::Deceased,
    ];

    pub fn index(self) -> usize {
        match self {
            AcuityState::Stable => 0,
            AcuityState::Unstable => 1,
            AcuityState::Discharge => 2,
            AcuityState::Deceased => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AcuityState::Stable => "Stable",
            AcuityState::Unstable => "Unstable",
            AcuityState::Discharge => "Discharge",
            AcuityState::Deceased => "Deceased",
        }
    }
}

impl std::str::FromStr for AcuityState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Stable" => Ok(AcuityState::Stable),
            "Unstable" => Ok(AcuityState::Unstable),
            "Discharge" => Ok(AcuityState::Discharge),
            "Deceased" => Ok(AcuityState::Deceased),
            other => Err(format!("unknown acuity state {other:?}")),
        }
    }
}

/// One timestamped measurement, medication dose, or score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicalEvent {
    pub time_h: f64,
    pub variable: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TherapyInterval {
    pub therapy: TherapyKind,
    pub start_h: f64,
    pub end_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transfusion {
    pub time_h: f64,
    pub units: f64,
}

/// Admission-level static data. Missing entries are imputable downstream
/// except for the fields the admission filters require.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticProfile {
    pub age_years: Option<f64>,
    pub bmi: Option<f64>,
    /// "F" or "M"
    pub sex: Option<String>,
    /// "Black", "White", or "Other"
    pub race: Option<String>,
    pub cci: Option<f64>,
    /// 0/1 flags, parallel to the schema's comorbidity column names.
    pub comorbidities: Vec<Option<f64>>,
}

/// Everything known about one ICU stay, assembled from the event, static,
/// therapy, transfusion, and disposition files. `events` are sorted by
/// time_h; same-time events keep their input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub admission_id: AdmissionId,
    pub patient_id: PatientId,
    pub los_h: f64,
    pub disposition: Disposition,
    pub events: Vec<ClinicalEvent>,
    pub therapies: Vec<TherapyInterval>,
    pub transfusions: Vec<Transfusion>,
    pub statics: StaticProfile,
}

impl AdmissionRecord {
    /// Number of 4-hour state windows covering the stay.
    pub fn n_windows(&self) -> usize {
        (self.los_h / WINDOW_H).ceil() as usize
    }
}

/// Prediction-head order used everywhere: label vectors, model logits,
/// reports. Four state heads, two transition heads, three therapy onsets.
pub const HEAD_NAMES: [&str; 9] = [
    "discharge",
    "stable",
    "unstable",
    "deceased",
    "unstable_to_stable",
    "stable_to_unstable",
    "onset_mv",
    "onset_vp",
    "onset_crrt",
];

/// The four primary-outcome heads (prefix of [`HEAD_NAMES`]).
pub const PRIMARY_HEADS: [usize; 4] = [0, 1, 2, 3];

/// Targets for one predicted window, in [`HEAD_NAMES`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    pub discharge: bool,
    pub stable: bool,
    pub unstable: bool,
    pub deceased: bool,
    pub unstable_to_stable: bool,
    pub stable_to_unstable: bool,
    pub onset_mv: bool,
    pub onset_vp: bool,
    pub onset_crrt: bool,
}

impl LabelVector {
    pub fn as_array(&self) -> [f64; 9] {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        [
            b(self.discharge),
            b(self.stable),
            b(self.unstable),
            b(self.deceased),
            b(self.unstable_to_stable),
            b(self.stable_to_unstable),
            b(self.onset_mv),
            b(self.onset_vp),
            b(self.onset_crrt),
        ]
    }

    pub fn bit(&self, head: usize) -> bool {
        match head {
            0 => self.discharge,
            1 => self.stable,
            2 => self.unstable,
            3 => self.deceased,
            4 => self.unstable_to_stable,
            5 => self.stable_to_unstable,
            6 => self.onset_mv,
            7 => self.onset_vp,
            8 => self.onset_crrt,
            _ => panic!("head index {head} out of range"),
        }
    }
}

/// Column names and required fields for a cohort. The default matches the
/// built-in synthetic generator's variable menu.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSchema {
    /// Vitals every retained admission must have at least one event of.
    pub routine_vitals: Vec<String>,
    /// Static comorbidity flag columns, in file order.
    pub comorbidity_flags: Vec<String>,
}

impl Default for CohortSchema {
    fn default() -> Self {
        CohortSchema {
            routine_vitals: [
                "heart_rate",
                "resp_rate",
                "sbp",
                "dbp",
                "temperature",
                "spo2",
            ]
            .map(String::from)
            .to_vec(),
            comorbidity_flags: [
                "hypertension",
                "diabetes",
                "chf",
                "copd",
                "ckd",
                "cad",
                "afib",
                "cancer",
                "cirrhosis",
                "stroke",
                "immunosuppressed",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

impl CohortSchema {
    /// Static feature layout: age, bmi, cci, sex, race one-hot (Black, White,
    /// Other), then the comorbidity flags.
    pub fn static_column_names(&self) -> Vec<String> {
        let mut names = vec![
            "age".to_string(),
            "bmi".to_string(),
            "cci".to_string(),
            "sex_male".to_string(),
            "race_black".to_string(),
            "race_white".to_string(),
            "race_other".to_string(),
        ];
        names.extend(self.comorbidity_flags.iter().cloned());
        names
    }

    pub fn n_static(&self) -> usize {
        7 + self.comorbidity_flags.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_vector_array_matches_bits() {
        let lv = LabelVector {
            unstable: true,
            stable_to_unstable: true,
            onset_vp: true,
            ..LabelVector::default()
        };
        let arr = lv.as_array();
        for (i, name) in HEAD_NAMES.iter().enumerate() {
            assert_eq!(arr[i] == 1.0, lv.bit(i), "head {name}");
        }
        assert_eq!(arr.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn window_count_rounds_up() {
        let adm = AdmissionRecord {
            admission_id: "a".into(),
            patient_id: "p".into(),
            los_h: 13.0,
            disposition: Disposition::Deceased,
            events: vec![],
            therapies: vec![],
            transfusions: vec![],
            statics: StaticProfile {
                age_years: None,
                bmi: None,
                sex: None,
                race: None,
                cci: None,
                comorbidities: vec![],
            },
        };
        assert_eq!(adm.n_windows(), 4);
        let exact = AdmissionRecord { los_h: 12.0, ..adm };
        assert_eq!(exact.n_windows(), 3);
    }

    #[test]
    fn default_schema_has_six_vitals_and_18_static_columns() {
        let schema = CohortSchema::default();
        assert_eq!(schema.routine_vitals.len(), 6);
        assert_eq!(schema.n_static(), 18);
        assert_eq!(schema.static_column_names().len(), 18);
    }
}
