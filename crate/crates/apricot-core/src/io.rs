//! File formats and admission assembly.
//!
//! Five flat files describe a cohort. Events are JSONL (one object per
//! line); statics, therapies, transfusions, and dispositions are headered
//! CSV. All hour fields are decimal hours since ICU admission. The
//! dispositions file is the canonical admission list: one row per stay,
//! carrying the outcome and the length of stay.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cohort::Rejection;
use crate::types::{
    AdmissionRecord, ClinicalEvent, CohortSchema, Disposition, StaticProfile, TherapyInterval,
    TherapyKind, Transfusion,
};
use crate::Error;

fn open(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(|source| Error::File { path: path.display().to_string(), source })
}

fn create(path: &Path) -> Result<File, Error> {
    File::create(path).map_err(|source| Error::File { path: path.display().to_string(), source })
}

fn malformed(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Malformed { path: path.display().to_string(), msg: msg.to_string() }
}

/// Write one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), Error> {
    let mut w = BufWriter::new(create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| malformed(path, format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| malformed(path, format!("line {}: {e}", i + 1)))?;
        out.push(item);
    }
    Ok(out)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let reader = BufReader::new(open(path)?);
    serde_json::from_reader(reader).map_err(|e| malformed(path, e))
}

/// One clinical event row in events.jsonl.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub patient_id: String,
    pub admission_id: String,
    pub time_h: f64,
    pub variable: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TherapyRow {
    pub admission_id: String,
    pub therapy: TherapyKind,
    pub start_h: f64,
    pub end_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransfusionRow {
    pub admission_id: String,
    pub time_h: f64,
    pub units: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispositionRow {
    pub admission_id: String,
    pub disposition: Disposition,
    pub end_h: f64,
}

/// One admission's static data, as stored in static.csv.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticRow {
    pub patient_id: String,
    pub admission_id: String,
    pub profile: StaticProfile,
}

pub fn write_events(path: &Path, rows: &[EventRow]) -> Result<(), Error> {
    write_jsonl(path, rows)
}

pub fn read_events(path: &Path) -> Result<Vec<EventRow>, Error> {
    read_jsonl(path)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let mut r = csv::Reader::from_reader(BufReader::new(open(path)?));
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec.map_err(|e| malformed(path, e))?);
    }
    Ok(out)
}

pub fn write_therapies(path: &Path, rows: &[TherapyRow]) -> Result<(), Error> {
    write_csv(path, rows)
}

pub fn read_therapies(path: &Path) -> Result<Vec<TherapyRow>, Error> {
    read_csv(path)
}

pub fn write_transfusions(path: &Path, rows: &[TransfusionRow]) -> Result<(), Error> {
    write_csv(path, rows)
}

pub fn read_transfusions(path: &Path) -> Result<Vec<TransfusionRow>, Error> {
    read_csv(path)
}

pub fn write_dispositions(path: &Path, rows: &[DispositionRow]) -> Result<(), Error> {
    write_csv(path, rows)
}

pub fn read_dispositions(path: &Path) -> Result<Vec<DispositionRow>, Error> {
    read_csv(path)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(path: &Path, row: usize, field: &str, s: &str) -> Result<Option<f64>, Error> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| malformed(path, format!("row {row}, field {field}: {e}")))
}

fn opt_str(s: &str) -> Option<String> {
    let s = s.trim();
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

/// Static CSV columns: patient_id, admission_id, age, bmi, sex, race, cci,
/// then the schema's comorbidity flags. Empty cells mean missing.
pub fn write_statics(path: &Path, rows: &[StaticRow], schema: &CohortSchema) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    let mut header = vec![
        "patient_id".to_string(),
        "admission_id".to_string(),
        "age".to_string(),
        "bmi".to_string(),
        "sex".to_string(),
        "race".to_string(),
        "cci".to_string(),
    ];
    header.extend(schema.comorbidity_flags.iter().cloned());
    w.write_record(&header)?;
    for row in rows {
        let p = &row.profile;
        if p.comorbidities.len() != schema.comorbidity_flags.len() {
            return Err(malformed(
                path,
                format!(
                    "admission {}: {} comorbidity flags, schema expects {}",
                    row.admission_id,
                    p.comorbidities.len(),
                    schema.comorbidity_flags.len()
                ),
            ));
        }
        let mut rec = vec![
            row.patient_id.clone(),
            row.admission_id.clone(),
            fmt_opt(p.age_years),
            fmt_opt(p.bmi),
            p.sex.clone().unwrap_or_default(),
            p.race.clone().unwrap_or_default(),
            fmt_opt(p.cci),
        ];
        rec.extend(p.comorbidities.iter().map(|f| fmt_opt(*f)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_statics(path: &Path, schema: &CohortSchema) -> Result<Vec<StaticRow>, Error> {
    let mut r = csv::Reader::from_reader(BufReader::new(open(path)?));
    let header = r.headers().map_err(|e| malformed(path, e))?.clone();
    let fixed = ["patient_id", "admission_id", "age", "bmi", "sex", "race", "cci"];
    let expected = fixed.len() + schema.comorbidity_flags.len();
    if header.len() != expected {
        return Err(malformed(
            path,
            format!("expected {expected} columns, found {}", header.len()),
        ));
    }
    for (i, name) in fixed.iter().enumerate() {
        if &header[i] != *name {
            return Err(malformed(path, format!("column {i} must be {name}, found {}", &header[i])));
        }
    }
    for (i, name) in schema.comorbidity_flags.iter().enumerate() {
        if &header[fixed.len() + i] != name.as_str() {
            return Err(malformed(
                path,
                format!("column {} must be {name}, found {}", fixed.len() + i, &header[fixed.len() + i]),
            ));
        }
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, e))?;
        let row = i + 2; // 1-based, after header
        if rec.len() != expected {
            return Err(malformed(path, format!("row {row}: {} fields", rec.len())));
        }
        let mut comorbidities = Vec::with_capacity(schema.comorbidity_flags.len());
        for (j, name) in schema.comorbidity_flags.iter().enumerate() {
            comorbidities.push(parse_opt(path, row, name, &rec[fixed.len() + j])?);
        }
        out.push(StaticRow {
            patient_id: rec[0].to_string(),
            admission_id: rec[1].to_string(),
            profile: StaticProfile {
                age_years: parse_opt(path, row, "age", &rec[2])?,
                bmi: parse_opt(path, row, "bmi", &rec[3])?,
                sex: opt_str(&rec[4]),
                race: opt_str(&rec[5]),
                cci: parse_opt(path, row, "cci", &rec[6])?,
                comorbidities,
            },
        });
    }
    Ok(out)
}

/// Join the five files into admission records. The dispositions file defines
/// the admission universe and order; an admission without a static row is
/// rejected rather than fabricated. Events are stable-sorted by time so
/// same-time events keep file order. Orphan rows referencing unknown
/// admissions are dropped silently.
pub fn assemble_admissions(
    events: Vec<EventRow>,
    statics: Vec<StaticRow>,
    therapies: Vec<TherapyRow>,
    transfusions: Vec<TransfusionRow>,
    dispositions: Vec<DispositionRow>,
) -> (Vec<AdmissionRecord>, Vec<Rejection>) {
    use std::collections::HashMap;

    let mut static_by_id: HashMap<String, StaticRow> = HashMap::new();
    for s in statics {
        static_by_id.insert(s.admission_id.clone(), s);
    }
    let mut events_by_id: HashMap<&str, Vec<ClinicalEvent>> = HashMap::new();
    for e in &events {
        events_by_id.entry(&e.admission_id).or_default().push(ClinicalEvent {
            time_h: e.time_h,
            variable: e.variable.clone(),
            value: e.value,
        });
    }
    let mut therapy_by_id: HashMap<&str, Vec<TherapyInterval>> = HashMap::new();
    for t in &therapies {
        therapy_by_id.entry(&t.admission_id).or_default().push(TherapyInterval {
            therapy: t.therapy,
            start_h: t.start_h,
            end_h: t.end_h,
        });
    }
    let mut tx_by_id: HashMap<&str, Vec<Transfusion>> = HashMap::new();
    for t in &transfusions {
        tx_by_id
            .entry(&t.admission_id)
            .or_default()
            .push(Transfusion { time_h: t.time_h, units: t.units });
    }

    let mut admissions = Vec::with_capacity(dispositions.len());
    let mut rejections = Vec::new();
    for d in dispositions {
        let Some(srow) = static_by_id.remove(&d.admission_id) else {
            rejections.push(Rejection {
                admission_id: d.admission_id,
                reason: "no static row".into(),
            });
            continue;
        };
        let mut evs = events_by_id.remove(d.admission_id.as_str()).unwrap_or_default();
        evs.sort_by(|a, b| a.time_h.total_cmp(&b.time_h));
        admissions.push(AdmissionRecord {
            patient_id: srow.patient_id,
            los_h: d.end_h,
            disposition: d.disposition,
            events: evs,
            therapies: therapy_by_id.remove(d.admission_id.as_str()).unwrap_or_default(),
            transfusions: tx_by_id.remove(d.admission_id.as_str()).unwrap_or_default(),
            statics: srow.profile,
            admission_id: d.admission_id,
        });
    }
    (admissions, rejections)
}
