//! Synthetic ICU cohort generator.
//!
//! Each patient carries a latent severity in [0,1] following a mean-reverting
//! walk on a 15-minute grid, with rare upward shocks. Measured variables are
//! noisy functions of severity sampled at irregular intervals; therapies
//! open and close by hysteresis thresholds on severity; transfusions,
//! death hazard, and discharge all key off the same latent state. Every
//! draw comes from one counter-mode stream per patient, so cohorts are
//! reproducible and patients are independent.
//!
//! The generator also emits its own per-window ground-truth states computed
//! from per-step bookkeeping (integer step indices, not interval sweeps),
//! giving downstream labeling code an independently derived answer to match.
//!
//! Grid hygiene: therapy boundaries, transfusion times, and stay ends all
//! sit on the 0.25 h grid, which is exact in floating point. Only free-form
//! measurement timestamps are irrational.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::types::{
    AcuityState, AdmissionRecord, ClinicalEvent, CohortSchema, Disposition, StaticProfile,
    TherapyInterval, TherapyKind, Transfusion, WINDOW_H,
};
use crate::Error;

/// Simulation step, hours. 16 steps per labeling window.
pub const STEP_H: f64 = 0.25;
const STEPS_PER_DAY: usize = 96;
const MAX_STAY_H: f64 = 720.0;

/// One measured variable: value = base + lin·s + quad·s² + noise, clamped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub base: f64,
    pub lin: f64,
    pub quad: f64,
    pub noise_sd: f64,
    /// Mean gap between samples, hours (exponential waiting times).
    pub mean_gap_h: f64,
    pub lo: f64,
    pub hi: f64,
}

fn var(name: &str, base: f64, lin: f64, quad: f64, noise_sd: f64, gap: f64, lo: f64, hi: f64) -> VariableSpec {
    VariableSpec { name: name.into(), base, lin, quad, noise_sd, mean_gap_h: gap, lo, hi }
}

/// Hysteresis pair: a therapy opens at or above `open` and closes below
/// `close`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hysteresis {
    pub open: f64,
    pub close: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub seed: u64,
    /// Median of the lognormal stay-length target, hours.
    pub median_stay_h: f64,
    pub stay_log_sd: f64,
    /// Baseline severity ranges for the common and the sicker subpopulation.
    pub baseline_low: (f64, f64),
    pub baseline_high: (f64, f64),
    pub high_acuity_frac: f64,
    /// Mean-reversion rate toward the patient baseline, per hour.
    pub reversion_per_h: f64,
    /// Diffusion scale, per sqrt(hour).
    pub noise_per_sqrt_h: f64,
    /// Probability per step of an acute deterioration jump.
    pub shock_prob: f64,
    pub shock_size: (f64, f64),
    pub mv: Hysteresis,
    pub vp: Hysteresis,
    pub crrt: Hysteresis,
    /// Transfusions fire with this probability per step while severity
    /// exceeds the threshold.
    pub transfusion_threshold: f64,
    pub transfusion_prob: f64,
    /// Death hazard per hour per unit of severity above `death_threshold`,
    /// inactive before `min_death_h`.
    pub mortality_hazard_per_h: f64,
    pub death_threshold: f64,
    pub min_death_h: f64,
    /// Severity below which a patient past the stay target goes home.
    pub discharge_threshold: f64,
    /// Fraction of patients with a second stay.
    pub readmission_frac: f64,
    pub menu: Vec<VariableSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 100,
            seed: 0,
            median_stay_h: 72.0,
            stay_log_sd: 0.65,
            baseline_low: (0.18, 0.42),
            baseline_high: (0.44, 0.70),
            high_acuity_frac: 0.33,
            reversion_per_h: 0.15,
            noise_per_sqrt_h: 0.08,
            shock_prob: 0.0028,
            shock_size: (0.18, 0.42),
            mv: Hysteresis { open: 0.60, close: 0.48 },
            vp: Hysteresis { open: 0.66, close: 0.54 },
            crrt: Hysteresis { open: 0.82, close: 0.70 },
            transfusion_threshold: 0.70,
            transfusion_prob: 0.03,
            mortality_hazard_per_h: 0.65,
            death_threshold: 0.80,
            min_death_h: 14.0,
            discharge_threshold: 0.50,
            readmission_frac: 0.12,
            menu: default_menu(),
        }
    }
}

/// Six routine vitals, one strong nonlinear severity marker (lactate), a
/// coma score, and eight weakly informative labs.
pub fn default_menu() -> Vec<VariableSpec> {
    vec![
        var("heart_rate", 72.0, 38.0, 0.0, 6.0, 0.9, 25.0, 210.0),
        var("resp_rate", 15.0, 12.0, 0.0, 2.5, 0.9, 4.0, 60.0),
        var("sbp", 128.0, -42.0, 0.0, 8.0, 0.9, 40.0, 230.0),
        var("dbp", 72.0, -22.0, 0.0, 6.0, 0.9, 20.0, 140.0),
        var("temperature", 36.8, 0.9, 0.0, 0.3, 0.9, 32.0, 42.0),
        var("spo2", 98.5, -7.0, 0.0, 1.2, 0.9, 60.0, 100.0),
        var("lactate", 0.8, 0.0, 7.0, 0.18, 2.0, 0.2, 18.0),
        var("gcs", 15.0, -9.5, 0.0, 0.7, 4.0, 3.0, 15.0),
        var("wbc", 9.0, 3.0, 0.0, 2.2, 7.0, 1.0, 40.0),
        var("hemoglobin", 11.5, -1.8, 0.0, 1.1, 7.0, 4.0, 19.0),
        var("platelets", 230.0, -60.0, 0.0, 45.0, 7.0, 10.0, 800.0),
        var("sodium", 139.0, 2.0, 0.0, 3.0, 7.0, 115.0, 165.0),
        var("potassium", 4.1, 0.5, 0.0, 0.4, 7.0, 2.0, 8.0),
        var("creatinine", 1.0, 1.6, 0.0, 0.35, 7.0, 0.2, 9.0),
        var("bun", 18.0, 14.0, 0.0, 5.0, 7.0, 2.0, 120.0),
        var("glucose", 132.0, 35.0, 0.0, 28.0, 7.0, 40.0, 500.0),
    ]
}

fn validate(c: &SynthConfig) -> Result<(), Error> {
    if c.n_patients == 0 {
        return Err(Error::Synth("n_patients must be positive".into()));
    }
    for (name, p) in [
        ("high_acuity_frac", c.high_acuity_frac),
        ("shock_prob", c.shock_prob),
        ("transfusion_prob", c.transfusion_prob),
        ("readmission_frac", c.readmission_frac),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Synth(format!("{name} = {p} outside [0,1]")));
        }
    }
    for (name, h) in [("mv", c.mv), ("vp", c.vp), ("crrt", c.crrt)] {
        if !(h.close < h.open) {
            return Err(Error::Synth(format!(
                "{name} hysteresis needs close < open, got {} / {}",
                h.close, h.open
            )));
        }
    }
    if c.median_stay_h < 16.0 {
        return Err(Error::Synth("median_stay_h below 16 h leaves no room to predict".into()));
    }
    if c.menu.is_empty() {
        return Err(Error::Synth("empty variable menu".into()));
    }
    Ok(())
}

/// Standard normal via Box–Muller (first coordinate only; deterministic
/// draw count of two uniforms per call).
fn randn(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn rand_exp(rng: &mut ChaCha20Rng, mean: f64) -> f64 {
    let u: f64 = rng.random();
    -mean * (1.0 - u).ln()
}

fn rand_range(rng: &mut ChaCha20Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Ground truth for one admission, computed from per-step bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleAdmission {
    pub admission_id: String,
    pub states: Vec<AcuityState>,
    /// Mean latent severity per window.
    pub mean_severity: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SynthCohort {
    pub admissions: Vec<AdmissionRecord>,
    pub oracles: Vec<OracleAdmission>,
}

struct Step {
    severity: f64,
    mv: bool,
    vp: bool,
    crrt: bool,
}

struct StayOutcome {
    steps: Vec<Step>,
    therapies: Vec<TherapyInterval>,
    transfusions: Vec<Transfusion>,
    los_h: f64,
    disposition: Disposition,
}

struct TherapyTracker {
    kind: TherapyKind,
    h: Hysteresis,
    active_since: Option<f64>,
}

impl TherapyTracker {
    /// Update at step start; returns whether the therapy covers this step.
    fn step(&mut self, s: f64, t: f64, out: &mut Vec<TherapyInterval>) -> bool {
        match self.active_since {
            None if s >= self.h.open => {
                self.active_since = Some(t);
                true
            }
            None => false,
            Some(start) if s < self.h.close => {
                out.push(TherapyInterval { therapy: self.kind, start_h: start, end_h: t });
                self.active_since = None;
                false
            }
            Some(_) => true,
        }
    }

    fn finish(&mut self, los_h: f64, out: &mut Vec<TherapyInterval>) {
        if let Some(start) = self.active_since.take() {
            out.push(TherapyInterval { therapy: self.kind, start_h: start, end_h: los_h });
        }
    }
}

fn simulate_stay(rng: &mut ChaCha20Rng, c: &SynthConfig, baseline: f64) -> StayOutcome {
    // lognormal stay target, snapped up to the step grid
    let target = (c.median_stay_h * (c.stay_log_sd * randn(rng)).exp()).clamp(16.0, 680.0);
    let target = (target / STEP_H).ceil() * STEP_H;

    let mut s = (baseline + 0.05 * randn(rng)).clamp(0.02, 0.95);
    let mut steps: Vec<Step> = Vec::new();
    let mut therapies = Vec::new();
    let mut transfusions = Vec::new();
    let mut trackers = [
        TherapyTracker { kind: TherapyKind::Mv, h: c.mv, active_since: None },
        TherapyTracker { kind: TherapyKind::Vp, h: c.vp, active_since: None },
        TherapyTracker { kind: TherapyKind::Crrt, h: c.crrt, active_since: None },
    ];
    let (los_h, disposition) = loop {
        let t = steps.len() as f64 * STEP_H;
        if t >= MAX_STAY_H {
            break (MAX_STAY_H, Disposition::DischargedAlive);
        }
        if t >= target && s < c.discharge_threshold {
            break (t, Disposition::DischargedAlive);
        }

        let mv = trackers[0].step(s, t, &mut therapies);
        let vp = trackers[1].step(s, t, &mut therapies);
        let crrt = trackers[2].step(s, t, &mut therapies);
        if s > c.transfusion_threshold && rng.random::<f64>() < c.transfusion_prob {
            let units = rng.random_range(2..=5) as f64;
            transfusions.push(Transfusion { time_h: t, units });
        }
        steps.push(Step { severity: s, mv, vp, crrt });

        if t > c.min_death_h && s > c.death_threshold {
            let p = c.mortality_hazard_per_h * (s - c.death_threshold) * STEP_H;
            if rng.random::<f64>() < p {
                break (t + STEP_H, Disposition::Deceased);
            }
        }

        // mean-reverting update with occasional deterioration shocks
        s += c.reversion_per_h * (baseline - s) * STEP_H
            + c.noise_per_sqrt_h * STEP_H.sqrt() * randn(rng);
        if rng.random::<f64>() < c.shock_prob {
            s += rand_range(rng, c.shock_size);
        }
        s = s.clamp(0.0, 1.0);
    };
    for tr in &mut trackers {
        tr.finish(los_h, &mut therapies);
    }
    therapies.sort_by(|a, b| a.start_h.total_cmp(&b.start_h));
    StayOutcome { steps, therapies, transfusions, los_h, disposition }
}

fn severity_at(steps: &[Step], t: f64) -> f64 {
    let k = ((t / STEP_H) as usize).min(steps.len() - 1);
    steps[k].severity
}

fn generate_events(rng: &mut ChaCha20Rng, c: &SynthConfig, stay: &StayOutcome) -> Vec<ClinicalEvent> {
    let mut events = Vec::new();
    // every measured variable gets an admission-time sample, which also
    // guarantees the routine-vital inclusion rule for generated stays
    for spec in &c.menu {
        let mut t = 0.0;
        while t < stay.los_h {
            let s = severity_at(&stay.steps, t);
            let value = (spec.base + spec.lin * s + spec.quad * s * s
                + spec.noise_sd * randn(rng))
            .clamp(spec.lo, spec.hi);
            events.push(ClinicalEvent { time_h: t, variable: spec.name.clone(), value });
            t += rand_exp(rng, spec.mean_gap_h);
        }
    }
    // infusions charted hourly while the driving therapy is active
    for iv in &stay.therapies {
        let meds: &[(&str, f64, f64, f64)] = match iv.therapy {
            TherapyKind::Vp => &[("norepinephrine", 0.04, 0.30, 0.02)],
            TherapyKind::Mv => &[("propofol", 25.0, 30.0, 4.0), ("fentanyl", 50.0, 70.0, 8.0)],
            TherapyKind::Crrt => &[],
        };
        for &(name, base, lin, sd) in meds {
            let mut t = iv.start_h;
            while t < iv.end_h {
                let s = severity_at(&stay.steps, t);
                let value = (base + lin * s + sd * randn(rng)).max(0.0);
                events.push(ClinicalEvent { time_h: t, variable: name.into(), value });
                t += 1.0;
            }
        }
    }
    // prophylaxis on a fixed schedule at a fixed dose for some admissions
    if rng.random::<f64>() < 0.35 {
        let mut t = 0.5;
        while t < stay.los_h {
            events.push(ClinicalEvent { time_h: t, variable: "heparin".into(), value: 5000.0 });
            t += 6.0;
        }
    }
    // rare supplement: stays below the vocabulary prevalence floor
    if rng.random::<f64>() < 0.03 {
        let mut t = 1.0;
        while t < stay.los_h {
            events.push(ClinicalEvent { time_h: t, variable: "folate".into(), value: 1.0 });
            t += 24.0;
        }
    }
    events.sort_by(|a, b| a.time_h.total_cmp(&b.time_h));
    events
}

fn generate_statics(rng: &mut ChaCha20Rng, schema: &CohortSchema) -> StaticProfile {
    let age = (62.0 + 15.0 * randn(rng)).clamp(18.0, 95.0);
    let sex = if rng.random::<f64>() < 0.55 { "M" } else { "F" };
    let race = {
        let u: f64 = rng.random();
        if u < 0.20 {
            "Black"
        } else if u < 0.80 {
            "White"
        } else {
            "Other"
        }
    };
    let bmi = if rng.random::<f64>() < 0.05 {
        None
    } else {
        Some((28.5 + 5.5 * randn(rng)).clamp(14.0, 55.0))
    };
    let cci = if rng.random::<f64>() < 0.04 {
        None
    } else {
        let raw = (0.06 * (age - 40.0)).max(0.0) + 2.0 * rng.random::<f64>();
        Some(raw.floor().clamp(0.0, 14.0))
    };
    let prevalences = [0.45, 0.30, 0.18, 0.15, 0.17, 0.20, 0.16, 0.12, 0.06, 0.08, 0.07];
    let comorbidities = schema
        .comorbidity_flags
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if rng.random::<f64>() < 0.01 {
                None
            } else {
                let p = prevalences.get(i).copied().unwrap_or(0.1);
                Some(if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            }
        })
        .collect();
    StaticProfile {
        age_years: Some(age),
        bmi,
        sex: Some(sex.into()),
        race: Some(race.into()),
        cci,
        comorbidities,
    }
}

/// Frailty load in [0,1] from age and comorbidities, shifting the severity
/// baseline so static features carry real signal.
fn frailty(statics: &StaticProfile) -> f64 {
    let age = statics.age_years.unwrap_or(62.0);
    let cci = statics.cci.unwrap_or(2.0);
    let flags: f64 = statics.comorbidities.iter().map(|f| f.unwrap_or(0.0)).sum();
    let n_flags = statics.comorbidities.len().max(1) as f64;
    (0.4 * (age - 18.0) / 77.0 + 0.3 * cci / 14.0 + 0.3 * flags / n_flags).clamp(0.0, 1.0)
}

/// Ground-truth window states from the per-step record: integer index
/// arithmetic only, no interval sweeps.
fn oracle_of(
    admission_id: &str,
    stay: &StayOutcome,
) -> OracleAdmission {
    let n_steps = stay.steps.len();
    // trailing 24 h transfusion burden per step via a difference array
    let mut delta = vec![0.0f64; n_steps + STEPS_PER_DAY + 1];
    for tx in &stay.transfusions {
        let k = (tx.time_h / STEP_H).round() as usize;
        delta[k] += tx.units;
        delta[k + STEPS_PER_DAY] -= tx.units;
    }
    let mut bt = vec![false; n_steps];
    let mut running = 0.0;
    for (k, flag) in bt.iter_mut().enumerate() {
        running += delta[k];
        *flag = running >= 10.0;
    }

    let n_windows = (stay.los_h / WINDOW_H).ceil() as usize;
    let steps_per_window = (WINDOW_H / STEP_H) as usize;
    let mut states = Vec::with_capacity(n_windows);
    let mut mean_severity = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let lo = w * steps_per_window;
        let hi = ((w + 1) * steps_per_window).min(n_steps);
        let slice = &stay.steps[lo..hi];
        let sev = slice.iter().map(|s| s.severity).sum::<f64>() / slice.len() as f64;
        mean_severity.push(sev);
        if w == n_windows - 1 {
            states.push(match stay.disposition {
                Disposition::Deceased => AcuityState::Deceased,
                Disposition::DischargedAlive => AcuityState::Discharge,
            });
        } else {
            let unstable = slice.iter().enumerate().any(|(i, s)| {
                s.mv || s.vp || s.crrt || bt[lo + i]
            });
            states.push(if unstable { AcuityState::Unstable } else { AcuityState::Stable });
        }
    }
    OracleAdmission { admission_id: admission_id.into(), states, mean_severity }
}

/// Generate the full cohort with its ground truth. Patient i draws from
/// stream i of the seeded generator, so patients are independent and the
/// cohort is reproducible.
pub fn generate(config: &SynthConfig) -> Result<SynthCohort, Error> {
    validate(config)?;
    let schema = CohortSchema::default();
    let mut admissions = Vec::new();
    let mut oracles = Vec::new();
    for i in 0..config.n_patients {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let patient_id = format!("p{i:05}");
        let statics = generate_statics(&mut rng, &schema);

        let high = rng.random::<f64>() < config.high_acuity_frac;
        let range = if high { config.baseline_high } else { config.baseline_low };
        let baseline = (rand_range(&mut rng, range) + 0.08 * frailty(&statics)).clamp(0.02, 0.9);
        let n_stays = if rng.random::<f64>() < config.readmission_frac { 2 } else { 1 };

        for stay_idx in 1..=n_stays {
            let admission_id = format!("{patient_id}-a{stay_idx}");
            let stay = simulate_stay(&mut rng, config, baseline);
            let events = generate_events(&mut rng, config, &stay);
            oracles.push(oracle_of(&admission_id, &stay));
            admissions.push(AdmissionRecord {
                admission_id,
                patient_id: patient_id.clone(),
                los_h: stay.los_h,
                disposition: stay.disposition,
                events,
                therapies: stay.therapies,
                transfusions: stay.transfusions,
                statics: statics.clone(),
            });
        }
    }
    Ok(SynthCohort { admissions, oracles })
}
