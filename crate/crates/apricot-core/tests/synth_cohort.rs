//! Cohort-level checks on the generator: the labeling pipeline must agree
//! with the generator's own per-step ground truth on every window, and the
//! population must land in clinically plausible bands.

use apricot_core::cohort::{apply_admission_filters, build_vocabulary, MIN_PREVALENCE};
use apricot_core::phenotype::label_states;
use apricot_core::synth::{generate, SynthConfig};
use apricot_core::{AcuityState, CohortSchema, Disposition};

fn cohort(n: usize, seed: u64) -> apricot_core::synth::SynthCohort {
    generate(&SynthConfig { n_patients: n, seed, ..SynthConfig::default() }).unwrap()
}

#[test]
fn interval_labels_match_per_step_ground_truth() {
    // the generator derives states from step flags and integer arithmetic;
    // label_states derives them from interval overlap sweeps. They must
    // agree exactly on every window of every admission.
    let c = cohort(400, 77);
    let mut windows = 0usize;
    for (adm, oracle) in c.admissions.iter().zip(&c.oracles) {
        let states = label_states(adm).unwrap();
        assert_eq!(
            states, oracle.states,
            "window state mismatch on {}",
            adm.admission_id
        );
        windows += states.len();
    }
    assert!(windows > 5_000, "expected a non-trivial window count, got {windows}");
}

#[test]
fn generated_admissions_pass_cohort_filters() {
    let c = cohort(250, 31);
    let schema = CohortSchema::default();
    let n = c.admissions.len();
    let (kept, rejected) = apply_admission_filters(c.admissions, &schema);
    assert_eq!(kept.len(), n, "rejections: {rejected:?}");
}

#[test]
fn population_statistics_fall_in_design_bands() {
    let c = cohort(500, 2024);
    let n_adm = c.admissions.len() as f64;

    let deceased = c
        .admissions
        .iter()
        .filter(|a| a.disposition == Disposition::Deceased)
        .count() as f64;
    let mortality = deceased / n_adm;

    let mut unstable = 0usize;
    let mut nonterminal = 0usize;
    for o in &c.oracles {
        for s in &o.states[..o.states.len() - 1] {
            nonterminal += 1;
            if *s == AcuityState::Unstable {
                unstable += 1;
            }
        }
    }
    let prevalence = unstable as f64 / nonterminal as f64;

    // point-biserial correlation between window mean severity and the
    // unstable flag; the model can only learn what severity carries
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for o in &c.oracles {
        for (w, s) in o.states[..o.states.len() - 1].iter().enumerate() {
            xs.push(o.mean_severity[w]);
            ys.push(if *s == AcuityState::Unstable { 1.0 } else { 0.0 });
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n;
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n;
    let r = cov / (vx * vy).sqrt();

    let mean_los = c.admissions.iter().map(|a| a.los_h).sum::<f64>() / n_adm;
    println!(
        "admissions {n_adm} mortality {mortality:.3} prevalence {prevalence:.3} r {r:.3} mean_los {mean_los:.1}"
    );

    assert!((0.06..=0.16).contains(&mortality), "mortality {mortality}");
    assert!((0.18..=0.42).contains(&prevalence), "unstable prevalence {prevalence}");
    assert!(r > 0.3, "severity barely predicts instability, r = {r}");
}

#[test]
fn vocabulary_includes_commons_and_drops_rarities() {
    let c = cohort(300, 6);
    let vocab = build_vocabulary(&c.admissions, MIN_PREVALENCE).unwrap();
    for name in ["heart_rate", "lactate", "creatinine", "heparin"] {
        assert!(vocab.code(name).is_some(), "{name} missing from vocabulary");
    }
    assert!(vocab.code("folate").is_none(), "folate appears in ~3% of stays");
}
