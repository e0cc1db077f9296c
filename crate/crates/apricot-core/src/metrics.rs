//! Discrimination metrics, Youden thresholding, bootstrap intervals, and
//! the rank-sum test used for subgroup comparisons.
//!
//! Conventions fixed here and relied on by the tests: the decision rule is
//! "positive iff score >= t", AUROC uses midranks (ties count half), AUPRC
//! is step-interpolated average precision, and undefined ratios (0/0) are
//! reported as missing rather than NaN.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::percentile_linear;
use crate::types::StaticProfile;
use crate::Error;

/// 1-based ranks with ties averaged.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the average of ranks i+1..=j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outranks a random negative, ties
/// counted half. None unless both classes are present.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Step-interpolated average precision. None when there are no positives.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        // a whole tie group enters at once: one threshold per distinct score
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Some(ap)
}

/// Threshold among the observed scores maximizing J = sensitivity +
/// specificity − 1 under the rule "positive iff score >= t"; ties broken
/// toward the smallest threshold. Returns (t, J); None unless both classes
/// are present.
pub fn youden_threshold(scores: &[f64], labels: &[bool]) -> Option<(f64, f64)> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // J + 1 = tp/n_pos + tn/n_neg = (tp*n_neg + tn*n_pos) / (n_pos*n_neg);
    // comparing the integer numerator keeps exact J ties exact, so the
    // tie rule below cannot be upset by rounding
    let mut best: Option<(f64, usize)> = None;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == t {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let numer = tp * n_neg + (n_neg - fp) * n_pos;
        // descending sweep: a later candidate is a smaller t, so >= lets the
        // smallest tied threshold win
        if best.is_none_or(|(_, bn)| numer >= bn) {
            best = Some((t, numer));
        }
        i = j + 1;
    }
    best.map(|(t, numer)| (t, numer as f64 / (n_pos * n_neg) as f64 - 1.0))
}

/// The four confusion ratios at a threshold. A ratio whose denominator is
/// zero is None.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn confusion_at(scores: &[f64], labels: &[bool], t: f64) -> Confusion {
    assert_eq!(scores.len(), labels.len());
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    for (s, &l) in scores.iter().zip(labels) {
        match (*s >= t, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fnn += 1,
        }
    }
    Confusion {
        sensitivity: ratio(tp, tp + fnn),
        specificity: ratio(tn, tn + fp),
        ppv: ratio(tp, tp + fp),
        npv: ratio(tn, tn + fnn),
    }
}

/// Median and 95% percentile interval across bootstrap iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ci {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

const BOOTSTRAP_RETRY_CAP: usize = 20;

/// Resample indices 0..len with replacement `iters` times and summarize the
/// metric. An iteration whose metric is undefined is redrawn from the same
/// stream up to a retry cap, then dropped; the dropped count is returned for
/// the caller to warn about. Deterministic in `seed` via one counter-mode
/// stream per iteration.
pub fn bootstrap_ci(
    len: usize,
    iters: usize,
    seed: u64,
    metric: impl Fn(&[usize]) -> Option<f64>,
) -> Result<(Ci, usize), Error> {
    if len == 0 {
        return Err(Error::Metric("bootstrap over zero items".into()));
    }
    if iters == 0 {
        return Err(Error::Metric("bootstrap needs at least one iteration".into()));
    }
    let mut stats = Vec::with_capacity(iters);
    let mut dropped = 0usize;
    let mut indices = vec![0usize; len];
    for iter in 0..iters {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(iter as u64);
        let mut ok = false;
        for _ in 0..=BOOTSTRAP_RETRY_CAP {
            for slot in indices.iter_mut() {
                *slot = rng.random_range(0..len);
            }
            if let Some(v) = metric(&indices) {
                stats.push(v);
                ok = true;
                break;
            }
        }
        if !ok {
            dropped += 1;
        }
    }
    if stats.is_empty() {
        return Err(Error::Metric(format!(
            "metric undefined in all {iters} bootstrap iterations"
        )));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let ci = Ci {
        median: percentile_linear(&stats, 0.5),
        lo: percentile_linear(&stats, 0.025),
        hi: percentile_linear(&stats, 0.975),
    };
    Ok((ci, dropped))
}

/// Rank-sum test result. `u` is the Mann–Whitney statistic for the first
/// sample; `exact` marks small-sample enumeration instead of the normal
/// approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    pub u: f64,
    pub p: f64,
    pub exact: bool,
}

const WILCOXON_EXACT_MAX_N: usize = 10;

struct RankSummary {
    u: f64,
    mean_w: f64,
    dev: f64,
    ranks: Vec<f64>,
}

fn rank_summary(a: &[f64], b: &[f64]) -> Result<RankSummary, Error> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("rank-sum test needs two non-empty samples".into()));
    }
    let (na, n) = (a.len(), a.len() + b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..na].iter().sum();
    let u = w - (na * (na + 1)) as f64 / 2.0;
    let mean_w = na as f64 * (n + 1) as f64 / 2.0;
    Ok(RankSummary { u, mean_w, dev: (w - mean_w).abs(), ranks })
}

/// Two-sided Wilcoxon rank-sum test with midranks. Exact permutation
/// enumeration when the pooled size is at most 10, otherwise the
/// large-sample approximation of [`wilcoxon_normal_approx`].
pub fn wilcoxon_ranksum(a: &[f64], b: &[f64]) -> Result<Wilcoxon, Error> {
    let n = a.len() + b.len();
    if !a.is_empty() && !b.is_empty() && n > WILCOXON_EXACT_MAX_N {
        return wilcoxon_normal_approx(a, b);
    }
    let s = rank_summary(a, b)?;
    // enumerate every assignment of the pooled ranks to the first sample
    let na = a.len();
    let mut total = 0usize;
    let mut at_least = 0usize;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        total += 1;
        let w_sub: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| s.ranks[i]).sum();
        if (w_sub - s.mean_w).abs() >= s.dev - 1e-12 {
            at_least += 1;
        }
    }
    Ok(Wilcoxon { u: s.u, p: at_least as f64 / total as f64, exact: true })
}

/// The large-sample branch of the rank-sum test: tie-corrected normal
/// approximation with 0.5 continuity correction, applied regardless of
/// sample size. Small pooled sizes are where the approximation is weakest,
/// so keeping this callable on its own lets its error be measured against
/// enumeration.
pub fn wilcoxon_normal_approx(a: &[f64], b: &[f64]) -> Result<Wilcoxon, Error> {
    let s = rank_summary(a, b)?;
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    // tie-corrected variance of W
    let mut tie_term = 0.0;
    let mut sorted: Vec<f64> = a.iter().chain(b).copied().collect();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var_w = (na * nb) as f64 / 12.0
        * ((n + 1) as f64 - tie_term / (n as f64 * (n as f64 - 1.0)));
    if var_w <= 0.0 {
        return Ok(Wilcoxon { u: s.u, p: 1.0, exact: false });
    }
    let z = ((s.dev - 0.5).max(0.0)) / var_w.sqrt();
    let p = (2.0 * (1.0 - normal_cdf(z))).clamp(0.0, 1.0);
    Ok(Wilcoxon { u: s.u, p, exact: false })
}

/// Standard normal CDF via a rational erfc approximation (absolute error
/// below 2e-7, ample for p-values).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736
                + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let e = poly * (-x * x).exp();
    if x >= 0.0 {
        e
    } else {
        2.0 - e
    }
}

/// Full per-head evaluation: point Youden threshold plus bootstrap intervals
/// for the six reported metrics. A metric undefined on the full data stays
/// None; `dropped_iterations` counts bootstrap redraw exhaustions across all
/// six metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadReport {
    pub n: usize,
    pub n_pos: usize,
    pub youden_threshold: Option<f64>,
    pub youden_j: Option<f64>,
    pub auroc: Option<Ci>,
    pub auprc: Option<Ci>,
    pub sensitivity: Option<Ci>,
    pub specificity: Option<Ci>,
    pub ppv: Option<Ci>,
    pub npv: Option<Ci>,
    pub dropped_iterations: usize,
}

impl HeadReport {
    pub fn metric(&self, name: &str) -> Option<Ci> {
        match name {
            "auroc" => self.auroc,
            "auprc" => self.auprc,
            "sensitivity" => self.sensitivity,
            "specificity" => self.specificity,
            "ppv" => self.ppv,
            "npv" => self.npv,
            _ => None,
        }
    }

    pub const METRIC_NAMES: [&'static str; 6] =
        ["auroc", "auprc", "sensitivity", "specificity", "ppv", "npv"];
}

pub fn evaluate_head(
    scores: &[f64],
    labels: &[bool],
    iters: usize,
    seed: u64,
) -> Result<HeadReport, Error> {
    assert_eq!(scores.len(), labels.len());
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let youden = youden_threshold(scores, labels);
    let mut dropped = 0usize;

    let gather = |idx: &[usize]| -> (Vec<f64>, Vec<bool>) {
        (idx.iter().map(|&i| scores[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
    };
    let boot = |point: Option<f64>,
                    f: &dyn Fn(&[f64], &[bool]) -> Option<f64>,
                    dropped: &mut usize|
     -> Option<Ci> {
        point?;
        match bootstrap_ci(n, iters, seed, |idx| {
            let (s, l) = gather(idx);
            f(&s, &l)
        }) {
            Ok((ci, d)) => {
                *dropped += d;
                Some(ci)
            }
            Err(_) => None,
        }
    };

    let auroc_ci = boot(auroc(scores, labels), &|s, l| auroc(s, l), &mut dropped);
    let auprc_ci = boot(auprc(scores, labels), &|s, l| auprc(s, l), &mut dropped);
    let (mut sens, mut spec, mut ppv, mut npv) = (None, None, None, None);
    if let Some((t, _)) = youden {
        let point = confusion_at(scores, labels, t);
        sens = boot(point.sensitivity, &move |s, l| confusion_at(s, l, t).sensitivity, &mut dropped);
        spec = boot(point.specificity, &move |s, l| confusion_at(s, l, t).specificity, &mut dropped);
        ppv = boot(point.ppv, &move |s, l| confusion_at(s, l, t).ppv, &mut dropped);
        npv = boot(point.npv, &move |s, l| confusion_at(s, l, t).npv, &mut dropped);
    }
    Ok(HeadReport {
        n,
        n_pos,
        youden_threshold: youden.map(|(t, _)| t),
        youden_j: youden.map(|(_, j)| j),
        auroc: auroc_ci,
        auprc: auprc_ci,
        sensitivity: sens,
        specificity: spec,
        ppv,
        npv,
        dropped_iterations: dropped,
    })
}

/// Subgroup axes for sliced evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Age,
    Sex,
    Race,
}

impl Grouping {
    pub const ALL: [Grouping; 3] = [Grouping::Age, Grouping::Sex, Grouping::Race];

    pub fn name(self) -> &'static str {
        match self {
            Grouping::Age => "age",
            Grouping::Sex => "sex",
            Grouping::Race => "race",
        }
    }
}

impl std::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "age" => Ok(Grouping::Age),
            "sex" => Ok(Grouping::Sex),
            "race" => Ok(Grouping::Race),
            other => Err(Error::Metric(format!("unknown grouping {other:?}"))),
        }
    }
}

/// Subgroup label of a static profile. The age split is young (up to and
/// including 60) versus old.
pub fn group_of(grouping: Grouping, statics: &StaticProfile) -> String {
    match grouping {
        Grouping::Age => match statics.age_years {
            Some(a) if a <= 60.0 => "young".into(),
            Some(_) => "old".into(),
            None => "unknown".into(),
        },
        Grouping::Sex => match statics.sex.as_deref().map(str::to_ascii_lowercase).as_deref() {
            Some("f") | Some("female") => "female".into(),
            Some("m") | Some("male") => "male".into(),
            _ => "unknown".into(),
        },
        Grouping::Race => match statics.race.as_deref().map(str::to_ascii_lowercase) {
            Some(r) if r == "black" || r == "white" => r,
            Some(_) => "other".into(),
            None => "unknown".into(),
        },
    }
}

/// Evaluate one head separately on each group slice.
pub fn subgroup_eval(
    scores: &[f64],
    labels: &[bool],
    groups: &[String],
    iters: usize,
    seed: u64,
) -> Result<BTreeMap<String, HeadReport>, Error> {
    if scores.len() != groups.len() {
        return Err(Error::Metric(format!(
            "{} scores but {} group keys",
            scores.len(),
            groups.len()
        )));
    }
    let mut slices: BTreeMap<&str, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for ((s, &l), g) in scores.iter().zip(labels).zip(groups) {
        let slot = slices.entry(g).or_default();
        slot.0.push(*s);
        slot.1.push(l);
    }
    let mut out = BTreeMap::new();
    for (g, (s, l)) in slices {
        out.insert(g.to_string(), evaluate_head(&s, &l, iters, seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: fn(&[u8]) -> Vec<bool> = |v| v.iter().map(|&x| x == 1).collect();

    #[test]
    fn auroc_counts_concordant_pairs() {
        let got = auroc(&[0.1, 0.4, 0.35, 0.8], &B(&[0, 0, 1, 1])).unwrap();
        assert!((got - 0.75).abs() < 1e-12);
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &B(&[0, 0, 1, 1])), Some(1.0));
        assert_eq!(auroc(&[0.5, 0.5, 0.5, 0.5], &B(&[0, 1, 0, 1])), Some(0.5));
        assert_eq!(auroc(&[0.1, 0.2], &B(&[1, 1])), None);
    }

    #[test]
    fn auroc_ignores_monotone_rescaling() {
        let scores: [f64; 6] = [0.11, 0.52, 0.37, 0.93, 0.05, 0.61];
        let labels = B(&[0, 1, 0, 1, 0, 1]);
        let cubed: Vec<f64> = scores.iter().map(|&s| s.powi(3) + 2.0).collect();
        assert_eq!(auroc(&scores, &labels), auroc(&cubed, &labels));
    }

    #[test]
    fn auprc_frozen_cases() {
        assert_eq!(auprc(&[0.9, 0.1], &B(&[1, 0])), Some(1.0));
        assert_eq!(auprc(&[0.9, 0.1], &B(&[0, 1])), Some(0.5));
        assert_eq!(auprc(&[0.9, 0.1], &B(&[0, 0])), None);
    }

    #[test]
    fn youden_picks_smallest_tied_threshold() {
        let (t, j) = youden_threshold(&[0.2, 0.6, 0.7, 0.9], &B(&[0, 0, 1, 1])).unwrap();
        assert_eq!((t, j), (0.7, 1.0));
        // J ties at t = 0.2 and t = 0.4; the smaller threshold wins
        let (t, j) = youden_threshold(&[0.1, 0.2, 0.3, 0.4], &B(&[0, 1, 0, 1])).unwrap();
        assert_eq!(t, 0.2);
        assert!((j - 0.5).abs() < 1e-12);
        let (t, j) = youden_threshold(&[0.4, 0.4, 0.4], &B(&[0, 1, 1])).unwrap();
        assert_eq!((t, j), (0.4, 0.0));
    }

    #[test]
    fn confusion_handles_degenerate_denominators() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = B(&[1, 0, 0, 1]);
        let c = confusion_at(&scores, &labels, 0.0);
        assert_eq!(c.sensitivity, Some(1.0));
        assert_eq!(c.specificity, Some(0.0));
        assert_eq!(c.ppv, Some(0.5));
        assert_eq!(c.npv, None);
        let perfect = confusion_at(&[0.9, 0.8, 0.2, 0.1], &B(&[1, 1, 0, 0]), 0.8);
        assert_eq!(
            perfect,
            Confusion {
                sensitivity: Some(1.0),
                specificity: Some(1.0),
                ppv: Some(1.0),
                npv: Some(1.0)
            }
        );
    }

    #[test]
    fn bootstrap_is_deterministic_and_degenerate_on_one_item() {
        let scores: Vec<f64> = (0..40).map(|i| (i as f64) / 40.0).collect();
        let labels: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        let m = |idx: &[usize]| {
            auroc(
                &idx.iter().map(|&i| scores[i]).collect::<Vec<_>>(),
                &idx.iter().map(|&i| labels[i]).collect::<Vec<_>>(),
            )
        };
        let (a, _) = bootstrap_ci(scores.len(), 100, 7, m).unwrap();
        let (b, _) = bootstrap_ci(scores.len(), 100, 7, m).unwrap();
        assert_eq!(a, b);
        assert!(a.lo <= a.median && a.median <= a.hi);

        // a single datum resamples to itself: the interval collapses to the
        // point metric
        let (ci, dropped) = bootstrap_ci(1, 100, 3, |idx| Some(idx.len() as f64 * 4.5)).unwrap();
        assert_eq!((ci.median, ci.lo, ci.hi), (4.5, 4.5, 4.5));
        assert_eq!(dropped, 0);
    }

    #[test]
    fn bootstrap_errors_when_metric_never_defined() {
        let err = bootstrap_ci(5, 10, 1, |_| None::<f64>).unwrap_err();
        assert!(err.to_string().contains("undefined"));
    }

    #[test]
    fn wilcoxon_exact_enumeration_frozen_case() {
        let w = wilcoxon_ranksum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert!(w.exact);
        assert!((w.p - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(w.u, 0.0);
    }

    #[test]
    fn wilcoxon_identical_samples_p_one() {
        let w = wilcoxon_ranksum(&[5.0, 5.0], &[5.0, 5.0]).unwrap();
        assert!(w.exact);
        assert_eq!(w.p, 1.0);
        let big: Vec<f64> = vec![2.0; 12];
        let w2 = wilcoxon_ranksum(&big, &big).unwrap();
        assert!(!w2.exact);
        assert_eq!(w2.p, 1.0);
    }

    #[test]
    fn normal_cdf_matches_tabled_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.96) - 0.975_002).abs() < 1e-4);
        assert!((normal_cdf(-1.96) - 0.024_998).abs() < 1e-4);
        assert!(normal_cdf(8.0) > 0.999_999);
    }

    #[test]
    fn age_sixty_is_young() {
        let mut p = StaticProfile {
            age_years: Some(60.0),
            bmi: None,
            sex: Some("F".into()),
            race: Some("Hispanic".into()),
            cci: None,
            comorbidities: vec![],
        };
        assert_eq!(group_of(Grouping::Age, &p), "young");
        p.age_years = Some(60.1);
        assert_eq!(group_of(Grouping::Age, &p), "old");
        assert_eq!(group_of(Grouping::Sex, &p), "female");
        assert_eq!(group_of(Grouping::Race, &p), "other");
    }

    #[test]
    fn single_group_partition_equals_full_evaluation() {
        let scores: Vec<f64> = (0..30).map(|i| (i as f64) / 30.0).collect();
        let labels: Vec<bool> = (0..30).map(|i| i % 4 == 0).collect();
        let groups = vec!["all".to_string(); 30];
        let by_group = subgroup_eval(&scores, &labels, &groups, 50, 11).unwrap();
        let full = evaluate_head(&scores, &labels, 50, 11).unwrap();
        assert_eq!(by_group.len(), 1);
        assert_eq!(by_group["all"], full);
    }
}
