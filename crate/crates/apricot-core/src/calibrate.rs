//! Isotonic probability calibration.
//!
//! A fitted map is a monotone step function: breakpoints are the minimum
//! score of each pooled block, evaluation takes the value of the largest
//! breakpoint at or below the query and clamps outside the fitted range.
//! Cross-validated calibration averages three maps, each fitted with one
//! fold held out.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Monotone step function fitted by pool-adjacent-violators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    /// Strictly increasing block start scores.
    pub xs: Vec<f64>,
    /// Nondecreasing fitted values, one per block.
    pub ys: Vec<f64>,
}

impl IsotonicMap {
    /// Value of the block containing x: the largest breakpoint <= x, clamped
    /// to the first block below the fitted range.
    pub fn eval(&self, x: f64) -> f64 {
        match self.xs.partition_point(|&bx| bx <= x) {
            0 => self.ys[0],
            k => self.ys[k - 1],
        }
    }
}

/// Least-squares monotone fit. Tied scores are pooled into one block before
/// the violator merging, so the map is a function of the score alone.
pub fn isotonic_fit(scores: &[f64], labels: &[bool]) -> Result<IsotonicMap, Error> {
    if scores.len() != labels.len() {
        return Err(Error::Calibration(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.len() < 2 {
        return Err(Error::Calibration("isotonic fit needs at least two points".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Calibration("non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    struct Block {
        x: f64,
        sum: f64,
        weight: f64,
    }
    let mut blocks: Vec<Block> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let x = scores[order[i]];
        let mut sum = 0.0;
        let mut weight = 0.0;
        while i < order.len() && scores[order[i]] == x {
            sum += if labels[order[i]] { 1.0 } else { 0.0 };
            weight += 1.0;
            i += 1;
        }
        blocks.push(Block { x, sum, weight });
        // merge backwards while the mean sequence decreases
        while blocks.len() >= 2 {
            let n = blocks.len();
            let prev_mean = blocks[n - 2].sum / blocks[n - 2].weight;
            let last_mean = blocks[n - 1].sum / blocks[n - 1].weight;
            if prev_mean <= last_mean {
                break;
            }
            let last = blocks.pop().unwrap();
            let prev = blocks.last_mut().unwrap();
            prev.sum += last.sum;
            prev.weight += last.weight;
        }
    }
    Ok(IsotonicMap {
        xs: blocks.iter().map(|b| b.x).collect(),
        ys: blocks.iter().map(|b| b.sum / b.weight).collect(),
    })
}

/// Ensemble of three isotonic maps from 3-fold cross-validation; evaluation
/// is the mean of the three maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCalibrator {
    pub maps: Vec<IsotonicMap>,
    /// Per map: true when its training folds held a single label value, so
    /// the map is constant.
    pub degenerate: Vec<bool>,
}

impl CvCalibrator {
    pub fn eval(&self, x: f64) -> f64 {
        self.maps.iter().map(|m| m.eval(x)).sum::<f64>() / self.maps.len() as f64
    }
}

/// Shuffle with the given seed, deal into three folds, and fit each map on
/// the other two folds.
pub fn calibrate_cv3(scores: &[f64], labels: &[bool], seed: u64) -> Result<CvCalibrator, Error> {
    if scores.len() != labels.len() {
        return Err(Error::Calibration(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.len() < 9 {
        return Err(Error::Calibration(format!(
            "3-fold calibration needs at least 9 points, got {}",
            scores.len()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.shuffle(&mut rng);
    let fold_of = |pos: usize| pos % 3;

    let mut maps = Vec::with_capacity(3);
    let mut degenerate = Vec::with_capacity(3);
    for held_out in 0..3 {
        let mut s = Vec::new();
        let mut l = Vec::new();
        for (pos, &idx) in order.iter().enumerate() {
            if fold_of(pos) != held_out {
                s.push(scores[idx]);
                l.push(labels[idx]);
            }
        }
        degenerate.push(l.iter().all(|&x| x) || l.iter().all(|&x| !x));
        maps.push(isotonic_fit(&s, &l)?);
    }
    Ok(CvCalibrator { maps, degenerate })
}

/// Mean squared difference between predicted probabilities and outcomes.
pub fn brier(probs: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(probs.len(), labels.len());
    assert!(!probs.is_empty(), "brier of empty input");
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| {
            let y = if y { 1.0 } else { 0.0 };
            (p - y) * (p - y)
        })
        .sum();
    sum / probs.len() as f64
}

/// One reliability-curve bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub mean_prob: f64,
    pub frac_pos: f64,
    pub count: usize,
}

/// Equal-width reliability bins over [0,1]; the last bin includes 1.0 and
/// empty bins are omitted.
pub fn calibration_curve(probs: &[f64], labels: &[bool], n_bins: usize) -> Vec<CurveBin> {
    assert_eq!(probs.len(), labels.len());
    assert!(n_bins >= 2, "need at least two bins");
    let mut sums = vec![(0.0f64, 0usize, 0usize); n_bins];
    for (p, &y) in probs.iter().zip(labels) {
        let bin = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
        sums[bin].0 += p;
        sums[bin].1 += y as usize;
        sums[bin].2 += 1;
    }
    sums.into_iter()
        .filter(|&(_, _, count)| count > 0)
        .map(|(sum_p, pos, count)| CurveBin {
            mean_prob: sum_p / count as f64,
            frac_pos: pos as f64 / count as f64,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted(scores: &[f64], labels: &[bool]) -> Vec<f64> {
        let map = isotonic_fit(scores, labels).unwrap();
        scores.iter().map(|&s| map.eval(s)).collect()
    }

    #[test]
    fn pav_pools_violating_neighbors() {
        let scores = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(fitted(&scores, &[false, true, false, true]), vec![0.0, 0.5, 0.5, 1.0]);
        assert_eq!(fitted(&scores, &[false, false, true, true]), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(fitted(&[0.2, 0.7], &[true, false]), vec![0.5, 0.5]);
    }

    #[test]
    fn identical_scores_collapse_to_label_mean() {
        let map = isotonic_fit(&[0.4; 5], &[true, false, true, true, false]).unwrap();
        assert_eq!(map.xs, vec![0.4]);
        assert_eq!(map.ys, vec![0.6]);
        assert_eq!(map.eval(0.0), 0.6);
        assert_eq!(map.eval(1.0), 0.6);
    }

    #[test]
    fn eval_is_stepwise_with_end_clamping() {
        let map = IsotonicMap { xs: vec![0.2, 0.5, 0.8], ys: vec![0.1, 0.4, 0.9] };
        assert_eq!(map.eval(0.0), 0.1); // below the range
        assert_eq!(map.eval(0.2), 0.1);
        assert_eq!(map.eval(0.49), 0.1);
        assert_eq!(map.eval(0.5), 0.4);
        assert_eq!(map.eval(0.79), 0.4);
        assert_eq!(map.eval(2.0), 0.9); // above the range
    }

    #[test]
    fn fitted_values_are_monotone_and_bounded() {
        let scores: Vec<f64> = (0..60).map(|i| ((i * 37) % 61) as f64 / 61.0).collect();
        let labels: Vec<bool> = (0..60).map(|i| (i * 17) % 3 == 0).collect();
        let map = isotonic_fit(&scores, &labels).unwrap();
        for w in map.ys.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for w in map.xs.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(map.ys.iter().all(|y| (0.0..=1.0).contains(y)));
    }

    #[test]
    fn cv3_is_seed_deterministic_and_flags_single_class_folds() {
        let scores: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
        let labels: Vec<bool> = (0..30).map(|i| i % 2 == 0).collect();
        let a = calibrate_cv3(&scores, &labels, 42).unwrap();
        let b = calibrate_cv3(&scores, &labels, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.degenerate.iter().all(|&d| !d));

        let one_class = vec![true; 12];
        let c = calibrate_cv3(&scores[..12], &one_class, 1).unwrap();
        assert_eq!(c.degenerate, vec![true, true, true]);
        assert_eq!(c.eval(0.3), 1.0);

        assert!(calibrate_cv3(&scores[..8], &labels[..8], 1).is_err());
    }

    #[test]
    fn averaged_map_stays_monotone() {
        let scores: Vec<f64> = (0..45).map(|i| ((i * 29) % 45) as f64 / 45.0).collect();
        let labels: Vec<bool> = (0..45).map(|i| (i * 13) % 4 != 0).collect();
        let cal = calibrate_cv3(&scores, &labels, 9).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=100 {
            let v = cal.eval(k as f64 / 100.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn brier_arithmetic() {
        assert_eq!(brier(&[1.0, 0.0, 1.0], &[true, false, true]), 0.0);
        assert_eq!(brier(&[0.5; 4], &[true, false, true, false]), 0.25);
        assert!((brier(&[0.8, 0.3], &[true, false]) - 0.065).abs() < 1e-12);
    }

    #[test]
    fn curve_bins_partition_the_samples() {
        let probs = [0.05, 0.08, 0.55, 0.58, 1.0];
        let labels = [false, false, true, false, true];
        let bins = calibration_curve(&probs, &labels, 10);
        assert_eq!(bins.len(), 3);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), probs.len());
        assert!((bins[0].mean_prob - 0.065).abs() < 1e-12);
        assert_eq!(bins[0].frac_pos, 0.0);
        assert_eq!(bins[2].count, 1); // 1.0 lands in the last bin, not past it
        let single = calibration_curve(&[0.31, 0.32, 0.33], &[true, false, true], 10);
        assert_eq!(single.len(), 1);
    }
}
