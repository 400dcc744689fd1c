//! Empirical detection metrics with fixed score polarity.
//!
//! Higher scores always mean "more positive"; polarity is never auto
//! flipped, so equal error rates above 0.5 are representable and indicate
//! label inversion.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need scores from both classes, got {pos} positive / {neg} negative")]
    OneClass { pos: usize, neg: usize },
}

/// Scored trials: (score, class bit).
#[derive(Debug, Clone)]
pub struct ScoredTrials {
    pub pairs: Vec<(f64, u8)>,
}

impl ScoredTrials {
    pub fn new(pairs: Vec<(f64, u8)>) -> Self {
        ScoredTrials { pairs }
    }

    fn class_counts(&self) -> (usize, usize) {
        let pos = self.pairs.iter().filter(|(_, y)| *y == 1).count();
        (pos, self.pairs.len() - pos)
    }
}

/// One operating point of the detection staircase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// P(s < threshold | y = 1)
    pub miss_rate: f64,
    /// P(s >= threshold | y = 0); ties at the threshold accept.
    pub false_alarm_rate: f64,
}

/// Sweep thresholds over the sorted unique scores (plus a point above the
/// maximum) and report the miss/false-alarm staircase.
pub fn roc_points(trials: &ScoredTrials) -> Result<Vec<RocPoint>, MetricsError> {
    let (n_pos, n_neg) = trials.class_counts();
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::OneClass {
            pos: n_pos,
            neg: n_neg,
        });
    }
    let mut sorted: Vec<(f64, u8)> = trials.pairs.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut thresholds: Vec<f64> = sorted.iter().map(|(s, _)| *s).collect();
    thresholds.dedup();
    // One threshold above every score: miss 1, false alarm 0.
    let last = *thresholds.last().unwrap();
    thresholds.push(if last == f64::INFINITY {
        f64::INFINITY
    } else {
        last + 1.0
    });

    // Walk the sorted scores once; at threshold t, miss counts positives
    // strictly below t and false alarms count negatives at or above t.
    let mut points = Vec::with_capacity(thresholds.len());
    let mut idx = 0;
    let mut pos_below = 0usize;
    let mut neg_below = 0usize;
    for &t in &thresholds {
        while idx < sorted.len() && sorted[idx].0 < t {
            if sorted[idx].1 == 1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            idx += 1;
        }
        points.push(RocPoint {
            threshold: t,
            miss_rate: pos_below as f64 / n_pos as f64,
            false_alarm_rate: (n_neg - neg_below) as f64 / n_neg as f64,
        });
    }
    Ok(points)
}

/// Equal error rate: the crossing of the miss and false-alarm staircases,
/// linearly interpolated between adjacent thresholds.
pub fn eer(trials: &ScoredTrials) -> Result<f64, MetricsError> {
    let points = roc_points(trials)?;
    // miss - fa is non-decreasing in the threshold. The first point is
    // always (miss 0, fa 1) and the last (miss 1, fa 0): a sign change
    // exists, find it.
    let mut prev = &points[0];
    for p in &points[1..] {
        let d = p.miss_rate - p.false_alarm_rate;
        if d >= 0.0 {
            let d_prev = prev.miss_rate - prev.false_alarm_rate;
            if d == 0.0 {
                return Ok(p.miss_rate);
            }
            let t = -d_prev / (d - d_prev);
            return Ok(prev.miss_rate + t * (p.miss_rate - prev.miss_rate));
        }
        prev = p;
    }
    // miss never reaches the false-alarm rate before the final point
    // (miss 1, fa 0), which cannot happen: the final diff is +1.
    unreachable!("detection staircase must cross")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn trials(pos: &[f64], neg: &[f64]) -> ScoredTrials {
        let mut pairs: Vec<(f64, u8)> = pos.iter().map(|&s| (s, 1)).collect();
        pairs.extend(neg.iter().map(|&s| (s, 0)));
        ScoredTrials::new(pairs)
    }

    #[test]
    fn separable_scores_have_zero_eer() {
        let t = trials(&[2.0, 3.0], &[0.0, 1.0]);
        assert_eq!(eer(&t).unwrap(), 0.0);
        // At a threshold between the classes both rates are zero.
        let pts = roc_points(&t).unwrap();
        let p = pts.iter().find(|p| p.threshold == 2.0).unwrap();
        assert_eq!(p.miss_rate, 0.0);
        assert_eq!(p.false_alarm_rate, 0.0);
    }

    #[test]
    fn threshold_below_all_scores_is_miss0_fa1() {
        let t = trials(&[2.0, 3.0], &[0.0, 1.0]);
        let pts = roc_points(&t).unwrap();
        assert_eq!(pts[0].miss_rate, 0.0);
        assert_eq!(pts[0].false_alarm_rate, 1.0);
        let last = pts.last().unwrap();
        assert_eq!(last.miss_rate, 1.0);
        assert_eq!(last.false_alarm_rate, 0.0);
    }

    #[test]
    fn rates_match_brute_force_counting() {
        let mut rng = crate::seeding::rng_from_seed(100);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let pairs: Vec<(f64, u8)> = (0..100)
            .map(|i| {
                let y = (i % 2) as u8;
                (normal.sample(&mut rng) + y as f64 * 0.8, y)
            })
            .collect();
        let t = ScoredTrials::new(pairs.clone());
        for p in roc_points(&t).unwrap() {
            let n_pos = pairs.iter().filter(|(_, y)| *y == 1).count();
            let n_neg = pairs.len() - n_pos;
            let miss = pairs
                .iter()
                .filter(|(s, y)| *y == 1 && *s < p.threshold)
                .count() as f64
                / n_pos as f64;
            let fa = pairs
                .iter()
                .filter(|(s, y)| *y == 0 && *s >= p.threshold)
                .count() as f64
                / n_neg as f64;
            assert_eq!(p.miss_rate, miss);
            assert_eq!(p.false_alarm_rate, fa);
        }
    }

    #[test]
    fn flipped_labels_push_eer_toward_one() {
        let t = trials(&[0.0, 1.0], &[2.0, 3.0]);
        assert!(eer(&t).unwrap() > 0.9);
    }

    #[test]
    fn identical_scores_give_half() {
        let t = trials(&[1.0, 1.0, 1.0], &[1.0, 1.0]);
        assert!((eer(&t).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_class_is_an_error() {
        let t = trials(&[1.0], &[]);
        assert!(matches!(eer(&t), Err(MetricsError::OneClass { .. })));
    }

    #[test]
    fn negation_complements_eer() {
        let mut rng = crate::seeding::rng_from_seed(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let pairs: Vec<(f64, u8)> = (0..400)
            .map(|i| {
                let y = (i % 2) as u8;
                (normal.sample(&mut rng) + y as f64, y)
            })
            .collect();
        let fwd = eer(&ScoredTrials::new(pairs.clone())).unwrap();
        let neg = eer(&ScoredTrials::new(
            pairs.iter().map(|&(s, y)| (-s, y)).collect(),
        ))
        .unwrap();
        let tol = 1.0 / 200.0;
        assert!((fwd + neg - 1.0).abs() <= tol, "{fwd} + {neg}");
    }

    #[test]
    fn eer_is_invariant_under_monotone_transforms() {
        let mut rng = crate::seeding::rng_from_seed(8);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let pairs: Vec<(f64, u8)> = (0..300)
            .map(|i| {
                let y = (i % 3 == 0) as u8;
                (normal.sample(&mut rng) + y as f64 * 0.5, y)
            })
            .collect();
        let base = eer(&ScoredTrials::new(pairs.clone())).unwrap();
        let warped = eer(&ScoredTrials::new(
            pairs.iter().map(|&(s, y)| (s.exp() * 3.0 + 1.0, y)).collect(),
        ))
        .unwrap();
        assert!((base - warped).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn gaussian_scores_match_the_analytic_rate() {
        // Two unit-variance Gaussians at distance d have EER = Phi(-d/2).
        let mut rng = crate::seeding::rng_from_seed(55);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 100_000;
        let d = 1.0;
        let pairs: Vec<(f64, u8)> = (0..n)
            .map(|i| {
                let y = (i % 2) as u8;
                (normal.sample(&mut rng) + d * y as f64, y)
            })
            .collect();
        let got = eer(&ScoredTrials::new(pairs)).unwrap();
        let expect = crate::nuisance::gaussian_eer(d);
        assert!((got - expect).abs() <= 0.01, "{got} vs {expect}");
    }
}
