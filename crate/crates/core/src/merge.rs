//! Soft voting of overlapping patch predictions.

use crate::cloud::ClassLabel;
use crate::error::{Error, Result};

/// Cumulative ground probability and vote count per point of the source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionAccumulator {
    sum: Vec<f64>,
    count: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeResult {
    pub labels: Vec<ClassLabel>,
    /// Points that received no vote; they are labeled NonGround.
    pub uncovered: usize,
}

impl PredictionAccumulator {
    pub fn new(points: usize) -> Self {
        Self {
            sum: vec![0.0; points],
            count: vec![0; points],
        }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    pub fn accumulate(&mut self, point: usize, ground_prob: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&ground_prob) {
            return Err(Error::Validation(format!(
                "ground probability {ground_prob} outside [0, 1]"
            )));
        }
        if point >= self.sum.len() {
            return Err(Error::Validation(format!(
                "point index {point} beyond cloud of {}",
                self.sum.len()
            )));
        }
        self.sum[point] += ground_prob;
        self.count[point] += 1;
        Ok(())
    }

    /// Adds the votes of `other`, e.g. from a per-patch worker.
    pub fn absorb(&mut self, other: &PredictionAccumulator) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.count[i] += other.count[i];
        }
        Ok(())
    }

    pub fn cumulative(&self, point: usize) -> f64 {
        self.sum[point]
    }

    pub fn votes(&self, point: usize) -> u32 {
        self.count[point]
    }

    pub fn mean(&self, point: usize) -> Option<f64> {
        (self.count[point] > 0).then(|| self.sum[point] / f64::from(self.count[point]))
    }

    /// Label of one point: Ground iff the mean vote is strictly above 0.5.
    pub fn label_of(&self, point: usize) -> Result<ClassLabel> {
        let mean = self.mean(point).ok_or(Error::Uncovered(1))?;
        Ok(if mean > 0.5 {
            ClassLabel::Ground
        } else {
            ClassLabel::NonGround
        })
    }

    pub fn finalize(&self) -> MergeResult {
        let mut uncovered = 0;
        let labels = (0..self.len())
            .map(|i| {
                self.label_of(i).unwrap_or_else(|_| {
                    uncovered += 1;
                    ClassLabel::NonGround
                })
            })
            .collect();
        if uncovered > 0 {
            log::warn!("{uncovered} points received no vote and were labeled non-ground");
        }
        MergeResult { labels, uncovered }
    }

    /// Mean ground probability per point, 0 for uncovered points.
    pub fn mean_probabilities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mean(i).unwrap_or(0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_examples() {
        let mut acc = PredictionAccumulator::new(1);
        acc.accumulate(0, 0.9).unwrap();
        assert_eq!((acc.cumulative(0), acc.votes(0)), (0.9, 1));
        acc.accumulate(0, 0.4).unwrap();
        assert!((acc.cumulative(0) - 1.3).abs() < 1e-15);
        assert_eq!(acc.votes(0), 2);
        assert!(acc.accumulate(0, 1.2).is_err());
        assert!(acc.accumulate(0, -0.1).is_err());
        assert!(acc.accumulate(1, 0.5).is_err());
    }

    #[test]
    fn finalize_examples() {
        let mut acc = PredictionAccumulator::new(3);
        acc.accumulate(0, 0.9).unwrap();
        acc.accumulate(0, 0.4).unwrap();
        acc.accumulate(1, 0.5).unwrap();
        for p in [0.2, 0.3, 0.4] {
            acc.accumulate(2, p).unwrap();
        }
        let r = acc.finalize();
        assert_eq!(
            r.labels,
            vec![ClassLabel::Ground, ClassLabel::NonGround, ClassLabel::NonGround]
        );
        assert_eq!(r.uncovered, 0);
        assert_eq!(acc.finalize(), r);
    }

    #[test]
    fn uncovered_points() {
        let mut acc = PredictionAccumulator::new(2);
        acc.accumulate(0, 1.0).unwrap();
        assert!(matches!(acc.label_of(1), Err(Error::Uncovered(_))));
        let r = acc.finalize();
        assert_eq!(r.uncovered, 1);
        assert_eq!(r.labels[1], ClassLabel::NonGround);
    }

    #[test]
    fn absorb_matches_direct_accumulation() {
        let mut a = PredictionAccumulator::new(2);
        let mut b = PredictionAccumulator::new(2);
        let mut direct = PredictionAccumulator::new(2);
        a.accumulate(0, 0.25).unwrap();
        b.accumulate(0, 0.75).unwrap();
        b.accumulate(1, 0.5).unwrap();
        for (p, v) in [(0, 0.25), (0, 0.75), (1, 0.5)] {
            direct.accumulate(p, v).unwrap();
        }
        a.absorb(&b).unwrap();
        assert_eq!(a, direct);
        assert!(a.absorb(&PredictionAccumulator::new(3)).is_err());
    }
}
