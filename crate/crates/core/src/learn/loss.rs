//! Classification and height-aware losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hag::HagBinning;

/// Floor applied to probabilities before taking the log.
pub const LOG_EPS: f64 = 1e-12;

/// A normalized probability vector over classes or bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("empty probability vector".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation(format!("probabilities outside [0, 1]: {values:?}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("probabilities sum to {sum}")));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        Self(softmax(logits))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotTarget(pub usize);

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log(sum(exp(z)))` without overflow.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEval {
    pub value: f64,
    /// Target probabilities that had to be floored at [`LOG_EPS`].
    pub clamped: usize,
}

/// Mean class-weighted cross-entropy, `-(1/N) sum_i w_{t_i} log p_{i,t_i}`.
pub fn weighted_cross_entropy(
    preds: &[ProbVector],
    targets: &[OneHotTarget],
    weights: &[f64],
) -> Result<LossEval> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: preds.len(),
            actual: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Validation("loss over an empty batch".into()));
    }
    let mut sum = 0.0;
    let mut clamped = 0;
    for (p, t) in preds.iter().zip(targets) {
        if p.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: weights.len(),
                actual: p.len(),
            });
        }
        let prob = *p.values().get(t.0).ok_or_else(|| {
            Error::Validation(format!("target {} out of range for {} classes", t.0, p.len()))
        })?;
        let prob = if prob < LOG_EPS {
            clamped += 1;
            LOG_EPS
        } else {
            prob
        };
        sum += weights[t.0] * -prob.ln();
    }
    if clamped > 0 {
        log::warn!("{clamped} target probabilities clamped to {LOG_EPS}");
    }
    Ok(LossEval {
        value: sum / preds.len() as f64,
        clamped,
    })
}

/// Height-aware loss over HAG bins with per-bin weights.
pub fn hag_loss(preds: &[ProbVector], targets: &[OneHotTarget], weights: &[f64]) -> Result<LossEval> {
    weighted_cross_entropy(preds, targets, weights)
}

/// Unweighted two-class cross-entropy.
pub fn cls_loss(preds: &[ProbVector], targets: &[OneHotTarget]) -> Result<LossEval> {
    weighted_cross_entropy(preds, targets, &[1.0, 1.0])
}

/// `(1 - lambda) * cls + lambda * hag`.
pub fn total_loss(cls: f64, hag: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok((1.0 - lambda) * cls + lambda * hag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HagLossKind {
    #[default]
    WeightedCrossEntropy,
    /// Direct regression variant; kept as a configuration value only.
    SmoothL1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda: f64,
    pub hag_binning: HagBinning,
    pub hag_loss: HagLossKind,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            hag_binning: HagBinning::default(),
            hag_loss: HagLossKind::WeightedCrossEntropy,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.hag_loss == HagLossKind::SmoothL1 {
            return Err(Error::NotImplemented("smooth-L1 HAG regression loss"));
        }
        self.hag_binning.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onehot(i: usize) -> OneHotTarget {
        OneHotTarget(i)
    }

    #[test]
    fn uniform_six_bins_bin_zero() {
        let l = hag_loss(&[ProbVector::uniform(6)], &[onehot(0)], &HagBinning::default().weights)
            .unwrap();
        assert!((l.value - 6f64.ln()).abs() < 1e-12);
        assert!((l.value - 1.791759).abs() < 1e-6);
        assert_eq!(l.clamped, 0);
    }

    #[test]
    fn half_on_top_bin() {
        let p = ProbVector::new(vec![0.1, 0.1, 0.1, 0.1, 0.1, 0.5]).unwrap();
        let l = hag_loss(&[p], &[onehot(5)], &HagBinning::default().weights).unwrap();
        assert!((l.value - 6.0 * 2f64.ln()).abs() < 1e-12);
        assert!((l.value - 4.158883).abs() < 1e-6);
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let p = ProbVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(cls_loss(&[p], &[onehot(1)]).unwrap().value, 0.0);
    }

    #[test]
    fn cls_examples() {
        let l = cls_loss(&[ProbVector::uniform(2)], &[onehot(0)]).unwrap();
        assert!((l.value - 2f64.ln()).abs() < 1e-12);

        let a = ProbVector::new(vec![0.3, 0.7]).unwrap();
        let b = ProbVector::new(vec![0.9, 0.1]).unwrap();
        let la = cls_loss(&[a.clone()], &[onehot(1)]).unwrap().value;
        let lb = cls_loss(&[b.clone()], &[onehot(1)]).unwrap().value;
        let both = cls_loss(&[a, b], &[onehot(1), onehot(1)]).unwrap().value;
        assert!((both - (la + lb) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_clamped() {
        let p = ProbVector::new(vec![1.0, 0.0]).unwrap();
        let l = cls_loss(&[p], &[onehot(1)]).unwrap();
        assert_eq!(l.clamped, 1);
        assert!((l.value + LOG_EPS.ln()).abs() < 1e-12);
    }

    #[test]
    fn mismatch_errors() {
        assert!(cls_loss(&[ProbVector::uniform(2)], &[]).is_err());
        assert!(cls_loss(&[], &[]).is_err());
        assert!(hag_loss(&[ProbVector::uniform(6)], &[onehot(0)], &[1.0; 5]).is_err());
        assert!(cls_loss(&[ProbVector::uniform(2)], &[onehot(2)]).is_err());
    }

    #[test]
    fn total_examples() {
        assert_eq!(total_loss(0.6, 4.0, 0.0).unwrap(), 0.6);
        assert_eq!(total_loss(0.6, 4.0, 1.0).unwrap(), 4.0);
        assert!((total_loss(0.6, 4.0, 0.5).unwrap() - 2.3).abs() < 1e-15);
        assert!(total_loss(0.6, 4.0, 1.5).is_err());
        assert!(total_loss(0.6, 4.0, -0.1).is_err());
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        let s = ProbVector::from_logits(&[1000.0, -1000.0, 3.0]);
        assert!((s.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_is_stub() {
        let cfg = LossConfig {
            hag_loss: HagLossKind::SmoothL1,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::NotImplemented(_))));
    }
}
