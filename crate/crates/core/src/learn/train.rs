//! Mini-batch trainer with SGD or Adam steps and cosine learning-rate decay.

use serde::{Deserialize, Serialize};

use super::loss::LossConfig;
use super::mlp::ToyClassifier;
use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate of the first epoch.
    pub lr: f64,
    /// Learning rate reached at the last epoch.
    pub lr_min: f64,
    pub step_rule: StepRule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            lr: 1e-2,
            lr_min: 1e-4,
            step_rule: StepRule::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            return Err(Error::Config(format!(
                "need 0 <= lr_min ({}) <= lr ({}) and lr > 0",
                self.lr_min, self.lr
            )));
        }
        Ok(())
    }

    /// Cosine-annealed learning rate for `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_min + 0.5 * (self.lr - self.lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted means of the per-batch losses seen during the epoch.
    pub cls: f64,
    pub hag: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_stats(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

enum Optimizer {
    Sgd { momentum: f64, velocity: Vec<f64> },
    Adam { beta1: f64, beta2: f64, eps: f64, m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    fn new(rule: StepRule, n: usize) -> Self {
        match rule {
            StepRule::Sgd { momentum } => Optimizer::Sgd {
                momentum,
                velocity: vec![0.0; n],
            },
            StepRule::Adam { beta1, beta2, eps } => Optimizer::Adam {
                beta1,
                beta2,
                eps,
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd { momentum, velocity } => {
                for ((p, g), vel) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
                    *vel = *momentum * *vel + g;
                    *p -= lr * *vel;
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                t,
            } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + *eps);
                }
            }
        }
    }
}

/// Trains `clf` in place. On divergence the parameters from the end of the last
/// finite epoch are restored and [`Error::Diverged`] is returned.
pub fn train_toy(
    clf: &mut ToyClassifier,
    data: &Dataset,
    loss_cfg: &LossConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let mut report = TrainReport::default();
    let mut rng = SeededRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut params = clf.flat_params();
    let mut optimizer = Optimizer::new(cfg.step_rule, params.len());
    let mut last_good = params.clone();
    let mut last_finite_loss = f64::NAN;

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        rng.shuffle(&mut order);
        let (mut cls, mut hag, mut total) = (0.0, 0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let b = data.select(batch);
            let result = clf.loss_and_gradients(&b.features, &b.classes, &b.bins, loss_cfg);
            let (losses, grad) = match result {
                Ok(ok) if ok.0.total.is_finite() => ok,
                Ok(_) | Err(Error::NonFinite { .. }) => {
                    clf.set_flat_params(&last_good);
                    return Err(Error::Diverged {
                        epoch,
                        last_finite_loss,
                    });
                }
                Err(e) => return Err(e),
            };
            let w = batch.len() as f64;
            cls += losses.cls * w;
            hag += losses.hag * w;
            total += losses.total * w;
            optimizer.step(&mut params, &grad.values, lr);
            clf.set_flat_params(&params);
        }
        let n = data.len() as f64;
        let stats = EpochStats {
            epoch,
            lr,
            cls: cls / n,
            hag: hag / n,
            total: total / n,
        };
        if params.iter().any(|p| !p.is_finite()) {
            clf.set_flat_params(&last_good);
            return Err(Error::Diverged {
                epoch,
                last_finite_loss,
            });
        }
        last_good.copy_from_slice(&params);
        last_finite_loss = stats.total;
        log::debug!(
            "epoch {epoch}: lr {lr:.2e} total {:.5} cls {:.5} hag {:.5}",
            stats.total,
            stats.cls,
            stats.hag
        );
        report.epochs.push(stats);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let mut d = Dataset::new(2);
        for _ in 0..n {
            let x = rng.range(-1.0, 1.0);
            let y = rng.range(-1.0, 1.0);
            let margin = x + 0.5 * y;
            if margin.abs() < 0.1 {
                continue;
            }
            let class = usize::from(margin > 0.0);
            let bin = if class == 1 { 0 } else { 5 };
            d.push(&[x, y], class, bin).unwrap();
        }
        d
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let cfg = TrainConfig {
            epochs: 11,
            lr: 0.1,
            lr_min: 0.001,
            ..Default::default()
        };
        assert_eq!(cfg.lr_at(0), 0.1);
        assert!((cfg.lr_at(10) - 0.001).abs() < 1e-15);
        assert!(cfg.lr_at(5) < cfg.lr_at(4));
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let data = separable(50, 1);
        let mut clf = ToyClassifier::new(2, &[8], 6, 3);
        let before = clf.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let report = train_toy(&mut clf, &data, &LossConfig::default(), &cfg).unwrap();
        assert!(report.epochs.is_empty());
        assert_eq!(clf, before);
    }

    #[test]
    fn learns_separable_set() {
        let data = separable(400, 2);
        let mut clf = ToyClassifier::new(2, &[8, 8], 6, 4);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            seed: 5,
            ..Default::default()
        };
        let report = train_toy(&mut clf, &data, &LossConfig::default(), &cfg).unwrap();
        assert!(report.final_stats().unwrap().cls < 0.1);
        assert!(report.epochs[0].total > report.final_stats().unwrap().total);
    }

    #[test]
    fn sgd_rule_also_trains() {
        let data = separable(200, 3);
        let mut clf = ToyClassifier::new(2, &[8], 6, 4);
        let cfg = TrainConfig {
            epochs: 30,
            lr: 0.1,
            lr_min: 0.01,
            step_rule: StepRule::Sgd { momentum: 0.9 },
            ..Default::default()
        };
        let report = train_toy(&mut clf, &data, &LossConfig::default(), &cfg).unwrap();
        assert!(report.final_stats().unwrap().total < report.epochs[0].total);
    }

    #[test]
    fn divergence_restores_last_finite_state() {
        let data = separable(100, 4);
        let mut clf = ToyClassifier::new(2, &[8], 6, 4);
        let before = clf.clone();
        let cfg = TrainConfig {
            epochs: 5,
            lr: f64::MAX,
            lr_min: f64::MAX,
            step_rule: StepRule::Sgd { momentum: 0.0 },
            ..Default::default()
        };
        match train_toy(&mut clf, &data, &LossConfig::default(), &cfg) {
            Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert_eq!(clf, before);
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut clf = ToyClassifier::new(2, &[8], 6, 4);
        assert!(train_toy(
            &mut clf,
            &Dataset::new(2),
            &LossConfig::default(),
            &TrainConfig::default()
        )
        .is_err());
    }
}
