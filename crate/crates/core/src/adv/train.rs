//! Minibatch SGD on the semi-supervised robust objective.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::Classifier;
use super::objective::{loss_ssl, SslLossConfig};
use super::pgd::{pgd_attack, PgdConfig};
use crate::error::{Error, Result};
use crate::gmm::{ClassLabel, Dataset, Example};
use crate::rng::{purpose, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub labeled_batch: usize,
    pub unlabeled_batch: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub lr_decay_epochs: Vec<usize>,
    #[serde(default = "one")]
    pub lr_decay_factor: f64,
    pub seed: RngSeed,
}

fn one() -> f64 {
    1.0
}

impl TrainConfig {
    pub fn validate(&self, n_labeled: usize, n_unlabeled: usize) -> Result<()> {
        if n_labeled == 0 {
            return Err(Error::domain("labeled set must be non-empty"));
        }
        if self.labeled_batch == 0 || (n_unlabeled > 0 && self.unlabeled_batch == 0) {
            return Err(Error::domain("batch sizes must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::domain("learning rate must be positive"));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::domain("lr_decay_factor must be in (0,1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub clean_train_acc: f64,
    pub robust_train_acc: f64,
    pub clean_test_acc: f64,
    pub robust_test_acc: f64,
    /// Mean minibatch objective over the epoch.
    pub loss: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str =
        "epoch,lr,clean_train_acc,robust_train_acc,clean_test_acc,robust_test_acc,loss";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch,
            self.lr,
            self.clean_train_acc,
            self.robust_train_acc,
            self.clean_test_acc,
            self.robust_test_acc,
            self.loss
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub epoch: usize,
    pub loss: f64,
    pub initial_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub log: Vec<EpochMetrics>,
    /// Set when training halted early on a non-finite or exploding loss.
    pub divergence: Option<DivergenceReport>,
}

impl<M> TrainOutcome<M> {
    pub fn into_result(self) -> Result<Self> {
        match &self.divergence {
            Some(d) => Err(Error::Diverged {
                epoch: d.epoch,
                loss: d.loss,
                initial: d.initial_loss,
            }),
            None => Ok(self),
        }
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from(EpochMetrics::CSV_HEADER);
        s.push('\n');
        for m in &self.log {
            s.push_str(&m.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Clean and robust accuracy on a labeled set; the attack runs without a
/// random start so evaluation is deterministic.
pub fn accuracy<M, L>(model: &M, set: &[Example<L>], attack: &PgdConfig) -> Result<(f64, f64)>
where
    M: Classifier + ?Sized,
    L: ClassLabel,
{
    if set.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let cfg = attack.deterministic();
    let mut unused = RngSeed::new(0, 0).rng();
    let (mut clean, mut robust) = (0usize, 0usize);
    for e in set {
        let y = e.y.class_index();
        if model.predict(&e.x) == y {
            clean += 1;
        }
        let xa = pgd_attack(model, &e.x, y, &cfg, &mut unused)?;
        if model.predict(&xa) == y {
            robust += 1;
        }
    }
    let n = set.len() as f64;
    Ok((clean as f64 / n, robust as f64 / n))
}

/// Runs the training loop.
///
/// An epoch is one pass over the unlabeled pool in shuffled minibatches
/// (one pass over the labeled set when the pool is empty). Each iteration
/// draws a fresh labeled minibatch without replacement. The learning rate is
/// multiplied by `lr_decay_factor` at the start of every epoch listed in
/// `lr_decay_epochs` (1-based). Training halts with a divergence report
/// when an epoch's mean loss is non-finite or exceeds 10× the loss of the
/// very first minibatch.
pub fn train<M, L>(
    mut model: M,
    data: &Dataset<L>,
    test: &[Example<L>],
    cfg: &TrainConfig,
    pgd: &PgdConfig,
    ssl: &SslLossConfig,
) -> Result<TrainOutcome<M>>
where
    M: Classifier,
    L: ClassLabel,
{
    cfg.validate(data.labeled.len(), data.unlabeled.len())?;
    pgd.validate()?;
    let mut rng = cfg.seed.child(purpose::TRAIN).rng();

    let mut lab_idx: Vec<usize> = (0..data.labeled.len()).collect();
    let mut unl_idx: Vec<usize> = (0..data.unlabeled.len()).collect();
    let bl = cfg.labeled_batch.min(lab_idx.len());
    let iters = if unl_idx.is_empty() {
        lab_idx.len().div_ceil(bl)
    } else {
        unl_idx.len().div_ceil(cfg.unlabeled_batch)
    };

    let mut lr = cfg.learning_rate;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut initial: Option<f64> = None;
    for epoch in 1..=cfg.epochs {
        if cfg.lr_decay_epochs.contains(&epoch) {
            lr *= cfg.lr_decay_factor;
        }
        unl_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for it in 0..iters {
            lab_idx.shuffle(&mut rng);
            let xs: Vec<&[f64]> = lab_idx[..bl].iter().map(|&i| data.labeled[i].x.as_slice()).collect();
            let ys: Vec<usize> = lab_idx[..bl].iter().map(|&i| data.labeled[i].y.class_index()).collect();
            let lo = it * cfg.unlabeled_batch;
            let hi = (lo + cfg.unlabeled_batch).min(unl_idx.len());
            let us: Vec<&[f64]> = unl_idx[lo.min(hi)..hi]
                .iter()
                .map(|&i| data.unlabeled[i].as_slice())
                .collect();
            let step = loss_ssl(&model, &xs, &ys, &us, pgd, ssl, &mut rng)?;
            initial.get_or_insert(step.value);
            total += step.value;
            for (p, g) in model.params_mut().iter_mut().zip(&step.grad) {
                *p -= lr * g;
            }
        }
        let loss = total / iters as f64;
        let init = initial.unwrap_or(loss);
        if !loss.is_finite() || model.params().iter().any(|p| !p.is_finite()) || loss > 10.0 * init {
            return Ok(TrainOutcome {
                model,
                log,
                divergence: Some(DivergenceReport {
                    epoch,
                    loss,
                    initial_loss: init,
                }),
            });
        }
        let (clean_train_acc, robust_train_acc) = accuracy(&model, &data.labeled, pgd)?;
        let (clean_test_acc, robust_test_acc) = accuracy(&model, test, pgd)?;
        log.push(EpochMetrics {
            epoch,
            lr,
            clean_train_acc,
            robust_train_acc,
            clean_test_acc,
            robust_test_acc,
            loss,
        });
    }
    Ok(TrainOutcome {
        model,
        log,
        divergence: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adv::model::LogisticModel;
    use crate::gmm::Sign;

    fn separable() -> Dataset<Sign> {
        let mut labeled = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            labeled.push(Example { x: vec![1.0 + t, 0.5 - t], y: Sign::Pos });
            labeled.push(Example { x: vec![-1.0 - t, t - 0.2], y: Sign::Neg });
        }
        Dataset::new(labeled, vec![], 2).unwrap()
    }

    fn noisy() -> Dataset<Sign> {
        let mut ds = separable();
        for e in ds.labeled.iter_mut().step_by(5) {
            e.y = e.y.flip();
        }
        ds
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            labeled_batch: 16,
            unlabeled_batch: 16,
            learning_rate: 0.5,
            lr_decay_epochs: vec![],
            lr_decay_factor: 1.0,
            seed: RngSeed::new(5, 0),
        }
    }

    #[test]
    fn logistic_regression_sanity() {
        let data = separable();
        let pgd = PgdConfig::new(1, 0.1, 0.0, false).unwrap();
        let out = train(LogisticModel::zeros(2), &data, &data.labeled, &cfg(200), &pgd, &SslLossConfig::new(0.0).unwrap()).unwrap();
        assert!(out.divergence.is_none());
        let last = out.log.last().unwrap();
        assert!(last.clean_train_acc >= 0.99, "{last:?}");
        assert_eq!(out.log.len(), 200);
    }

    #[test]
    fn lr_decays_at_listed_epochs() {
        let data = separable();
        let pgd = PgdConfig::new(1, 0.1, 0.0, false).unwrap();
        let mut c = cfg(4);
        c.lr_decay_epochs = vec![2, 4];
        c.lr_decay_factor = 0.1;
        let out = train(LogisticModel::zeros(2), &data, &[], &c, &pgd, &SslLossConfig::new(0.0).unwrap()).unwrap();
        let lrs: Vec<f64> = out.log.iter().map(|m| m.lr).collect();
        assert_eq!(lrs[0], 0.5);
        assert!((lrs[1] - 0.05).abs() < 1e-15 && (lrs[2] - 0.05).abs() < 1e-15);
        assert!((lrs[3] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        let data = noisy();
        let pgd = PgdConfig::new(1, 0.1, 0.0, false).unwrap();
        let mut c = cfg(50);
        c.learning_rate = 1e200;
        let out = train(LogisticModel::new(vec![0.1, 0.1], 0.0), &data, &[], &c, &pgd, &SslLossConfig::new(0.0).unwrap()).unwrap();
        assert!(out.divergence.is_some());
        assert!(out.into_result().is_err());
    }

    #[test]
    fn rejects_empty_labeled_set() {
        let data: Dataset<Sign> = Dataset::new(vec![], vec![vec![0.0, 1.0]], 2).unwrap();
        let pgd = PgdConfig::new(1, 0.1, 0.0, false).unwrap();
        assert!(train(LogisticModel::zeros(2), &data, &[], &cfg(1), &pgd, &SslLossConfig::new(0.0).unwrap()).is_err());
    }
}
