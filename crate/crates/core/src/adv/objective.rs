//! Robust training objectives.
//!
//! The supervised term attacks each labeled point at its true label; the
//! unlabeled term first pseudo-labels each point with the model's clean
//! argmax, holds that label fixed, and attacks at it. Gradients are taken
//! w.r.t. the parameters at the attacked points; the attack itself is
//! treated as data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::softmax_cross_entropy;
use super::model::{argmax, Classifier};
use super::pgd::{pgd_attack, PgdConfig};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SslLossConfig {
    pub lambda: f64,
}

impl SslLossConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub attacked: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
    /// Pseudo-labels whose argmax was tied (resolved to the lowest class).
    pub pseudo_label_ties: usize,
}

/// Mean cross-entropy at fixed points and its parameter gradient.
pub fn mean_cross_entropy<M: Classifier + ?Sized>(model: &M, xs: &[Vec<f64>], targets: &[usize]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.num_params()];
    if xs.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / xs.len() as f64;
    let mut total = 0.0;
    for (x, &t) in xs.iter().zip(targets) {
        let (loss, d_scores) = softmax_cross_entropy(&model.scores(x), t);
        total += loss;
        model.backward(x, &d_scores, scale, Some(&mut grad), None);
    }
    (total * scale, grad)
}

fn attack_all<M, R>(model: &M, xs: &[&[f64]], targets: &[usize], cfg: &PgdConfig, rng: &mut R) -> Result<Vec<Vec<f64>>>
where
    M: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    xs.iter()
        .zip(targets)
        .map(|(x, &t)| pgd_attack(model, x, t, cfg, rng))
        .collect()
}

/// Supervised robust loss: mean CE at PGD points attacked at the true label.
pub fn loss_l1<M, R>(model: &M, xs: &[&[f64]], ys: &[usize], cfg: &PgdConfig, rng: &mut R) -> Result<LossEval>
where
    M: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    if xs.is_empty() {
        return Err(Error::domain("labeled batch must be non-empty"));
    }
    check_len(xs.len(), ys.len())?;
    let attacked = attack_all(model, xs, ys, cfg, rng)?;
    let (value, grad) = mean_cross_entropy(model, &attacked, ys);
    Ok(LossEval {
        value,
        grad,
        attacked,
        targets: ys.to_vec(),
        pseudo_label_ties: 0,
    })
}

/// Pseudo-labels from the clean argmax, ties to the lowest class.
pub fn pseudo_labels<M: Classifier + ?Sized>(model: &M, xs: &[&[f64]]) -> (Vec<usize>, usize) {
    let mut ties = 0;
    let labels = xs
        .iter()
        .map(|x| {
            let (k, tied) = argmax(&model.scores(x));
            ties += usize::from(tied);
            k
        })
        .collect();
    (labels, ties)
}

/// Unlabeled robust loss at the model's own clean predictions.
pub fn loss_l2<M, R>(model: &M, xs: &[&[f64]], cfg: &PgdConfig, rng: &mut R) -> Result<LossEval>
where
    M: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    if xs.is_empty() {
        return Err(Error::domain("unlabeled batch must be non-empty"));
    }
    let (targets, ties) = pseudo_labels(model, xs);
    let attacked = attack_all(model, xs, &targets, cfg, rng)?;
    let (value, grad) = mean_cross_entropy(model, &attacked, &targets);
    Ok(LossEval {
        value,
        grad,
        attacked,
        targets,
        pseudo_label_ties: ties,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslLoss {
    pub value: f64,
    pub grad: Vec<f64>,
    pub supervised: LossEval,
    pub unlabeled: Option<LossEval>,
}

/// `L1 + λ·L2`; the unlabeled term is zero for an empty batch or `λ = 0`.
pub fn loss_ssl<M, R>(
    model: &M,
    xs: &[&[f64]],
    ys: &[usize],
    unlabeled: &[&[f64]],
    pgd: &PgdConfig,
    ssl: &SslLossConfig,
    rng: &mut R,
) -> Result<SslLoss>
where
    M: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    let supervised = loss_l1(model, xs, ys, pgd, rng)?;
    let mut value = supervised.value;
    let mut grad = supervised.grad.clone();
    let unlabeled = if unlabeled.is_empty() || ssl.lambda == 0.0 {
        None
    } else {
        let l2 = loss_l2(model, unlabeled, pgd, rng)?;
        value += ssl.lambda * l2.value;
        for (g, u) in grad.iter_mut().zip(&l2.grad) {
            *g += ssl.lambda * u;
        }
        Some(l2)
    };
    Ok(SslLoss {
        value,
        grad,
        supervised,
        unlabeled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adv::model::{LogisticModel, MlpClassifier};
    use crate::rng::RngSeed;

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn zero_epsilon_is_plain_cross_entropy() {
        let m = MlpClassifier::init(3, 5, 2, RngSeed::new(1, 0)).unwrap();
        let xs = vec![vec![0.1, 0.2, -0.3], vec![1.0, -1.0, 0.5]];
        let ys = [0, 1];
        let cfg = PgdConfig::new(3, 0.1, 0.0, true).unwrap();
        let mut r = RngSeed::new(1, 1).rng();
        let l1 = loss_l1(&m, &refs(&xs), &ys, &cfg, &mut r).unwrap();
        let (v, g) = mean_cross_entropy(&m, &xs, &ys);
        assert_eq!(l1.value, v);
        assert_eq!(l1.grad, g);
    }

    #[test]
    fn large_margin_linear_model_has_small_loss() {
        let m = LogisticModel::new(vec![50.0, 0.0], 0.0);
        let xs = vec![vec![1.0, 0.3], vec![-1.0, 0.7]];
        let cfg = PgdConfig::new(5, 0.01, 0.05, false).unwrap();
        let l1 = loss_l1(&m, &refs(&xs), &[1, 0], &cfg, &mut RngSeed::new(0, 0).rng()).unwrap();
        assert!(l1.value < 1e-15);
    }

    #[test]
    fn confident_model_at_zero_epsilon_has_zero_pseudo_loss() {
        let m = LogisticModel::new(vec![1e4, 0.0], 0.0);
        let xs = vec![vec![1.0, 0.0], vec![-2.0, 1.0]];
        let cfg = PgdConfig::new(2, 0.1, 0.0, false).unwrap();
        let l2 = loss_l2(&m, &refs(&xs), &cfg, &mut RngSeed::new(0, 0).rng()).unwrap();
        assert_eq!(l2.value, 0.0);
        assert_eq!(l2.targets, vec![1, 0]);
    }

    #[test]
    fn input_independent_model_attack_changes_nothing() {
        let m = LogisticModel::new(vec![0.0, 0.0], 0.7);
        let xs = vec![vec![1.0, 2.0], vec![-1.0, 0.0]];
        let cfg = PgdConfig::new(5, 0.1, 0.5, false).unwrap();
        let mut r = RngSeed::new(0, 0).rng();
        let l2 = loss_l2(&m, &refs(&xs), &cfg, &mut r).unwrap();
        let (clean, _) = mean_cross_entropy(&m, &xs, &l2.targets);
        assert_eq!(l2.value, clean);
    }

    #[test]
    fn single_point_pseudo_loss_equals_supervised_at_predicted_sign() {
        let m = LogisticModel::new(vec![0.8, -0.3, 0.2], 0.0);
        let x = vec![vec![0.4, 1.0, -0.5]];
        let cfg = PgdConfig::new(7, 0.05, 0.2, false).unwrap();
        let y = usize::from(m.margin(&x[0]) > 0.0);
        let l1 = loss_l1(&m, &refs(&x), &[y], &cfg, &mut RngSeed::new(0, 0).rng()).unwrap();
        let l2 = loss_l2(&m, &refs(&x), &cfg, &mut RngSeed::new(0, 0).rng()).unwrap();
        assert!((l1.value - l2.value).abs() < 1e-15);
        assert_eq!(l1.grad, l2.grad);
    }

    #[test]
    fn ssl_combination() {
        let m = MlpClassifier::init(4, 6, 2, RngSeed::new(2, 0)).unwrap();
        let lab = vec![vec![0.1, 0.2, 0.3, 0.4], vec![-0.5, 0.1, 0.0, 1.0]];
        let unl = vec![vec![1.0, 0.0, -1.0, 0.5], vec![0.2, 0.2, 0.2, 0.2], vec![-1.0, -1.0, 0.0, 0.3]];
        let ys = [0, 1];
        let cfg = PgdConfig::new(3, 0.05, 0.1, true).unwrap();

        let mut r = RngSeed::new(3, 0).rng();
        let zero = loss_ssl(&m, &refs(&lab), &ys, &refs(&unl), &cfg, &SslLossConfig::new(0.0).unwrap(), &mut r).unwrap();
        let l1 = loss_l1(&m, &refs(&lab), &ys, &cfg, &mut RngSeed::new(3, 0).rng()).unwrap();
        assert_eq!(zero.value, l1.value);
        assert_eq!(zero.grad, l1.grad);

        let none = loss_ssl(&m, &refs(&lab), &ys, &[], &cfg, &SslLossConfig::new(0.3).unwrap(), &mut RngSeed::new(3, 0).rng()).unwrap();
        assert_eq!(none.value, l1.value);

        let ssl = loss_ssl(&m, &refs(&lab), &ys, &refs(&unl), &cfg, &SslLossConfig::new(0.3).unwrap(), &mut RngSeed::new(3, 0).rng()).unwrap();
        let l2 = ssl.unlabeled.as_ref().unwrap();
        assert!((ssl.value - (ssl.supervised.value + 0.3 * l2.value)).abs() <= 1e-12);
        assert!(SslLossConfig::new(-0.1).is_err());
    }
}
