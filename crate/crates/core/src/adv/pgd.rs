//! ℓ∞ projected gradient ascent on the cross-entropy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::softmax_cross_entropy;
use super::model::Classifier;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub steps_k: usize,
    pub step_size_delta: f64,
    pub epsilon: f64,
    pub random_start: bool,
    /// Valid input range, applied after the ε-box projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<(f64, f64)>,
}

impl PgdConfig {
    pub fn new(steps_k: usize, step_size_delta: f64, epsilon: f64, random_start: bool) -> Result<Self> {
        let cfg = Self {
            steps_k,
            step_size_delta,
            epsilon,
            random_start,
            clip: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `k = 7`, `δ = ε/4`, random start on.
    pub fn training_default(epsilon: f64) -> Self {
        Self {
            steps_k: 7,
            step_size_delta: epsilon / 4.0,
            epsilon,
            random_start: true,
            clip: None,
        }
    }

    /// 7 steps of 2/255 inside an 8/255 box, pixel range [0,1].
    pub fn cifar_preset() -> Self {
        Self {
            steps_k: 7,
            step_size_delta: 2.0 / 255.0,
            epsilon: 8.0 / 255.0,
            random_start: true,
            clip: Some((0.0, 1.0)),
        }
    }

    /// ε = 0.1, δ = 0.025, pixel range [0,1].
    pub fn mnist_preset() -> Self {
        Self {
            steps_k: 7,
            step_size_delta: 0.025,
            epsilon: 0.1,
            random_start: true,
            clip: Some((0.0, 1.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_k == 0 {
            return Err(Error::domain("PGD needs at least one step"));
        }
        if !(self.step_size_delta > 0.0) {
            return Err(Error::domain("PGD step size must be positive"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::domain("PGD epsilon must be >= 0"));
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo < hi) {
                return Err(Error::domain("clip range must satisfy lo < hi"));
            }
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }

    /// Same attack with the random start turned off, for evaluation.
    pub fn deterministic(&self) -> Self {
        Self {
            random_start: false,
            ..*self
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// PGD-(k, ε, δ) maximizing `l_CE(f(x'), target)` over `‖x' − x‖∞ ≤ ε`.
///
/// Returns the highest-loss iterate among `x'_0 … x'_k` (the last one on
/// ties), so without a random start the attacked loss never drops below the
/// clean loss even when the model is non-concave in its input.
pub fn pgd_attack<M, R>(model: &M, x: &[f64], target: usize, cfg: &PgdConfig, rng: &mut R) -> Result<Vec<f64>>
where
    M: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    check_len(model.input_dim(), x.len())?;
    if target >= model.num_classes() {
        return Err(Error::domain(format!("target class {target} out of range")));
    }
    if cfg.epsilon == 0.0 {
        return Ok(x.to_vec());
    }
    let eps = cfg.epsilon;
    let project = |xa: &mut [f64]| {
        for (a, o) in xa.iter_mut().zip(x) {
            *a = a.clamp(o - eps, o + eps);
            if let Some((lo, hi)) = cfg.clip {
                *a = a.clamp(lo, hi);
            }
        }
    };

    let mut xa = x.to_vec();
    if cfg.random_start {
        for a in xa.iter_mut() {
            *a += rng.random_range(-eps..=eps);
        }
        project(&mut xa);
    }
    let mut grad = vec![0.0; x.len()];
    let mut best = xa.clone();
    let mut best_loss = f64::NEG_INFINITY;
    for _ in 0..cfg.steps_k {
        let (loss, d_scores) = softmax_cross_entropy(&model.scores(&xa), target);
        if loss >= best_loss {
            best_loss = loss;
            best.copy_from_slice(&xa);
        }
        model.backward(&xa, &d_scores, 0.0, None, Some(&mut grad));
        for (a, g) in xa.iter_mut().zip(&grad) {
            *a += cfg.step_size_delta * sign(*g);
        }
        project(&mut xa);
    }
    let (loss, _) = softmax_cross_entropy(&model.scores(&xa), target);
    if loss >= best_loss {
        best.copy_from_slice(&xa);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use rand::Rng as _;

    use super::*;
    use crate::adv::model::{LogisticModel, MlpClassifier};
    use crate::rng::RngSeed;

    #[test]
    fn zero_epsilon_is_identity() {
        let m = LogisticModel::new(vec![1.0, -1.0], 0.0);
        let cfg = PgdConfig::new(5, 0.1, 0.0, true).unwrap();
        let mut r = RngSeed::new(0, 0).rng();
        assert_eq!(pgd_attack(&m, &[0.3, 0.4], 1, &cfg, &mut r).unwrap(), vec![0.3, 0.4]);
    }

    #[test]
    fn config_validation() {
        assert!(PgdConfig::new(0, 0.1, 0.1, false).is_err());
        assert!(PgdConfig::new(1, 0.0, 0.1, false).is_err());
        assert!(PgdConfig::new(1, 0.1, -0.1, false).is_err());
    }

    #[test]
    fn logistic_attack_saturates_the_box() {
        let mut r = RngSeed::new(4, 0).rng();
        for _ in 0..50 {
            let w: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let m = LogisticModel::new(w.clone(), 0.0);
            let eps = 0.3;
            let cfg = PgdConfig::new(4, 0.1, eps, false).unwrap();
            for (y, class) in [(1.0, 1), (-1.0, 0)] {
                let xa = pgd_attack(&m, &x, class, &cfg, &mut r).unwrap();
                for i in 0..4 {
                    assert!((xa[i] - (x[i] - y * eps * w[i].signum())).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mlp_attack_stays_in_box_and_never_lowers_loss() {
        let m = MlpClassifier::init(3, 8, 2, RngSeed::new(6, 0)).unwrap();
        let mut r = RngSeed::new(6, 1).rng();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
            let cfg = PgdConfig::new(10, 0.05, 0.2, false).unwrap();
            let xa = pgd_attack(&m, &x, 0, &cfg, &mut r).unwrap();
            let dist = xa.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dist <= 0.2 + 1e-12);
            let clean = softmax_cross_entropy(&m.scores(&x), 0).0;
            let attacked = softmax_cross_entropy(&m.scores(&xa), 0).0;
            assert!(attacked >= clean - 1e-9);
        }
    }

    #[test]
    fn clip_range_is_respected() {
        let m = LogisticModel::new(vec![1.0, 1.0], 0.0);
        let mut cfg = PgdConfig::new(3, 0.1, 0.3, true).unwrap();
        cfg.clip = Some((0.0, 1.0));
        let mut r = RngSeed::new(1, 1).rng();
        let xa = pgd_attack(&m, &[0.05, 0.95], 1, &cfg, &mut r).unwrap();
        assert!(xa.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
