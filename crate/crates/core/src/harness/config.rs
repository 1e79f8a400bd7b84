use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Experiment families. Each maps to one trial routine in
/// [`super::experiments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Natural risk of the one-labeled-point baseline `ŵ = y·x`.
    OneShotNatural,
    /// Robust risk of the same baseline.
    OneShotRobust,
    /// Robust risk of the spectral estimator (unlabeled PCA + one label).
    SpectralRobust,
    /// Eigenvector error against `θ*/‖θ*‖` as the unlabeled pool grows.
    EigenDecay,
    /// Whether one labeled point picks the right sign of the eigenvector.
    SignAlignment,
    /// Robust-risk decomposition bound on random and spectral classifiers.
    DecompositionBound,
    /// Adversarial training with pseudo-labeled unlabeled data.
    SslTrainSweep,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::OneShotNatural => "one_shot_natural",
            ExperimentKind::OneShotRobust => "one_shot_robust",
            ExperimentKind::SpectralRobust => "spectral_robust",
            ExperimentKind::EigenDecay => "eigen_decay",
            ExperimentKind::SignAlignment => "sign_alignment",
            ExperimentKind::DecompositionBound => "decomposition_bound",
            ExperimentKind::SslTrainSweep => "ssl_train_sweep",
        }
    }
}

/// Every knob any experiment reads. Unused fields are ignored by kinds that
/// do not need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub d: usize,
    pub sigma_coeff: f64,
    pub epsilon: f64,
    /// Unlabeled pool size; `None` means `m_factor · d`.
    pub m_unlabeled: Option<usize>,
    pub m_factor: f64,
    pub n_labeled: usize,
    /// Labeled evaluation set size for the decomposition bound.
    pub n_eval: usize,
    pub confidence_delta: f64,
    pub mc_samples: usize,
    pub tol: f64,
    /// `None` means `10·d + 1000`.
    pub max_iters: Option<usize>,
    // training
    pub lambda: f64,
    pub k: usize,
    /// PGD step; `None` means `ε/4`.
    pub step_size: Option<f64>,
    pub hidden: usize,
    /// PGD steps used when scoring robust test accuracy (step `ε/4`).
    pub eval_k: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub labeled_batch: usize,
    pub unlabeled_batch: usize,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            d: 100,
            sigma_coeff: 1.0,
            epsilon: 0.0,
            m_unlabeled: None,
            m_factor: 8.0,
            n_labeled: 10,
            n_eval: 2000,
            confidence_delta: 0.01,
            mc_samples: 10_000,
            tol: crate::spectral::DEFAULT_TOL,
            max_iters: None,
            lambda: 0.3,
            k: 7,
            step_size: None,
            hidden: 32,
            eval_k: 7,
            n_test: 2000,
            epochs: 30,
            learning_rate: 0.1,
            labeled_batch: 10,
            unlabeled_batch: 100,
            lr_decay_epochs: Vec::new(),
            lr_decay_factor: 1.0,
        }
    }
}

impl ExperimentParams {
    pub fn unlabeled_count(&self) -> usize {
        self.m_unlabeled
            .unwrap_or_else(|| (self.m_factor * self.d as f64).round() as usize)
    }

    pub fn pgd_step(&self) -> f64 {
        self.step_size.unwrap_or(self.epsilon / 4.0)
    }

    pub fn power_iters(&self) -> usize {
        self.max_iters
            .unwrap_or_else(|| crate::spectral::default_max_iters(self.d))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.d == 0 {
            return bad("d must be >= 1");
        }
        if !(self.sigma_coeff > 0.0) {
            return bad("sigma_coeff must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be >= 0");
        }
        if !(self.confidence_delta > 0.0 && self.confidence_delta < 1.0) {
            return bad("confidence_delta must be in (0,1)");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if self.k == 0 || self.eval_k == 0 {
            return bad("k and eval_k must be >= 1");
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be >= 1");
        }
        Ok(())
    }
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda,
    K,
    StepSize,
    MUnlabeled,
    MFactor,
    NLabeled,
    Epsilon,
    D,
    SigmaCoeff,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::K => "k",
            SweepParam::StepSize => "step_size",
            SweepParam::MUnlabeled => "m_unlabeled",
            SweepParam::MFactor => "m_factor",
            SweepParam::NLabeled => "n_labeled",
            SweepParam::Epsilon => "epsilon",
            SweepParam::D => "d",
            SweepParam::SigmaCoeff => "sigma_coeff",
        }
    }

    /// Applies one sweep value, rejecting non-integral values for count
    /// parameters.
    pub fn apply(self, p: &mut ExperimentParams, value: f64) -> Result<()> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} needs a non-negative integer, got {value}", self.as_str())))
            }
        };
        match self {
            SweepParam::Lambda => p.lambda = value,
            SweepParam::K => p.k = count()?,
            SweepParam::StepSize => p.step_size = Some(value),
            SweepParam::MUnlabeled => p.m_unlabeled = Some(count()?),
            SweepParam::MFactor => p.m_factor = value,
            SweepParam::NLabeled => p.n_labeled = count()?,
            SweepParam::Epsilon => p.epsilon = value,
            SweepParam::D => p.d = count()?,
            SweepParam::SigmaCoeff => p.sigma_coeff = value,
        }
        p.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Median,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Le,
    Ge,
}

/// Embedded pass/fail check evaluated at every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: String,
    pub stat: Statistic,
    pub op: Comparison,
    pub threshold: f64,
}

impl Assertion {
    pub fn holds(&self, value: Option<f64>) -> bool {
        match (value, self.op) {
            (Some(v), Comparison::Le) => v <= self.threshold,
            (Some(v), Comparison::Ge) => v >= self.threshold,
            (None, _) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: ExperimentParams,
    #[serde(default)]
    pub sweep: Option<SweepAxis>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, trials: usize, seed: u64, params: ExperimentParams) -> Self {
        Self {
            kind,
            trials,
            seed,
            params,
            sweep: None,
            assertions: Vec::new(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Parameter sets for every sweep point, `(sweep value, params)`.
    pub fn points(&self) -> Result<Vec<(Option<f64>, ExperimentParams)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.params.clone())]),
            Some(axis) => axis
                .values
                .iter()
                .map(|&v| {
                    let mut p = self.params.clone();
                    axis.param.apply(&mut p, v)?;
                    Ok((Some(v), p))
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        self.params.validate()?;
        if let Some(axis) = &self.sweep {
            if axis.values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
        }
        self.points()?;
        let known = super::experiments::metric_names(self.kind);
        for a in &self.assertions {
            if !known.contains(&a.metric.as_str()) {
                return Err(Error::Config(format!(
                    "assertion metric `{}` is not produced by {}",
                    a.metric,
                    self.kind.as_str()
                )));
            }
        }
        Ok(())
    }
}
