use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adv::{accuracy, train, EpochMetrics, MlpClassifier, PgdConfig, SslLossConfig, TrainConfig};
use crate::adv::model::MlpCheckpoint;
use crate::data::idx::read_idx;
use crate::data::split::{binary_mnist, make_ssl_split, SplitSpec};
use crate::error::{Error, Result};
use crate::gmm::{make_sphere_params, Dataset, Example, Sign};
use crate::rng::{purpose, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Fresh draws from the symmetric mixture with `σ = sigma_coeff·d^{1/4}`.
    Synthetic {
        d: usize,
        sigma_coeff: f64,
        n_labeled: usize,
        m_unlabeled: usize,
        n_test: usize,
    },
    /// Two MNIST digits from IDX files, pixels scaled to [0,1].
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
        neg_digit: usize,
        pos_digit: usize,
        num_labeled: usize,
        #[serde(default = "yes")]
        per_class_balanced: bool,
    },
}

fn yes() -> bool {
    true
}

/// Everything one `train` run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainJob {
    pub data: DataSource,
    pub hidden: usize,
    /// Attack used inside the loss.
    pub pgd: PgdConfig,
    /// Attack for robust accuracy; defaults to `pgd` without random start.
    #[serde(default)]
    pub eval_pgd: Option<PgdConfig>,
    pub lambda: f64,
    pub epochs: usize,
    pub labeled_batch: usize,
    pub unlabeled_batch: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub lr_decay_epochs: Vec<usize>,
    #[serde(default = "one")]
    pub lr_decay_factor: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct TrainJobOutput {
    pub log: Vec<EpochMetrics>,
    pub metrics_csv: String,
    pub checkpoint: MlpCheckpoint,
    pub clean_test_acc: f64,
    pub robust_test_acc: f64,
    /// Robust-correct count over clean-correct count on the test set.
    pub dsr: f64,
    pub diverged_at: Option<usize>,
}

impl TrainJob {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn load_data(&self, seed: RngSeed) -> Result<(Dataset<Sign>, Vec<Example<Sign>>)> {
        match &self.data {
            DataSource::Synthetic {
                d,
                sigma_coeff,
                n_labeled,
                m_unlabeled,
                n_test,
            } => {
                let params = make_sphere_params(*d, *sigma_coeff, seed)?;
                let data = Dataset::new(params.sample_labeled(*n_labeled, seed), params.sample_unlabeled(*m_unlabeled, seed), *d)?;
                Ok((data, params.sample_labeled(*n_test, seed.child(purpose::EVAL))))
            }
            DataSource::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
                neg_digit,
                pos_digit,
                num_labeled,
                per_class_balanced,
            } => {
                let load = |imgs: &PathBuf, labs: &PathBuf| -> Result<(Vec<Vec<f64>>, Vec<Sign>)> {
                    let x = read_idx(imgs)?.rows_f64(true);
                    let y: Vec<usize> = read_idx(labs)?.to_f64(false).iter().map(|v| *v as usize).collect();
                    binary_mnist(&x, &y, *neg_digit, *pos_digit)
                };
                let (x, y) = load(train_images, train_labels)?;
                let spec = SplitSpec {
                    num_labeled: *num_labeled,
                    seed: seed.child(purpose::SPLIT),
                    per_class_balanced: *per_class_balanced,
                };
                let data = make_ssl_split(&x, &y, &spec)?;
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => {
                        let (tx, ty) = load(i, l)?;
                        tx.into_iter().zip(ty).map(|(x, y)| Example { x, y }).collect()
                    }
                    (None, None) => Vec::new(),
                    _ => return Err(Error::Config("test_images and test_labels go together".into())),
                };
                Ok((data, test))
            }
        }
    }

    pub fn run(&self, seed: RngSeed) -> Result<TrainJobOutput> {
        let (data, test) = self.load_data(seed)?;
        let model = MlpClassifier::init(data.d, self.hidden, 2, seed.child(purpose::MODEL_INIT))?;
        let cfg = TrainConfig {
            epochs: self.epochs,
            labeled_batch: self.labeled_batch,
            unlabeled_batch: self.unlabeled_batch,
            learning_rate: self.learning_rate,
            lr_decay_epochs: self.lr_decay_epochs.clone(),
            lr_decay_factor: self.lr_decay_factor,
            seed,
        };
        let out = train(model, &data, &test, &cfg, &self.pgd, &SslLossConfig::new(self.lambda)?)?;
        let eval = self.eval_pgd.unwrap_or(self.pgd).deterministic();
        let (clean, robust) = accuracy(&out.model, &test, &eval)?;
        Ok(TrainJobOutput {
            metrics_csv: out.metrics_csv(),
            checkpoint: out.model.to_checkpoint(),
            clean_test_acc: clean,
            robust_test_acc: robust,
            dsr: if clean > 0.0 { robust / clean } else { f64::NAN },
            diverged_at: out.divergence.as_ref().map(|d| d.epoch),
            log: out.log,
        })
    }
}
