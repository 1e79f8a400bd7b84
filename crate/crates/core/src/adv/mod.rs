//! Adversarial training over labeled and unlabeled data.
//!
//! [`pgd`] solves the inner maximization, [`objective`] builds the supervised
//! robust loss, the pseudo-label robust loss on unlabeled points and their
//! λ-weighted sum, and [`train`] runs minibatch SGD on that sum.

pub mod loss;
pub mod model;
pub mod objective;
pub mod pgd;
pub mod train;

pub use loss::{cross_entropy, softmax, softmax_cross_entropy, CrossEntropy};
pub use model::{Classifier, LogisticModel, MlpClassifier};
pub use objective::{loss_l1, loss_l2, loss_ssl, LossEval, SslLossConfig};
pub use pgd::{pgd_attack, PgdConfig};
pub use train::{accuracy, train, EpochMetrics, TrainConfig, TrainOutcome};
