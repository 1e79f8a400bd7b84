//! Small differentiable classifiers with hand-written backprop.

use serde::{Deserialize, Serialize};

use super::loss::softmax;
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rng::{standard_normal, RngSeed};
use crate::spectral::LinearClassifier;

/// A classifier producing per-class scores, differentiable w.r.t. both its
/// parameters and its input.
pub trait Classifier: Sync {
    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Pre-normalization scores.
    fn scores(&self, x: &[f64]) -> Vec<f64>;

    /// Back-propagates `d_scores` (∂L/∂scores at `x`). Adds `scale·∂L/∂θ`
    /// into `param_grad` and writes `∂L/∂x` into `input_grad` when given.
    fn backward(
        &self,
        x: &[f64],
        d_scores: &[f64],
        scale: f64,
        param_grad: Option<&mut [f64]>,
        input_grad: Option<&mut [f64]>,
    );

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn probs(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }

    /// Argmax class, ties to the lowest index.
    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x)).0
    }
}

/// `(index, tied)`: first maximal index and whether another index matched it.
pub fn argmax(v: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tied = false;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
            tied = false;
        } else if *x == v[best] {
            tied = true;
        }
    }
    (best, tied)
}

/// Binary logistic model: scores `(0, w·x + b)`, class 1 ↔ label `+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `[w_1 … w_d, b]`.
    params: Vec<f64>,
}

impl LogisticModel {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        let mut params = w;
        params.push(b);
        Self { params }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(vec![0.0; d], 0.0)
    }

    pub fn from_linear(clf: &LinearClassifier) -> Self {
        Self::new(clf.w.clone(), 0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.params.len() - 1]
    }

    pub fn bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(self.weights(), x) + self.bias()
    }
}

impl Classifier for LogisticModel {
    fn input_dim(&self) -> usize {
        self.params.len() - 1
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0, self.margin(x)]
    }

    fn backward(
        &self,
        x: &[f64],
        d_scores: &[f64],
        scale: f64,
        param_grad: Option<&mut [f64]>,
        input_grad: Option<&mut [f64]>,
    ) {
        let g = d_scores[1];
        let d = self.input_dim();
        if let Some(pg) = param_grad {
            for (p, xi) in pg[..d].iter_mut().zip(x) {
                *p += scale * g * xi;
            }
            pg[d] += scale * g;
        }
        if let Some(ig) = input_grad {
            for (o, w) in ig.iter_mut().zip(self.weights()) {
                *o = g * w;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// One hidden ReLU layer followed by an affine score layer.
///
/// Parameters are stored flat as `[W1 (h×d) | b1 (h) | W2 (K×h) | b2 (K)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    input_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    activation: Activation,
    params: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub v: u32,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub activation: Activation,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpClassifier {
    /// He-scaled Gaussian first layer, `1/√h` second layer, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, num_classes: usize, rng: RngSeed) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || num_classes < 2 {
            return Err(Error::domain("mlp needs input_dim, hidden_dim >= 1 and num_classes >= 2"));
        }
        let mut m = Self {
            input_dim,
            hidden_dim,
            num_classes,
            activation: Activation::Relu,
            params: vec![0.0; hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes],
        };
        let mut r = rng.rng();
        let s1 = (2.0 / input_dim as f64).sqrt();
        let s2 = (1.0 / hidden_dim as f64).sqrt();
        let (w1, rest) = m.params.split_at_mut(hidden_dim * input_dim);
        w1.iter_mut().for_each(|p| *p = s1 * standard_normal(&mut r));
        let w2 = &mut rest[hidden_dim..hidden_dim + num_classes * hidden_dim];
        w2.iter_mut().for_each(|p| *p = s2 * standard_normal(&mut r));
        Ok(m)
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.num_classes * self.hidden_dim;
        (b1, w2, b2)
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let (b1, _, _) = self.offsets();
        let d = self.input_dim;
        (0..self.hidden_dim)
            .map(|j| dot(&self.params[j * d..(j + 1) * d], x) + self.params[b1 + j])
            .collect()
    }

    pub fn to_checkpoint(&self) -> MlpCheckpoint {
        let (b1, w2, b2) = self.offsets();
        MlpCheckpoint {
            v: CHECKPOINT_VERSION,
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            num_classes: self.num_classes,
            activation: self.activation,
            w1: self.params[..b1].to_vec(),
            b1: self.params[b1..w2].to_vec(),
            w2: self.params[w2..b2].to_vec(),
            b2: self.params[b2..].to_vec(),
        }
    }

    pub fn from_checkpoint(c: &MlpCheckpoint) -> Result<Self> {
        if c.v != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", c.v)));
        }
        let (d, h, k) = (c.input_dim, c.hidden_dim, c.num_classes);
        let ok = c.w1.len() == h * d && c.b1.len() == h && c.w2.len() == k * h && c.b2.len() == k;
        if !ok || d == 0 || h == 0 || k < 2 {
            return Err(Error::Config("checkpoint array sizes do not match dims".into()));
        }
        let params: Vec<f64> = [&c.w1, &c.b1, &c.w2, &c.b2].into_iter().flatten().copied().collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("checkpoint holds non-finite parameters".into()));
        }
        Ok(Self {
            input_dim: d,
            hidden_dim: h,
            num_classes: k,
            activation: c.activation,
            params,
        })
    }
}

impl Classifier for MlpClassifier {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let (_, w2, b2) = self.offsets();
        let h = self.hidden_dim;
        let act: Vec<f64> = self.hidden_pre(x).into_iter().map(|z| z.max(0.0)).collect();
        (0..self.num_classes)
            .map(|k| dot(&self.params[w2 + k * h..w2 + (k + 1) * h], &act) + self.params[b2 + k])
            .collect()
    }

    fn backward(
        &self,
        x: &[f64],
        d_scores: &[f64],
        scale: f64,
        param_grad: Option<&mut [f64]>,
        input_grad: Option<&mut [f64]>,
    ) {
        let (b1, w2, b2) = self.offsets();
        let (d, h) = (self.input_dim, self.hidden_dim);
        let pre = self.hidden_pre(x);

        // ∂L/∂hidden pre-activation
        let mut d_pre = vec![0.0; h];
        for (k, g) in d_scores.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let row = &self.params[w2 + k * h..w2 + (k + 1) * h];
            for j in 0..h {
                d_pre[j] += g * row[j];
            }
        }
        for j in 0..h {
            if pre[j] <= 0.0 {
                d_pre[j] = 0.0;
            }
        }

        if let Some(pg) = param_grad {
            for (k, g) in d_scores.iter().enumerate() {
                let sg = scale * g;
                for j in 0..h {
                    pg[w2 + k * h + j] += sg * pre[j].max(0.0);
                }
                pg[b2 + k] += sg;
            }
            for j in 0..h {
                let sg = scale * d_pre[j];
                if sg == 0.0 {
                    continue;
                }
                for (p, xi) in pg[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *p += sg * xi;
                }
                pg[b1 + j] += sg;
            }
        }
        if let Some(ig) = input_grad {
            ig.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..h {
                if d_pre[j] != 0.0 {
                    let row = &self.params[j * d..(j + 1) * d];
                    for (o, w) in ig.iter_mut().zip(row) {
                        *o += d_pre[j] * w;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), (1, true));
        assert_eq!(argmax(&[2.0, 1.0]), (0, false));
        assert_eq!(argmax(&[0.0, 0.0]), (0, true));
    }

    #[test]
    fn mlp_probs_are_a_distribution() {
        let m = MlpClassifier::init(6, 4, 3, RngSeed::new(1, 0)).unwrap();
        let p = m.probs(&[0.3, -1.0, 2.0, 0.0, 0.5, 1.5]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = MlpClassifier::init(5, 3, 2, RngSeed::new(2, 0)).unwrap();
        let json = serde_json::to_string(&m.to_checkpoint()).unwrap();
        let back = MlpClassifier::from_checkpoint(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut bad = m.to_checkpoint();
        bad.b2.pop();
        assert!(MlpClassifier::from_checkpoint(&bad).is_err());
    }

    #[test]
    fn logistic_scores() {
        let m = LogisticModel::new(vec![1.0, -2.0], 0.5);
        assert_eq!(m.scores(&[1.0, 1.0]), vec![0.0, -0.5]);
        assert_eq!(m.predict(&[1.0, 1.0]), 0);
        assert_eq!(m.predict(&[3.0, 1.0]), 1);
    }
}
