//! The `(θ*, σ)` two-component symmetric Gaussian mixture.
//!
//! A label `y` is drawn uniformly from `{−1, +1}` and the feature vector from
//! `N(y·θ*, σ²·I_d)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm2;
use crate::rng::{fill_standard_normal, purpose, RngSeed};

/// Binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Neg,
    Pos,
}

impl Sign {
    pub fn from_real(v: f64) -> Option<Self> {
        if v > 0.0 {
            Some(Sign::Pos)
        } else if v < 0.0 {
            Some(Sign::Neg)
        } else {
            None
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Neg => -1.0,
            Sign::Pos => 1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Pos => Sign::Neg,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Neg => -1,
            Sign::Pos => 1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            -1 => Ok(Sign::Neg),
            1 => Ok(Sign::Pos),
            other => Err(format!("label must be -1 or +1, got {other}")),
        }
    }
}

/// Labels usable by the multi-class training code.
pub trait ClassLabel: Copy {
    fn class_index(self) -> usize;
}

impl ClassLabel for Sign {
    /// `−1 → 0`, `+1 → 1`.
    fn class_index(self) -> usize {
        match self {
            Sign::Neg => 0,
            Sign::Pos => 1,
        }
    }
}

impl ClassLabel for usize {
    fn class_index(self) -> usize {
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example<L> {
    pub x: Vec<f64>,
    pub y: L,
}

pub type LabeledSample = Example<Sign>;

/// Labeled part `S^L` plus unlabeled pool `S^U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<L = Sign> {
    pub labeled: Vec<Example<L>>,
    pub unlabeled: Vec<Vec<f64>>,
    pub d: usize,
}

impl<L> Dataset<L> {
    pub fn new(labeled: Vec<Example<L>>, unlabeled: Vec<Vec<f64>>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dataset dimension must be >= 1"));
        }
        for e in &labeled {
            check_len(d, e.x.len())?;
        }
        for x in &unlabeled {
            check_len(d, x.len())?;
        }
        Ok(Self {
            labeled,
            unlabeled,
            d,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct GmmParams {
    pub d: usize,
    pub sigma: f64,
    pub theta_star: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    d: usize,
    sigma: f64,
    theta_star: Vec<f64>,
}

impl TryFrom<RawParams> for GmmParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        GmmParams::new(r.theta_star, r.sigma).and_then(|p| {
            check_len(r.d, p.d)?;
            Ok(p)
        })
    }
}

impl GmmParams {
    pub fn new(theta_star: Vec<f64>, sigma: f64) -> Result<Self> {
        if theta_star.is_empty() {
            return Err(Error::domain("d must be >= 1"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if theta_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("theta_star must be finite"));
        }
        Ok(Self {
            d: theta_star.len(),
            sigma,
            theta_star,
        })
    }

    /// θ* uniform on the radius-√d sphere, σ = `sigma_coeff`·d^{1/4}.
    pub fn sphere(d: usize, sigma_coeff: f64, rng: RngSeed) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("d must be >= 1"));
        }
        if !(sigma_coeff > 0.0 && sigma_coeff.is_finite()) {
            return Err(Error::domain(format!(
                "sigma_coeff must be positive, got {sigma_coeff}"
            )));
        }
        let mut r = rng.child(purpose::THETA).rng();
        let mut theta = vec![0.0; d];
        let norm = loop {
            fill_standard_normal(&mut r, &mut theta);
            let n = norm2(&theta);
            if n > 0.0 {
                break n;
            }
        };
        let scale = (d as f64).sqrt() / norm;
        theta.iter_mut().for_each(|v| *v *= scale);
        Self::new(theta, sigma_coeff * (d as f64).powf(0.25))
    }

    /// Unit vector along θ*.
    pub fn direction(&self) -> Vec<f64> {
        let n = norm2(&self.theta_star);
        self.theta_star.iter().map(|v| v / n).collect()
    }

    /// Draws one point of class `y` from `N(y·θ*, σ²I)`.
    pub fn draw_point<R: rand::Rng + ?Sized>(&self, y: Sign, rng: &mut R, out: &mut [f64]) {
        fill_standard_normal(rng, out);
        let s = y.value();
        for (o, t) in out.iter_mut().zip(&self.theta_star) {
            *o = s * t + self.sigma * *o;
        }
    }

    pub fn draw_labeled<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let y = if rng.random::<bool>() { Sign::Pos } else { Sign::Neg };
        let mut x = vec![0.0; self.d];
        self.draw_point(y, rng, &mut x);
        Example { x, y }
    }

    pub fn sample_labeled(&self, n: usize, rng: RngSeed) -> Vec<LabeledSample> {
        let mut r = rng.child(purpose::LABELED).rng();
        (0..n).map(|_| self.draw_labeled(&mut r)).collect()
    }

    /// Draws from the marginal: the hidden label is sampled and discarded.
    pub fn sample_unlabeled(&self, m: usize, rng: RngSeed) -> Vec<Vec<f64>> {
        let mut r = rng.child(purpose::UNLABELED).rng();
        (0..m).map(|_| self.draw_labeled(&mut r).x).collect()
    }
}

pub fn make_sphere_params(d: usize, sigma_coeff: f64, rng: RngSeed) -> Result<GmmParams> {
    GmmParams::sphere(d, sigma_coeff, rng)
}
