//! Direction recovery from unlabeled data and sign recovery from a single
//! labeled point.
//!
//! The mixture's second-moment matrix is `θ*θ*ᵀ + σ²I`, so its top
//! eigenvector is `±θ*/‖θ*‖`. The sample version is estimated by power
//! iteration; one labeled point then picks the sign.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gmm::LabeledSample;
use crate::linalg::{axpy, dot, norm2, SymMatrix, SymmetricOperator};
use crate::rng::{fill_standard_normal, purpose, RngSeed};

/// Linear classifier `f_w(x) = sign(w·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub w: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(w: Vec<f64>) -> Self {
        Self { w }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.w.iter().all(|v| *v == 0.0)
    }

    /// Raw score `w·x`; prediction is its sign.
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.w, x)
    }

    /// `Err(ZeroWeight)` for the degenerate classifier.
    pub fn ensure_nonzero(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::ZeroWeight)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub v: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
    /// `‖A·v − λ·v‖₂` for the returned pair.
    pub residual: f64,
    pub converged: bool,
}

impl EigenResult {
    pub const CSV_HEADER: &'static str = "eigenvalue,residual,iterations";

    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.eigenvalue, self.residual, self.iterations)
    }
}

/// `(1/n) Σ xᵢxᵢᵀ` as an explicit matrix.
pub fn sample_covariance(xs: &[Vec<f64>]) -> Result<SymMatrix> {
    let first = xs
        .first()
        .ok_or_else(|| Error::domain("sample covariance needs at least one vector"))?;
    let d = first.len();
    let mut m = SymMatrix::zeros(d);
    let inv = 1.0 / xs.len() as f64;
    for x in xs {
        check_len(d, x.len())?;
        m.rank_one_upper(inv, x);
    }
    m.mirror_upper();
    Ok(m)
}

/// The sample second-moment matrix applied implicitly as `(1/n)·Xᵀ(X·v)`.
///
/// Costs `O(n·d)` per product instead of `O(n·d²)` to form the matrix.
pub struct CovarianceOperator<'a> {
    xs: &'a [Vec<f64>],
    d: usize,
}

impl<'a> CovarianceOperator<'a> {
    pub fn new(xs: &'a [Vec<f64>]) -> Result<Self> {
        let d = xs
            .first()
            .ok_or_else(|| Error::domain("sample covariance needs at least one vector"))?
            .len();
        for x in xs {
            check_len(d, x.len())?;
        }
        Ok(Self { xs, d })
    }
}

impl SymmetricOperator for CovarianceOperator<'_> {
    fn dim(&self) -> usize {
        self.d
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let inv = 1.0 / self.xs.len() as f64;
        for x in self.xs {
            axpy(inv * dot(x, v), x, out);
        }
    }
}

/// Iterations without a new best residual before power iteration gives up.
const STAGNATION_PATIENCE: usize = 50;

/// Dominant eigenpair by power iteration from a seeded random start.
///
/// Stops when `‖A·v − λ·v‖₂ ≤ tol`, after `max_iters`, or when the residual
/// has stalled at the floating-point floor. The best iterate seen is
/// returned; `converged` is false whenever its residual exceeds `tol`. The
/// sign is canonicalized so the largest-magnitude coordinate is positive.
pub fn top_eigenvector<O: SymmetricOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_iters: usize,
    rng: RngSeed,
) -> Result<EigenResult> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tol must be positive, got {tol}")));
    }
    let d = op.dim();
    if d == 0 {
        return Err(Error::domain("operator dimension must be >= 1"));
    }
    let mut v = vec![0.0; d];
    let mut r = rng.child(purpose::POWER_START).rng();
    loop {
        fill_standard_normal(&mut r, &mut v);
        let n = norm2(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            break;
        }
    }

    let mut av = vec![0.0; d];
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut since_best = 0;
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        op.apply(&v, &mut av);
        let lambda = dot(&v, &av);
        let residual = av
            .iter()
            .zip(&v)
            .map(|(a, x)| (a - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if best.as_ref().is_none_or(|b| residual < b.2) {
            best = Some((v.clone(), lambda, residual));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if residual <= tol || since_best >= STAGNATION_PATIENCE {
            break;
        }
        let n = norm2(&av);
        if n == 0.0 || !n.is_finite() {
            break;
        }
        for (x, a) in v.iter_mut().zip(&av) {
            *x = a / n;
        }
    }
    let (mut v, eigenvalue, residual) = best.expect("at least one iteration runs");
    canonicalize_sign(&mut v);
    Ok(EigenResult {
        v,
        eigenvalue,
        iterations,
        residual,
        converged: residual <= tol,
    })
}

fn canonicalize_sign(v: &mut [f64]) {
    let lead = v
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Classifier picked by the sign of `y·v·x`, with a flag for the exact tie.
#[derive(Debug, Clone, PartialEq)]
pub struct SignAlignment {
    pub classifier: LinearClassifier,
    /// `y·v·x == 0`; `+v` was chosen.
    pub tie: bool,
}

pub fn align_sign(v: &[f64], labeled: &LabeledSample) -> Result<SignAlignment> {
    check_len(v.len(), labeled.x.len())?;
    let n = norm2(v);
    if (n - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!("v must be a unit vector, ‖v‖ = {n}")));
    }
    let s = labeled.y.value() * dot(v, &labeled.x);
    let tie = s == 0.0;
    let w = if s < 0.0 {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    };
    Ok(SignAlignment {
        classifier: LinearClassifier::new(w),
        tie,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub classifier: LinearClassifier,
    pub eigen: EigenResult,
    pub tie: bool,
}

/// Default residual tolerance for the estimator's power iteration.
pub const DEFAULT_TOL: f64 = 1e-10;

pub fn default_max_iters(d: usize) -> usize {
    10 * d + 1000
}

/// Top eigenvector of the unlabeled second-moment matrix, signed by one
/// labeled point.
pub fn estimate_spectral(
    d: usize,
    labeled: &LabeledSample,
    unlabeled: &[Vec<f64>],
    tol: f64,
    max_iters: usize,
    rng: RngSeed,
) -> Result<SpectralEstimate> {
    if unlabeled.is_empty() {
        return Err(Error::domain("unlabeled set must be non-empty"));
    }
    check_len(d, labeled.x.len())?;
    let op = CovarianceOperator::new(unlabeled)?;
    check_len(d, op.dim())?;
    let eigen = top_eigenvector(&op, tol, max_iters, rng)?;
    let aligned = align_sign(&eigen.v, labeled)?;
    Ok(SpectralEstimate {
        classifier: aligned.classifier,
        eigen,
        tie: aligned.tie,
    })
}

/// `ŵ = y·x` from a single labeled point.
pub fn one_shot_baseline(labeled: &LabeledSample) -> LinearClassifier {
    let s = labeled.y.value();
    LinearClassifier::new(labeled.x.iter().map(|x| s * x).collect())
}

/// Whether `σ·√((σ² + d)/(n·d)) < 1/128` held for a draw of `n` unlabeled
/// points. Recorded per trial, never enforced.
pub fn concentration_condition(sigma: f64, d: usize, n: usize) -> bool {
    let (d, n) = (d as f64, n as f64);
    sigma * ((sigma * sigma + d) / (n * d)).sqrt() < 1.0 / 128.0
}
