use crate::error::{Error, Result};

/// Probability floor used when the labeled class has zero mass.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Gradient w.r.t. the pre-normalization scores: `p − e_label`.
    pub grad_scores: Vec<f64>,
    /// `probs[label]` was below [`PROB_FLOOR`] and got clamped.
    pub saturated: bool,
}

/// `−ln probs[label]` for a probability vector produced by softmax.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<CrossEntropy> {
    if label >= probs.len() {
        return Err(Error::domain(format!("label {label} out of range for {} classes", probs.len())));
    }
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain("not a probability vector"));
    }
    let p = probs[label];
    let saturated = p < PROB_FLOOR;
    let mut grad_scores = probs.to_vec();
    grad_scores[label] -= 1.0;
    Ok(CrossEntropy {
        loss: -p.max(PROB_FLOOR).ln(),
        grad_scores,
        saturated,
    })
}

/// Cross-entropy straight from scores via log-sum-exp; returns the loss and
/// its gradient w.r.t. the scores.
pub fn softmax_cross_entropy(scores: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let lse = max + z.ln();
    let grad = scores
        .iter()
        .enumerate()
        .map(|(k, s)| (s - lse).exp() - if k == label { 1.0 } else { 0.0 })
        .collect();
    (lse - scores[label], grad)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn examples() {
        assert_eq!(cross_entropy(&[1.0, 0.0], 0).unwrap().loss, 0.0);
        let ce = cross_entropy(&[0.5, 0.5], 1).unwrap();
        assert!((ce.loss - std::f64::consts::LN_2).abs() < 1e-15);
        let sat = cross_entropy(&[1.0, 0.0], 1).unwrap();
        assert!(sat.saturated);
        assert!((sat.loss - (-PROB_FLOOR.ln())).abs() < 1e-12);
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());
        assert!(cross_entropy(&[0.7, 0.7], 0).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut r = RngSeed::new(3, 0).rng();
        for _ in 0..20 {
            let scores: Vec<f64> = (0..5).map(|_| r.random_range(-3.0..3.0)).collect();
            let label = r.random_range(0..5);
            let ce = cross_entropy(&softmax(&scores), label).unwrap();
            let (l2, g2) = softmax_cross_entropy(&scores, label);
            assert!((ce.loss - l2).abs() < 1e-12);
            let h = 1e-6;
            for k in 0..5 {
                let mut up = scores.clone();
                let mut dn = scores.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (-softmax(&up)[label].ln() + softmax(&dn)[label].ln()) / (2.0 * h);
                let a = ce.grad_scores[k];
                assert!((a - fd).abs() <= 1e-5 * a.abs().max(fd.abs()).max(1e-3));
                assert!((g2[k] - a).abs() < 1e-12);
            }
        }
    }
}
