//! Semi-supervised splits: keep the labels of a seeded subset, mask the rest.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::gmm::{ClassLabel, Dataset, Example, Sign};
use crate::rng::{purpose, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub num_labeled: usize,
    pub seed: RngSeed,
    pub per_class_balanced: bool,
}

/// Picks `num_labeled` indices (per-class quotas when balanced; the
/// remainder goes to the lowest class indices) and returns labeled examples
/// in original order plus every other feature vector as unlabeled.
pub fn make_ssl_split<L: ClassLabel>(features: &[Vec<f64>], labels: &[L], spec: &SplitSpec) -> Result<Dataset<L>> {
    check_len(features.len(), labels.len())?;
    let n = features.len();
    if spec.num_labeled > n {
        return Err(Error::domain(format!(
            "num_labeled {} exceeds dataset size {n}",
            spec.num_labeled
        )));
    }
    let d = match features.first() {
        Some(f) => f.len(),
        None => return Err(Error::domain("dataset must be non-empty")),
    };
    let mut rng = spec.seed.child(purpose::SPLIT).rng();
    let mut keep = vec![false; n];

    if spec.per_class_balanced {
        let classes = labels.iter().map(|l| l.class_index()).max().unwrap_or(0) + 1;
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for (i, l) in labels.iter().enumerate() {
            by_class[l.class_index()].push(i);
        }
        let base = spec.num_labeled / classes;
        let extra = spec.num_labeled % classes;
        for (c, idx) in by_class.iter_mut().enumerate() {
            let quota = base + usize::from(c < extra);
            if quota > idx.len() {
                return Err(Error::domain(format!(
                    "class {c} has {} examples, quota is {quota}",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            idx[..quota].iter().for_each(|&i| keep[i] = true);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx[..spec.num_labeled].iter().for_each(|&i| keep[i] = true);
    }

    let mut labeled = Vec::with_capacity(spec.num_labeled);
    let mut unlabeled = Vec::with_capacity(n - spec.num_labeled);
    for (i, k) in keep.into_iter().enumerate() {
        if k {
            labeled.push(Example {
                x: features[i].clone(),
                y: labels[i],
            });
        } else {
            unlabeled.push(features[i].clone());
        }
    }
    Dataset::new(labeled, unlabeled, d)
}

/// Keeps only the two chosen digits, mapping `neg_digit → −1` and
/// `pos_digit → +1`.
pub fn binary_mnist(features: &[Vec<f64>], digits: &[usize], neg_digit: usize, pos_digit: usize) -> Result<(Vec<Vec<f64>>, Vec<Sign>)> {
    check_len(features.len(), digits.len())?;
    if neg_digit == pos_digit {
        return Err(Error::domain("binary digits must differ"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (x, &dg) in features.iter().zip(digits) {
        let y = if dg == neg_digit {
            Sign::Neg
        } else if dg == pos_digit {
            Sign::Pos
        } else {
            continue;
        };
        xs.push(x.clone());
        ys.push(y);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn toy(n: usize, classes: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let xs = (0..n).map(|i| vec![i as f64, 0.5]).collect();
        let ys = (0..n).map(|i| i % classes).collect();
        (xs, ys)
    }

    fn spec(k: usize, balanced: bool) -> SplitSpec {
        SplitSpec {
            num_labeled: k,
            seed: RngSeed::new(3, 0),
            per_class_balanced: balanced,
        }
    }

    #[test]
    fn extremes() {
        let (xs, ys) = toy(20, 2);
        let all = make_ssl_split(&xs, &ys, &spec(20, false)).unwrap();
        assert!(all.unlabeled.is_empty() && all.labeled.len() == 20);
        let none = make_ssl_split(&xs, &ys, &spec(0, true)).unwrap();
        assert!(none.labeled.is_empty() && none.unlabeled.len() == 20);
        assert!(make_ssl_split(&xs, &ys, &spec(21, false)).is_err());
    }

    #[test]
    fn balanced_quota_per_class() {
        let (xs, ys) = toy(60_000, 10);
        let ds = make_ssl_split(&xs, &ys, &spec(5000, true)).unwrap();
        let mut counts = [0usize; 10];
        ds.labeled.iter().for_each(|e| counts[e.y] += 1);
        assert_eq!(counts, [500; 10]);

        let ds = make_ssl_split(&xs, &ys, &spec(23, true)).unwrap();
        let mut counts = [0usize; 10];
        ds.labeled.iter().for_each(|e| counts[e.y] += 1);
        assert_eq!(counts, [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn conservation_and_determinism() {
        let (xs, ys) = toy(500, 3);
        let a = make_ssl_split(&xs, &ys, &spec(77, false)).unwrap();
        let b = make_ssl_split(&xs, &ys, &spec(77, false)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labeled.len() + a.unlabeled.len(), 500);
        let mut seen: HashSet<u64> = HashSet::new();
        for e in &a.labeled {
            let i = e.x[0] as usize;
            assert_eq!(e.y, ys[i]);
            assert!(seen.insert(i as u64));
        }
        for x in &a.unlabeled {
            assert!(seen.insert(x[0] as u64));
        }
        assert_eq!(seen.len(), 500);
    }

    #[test]
    fn binary_digit_filter() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let (bx, by) = binary_mnist(&xs, &[3, 8, 1, 3], 3, 8).unwrap();
        assert_eq!(bx, vec![vec![0.0], vec![1.0], vec![3.0]]);
        assert_eq!(by, vec![Sign::Neg, Sign::Pos, Sign::Neg]);
    }
}
