//! Natural and ℓ∞-robust 0-1 risks on the mixture, the label-free
//! stability term and the robust-risk decomposition bound.
//!
//! For a linear classifier `w` the margin `y·w·x` is `N(⟨w,θ*⟩, σ²‖w‖₂²)`
//! and the worst ℓ∞ perturbation of radius ε shifts it by exactly `ε‖w‖₁`,
//! so every population quantity below has a closed form in `Φ`. The
//! Monte-Carlo estimators exist as an independent route to the same numbers
//! and as the only route for non-linear models.

use serde::{Deserialize, Serialize};

use crate::adv::model::{Classifier, LogisticModel};
use crate::adv::pgd::{pgd_attack, PgdConfig};
use crate::error::{check_len, Error, Result};
use crate::gmm::{ClassLabel, GmmParams, LabeledSample};
use crate::linalg::{dot, norm1, norm2};
use crate::normal;
use crate::rng::{purpose, RngSeed};
use crate::spectral::LinearClassifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    LInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBudget {
    pub norm: NormKind,
    pub epsilon: f64,
}

impl PerturbationBudget {
    pub fn linf(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self {
            norm: NormKind::LInf,
            epsilon,
        })
    }

    /// `ε·‖w‖₁`: the largest margin shift inside the ℓ∞ ball.
    pub fn margin_shift(&self, w: &[f64]) -> f64 {
        match self.norm {
            NormKind::LInf => {
                if self.epsilon == 0.0 {
                    0.0
                } else {
                    self.epsilon * norm1(w)
                }
            }
        }
    }
}

/// `(⟨w,θ*⟩, σ‖w‖₂)`: mean and spread of `y·w·x`.
fn margin_moments(params: &GmmParams, clf: &LinearClassifier) -> Result<(f64, f64)> {
    check_len(params.d, clf.dim())?;
    clf.ensure_nonzero()?;
    Ok((dot(&clf.w, &params.theta_star), params.sigma * norm2(&clf.w)))
}

/// `Φ(−⟨w,θ*⟩ / (σ‖w‖₂))`.
pub fn natural_risk(params: &GmmParams, clf: &LinearClassifier) -> Result<f64> {
    let (mu, s) = margin_moments(params, clf)?;
    Ok(normal::cdf(-mu / s))
}

/// `Φ(−(⟨w,θ*⟩ − ε‖w‖₁) / (σ‖w‖₂))`.
pub fn robust_risk(params: &GmmParams, clf: &LinearClassifier, budget: &PerturbationBudget) -> Result<f64> {
    let (mu, s) = margin_moments(params, clf)?;
    Ok(normal::cdf((budget.margin_shift(&clf.w) - mu) / s))
}

/// Probability over the unlabeled marginal that some in-budget perturbation
/// flips the classifier's own prediction, i.e. `P(|w·x| ≤ ε‖w‖₁)`.
///
/// Both mixture components contribute the same mass by symmetry.
pub fn stability_term(params: &GmmParams, clf: &LinearClassifier, budget: &PerturbationBudget) -> Result<f64> {
    let (mu, s) = margin_moments(params, clf)?;
    let a = budget.margin_shift(&clf.w);
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok((normal::cdf((a - mu) / s) - normal::cdf((-a - mu) / s)).max(0.0))
}

/// Gaussian tail bound `exp(−(⟨w,θ*⟩ − ε‖w‖₁)²/(2σ²))` on the robust risk of
/// a unit-norm classifier whose margin survives the budget.
pub fn robust_risk_tail_bound(
    params: &GmmParams,
    clf: &LinearClassifier,
    budget: &PerturbationBudget,
) -> Result<f64> {
    check_len(params.d, clf.dim())?;
    let n = norm2(&clf.w);
    if (n - 1.0).abs() > 1e-6 {
        return Err(Error::BoundInapplicable(format!("classifier must be unit norm, ‖w‖₂ = {n}")));
    }
    let margin = dot(&clf.w, &params.theta_star) - budget.margin_shift(&clf.w);
    if margin < 0.0 {
        return Err(Error::BoundInapplicable(format!(
            "⟨w,θ*⟩ − ε‖w‖₁ = {margin} is negative"
        )));
    }
    Ok((-(margin * margin) / (2.0 * params.sigma * params.sigma)).exp())
}

/// How a Monte-Carlo evaluation perturbs each test point.
#[derive(Debug, Clone, Copy)]
pub enum Attack<'a> {
    /// `x − y·ε·sign(w)`, the exact worst case for a linear classifier.
    ExactLinear,
    /// PGD on the cross-entropy at the true label; ε comes from the budget.
    Pgd(&'a PgdConfig),
}

#[derive(Clone, Copy)]
pub enum Predictor<'a> {
    Linear(&'a LinearClassifier),
    Model(&'a dyn Classifier),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub risk: f64,
    /// `√(p̂(1−p̂)/N)`; `None` when `N = 1`.
    pub std_error: Option<f64>,
    pub samples: usize,
}

impl McEstimate {
    fn from_counts(errors: usize, n: usize) -> Self {
        let p = errors as f64 / n as f64;
        Self {
            risk: p,
            std_error: (n > 1).then(|| (p * (1.0 - p) / n as f64).sqrt()),
            samples: n,
        }
    }
}

fn linear_errs(w: &[f64], x: &[f64], y: f64) -> bool {
    y * dot(w, x) <= 0.0
}

/// Fraction of fresh mixture draws misclassified, after the attack when a
/// budget is given.
pub fn mc_risk(
    predictor: Predictor<'_>,
    params: &GmmParams,
    budget: Option<&PerturbationBudget>,
    attack: Option<Attack<'_>>,
    mc_samples: usize,
    rng: RngSeed,
) -> Result<McEstimate> {
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be >= 1"));
    }
    if let (Some(_), None) = (budget, attack) {
        return Err(Error::domain("a budget needs an attack"));
    }
    let mut r = rng.child(purpose::EVAL).rng();
    let mut attack_rng = rng.child(purpose::ATTACK).rng();
    let mut x = vec![0.0; params.d];
    let mut errors = 0usize;

    match predictor {
        Predictor::Linear(clf) => {
            check_len(params.d, clf.dim())?;
            clf.ensure_nonzero()?;
            let logistic = LogisticModel::from_linear(clf);
            for _ in 0..mc_samples {
                let s = params.draw_labeled(&mut r);
                let y = s.y.value();
                let wrong = match (budget, attack) {
                    (None, _) => linear_errs(&clf.w, &s.x, y),
                    (Some(b), Some(Attack::ExactLinear)) => {
                        for ((xi, si), wi) in x.iter_mut().zip(&s.x).zip(&clf.w) {
                            *xi = si - y * b.epsilon * sign(*wi);
                        }
                        linear_errs(&clf.w, &x, y)
                    }
                    (Some(b), Some(Attack::Pgd(cfg))) => {
                        let cfg = cfg.with_epsilon(b.epsilon);
                        let xa = pgd_attack(&logistic, &s.x, s.y.class_index(), &cfg, &mut attack_rng)?;
                        linear_errs(&clf.w, &xa, y)
                    }
                    (Some(_), None) => unreachable!(),
                };
                errors += usize::from(wrong);
            }
        }
        Predictor::Model(model) => {
            check_len(params.d, model.input_dim())?;
            if model.num_classes() != 2 {
                return Err(Error::domain("mixture evaluation needs a two-class model"));
            }
            for _ in 0..mc_samples {
                let s = params.draw_labeled(&mut r);
                let class = s.y.class_index();
                let pred = match (budget, attack) {
                    (None, _) => model.predict(&s.x),
                    (Some(b), Some(Attack::Pgd(cfg))) => {
                        let cfg = cfg.with_epsilon(b.epsilon);
                        let xa = pgd_attack(model, &s.x, class, &cfg, &mut attack_rng)?;
                        model.predict(&xa)
                    }
                    (Some(_), Some(Attack::ExactLinear)) => {
                        return Err(Error::domain("exact linear attack needs a linear classifier"))
                    }
                    (Some(_), None) => unreachable!(),
                };
                errors += usize::from(pred != class);
            }
        }
    }
    Ok(McEstimate::from_counts(errors, mc_samples))
}

/// Monte-Carlo estimate of [`stability_term`] from unlabeled draws.
pub fn mc_stability(
    params: &GmmParams,
    clf: &LinearClassifier,
    budget: &PerturbationBudget,
    mc_samples: usize,
    rng: RngSeed,
) -> Result<McEstimate> {
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be >= 1"));
    }
    check_len(params.d, clf.dim())?;
    clf.ensure_nonzero()?;
    let a = budget.margin_shift(&clf.w);
    let mut r = rng.child(purpose::EVAL).rng();
    let flips = (0..mc_samples)
        .filter(|_| {
            let s = params.draw_labeled(&mut r);
            a > 0.0 && clf.score(&s.x).abs() <= a
        })
        .count();
    Ok(McEstimate::from_counts(flips, mc_samples))
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherBound {
    pub value: f64,
    /// `n ≤ d + 1`: the trivial bound 1 was returned.
    pub trivial: bool,
}

/// VC-dimension upper bound `√(2(d+1)·ln(e·n/(d+1))/n)` on the empirical
/// Rademacher complexity of halfspaces in `ℝ^d`.
pub fn rademacher_halfspace_bound(n: usize, d: usize) -> RademacherBound {
    let vc = (d + 1) as f64;
    if n <= d + 1 {
        return RademacherBound {
            value: 1.0,
            trivial: true,
        };
    }
    let n = n as f64;
    let value = (2.0 * vc * (std::f64::consts::E * n / vc).ln() / n).sqrt();
    RademacherBound {
        value: value.min(1.0),
        trivial: false,
    }
}

/// `3·√(ln(2/δ)/(2n))`.
pub fn confidence_term(n: usize, confidence_delta: f64) -> f64 {
    3.0 * ((2.0 / confidence_delta).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMethod {
    ClosedForm,
    MonteCarlo,
}

impl RiskMethod {
    fn as_str(self) -> &'static str {
        match self {
            RiskMethod::ClosedForm => "closed_form",
            RiskMethod::MonteCarlo => "monte_carlo",
        }
    }
}

pub const RISK_REPORT_VERSION: u32 = 1;

/// All terms of the robust-risk decomposition for one (classifier, eval set,
/// budget) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub v: u32,
    pub method: RiskMethod,
    pub epsilon: f64,
    pub n: usize,
    pub natural_risk: f64,
    pub robust_risk: f64,
    pub stability_term: f64,
    pub empirical_risk: f64,
    pub rademacher_term: f64,
    pub rademacher_trivial: bool,
    pub confidence_delta: f64,
    pub confidence_term: f64,
    /// stability + empirical + rademacher + confidence.
    pub bound_value: f64,
    pub bound_holds: bool,
    pub mc_samples: usize,
}

impl RiskReport {
    pub const CSV_HEADER: &'static str = "v,method,epsilon,n,natural_risk,robust_risk,stability_term,\
empirical_risk,rademacher_term,rademacher_trivial,confidence_delta,confidence_term,bound_value,\
bound_holds,mc_samples";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.v,
            self.method.as_str(),
            self.epsilon,
            self.n,
            self.natural_risk,
            self.robust_risk,
            self.stability_term,
            self.empirical_risk,
            self.rademacher_term,
            self.rademacher_trivial,
            self.confidence_delta,
            self.confidence_term,
            self.bound_value,
            self.bound_holds,
            self.mc_samples
        )
    }
}

/// 0-1 error of `clf` on a labeled set, counting `y·w·x ≤ 0` as an error.
pub fn empirical_risk(clf: &LinearClassifier, eval: &[LabeledSample]) -> Result<f64> {
    if eval.is_empty() {
        return Err(Error::domain("evaluation set must be non-empty"));
    }
    let mut errs = 0usize;
    for s in eval {
        check_len(clf.dim(), s.x.len())?;
        errs += usize::from(linear_errs(&clf.w, &s.x, s.y.value()));
    }
    Ok(errs as f64 / eval.len() as f64)
}

fn assemble(
    method: RiskMethod,
    budget: &PerturbationBudget,
    eval: &[LabeledSample],
    empirical_risk: f64,
    natural: f64,
    robust: f64,
    stability: f64,
    d: usize,
    confidence_delta: f64,
    mc_samples: usize,
) -> RiskReport {
    let rad = rademacher_halfspace_bound(eval.len(), d);
    let conf = confidence_term(eval.len(), confidence_delta);
    let bound_value = stability + empirical_risk + rad.value + conf;
    RiskReport {
        v: RISK_REPORT_VERSION,
        method,
        epsilon: budget.epsilon,
        n: eval.len(),
        natural_risk: natural,
        robust_risk: robust,
        stability_term: stability,
        empirical_risk,
        rademacher_term: rad.value,
        rademacher_trivial: rad.trivial,
        confidence_delta,
        confidence_term: conf,
        bound_value,
        bound_holds: robust <= bound_value,
        mc_samples,
    }
}

fn check_delta(confidence_delta: f64) -> Result<()> {
    if confidence_delta > 0.0 && confidence_delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("confidence_delta must be in (0,1), got {confidence_delta}")))
    }
}

/// Decomposition with population terms in closed form.
pub fn decomposition_report(
    params: &GmmParams,
    clf: &LinearClassifier,
    eval: &[LabeledSample],
    budget: &PerturbationBudget,
    confidence_delta: f64,
) -> Result<RiskReport> {
    check_delta(confidence_delta)?;
    let emp = empirical_risk(clf, eval)?;
    let natural = natural_risk(params, clf)?;
    let robust = robust_risk(params, clf, budget)?;
    let stability = stability_term(params, clf, budget)?;
    Ok(assemble(
        RiskMethod::ClosedForm,
        budget,
        eval,
        emp,
        natural,
        robust,
        stability,
        params.d,
        confidence_delta,
        0,
    ))
}

/// Decomposition with population terms estimated from `mc_samples` fresh draws.
pub fn decomposition_report_mc(
    params: &GmmParams,
    clf: &LinearClassifier,
    eval: &[LabeledSample],
    budget: &PerturbationBudget,
    confidence_delta: f64,
    mc_samples: usize,
    rng: RngSeed,
) -> Result<RiskReport> {
    check_delta(confidence_delta)?;
    let emp = empirical_risk(clf, eval)?;
    let p = Predictor::Linear(clf);
    let natural = mc_risk(p, params, None, None, mc_samples, rng)?.risk;
    let robust = mc_risk(p, params, Some(budget), Some(Attack::ExactLinear), mc_samples, rng)?.risk;
    let stability = mc_stability(params, clf, budget, mc_samples, rng.child(purpose::CLASSIFIER))?.risk;
    Ok(assemble(
        RiskMethod::MonteCarlo,
        budget,
        eval,
        emp,
        natural,
        robust,
        stability,
        params.d,
        confidence_delta,
        mc_samples,
    ))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::gmm::make_sphere_params;

    fn one_d() -> GmmParams {
        GmmParams::new(vec![1.0], 1.0).unwrap()
    }

    fn eps(e: f64) -> PerturbationBudget {
        PerturbationBudget::linf(e).unwrap()
    }

    #[test]
    fn natural_risk_examples() {
        let p = make_sphere_params(100, 1.0, RngSeed::new(1, 0)).unwrap();
        let along = LinearClassifier::new(p.theta_star.iter().map(|v| 3.0 * v).collect());
        // Φ(−√d/σ) = Φ(−√10), 40-digit reference
        assert_relative_eq!(natural_risk(&p, &along).unwrap(), 0.0007827011290012743259, max_relative = 1e-9);

        let mut perp = vec![0.0; 100];
        perp[0] = p.theta_star[1];
        perp[1] = -p.theta_star[0];
        assert_relative_eq!(natural_risk(&p, &LinearClassifier::new(perp)).unwrap(), 0.5, epsilon = 1e-15);

        let against = LinearClassifier::new(p.theta_star.iter().map(|v| -v).collect());
        assert_relative_eq!(
            natural_risk(&p, &against).unwrap(),
            1.0 - 0.0007827011290012743259,
            max_relative = 1e-12
        );
        assert!(matches!(natural_risk(&p, &LinearClassifier::new(vec![0.0; 100])), Err(Error::ZeroWeight)));
    }

    #[test]
    fn robust_risk_examples() {
        let p = one_d();
        let w = LinearClassifier::new(vec![1.0]);
        assert_eq!(robust_risk(&p, &w, &eps(0.0)).unwrap(), natural_risk(&p, &w).unwrap());
        // brute force over the two extreme perturbations ±0.5 in one dimension:
        // the worst is −y·0.5, giving P(y·x ≤ 0.5) with y·x ~ N(1,1)
        assert_relative_eq!(robust_risk(&p, &w, &eps(0.5)).unwrap(), 0.30853753872598689636, max_relative = 1e-12);
        assert!(robust_risk(&p, &w, &eps(1.0)).unwrap() >= 0.5);
        assert!(robust_risk(&p, &w, &eps(3.0)).unwrap() >= 0.5);
    }

    #[test]
    fn stability_examples() {
        let p = one_d();
        let w = LinearClassifier::new(vec![1.0]);
        assert_eq!(stability_term(&p, &w, &eps(0.0)).unwrap(), 0.0);
        assert_relative_eq!(stability_term(&p, &w, &eps(0.5)).unwrap(), 0.24173033745712883036, max_relative = 1e-12);
        assert_relative_eq!(stability_term(&p, &w, &eps(1e6)).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tail_bound_examples() {
        let p = make_sphere_params(100, 1.0, RngSeed::new(3, 0)).unwrap();
        let u = LinearClassifier::new(p.direction());
        let b = robust_risk_tail_bound(&p, &u, &eps(0.0)).unwrap();
        assert_relative_eq!(b, 0.0067379469990854670966, max_relative = 1e-9);
        assert!(robust_risk(&p, &u, &eps(0.0)).unwrap() <= b);

        // margin exactly consumed
        let q = GmmParams::new(vec![1.0, 1.0], 1.0).unwrap();
        let s = 0.5f64.sqrt();
        let w = LinearClassifier::new(vec![s, s]);
        let e = dot(&w.w, &q.theta_star) / norm1(&w.w);
        assert_relative_eq!(robust_risk_tail_bound(&q, &w, &eps(e)).unwrap(), 1.0, epsilon = 1e-15);

        let perp = LinearClassifier::new(vec![s, -s]);
        assert!(matches!(robust_risk_tail_bound(&q, &perp, &eps(0.1)), Err(Error::BoundInapplicable(_))));
        let long = LinearClassifier::new(vec![1.0, 1.0]);
        assert!(matches!(robust_risk_tail_bound(&q, &long, &eps(0.0)), Err(Error::BoundInapplicable(_))));
    }

    #[test]
    fn rademacher_examples() {
        let r = rademacher_halfspace_bound(10_000, 10);
        assert!(!r.trivial);
        // √(22·ln(e·10000/11)/10000), 40-digit reference
        assert_relative_eq!(r.value, 0.13110064537671501037, max_relative = 1e-12);
        let small = rademacher_halfspace_bound(11, 10);
        assert!(small.trivial && small.value == 1.0);
        let near = rademacher_halfspace_bound(12, 10);
        assert!(!near.trivial && near.value > 0.9);
        let mut prev = f64::INFINITY;
        for n in (30..100_000).step_by(997) {
            let v = rademacher_halfspace_bound(n, 10).value;
            assert!(v < prev);
            prev = v;
        }
        assert!(rademacher_halfspace_bound(100_000_000, 10).value < 0.002);
    }

    #[test]
    fn mc_degenerate_sample_count() {
        let p = one_d();
        let w = LinearClassifier::new(vec![1.0]);
        let e = mc_risk(Predictor::Linear(&w), &p, None, None, 1, RngSeed::new(1, 1)).unwrap();
        assert!(e.risk == 0.0 || e.risk == 1.0);
        assert!(e.std_error.is_none());
        assert!(mc_risk(Predictor::Linear(&w), &p, None, None, 0, RngSeed::new(1, 1)).is_err());
    }

    #[test]
    fn mc_natural_matches_closed_form() {
        let p = make_sphere_params(100, 1.0, RngSeed::new(5, 0)).unwrap();
        let w = LinearClassifier::new(p.theta_star.clone());
        let n = 1_000_000;
        let closed = natural_risk(&p, &w).unwrap();
        let mc = mc_risk(Predictor::Linear(&w), &p, None, None, n, RngSeed::new(5, 1)).unwrap();
        let se = (closed * (1.0 - closed) / n as f64).sqrt();
        assert!((mc.risk - closed).abs() <= 3.0 * se, "{} vs {closed}", mc.risk);
    }

    #[test]
    fn report_fields_and_errors() {
        let p = make_sphere_params(20, 1.0, RngSeed::new(8, 0)).unwrap();
        let clf = LinearClassifier::new(p.direction());
        let eval = p.sample_labeled(2000, RngSeed::new(8, 1));
        let r = decomposition_report(&p, &clf, &eval, &eps(0.05), 0.01).unwrap();
        assert_eq!(r.v, 1);
        assert!(r.natural_risk <= r.robust_risk + 1e-12);
        let want = r.stability_term + r.empirical_risk + r.rademacher_term + r.confidence_term;
        assert_eq!(r.bound_value, want);
        assert!(r.bound_holds);
        assert_eq!(RiskReport::CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["v"], 1);
        assert_eq!(json["method"], "closed_form");

        let at_zero = decomposition_report(&p, &clf, &eval, &eps(0.0), 0.01).unwrap();
        assert_eq!(at_zero.stability_term, 0.0);
        assert_eq!(at_zero.robust_risk, at_zero.natural_risk);

        assert!(decomposition_report(&p, &clf, &[], &eps(0.05), 0.01).is_err());
        assert!(decomposition_report(&p, &clf, &eval, &eps(0.05), 1.0).is_err());

        let mc = decomposition_report_mc(&p, &clf, &eval, &eps(0.05), 0.01, 20_000, RngSeed::new(8, 2)).unwrap();
        assert_eq!(mc.method, RiskMethod::MonteCarlo);
        assert!((mc.stability_term - r.stability_term).abs() < 0.02);
    }
}
