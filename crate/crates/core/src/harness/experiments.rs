//! One seeded trial per call. Each routine returns its metrics in the order
//! given by [`metric_names`]; booleans are encoded as 0/1.

use crate::adv::{accuracy, train, MlpClassifier, PgdConfig, SslLossConfig, TrainConfig};
use crate::error::Result;
use crate::gmm::{make_sphere_params, Dataset, GmmParams};
use crate::linalg::{norm2, sign_invariant_distance};
use crate::risk::{decomposition_report, mc_risk, natural_risk, robust_risk, PerturbationBudget, Predictor, RiskReport};
use crate::rng::{fill_standard_normal, purpose, RngSeed};
use crate::spectral::{concentration_condition, estimate_spectral, one_shot_baseline, LinearClassifier, SpectralEstimate};

use super::config::{ExperimentKind, ExperimentParams};

/// Slack for the decomposition identity `robust ≤ natural + stability`,
/// which holds exactly in real arithmetic.
pub const CORE_TOL: f64 = 1e-12;

pub fn metric_names(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::OneShotNatural => &["natural_risk_mc", "mc_std_error", "natural_risk"],
        ExperimentKind::OneShotRobust => &["robust_risk", "natural_risk"],
        ExperimentKind::SpectralRobust => &[
            "robust_risk",
            "natural_risk",
            "eigen_error",
            "residual",
            "iterations",
            "converged",
            "sign_tie",
            "concentration_holds",
        ],
        ExperimentKind::EigenDecay => &["eigen_error", "residual", "iterations", "converged"],
        ExperimentKind::SignAlignment => &["sign_correct", "eigen_error", "sign_tie"],
        ExperimentKind::DecompositionBound => &[
            "robust_risk_random",
            "bound_random",
            "holds_random",
            "core_holds_random",
            "robust_risk_spectral",
            "bound_spectral",
            "holds_spectral",
            "core_holds_spectral",
            "holds_all",
            "core_holds_all",
        ],
        ExperimentKind::SslTrainSweep => &[
            "clean_test_acc",
            "robust_test_acc",
            "dsr",
            "clean_train_acc",
            "robust_train_acc",
            "final_loss",
            "diverged",
        ],
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn budget(p: &ExperimentParams) -> Result<PerturbationBudget> {
    PerturbationBudget::linf(p.epsilon)
}

fn spectral(p: &ExperimentParams, params: &GmmParams, seed: RngSeed) -> Result<SpectralEstimate> {
    let labeled = params.sample_labeled(1, seed).remove(0);
    let unlabeled = params.sample_unlabeled(p.unlabeled_count(), seed);
    estimate_spectral(p.d, &labeled, &unlabeled, p.tol, p.power_iters(), seed)
}

fn one_shot(params: &GmmParams, seed: RngSeed) -> LinearClassifier {
    one_shot_baseline(&params.sample_labeled(1, seed)[0])
}

pub fn run_trial(kind: ExperimentKind, p: &ExperimentParams, seed: RngSeed) -> Result<Vec<f64>> {
    let params = make_sphere_params(p.d, p.sigma_coeff, seed)?;
    match kind {
        ExperimentKind::OneShotNatural => {
            let clf = one_shot(&params, seed);
            let mc = mc_risk(Predictor::Linear(&clf), &params, None, None, p.mc_samples, seed.child(purpose::EVAL))?;
            Ok(vec![mc.risk, mc.std_error.unwrap_or(f64::NAN), natural_risk(&params, &clf)?])
        }
        ExperimentKind::OneShotRobust => {
            let clf = one_shot(&params, seed);
            Ok(vec![robust_risk(&params, &clf, &budget(p)?)?, natural_risk(&params, &clf)?])
        }
        ExperimentKind::SpectralRobust => {
            let est = spectral(p, &params, seed)?;
            let err = sign_invariant_distance(&est.eigen.v, &params.direction());
            Ok(vec![
                robust_risk(&params, &est.classifier, &budget(p)?)?,
                natural_risk(&params, &est.classifier)?,
                err,
                est.eigen.residual,
                est.eigen.iterations as f64,
                flag(est.eigen.converged),
                flag(est.tie),
                flag(concentration_condition(params.sigma, p.d, p.unlabeled_count())),
            ])
        }
        ExperimentKind::EigenDecay => {
            let est = spectral(p, &params, seed)?;
            Ok(vec![
                sign_invariant_distance(&est.eigen.v, &params.direction()),
                est.eigen.residual,
                est.eigen.iterations as f64,
                flag(est.eigen.converged),
            ])
        }
        ExperimentKind::SignAlignment => {
            let est = spectral(p, &params, seed)?;
            let correct = crate::linalg::dot(&est.classifier.w, &params.theta_star) > 0.0;
            Ok(vec![
                flag(correct),
                sign_invariant_distance(&est.eigen.v, &params.direction()),
                flag(est.tie),
            ])
        }
        ExperimentKind::DecompositionBound => {
            let b = budget(p)?;
            let eval = params.sample_labeled(p.n_eval, seed.child(purpose::EVAL));
            let random = random_unit(p.d, seed.child(purpose::CLASSIFIER));
            let est = spectral(p, &params, seed)?;
            let r1 = decomposition_report(&params, &random, &eval, &b, p.confidence_delta)?;
            let r2 = decomposition_report(&params, &est.classifier, &eval, &b, p.confidence_delta)?;
            let core = |r: &RiskReport| r.robust_risk <= r.natural_risk + r.stability_term + CORE_TOL;
            Ok(vec![
                r1.robust_risk,
                r1.bound_value,
                flag(r1.bound_holds),
                flag(core(&r1)),
                r2.robust_risk,
                r2.bound_value,
                flag(r2.bound_holds),
                flag(core(&r2)),
                flag(r1.bound_holds && r2.bound_holds),
                flag(core(&r1) && core(&r2)),
            ])
        }
        ExperimentKind::SslTrainSweep => ssl_trial(p, &params, seed),
    }
}

/// Uniform direction on the unit sphere.
pub fn random_unit(d: usize, seed: RngSeed) -> LinearClassifier {
    let mut rng = seed.rng();
    let mut w = vec![0.0; d];
    loop {
        fill_standard_normal(&mut rng, &mut w);
        let n = norm2(&w);
        if n > 0.0 {
            w.iter_mut().for_each(|x| *x /= n);
            return LinearClassifier::new(w);
        }
    }
}

fn ssl_trial(p: &ExperimentParams, params: &GmmParams, seed: RngSeed) -> Result<Vec<f64>> {
    let labeled = params.sample_labeled(p.n_labeled, seed);
    let unlabeled = params.sample_unlabeled(p.unlabeled_count(), seed);
    let test = params.sample_labeled(p.n_test, seed.child(purpose::EVAL));
    let data = Dataset::new(labeled, unlabeled, p.d)?;
    let model = MlpClassifier::init(p.d, p.hidden, 2, seed.child(purpose::MODEL_INIT))?;
    let pgd = PgdConfig::new(p.k, p.pgd_step(), p.epsilon, true)?;
    let cfg = TrainConfig {
        epochs: p.epochs,
        labeled_batch: p.labeled_batch,
        unlabeled_batch: p.unlabeled_batch,
        learning_rate: p.learning_rate,
        lr_decay_epochs: p.lr_decay_epochs.clone(),
        lr_decay_factor: p.lr_decay_factor,
        seed,
    };
    let out = train(model, &data, &[], &cfg, &pgd, &SslLossConfig::new(p.lambda)?)?;
    let eval = PgdConfig::new(p.eval_k, p.epsilon / 4.0, p.epsilon, false)?;
    let (clean, robust) = accuracy(&out.model, &test, &eval)?;
    let (clean_tr, robust_tr) = accuracy(&out.model, &data.labeled, &eval)?;
    let final_loss = out
        .divergence
        .as_ref()
        .map(|d| d.loss)
        .or_else(|| out.log.last().map(|m| m.loss))
        .unwrap_or(f64::NAN);
    let dsr = if clean > 0.0 { robust / clean } else { f64::NAN };
    Ok(vec![
        clean,
        robust,
        dsr,
        clean_tr,
        robust_tr,
        final_loss,
        flag(out.divergence.is_some()),
    ])
}
