//! Browser demo bindings. Each export takes plain numbers and returns a JSON
//! string; the matching `*_data` functions hold the logic and are usable
//! from native code.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use advssl::adv::{pgd_attack, LogisticModel, PgdConfig};
use advssl::gmm::make_sphere_params;
use advssl::harness::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentParams, SweepAxis, SweepParam};
use advssl::risk::{robust_risk, PerturbationBudget};
use advssl::spectral::{default_max_iters, estimate_spectral, one_shot_baseline, DEFAULT_TOL};
use advssl::{Result, RngSeed, Sign};

#[derive(Debug, Serialize)]
pub struct RiskCurve {
    pub epsilon: Vec<f64>,
    pub one_shot: Vec<f64>,
    pub spectral: Vec<f64>,
    pub m: usize,
}

/// Exact robust risk against ε for the one-label baseline and the spectral
/// estimator, on one mixture draw.
pub fn risk_curve_data(d: usize, sigma_coeff: f64, m_factor: f64, eps_max: f64, points: usize, seed: u64) -> Result<RiskCurve> {
    let s = RngSeed::new(seed, 0);
    let params = make_sphere_params(d, sigma_coeff, s)?;
    let labeled = params.sample_labeled(1, s).remove(0);
    let m = ((m_factor * d as f64).round() as usize).max(1);
    let unlabeled = params.sample_unlabeled(m, s);
    let est = estimate_spectral(d, &labeled, &unlabeled, DEFAULT_TOL, default_max_iters(d), s)?;
    let base = one_shot_baseline(&labeled);
    let points = points.max(2);
    let mut curve = RiskCurve {
        epsilon: Vec::with_capacity(points),
        one_shot: Vec::with_capacity(points),
        spectral: Vec::with_capacity(points),
        m,
    };
    for i in 0..points {
        let eps = eps_max * i as f64 / (points - 1) as f64;
        let b = PerturbationBudget::linf(eps)?;
        curve.epsilon.push(eps);
        curve.one_shot.push(robust_risk(&params, &base, &b)?);
        curve.spectral.push(robust_risk(&params, &est.classifier, &b)?);
    }
    Ok(curve)
}

#[derive(Debug, Serialize)]
pub struct ErrorCurve {
    pub m_factor: Vec<f64>,
    pub median: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

/// Median and quartiles of the eigenvector error as the unlabeled pool grows.
pub fn eigen_error_data(d: usize, sigma_coeff: f64, trials: usize, seed: u64) -> Result<ErrorCurve> {
    let factors = vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let mut cfg = ExperimentConfig::new(
        ExperimentKind::EigenDecay,
        trials.max(1),
        seed,
        ExperimentParams {
            d,
            sigma_coeff,
            ..Default::default()
        },
    );
    cfg.sweep = Some(SweepAxis {
        param: SweepParam::MFactor,
        values: factors.clone(),
    });
    let out = run_experiment(&cfg, 1)?;
    let pick = |f: fn(&advssl::harness::run::MetricSummary) -> Option<f64>| {
        out.summary
            .points
            .iter()
            .map(|p| p.metrics.get("eigen_error").and_then(f).unwrap_or(f64::NAN))
            .collect()
    };
    Ok(ErrorCurve {
        m_factor: factors,
        median: pick(|m| m.median),
        q25: pick(|m| m.q25.or(m.median)),
        q75: pick(|m| m.q75.or(m.median)),
    })
}

#[derive(Debug, Serialize)]
pub struct Scatter {
    /// `[x0, x1, y]` per clean point.
    pub clean: Vec<[f64; 3]>,
    /// Attacked counterparts, same order.
    pub attacked: Vec<[f64; 3]>,
    pub w: [f64; 2],
    pub theta: [f64; 2],
    pub clean_acc: f64,
    pub robust_acc: f64,
}

/// Two-dimensional mixture, spectral classifier, and each test point moved
/// by an ℓ∞ PGD attack.
pub fn pgd_scatter_data(sigma_coeff: f64, epsilon: f64, k: usize, n: usize, seed: u64) -> Result<Scatter> {
    let s = RngSeed::new(seed, 0);
    let params = make_sphere_params(2, sigma_coeff, s)?;
    let labeled = params.sample_labeled(1, s).remove(0);
    let est = estimate_spectral(2, &labeled, &params.sample_unlabeled(400, s), DEFAULT_TOL, default_max_iters(2), s)?;
    let model = LogisticModel::from_linear(&est.classifier);
    let cfg = PgdConfig::new(k.max(1), epsilon / k.max(1) as f64 * 1.5, epsilon, false)?;
    let test = params.sample_labeled(n, s.child(5));
    let mut rng = s.child(8).rng();
    let (mut clean, mut attacked) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut ok, mut robust) = (0usize, 0usize);
    for e in &test {
        let t = usize::from(e.y == Sign::Pos);
        let xa = pgd_attack(&model, &e.x, t, &cfg, &mut rng)?;
        let correct = |x: &[f64]| e.y.value() * (est.classifier.w[0] * x[0] + est.classifier.w[1] * x[1]) > 0.0;
        ok += usize::from(correct(&e.x));
        robust += usize::from(correct(&xa));
        clean.push([e.x[0], e.x[1], e.y.value()]);
        attacked.push([xa[0], xa[1], e.y.value()]);
    }
    let n = test.len().max(1) as f64;
    Ok(Scatter {
        clean,
        attacked,
        w: [est.classifier.w[0], est.classifier.w[1]],
        theta: [params.theta_star[0], params.theta_star[1]],
        clean_acc: ok as f64 / n,
        robust_acc: robust as f64 / n,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen]
pub fn risk_curve(d: usize, sigma_coeff: f64, m_factor: f64, eps_max: f64, points: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(risk_curve_data(d, sigma_coeff, m_factor, eps_max, points, u64::from(seed)))
}

#[wasm_bindgen]
pub fn eigen_error_curve(d: usize, sigma_coeff: f64, trials: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(eigen_error_data(d, sigma_coeff, trials, u64::from(seed)))
}

#[wasm_bindgen]
pub fn pgd_scatter(sigma_coeff: f64, epsilon: f64, k: usize, n: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(pgd_scatter_data(sigma_coeff, epsilon, k, n, u64::from(seed)))
}
