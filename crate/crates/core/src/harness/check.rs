//! The acceptance battery. Each criterion runs at a fixed setting, writes its
//! per-trial CSV(s) and reports a single pass/fail verdict. Timing is
//! reported but kept out of the CSVs so that repeated runs are
//! byte-identical.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::adv::{
    loss_l1, loss_l2, loss_ssl, pgd_attack, softmax_cross_entropy, Classifier, LogisticModel, MlpClassifier, PgdConfig,
    SslLossConfig,
};
use crate::error::{Error, Result};
use crate::gmm::{GmmParams, Sign};
use crate::linalg::{dot, norm1, norm2};
use crate::risk::{mc_risk, robust_risk, robust_risk_tail_bound, Attack, PerturbationBudget, Predictor};
use crate::rng::{fill_standard_normal, RngSeed};
use crate::spectral::LinearClassifier;

use super::config::{ExperimentConfig, ExperimentKind, ExperimentParams, SweepAxis, SweepParam};
use super::run::{map_ordered, run_experiment, ExperimentOutput};

pub const CRITERIA: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckScale {
    /// The stated trial counts and dimensions.
    Full,
    /// A few trials per criterion; exercises the pipeline, verdicts are not
    /// meaningful.
    Quick,
}

impl CheckScale {
    fn pick(self, full: usize, quick: usize) -> usize {
        match self {
            CheckScale::Full => full,
            CheckScale::Quick => quick,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    /// Measured statistic(s) in words.
    pub measured: String,
    pub requirement: String,
    pub elapsed_secs: f64,
    pub runtime_limit_secs: f64,
    /// `(file name, contents)` of the per-trial CSVs.
    #[serde(skip)]
    pub files: Vec<(String, String)>,
}

impl CriterionResult {
    /// One line: id, verdict, title, measurement, requirement, time.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} | {} | {} | need {} | {:.1}s{}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.measured,
            self.requirement,
            self.elapsed_secs,
            if self.runtime_limit_secs.is_finite() {
                format!(" (limit {}s)", self.runtime_limit_secs)
            } else {
                String::new()
            }
        )
    }
}

/// Seed for criterion `id`, derived from the master seed.
pub fn criterion_seed(master: u64, id: usize) -> u64 {
    RngSeed::new(master, 0).child(id as u64).seed
}

struct Partial {
    passed: bool,
    measured: String,
    files: Vec<(String, String)>,
}

fn finish(id: usize, title: &'static str, requirement: String, limit: f64, start: Instant, p: Partial) -> CriterionResult {
    let elapsed_secs = start.elapsed().as_secs_f64();
    CriterionResult {
        id,
        title,
        passed: p.passed && elapsed_secs < limit,
        measured: p.measured,
        requirement,
        elapsed_secs,
        runtime_limit_secs: limit,
        files: p.files,
    }
}

fn point_median(out: &ExperimentOutput, point: usize, metric: &str) -> f64 {
    out.summary.points[point]
        .metrics
        .get(metric)
        .and_then(|m| m.median)
        .unwrap_or(f64::NAN)
}

fn point_mean(out: &ExperimentOutput, point: usize, metric: &str) -> f64 {
    out.summary.points[point]
        .metrics
        .get(metric)
        .and_then(|m| m.mean)
        .unwrap_or(f64::NAN)
}

fn all_completed(out: &ExperimentOutput) -> bool {
    out.errors.is_empty()
}

fn exp(kind: ExperimentKind, trials: usize, seed: u64, params: ExperimentParams) -> ExperimentConfig {
    ExperimentConfig::new(kind, trials, seed, params)
}

fn file(id: usize, suffix: &str, out: &ExperimentOutput) -> (String, String) {
    (format!("criterion_{id:02}_{suffix}.csv"), out.csv.clone())
}

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize, master: u64, scale: CheckScale, jobs: usize) -> Result<CriterionResult> {
    let seed = criterion_seed(master, id);
    let start = Instant::now();
    match id {
        1 => {
            let p = ExperimentParams {
                d: 100,
                mc_samples: scale.pick(10_000, 1_000),
                ..Default::default()
            };
            let out = run_experiment(&exp(ExperimentKind::OneShotNatural, scale.pick(200, 10), seed, p), jobs)?;
            let m = point_median(&out, 0, "natural_risk_mc");
            let exact = point_median(&out, 0, "natural_risk");
            Ok(finish(1, "one-shot baseline natural risk, d=100", "median MC natural risk <= 0.02".into(), 30.0, start, Partial {
                passed: all_completed(&out) && m <= 0.02,
                measured: format!("median MC natural risk {m:.5} (closed form {exact:.5})"),
                files: vec![file(1, "one_shot_natural", &out)],
            }))
        }
        2 => {
            let p = ExperimentParams {
                d: 500,
                epsilon: 0.5,
                ..Default::default()
            };
            let out = run_experiment(&exp(ExperimentKind::OneShotRobust, scale.pick(200, 10), seed, p), jobs)?;
            let m = point_median(&out, 0, "robust_risk");
            Ok(finish(2, "one-shot baseline robust risk, d=500, eps=0.5", ">= 0.25".into(), 60.0, start, Partial {
                passed: all_completed(&out) && m >= 0.25,
                measured: format!("median robust risk {m:.5}"),
                files: vec![file(2, "one_shot_robust", &out)],
            }))
        }
        3 => {
            let base = ExperimentParams {
                epsilon: 0.5,
                m_factor: 8.0,
                ..Default::default()
            };
            let small = ExperimentParams { d: 500, ..base.clone() };
            let large = ExperimentParams { d: 2000, ..base };
            let a = run_experiment(&exp(ExperimentKind::SpectralRobust, scale.pick(100, 4), seed, small), jobs)?;
            let b = run_experiment(&exp(ExperimentKind::SpectralRobust, scale.pick(100, 1), seed, large), jobs)?;
            let (ma, mb) = (point_median(&a, 0, "robust_risk"), point_median(&b, 0, "robust_risk"));
            Ok(finish(3, "spectral estimator robust risk, m=8d, eps=0.5", "d=500 <= 0.05 and d=2000 <= 0.01".into(), 300.0, start, Partial {
                passed: all_completed(&a) && all_completed(&b) && ma <= 0.05 && mb <= 0.01,
                measured: format!("median robust risk d=500 {ma:.3e}, d=2000 {mb:.3e}"),
                files: vec![file(3, "d500", &a), file(3, "d2000", &b)],
            }))
        }
        4 => {
            let mut cfg = exp(ExperimentKind::EigenDecay, scale.pick(50, 4), seed, ExperimentParams { d: 100, ..Default::default() });
            cfg.sweep = Some(SweepAxis {
                param: SweepParam::MFactor,
                values: vec![2.0, 8.0, 32.0],
            });
            let out = run_experiment(&cfg, jobs)?;
            let meds: Vec<f64> = (0..3).map(|i| point_median(&out, i, "eigen_error")).collect();
            let drop = 1.0 - meds[2] / meds[0];
            let monotone = meds.windows(2).all(|w| w[1] <= w[0]);
            Ok(finish(4, "eigenvector error decay, d=100, m in {2d,8d,32d}", "non-increasing medians, >= 25% drop".into(), 120.0, start, Partial {
                passed: all_completed(&out) && monotone && drop >= 0.25,
                measured: format!("medians {:.4}/{:.4}/{:.4}, drop {:.1}%", meds[0], meds[1], meds[2], 100.0 * drop),
                files: vec![file(4, "eigen_decay", &out)],
            }))
        }
        5 => {
            let p = ExperimentParams { d: 100, m_factor: 8.0, ..Default::default() };
            let out = run_experiment(&exp(ExperimentKind::SignAlignment, scale.pick(1000, 10), seed, p), jobs)?;
            let f = point_mean(&out, 0, "sign_correct");
            Ok(finish(5, "sign selection by one labeled point, d=100, m=8d", "frequency >= 0.99".into(), 120.0, start, Partial {
                passed: all_completed(&out) && f >= 0.99,
                measured: format!("sign-correct frequency {f:.4}"),
                files: vec![file(5, "sign_alignment", &out)],
            }))
        }
        6 => {
            let trials = scale.pick(100, 5);
            let p = ExperimentParams {
                d: 20,
                n_eval: 2000,
                confidence_delta: 0.01,
                epsilon: 0.05,
                m_factor: 8.0,
                ..Default::default()
            };
            let out = run_experiment(&exp(ExperimentKind::DecompositionBound, trials, seed, p), jobs)?;
            let count = |m: &str| {
                out.csv
                    .lines()
                    .skip(1)
                    .filter(|l| column(&out.csv, l, m) == Some(1.0))
                    .count()
            };
            let holds = count("holds_all");
            let core = count("core_holds_all");
            let need = trials - trials / 100;
            Ok(finish(6, "robust-risk decomposition bound, d=20, n=2000", format!("bound in >= {need}/{trials}, core in {trials}/{trials}"), 60.0, start, Partial {
                passed: all_completed(&out) && holds >= need && core == trials,
                measured: format!("bound held {holds}/{trials}, core held {core}/{trials}"),
                files: vec![file(6, "decomposition_bound", &out)],
            }))
        }
        7 => {
            let (csv, fails) = tail_bound_battery(scale.pick(1000, 50), seed, jobs)?;
            Ok(finish(7, "tail bound dominates exact robust risk", "no violations at tol 1e-12".into(), 10.0, start, Partial {
                passed: fails == 0,
                measured: format!("{fails} violations"),
                files: vec![("criterion_07_tail_bound.csv".into(), csv)],
            }))
        }
        8 => {
            let (csv, fails, worst) = mc_oracle_battery(scale.pick(100, 5), scale.pick(100_000, 10_000), seed, jobs)?;
            Ok(finish(8, "MC exact-attack risk vs closed form", "all within 4 standard errors".into(), 120.0, start, Partial {
                passed: fails == 0,
                measured: format!("{fails} outside, worst {worst:.2} SE"),
                files: vec![("criterion_08_mc_oracle.csv".into(), csv)],
            }))
        }
        9 => {
            let (csv, worst) = gradient_battery(scale.pick(50, 5), seed)?;
            Ok(finish(9, "analytic vs central-difference gradients", "relative error <= 1e-5".into(), 30.0, start, Partial {
                passed: worst <= 1e-5,
                measured: format!("worst relative error {worst:.2e}"),
                files: vec![("criterion_09_gradients.csv".into(), csv)],
            }))
        }
        10 => {
            let (csv, worst) = pgd_linear_battery(scale.pick(100, 10), seed)?;
            Ok(finish(10, "PGD reaches the box corner on linear models", "max deviation <= 1e-9".into(), 5.0, start, Partial {
                passed: worst <= 1e-9,
                measured: format!("max deviation {worst:.2e}"),
                files: vec![("criterion_10_pgd_linear.csv".into(), csv)],
            }))
        }
        11 => {
            let mut cfg = exp(ExperimentKind::SslTrainSweep, scale.pick(10, 2), seed, ssl_params(scale));
            cfg.sweep = Some(SweepAxis {
                param: SweepParam::Lambda,
                values: vec![0.0, 0.3],
            });
            let out = run_experiment(&cfg, jobs)?;
            let (a, b) = (point_median(&out, 0, "robust_test_acc"), point_median(&out, 1, "robust_test_acc"));
            Ok(finish(11, "unlabeled adversarial term raises robust accuracy", "lambda=0.3 minus lambda=0 >= 0.02".into(), 600.0, start, Partial {
                passed: all_completed(&out) && b - a >= 0.02,
                measured: format!("median robust acc lambda=0 {a:.4}, lambda=0.3 {b:.4}"),
                files: vec![file(11, "lambda", &out)],
            }))
        }
        12 => {
            let trials = scale.pick(10, 2);
            let strong = ssl_params(scale);
            let weak = ExperimentParams {
                k: 1,
                step_size: Some(strong.epsilon / 20.0),
                ..strong.clone()
            };
            let a = run_experiment(&exp(ExperimentKind::SslTrainSweep, trials, seed, strong), jobs)?;
            let b = run_experiment(&exp(ExperimentKind::SslTrainSweep, trials, seed, weak), jobs)?;
            let (ra, rb) = (point_median(&a, 0, "robust_test_acc"), point_median(&b, 0, "robust_test_acc"));
            Ok(finish(12, "more PGD steps in training raise robust accuracy", "k=7 minus (k=1, step eps/20) > 0".into(), 600.0, start, Partial {
                passed: all_completed(&a) && all_completed(&b) && ra - rb > 0.0,
                measured: format!("median robust acc k=7 {ra:.4}, k=1 {rb:.4}"),
                files: vec![file(12, "k7", &a), file(12, "k1", &b)],
            }))
        }
        13 => {
            let first = run_battery(master, CheckScale::Quick, jobs, 1..=12)?;
            let second = run_battery(master, CheckScale::Quick, jobs, 1..=12)?;
            let files = |rs: &[CriterionResult]| rs.iter().flat_map(|r| r.files.clone()).collect::<Vec<_>>();
            let (fa, fb) = (files(&first), files(&second));
            let differing = fa.iter().zip(&fb).filter(|(a, b)| a != b).count() + fa.len().abs_diff(fb.len());
            Ok(finish(13, "repeated quick battery is byte-identical", "all CSVs identical".into(), f64::INFINITY, start, Partial {
                passed: differing == 0,
                measured: format!("{} files compared, {differing} differ", fa.len()),
                files: Vec::new(),
            }))
        }
        _ => Err(Error::Config(format!("no criterion {id}; valid ids are 1..={CRITERIA}"))),
    }
}

/// Training setup frozen from a pilot run.
pub fn ssl_params(scale: CheckScale) -> ExperimentParams {
    ExperimentParams {
        d: 50,
        sigma_coeff: 1.0,
        n_labeled: 10,
        m_unlabeled: Some(scale.pick(2000, 200)),
        n_test: scale.pick(2000, 200),
        hidden: 32,
        epsilon: 0.1,
        k: 7,
        step_size: None,
        eval_k: 7,
        lambda: 0.3,
        epochs: scale.pick(30, 2),
        learning_rate: 0.1,
        labeled_batch: 10,
        unlabeled_batch: 100,
        ..Default::default()
    }
}

pub fn run_battery(
    master: u64,
    scale: CheckScale,
    jobs: usize,
    ids: impl IntoIterator<Item = usize>,
) -> Result<Vec<CriterionResult>> {
    ids.into_iter().map(|id| run_criterion(id, master, scale, jobs)).collect()
}

/// Writes every criterion CSV plus `check_summary.json` into `dir`.
pub fn write_battery(results: &[CriterionResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in results {
        for (name, body) in &r.files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
    }
    let p = dir.join("check_summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(results)? + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(())
}

fn column(csv: &str, line: &str, name: &str) -> Option<f64> {
    let header = csv.lines().next()?;
    let i = header.split(',').position(|h| h == name)?;
    line.split(',').nth(i)?.parse().ok()
}

fn normals<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    fill_standard_normal(rng, &mut v);
    v
}

fn random_params<R: Rng + ?Sized>(rng: &mut R, d: usize, norm_range: (f64, f64), sigma_range: (f64, f64)) -> Result<GmmParams> {
    let mut theta = normals(rng, d);
    let n = norm2(&theta);
    let target = rng.random_range(norm_range.0..norm_range.1);
    theta.iter_mut().for_each(|t| *t *= target / n);
    let sigma = (rng.random_range(sigma_range.0.ln()..sigma_range.1.ln())).exp();
    GmmParams::new(theta, sigma)
}

/// Random `(w, ε, σ, d)` with a unit `w` whose margin survives the budget;
/// returns the CSV and the number of violations.
pub fn tail_bound_battery(instances: usize, seed: u64, jobs: usize) -> Result<(String, usize)> {
    let rows = map_ordered(instances, jobs, |i| -> Result<(String, bool)> {
        let mut rng = RngSeed::trial(seed, i as u64).rng();
        let d = rng.random_range(1..=50);
        let params = random_params(&mut rng, d, (0.5, 10.0), (0.1, 5.0))?;
        let (w, margin) = loop {
            let mut w = params.direction();
            let g = normals(&mut rng, d);
            let mix = rng.random_range(0.0..1.5);
            w.iter_mut().zip(&g).for_each(|(a, b)| *a += mix * b / (d as f64).sqrt());
            let n = norm2(&w);
            w.iter_mut().for_each(|a| *a /= n);
            let m = dot(&w, &params.theta_star);
            if m > 0.0 {
                break (w, m);
            }
        };
        let eps = rng.random::<f64>() * margin / norm1(&w);
        let clf = LinearClassifier::new(w);
        let b = PerturbationBudget::linf(eps)?;
        let exact = robust_risk(&params, &clf, &b)?;
        let bound = robust_risk_tail_bound(&params, &clf, &b)?;
        let ok = exact <= bound + 1e-12;
        Ok((format!("{i},{d},{},{eps},{exact},{bound},{}\n", params.sigma, u8::from(ok)), ok))
    });
    let mut csv = String::from("instance,d,sigma,epsilon,robust_risk,tail_bound,holds\n");
    let mut fails = 0;
    for r in rows {
        let (line, ok) = r?;
        csv.push_str(&line);
        fails += usize::from(!ok);
    }
    Ok((csv, fails))
}

/// MC robust risk under the exact attack against the closed form. The
/// standard error uses the closed-form probability.
pub fn mc_oracle_battery(instances: usize, samples: usize, seed: u64, jobs: usize) -> Result<(String, usize, f64)> {
    let rows = map_ordered(instances, jobs, |i| -> Result<(String, f64)> {
        let s = RngSeed::trial(seed, i as u64);
        let mut rng = s.rng();
        let d = rng.random_range(1..=20);
        let params = random_params(&mut rng, d, (0.5, 3.0), (0.3, 3.0))?;
        let w = normals(&mut rng, d);
        let eps = rng.random_range(0.0..0.5);
        let clf = LinearClassifier::new(w);
        let b = PerturbationBudget::linf(eps)?;
        let p = robust_risk(&params, &clf, &b)?;
        let est = mc_risk(Predictor::Linear(&clf), &params, Some(&b), Some(Attack::ExactLinear), samples, s.child(1))?;
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        let z = if se > 0.0 {
            (est.risk - p).abs() / se
        } else if est.risk == p {
            0.0
        } else {
            f64::INFINITY
        };
        Ok((format!("{i},{d},{eps},{p},{},{se},{z}\n", est.risk), z))
    });
    let mut csv = String::from("instance,d,epsilon,closed_form,monte_carlo,std_error,z\n");
    let (mut fails, mut worst) = (0, 0.0f64);
    for r in rows {
        let (line, z) = r?;
        csv.push_str(&line);
        fails += usize::from(!(z <= 4.0));
        worst = worst.max(z);
    }
    Ok((csv, fails, worst))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, with a 1e-8 floor on the denominator.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&diff) / norm2(a).max(norm2(b)).max(1e-8)
}

fn ce(scores: &[f64], t: usize) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    lse - scores[t]
}

fn fd_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + h;
            let up = f(&x);
            x[i] = x0 - h;
            let down = f(&x);
            x[i] = x0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Mean CE of `model` with parameters `theta` on fixed points.
fn fixed_point_loss(model: &MlpClassifier, theta: &[f64], xs: &[Vec<f64>], ts: &[usize]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut m = model.clone();
    m.params_mut().copy_from_slice(theta);
    xs.iter().zip(ts).map(|(x, &t)| ce(&m.scores(x), t)).sum::<f64>() / xs.len() as f64
}

fn random_mlp<R: Rng + ?Sized>(rng: &mut R, seed: RngSeed) -> Result<MlpClassifier> {
    let d = rng.random_range(2..=6);
    let h = rng.random_range(2..=6);
    let k = rng.random_range(2..=3);
    let mut m = MlpClassifier::init(d, h, k, seed)?;
    let p = normals(rng, m.num_params());
    m.params_mut().iter_mut().zip(p).for_each(|(a, b)| *a = 0.7 * b);
    Ok(m)
}

/// Central differences against every analytic gradient; returns the CSV
/// and the worst relative error.
pub fn gradient_battery(instances: usize, seed: u64) -> Result<(String, f64)> {
    let mut csv = String::from("instance,target,relative_error\n");
    let mut worst = 0.0f64;
    let mut record = |csv: &mut String, i: usize, target: &str, e: f64| {
        csv.push_str(&format!("{i},{target},{e}\n"));
        worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
    };
    for i in 0..instances {
        let s = RngSeed::trial(seed, i as u64);
        let mut rng = s.rng();
        let model = random_mlp(&mut rng, s.child(1))?;
        let (d, k) = (model.input_dim(), model.num_classes());
        let theta = model.params().to_vec();

        // CE with respect to scores.
        let scores = normals(&mut rng, k);
        let t = rng.random_range(0..k);
        let (_, g) = softmax_cross_entropy(&scores, t);
        record(&mut csv, i, "cross_entropy", relative_error(&g, &fd_grad(&scores, |z| ce(z, t))));

        // MLP parameters and input.
        let x = normals(&mut rng, d);
        let (_, ds) = softmax_cross_entropy(&model.scores(&x), t);
        let mut pg = vec![0.0; model.num_params()];
        let mut ig = vec![0.0; d];
        model.backward(&x, &ds, 1.0, Some(&mut pg), Some(&mut ig));
        let one = [x.clone()];
        record(&mut csv, i, "mlp_params", relative_error(&pg, &fd_grad(&theta, |th| fixed_point_loss(&model, th, &one, &[t]))));
        record(&mut csv, i, "mlp_input", relative_error(&ig, &fd_grad(&x, |z| ce(&model.scores(z), t))));

        // Adversarial losses, differentiated at their attacked points.
        let b = rng.random_range(1..=4);
        let xs: Vec<Vec<f64>> = (0..b).map(|_| normals(&mut rng, d)).collect();
        let ys: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
        let us: Vec<Vec<f64>> = (0..rng.random_range(1..=4)).map(|_| normals(&mut rng, d)).collect();
        let eps = rng.random_range(0.05..0.3);
        let pgd = PgdConfig::new(rng.random_range(1..=5), eps / 3.0, eps, true)?;
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let ur: Vec<&[f64]> = us.iter().map(Vec::as_slice).collect();

        let l1 = loss_l1(&model, &xr, &ys, &pgd, &mut rng)?;
        let f1 = |th: &[f64]| fixed_point_loss(&model, th, &l1.attacked, &l1.targets);
        record(&mut csv, i, "loss_l1", relative_error(&l1.grad, &fd_grad(&theta, f1)));

        let l2 = loss_l2(&model, &ur, &pgd, &mut rng)?;
        let f2 = |th: &[f64]| fixed_point_loss(&model, th, &l2.attacked, &l2.targets);
        record(&mut csv, i, "loss_l2", relative_error(&l2.grad, &fd_grad(&theta, f2)));

        let lambda = rng.random_range(0.1..1.0);
        let ssl = loss_ssl(&model, &xr, &ys, &ur, &pgd, &SslLossConfig::new(lambda)?, &mut rng)?;
        let un = ssl.unlabeled.as_ref().ok_or_else(|| Error::domain("unlabeled term missing"))?;
        let fs = |th: &[f64]| {
            fixed_point_loss(&model, th, &ssl.supervised.attacked, &ssl.supervised.targets)
                + lambda * fixed_point_loss(&model, th, &un.attacked, &un.targets)
        };
        record(&mut csv, i, "loss_ssl", relative_error(&ssl.grad, &fd_grad(&theta, fs)));
    }
    Ok((csv, worst))
}

/// Deterministic PGD with `k·δ ≥ ε` on random logistic models; returns the
/// CSV and the largest deviation from `x − y·ε·sign(w)` over `wᵢ ≠ 0`.
pub fn pgd_linear_battery(instances: usize, seed: u64) -> Result<(String, f64)> {
    let mut csv = String::from("instance,d,k,step,epsilon,max_deviation\n");
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = RngSeed::trial(seed, i as u64).rng();
        let d = rng.random_range(1..=10);
        let w: Vec<f64> = (0..d)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        let model = LogisticModel::new(w.clone(), rng.random_range(-1.0..1.0));
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = if rng.random::<bool>() { Sign::Pos } else { Sign::Neg };
        let eps = rng.random_range(0.01..1.0);
        let k = rng.random_range(1..=10);
        let step = eps / k as f64 * rng.random_range(1.0..3.0);
        let cfg = PgdConfig::new(k, step, eps, false)?;
        let t = crate::gmm::ClassLabel::class_index(y);
        let xa = pgd_attack(&model, &x, t, &cfg, &mut rng)?;
        let dev = (0..d)
            .filter(|&j| w[j] != 0.0)
            .map(|j| (xa[j] - (x[j] - y.value() * eps * w[j].signum())).abs())
            .fold(0.0, f64::max);
        csv.push_str(&format!("{i},{d},{k},{step},{eps},{dev}\n"));
        worst = worst.max(dev);
    }
    Ok((csv, worst))
}
