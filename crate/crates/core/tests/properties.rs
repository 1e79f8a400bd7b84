use advssl::adv::objective::pseudo_labels;
use advssl::adv::{loss_ssl, pgd_attack, softmax_cross_entropy, Classifier, LogisticModel, MlpClassifier, PgdConfig, SslLossConfig};
use advssl::gmm::{make_sphere_params, GmmParams};
use advssl::harness::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentParams};
use advssl::linalg::{dot, norm1, norm2, SymmetricOperator};
use advssl::risk::{natural_risk, robust_risk, robust_risk_tail_bound, stability_term, PerturbationBudget};
use advssl::spectral::{align_sign, top_eigenvector, CovarianceOperator, LinearClassifier};
use advssl::RngSeed;
use proptest::prelude::*;

fn params_from(theta: Vec<f64>, sigma: f64) -> GmmParams {
    GmmParams::new(theta, sigma).unwrap()
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..8).prop_flat_map(|d| {
        (
            prop::collection::vec(-3.0f64..3.0, d),
            prop::collection::vec(-3.0f64..3.0, d),
            0.1f64..4.0,
        )
    })
}

proptest! {
    #[test]
    fn risk_orderings((theta, w, sigma) in instance(), e1 in 0.0f64..2.0, e2 in 0.0f64..2.0) {
        prop_assume!(norm2(&w) > 1e-6);
        let p = params_from(theta, sigma);
        let clf = LinearClassifier::new(w);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let nat = natural_risk(&p, &clf).unwrap();
        let r0 = robust_risk(&p, &clf, &PerturbationBudget::linf(0.0).unwrap()).unwrap();
        let rlo = robust_risk(&p, &clf, &PerturbationBudget::linf(lo).unwrap()).unwrap();
        let rhi = robust_risk(&p, &clf, &PerturbationBudget::linf(hi).unwrap()).unwrap();
        prop_assert_eq!(r0, nat);
        prop_assert!(nat <= rlo && rlo <= rhi);
        let b = PerturbationBudget::linf(hi).unwrap();
        let st = stability_term(&p, &clf, &b).unwrap();
        prop_assert!(rhi <= st + nat + 1e-12);
    }

    #[test]
    fn tail_bound_dominates_when_applicable((theta, w, sigma) in instance(), frac in 0.0f64..1.0) {
        let n = norm2(&w);
        prop_assume!(n > 1e-6);
        let w: Vec<f64> = w.iter().map(|x| x / n).collect();
        let p = params_from(theta, sigma);
        let m = dot(&w, &p.theta_star);
        prop_assume!(m > 0.0);
        let b = PerturbationBudget::linf(frac * m / norm1(&w)).unwrap();
        let clf = LinearClassifier::new(w);
        let exact = robust_risk(&p, &clf, &b).unwrap();
        prop_assert!(exact <= robust_risk_tail_bound(&p, &clf, &b).unwrap() + 1e-12);
    }

    #[test]
    fn pseudo_labels_ignore_positive_score_scaling(seed in 0u64..1000, c in 0.01f64..100.0) {
        let s = RngSeed::new(seed, 0);
        let m = MlpClassifier::init(4, 5, 3, s).unwrap();
        let mut scaled = m.clone();
        // Output layer and bias are the trailing 3·5 + 3 parameters.
        let n = scaled.num_params();
        scaled.params_mut()[n - 18..].iter_mut().for_each(|p| *p *= c);
        let mut rng = s.child(1).rng();
        let xs: Vec<Vec<f64>> = (0..8).map(|_| {
            let mut v = vec![0.0; 4];
            advssl::rng::fill_standard_normal(&mut rng, &mut v);
            v
        }).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        prop_assert_eq!(pseudo_labels(&m, &refs).0, pseudo_labels(&scaled, &refs).0);
    }

    #[test]
    fn pgd_stays_in_box_and_loss_grows_with_k(seed in 0u64..1000, k in 1usize..6, extra in 0usize..5) {
        let mut rng = RngSeed::new(seed, 3).rng();
        use rand::Rng;
        let d = rng.random_range(1..6);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = LogisticModel::new(w, 0.1);
        let eps = 0.3;
        let step = rng.random_range(0.001..0.2);
        let t = rng.random_range(0..2usize);
        let loss = |xa: &[f64]| softmax_cross_entropy(&model.scores(xa), t).0;
        let a = pgd_attack(&model, &x, t, &PgdConfig::new(k, step, eps, false).unwrap(), &mut rng).unwrap();
        let b = pgd_attack(&model, &x, t, &PgdConfig::new(k + extra, step, eps, false).unwrap(), &mut rng).unwrap();
        prop_assert!(loss(&b) >= loss(&a));
        for (xa, xi) in b.iter().zip(&x) {
            prop_assert!((xa - xi).abs() <= eps + 1e-15);
        }
        let mlp = MlpClassifier::init(d, 4, 2, RngSeed::new(seed, 4)).unwrap();
        let c = pgd_attack(&mlp, &x, t, &PgdConfig::new(k, 0.2, eps, true).unwrap(), &mut rng).unwrap();
        for (xa, xi) in c.iter().zip(&x) {
            prop_assert!((xa - xi).abs() <= eps + 1e-15);
        }
    }
}

#[test]
fn ssl_loss_is_linear_in_lambda_for_fixed_attacks() {
    let s = RngSeed::new(8, 0);
    let m = MlpClassifier::init(3, 4, 2, s).unwrap();
    let xs = [vec![0.1, -0.4, 1.0], vec![1.2, 0.3, -0.5]];
    let us = [vec![-0.2, 0.9, 0.4], vec![0.5, 0.5, -1.1], vec![0.0, -0.3, 0.2]];
    let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let ur: Vec<&[f64]> = us.iter().map(Vec::as_slice).collect();
    let pgd = PgdConfig::new(3, 0.05, 0.1, true).unwrap();
    let run = |lambda: f64| {
        loss_ssl(&m, &xr, &[0, 1], &ur, &pgd, &SslLossConfig::new(lambda).unwrap(), &mut s.child(2).rng()).unwrap()
    };
    let (a, b) = (run(0.2), run(0.7));
    let l2 = a.unlabeled.as_ref().unwrap().value;
    assert_eq!(a.supervised.value, b.supervised.value);
    assert!((b.value - a.value - 0.5 * l2).abs() < 1e-12);
    assert!((a.value - (a.supervised.value + 0.2 * l2)).abs() < 1e-12);
}

#[test]
fn power_iteration_reports_its_residual_and_alignment_is_exact() {
    for t in 0..5 {
        let s = RngSeed::trial(21, t);
        let p = make_sphere_params(40, 1.0, s).unwrap();
        let xs = p.sample_unlabeled(320, s);
        let op = CovarianceOperator::new(&xs).unwrap();
        let e = top_eigenvector(&op, 1e-10, 1400, s).unwrap();
        let mut av = vec![0.0; 40];
        op.apply(&e.v, &mut av);
        let r: Vec<f64> = av.iter().zip(&e.v).map(|(a, v)| a - e.eigenvalue * v).collect();
        assert!((norm2(&r) - e.residual).abs() <= 1e-10);
        let lab = p.sample_labeled(1, s).remove(0);
        let al = align_sign(&e.v, &lab).unwrap();
        let neg: Vec<f64> = e.v.iter().map(|x| -x).collect();
        assert!(al.classifier.w == e.v || al.classifier.w == neg);
    }
}

#[test]
fn sign_rate_meets_the_concentration_bound() {
    let p = ExperimentParams { d: 100, m_factor: 8.0, ..Default::default() };
    let out = run_experiment(&ExperimentConfig::new(ExperimentKind::SignAlignment, 1000, 77, p), 1).unwrap();
    let pt = &out.summary.points[0];
    let freq = pt.metrics["sign_correct"].mean.unwrap();
    let tau = pt.metrics["eigen_error"].median.unwrap();
    let (d, sigma2) = (100.0f64, 10.0f64);
    let floor = 1.0 - (-d * (1.0 - tau * tau / 2.0).powi(2) / (2.0 * sigma2)).exp();
    let se = (freq * (1.0 - freq) / 1000.0).sqrt();
    assert!(freq >= floor - 3.0 * se, "freq {freq}, floor {floor}, se {se}");
}

#[test]
fn trial_streams_are_injective() {
    let ids: std::collections::HashSet<(u64, u64)> =
        (0..1000).map(|i| RngSeed::trial(5, i)).map(|s| (s.seed, s.stream_id)).collect();
    assert_eq!(ids.len(), 1000);
    assert!((0..1000).all(|i| RngSeed::trial(5, i).stream_id == i));
}
