use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::stats::{mean, quantile};

use super::config::{Assertion, ExperimentConfig, Statistic};
use super::experiments::{metric_names, run_trial};

/// Bumped whenever experiment CSV columns change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub median: Option<f64>,
    /// `None` when fewer than two trials completed.
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub mean: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let iqr = values.len() >= 2;
        Self {
            median: quantile(values, 0.5),
            q25: if iqr { quantile(values, 0.25) } else { None },
            q75: if iqr { quantile(values, 0.75) } else { None },
            mean: mean(values),
        }
    }

    pub fn get(&self, stat: Statistic) -> Option<f64> {
        match stat {
            Statistic::Median => self.median,
            Statistic::Mean => self.mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    #[serde(flatten)]
    pub assertion: Assertion,
    pub value: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub sweep_value: Option<f64>,
    pub completed: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub assertions: Vec<AssertionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub seed: u64,
    pub trials: usize,
    pub sweep_param: Option<String>,
    pub points: Vec<PointSummary>,
    pub passed: bool,
    /// Seconds since the Unix epoch. The only non-reproducible field.
    pub generated_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialError {
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: RngSeed,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// One row per (sweep point, trial).
    pub csv: String,
    pub summary: Summary,
    pub errors: Vec<TrialError>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    /// Writes `<stem>.csv` and `<stem>_summary.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}_summary.json"));
        std::fs::write(&csv, &self.csv).map_err(|e| Error::io(&csv, e))?;
        let text = serde_json::to_string_pretty(&self.summary)?;
        std::fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
        Ok((csv, json))
    }
}

/// Maps `f` over `0..n`, on a pool of `jobs` threads when the `parallel`
/// feature is on. Results keep index order.
pub fn map_ordered<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    let _ = jobs;
    (0..n).map(f).collect()
}

#[cfg(target_arch = "wasm32")]
fn now() -> u64 {
    0
}

#[cfg(not(target_arch = "wasm32"))]
fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs every (sweep point, trial) pair. Trial `i` uses
/// `RngSeed::trial(seed, i)` at every sweep point, so points share data
/// draws where their sizes agree. Failed trials are recorded and skipped.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let points = cfg.points()?;
    let names = metric_names(cfg.kind);
    let results = map_ordered(points.len() * cfg.trials, jobs.max(1), |j| {
        let (pi, t) = (j / cfg.trials, j % cfg.trials);
        let seed = RngSeed::trial(cfg.seed, t as u64);
        run_trial(cfg.kind, &points[pi].1, seed)
    });

    let sweep_name = cfg.sweep.as_ref().map(|s| s.param.as_str());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["v", "kind", "sweep_param", "sweep_value", "trial", "seed", "stream_id"];
    header.extend_from_slice(names);
    header.push("error");
    w.write_record(&header)?;

    let mut errors = Vec::new();
    let mut summaries = Vec::with_capacity(points.len());
    for (pi, (value, _)) in points.iter().enumerate() {
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        let mut failed = 0;
        for t in 0..cfg.trials {
            let seed = RngSeed::trial(cfg.seed, t as u64);
            let mut row = vec![
                CSV_SCHEMA_VERSION.to_string(),
                cfg.kind.as_str().to_string(),
                sweep_name.unwrap_or("").to_string(),
                value.map(|v| v.to_string()).unwrap_or_default(),
                t.to_string(),
                seed.seed.to_string(),
                seed.stream_id.to_string(),
            ];
            match &results[pi * cfg.trials + t] {
                Ok(vals) => {
                    for (c, v) in columns.iter_mut().zip(vals) {
                        if v.is_finite() {
                            c.push(*v);
                        }
                    }
                    row.extend(vals.iter().map(|v| v.to_string()));
                    row.push(String::new());
                }
                Err(e) => {
                    failed += 1;
                    row.extend(names.iter().map(|_| String::new()));
                    row.push(e.to_string());
                    errors.push(TrialError {
                        sweep_value: *value,
                        trial: t,
                        seed,
                        message: e.to_string(),
                    });
                }
            }
            w.write_record(&row)?;
        }
        let metrics: BTreeMap<String, MetricSummary> = names
            .iter()
            .zip(&columns)
            .map(|(n, c)| (n.to_string(), MetricSummary::of(c)))
            .collect();
        let assertions = cfg
            .assertions
            .iter()
            .map(|a| {
                let value = metrics.get(&a.metric).and_then(|m| m.get(a.stat));
                AssertionOutcome {
                    assertion: a.clone(),
                    value,
                    passed: a.holds(value),
                }
            })
            .collect();
        summaries.push(PointSummary {
            sweep_value: *value,
            completed: cfg.trials - failed,
            failed,
            metrics,
            assertions,
        });
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let passed = summaries.iter().all(|p| p.assertions.iter().all(|a| a.passed));
    Ok(ExperimentOutput {
        csv,
        summary: Summary {
            kind: cfg.kind.as_str().to_string(),
            seed: cfg.seed,
            trials: cfg.trials,
            sweep_param: sweep_name.map(str::to_string),
            points: summaries,
            passed,
            generated_at: now(),
        },
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Comparison, ExperimentKind, ExperimentParams, SweepAxis, SweepParam};

    fn spectral_cfg(trials: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::SpectralRobust,
            trials,
            11,
            ExperimentParams {
                d: 500,
                m_factor: 4.0,
                epsilon: 0.5,
                ..Default::default()
            },
        );
        cfg.assertions.push(Assertion {
            metric: "robust_risk".into(),
            stat: Statistic::Median,
            op: Comparison::Le,
            threshold: 0.05,
        });
        cfg
    }

    #[test]
    fn summary_has_median_and_flag() {
        let out = run_experiment(&spectral_cfg(3), 1).unwrap();
        let p = &out.summary.points[0];
        assert!(p.metrics["robust_risk"].median.unwrap() <= 0.05);
        assert!(p.assertions[0].passed);
        assert!(out.passed());
        assert_eq!(out.csv.lines().count(), 4);
        let json = serde_json::to_value(&out.summary).unwrap();
        assert!(json["points"][0]["metrics"]["robust_risk"]["median"].is_number());
        assert_eq!(json["points"][0]["assertions"][0]["passed"], true);
    }

    #[test]
    fn single_trial_has_null_iqr() {
        let mut cfg = spectral_cfg(1);
        cfg.params.d = 30;
        let out = run_experiment(&cfg, 1).unwrap();
        let json = serde_json::to_value(&out.summary).unwrap();
        let m = &json["points"][0]["metrics"]["robust_risk"];
        assert!(m["median"].is_number());
        assert!(m["q25"].is_null() && m["q75"].is_null());
    }

    #[test]
    fn failed_trials_are_recorded_and_skipped() {
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::SslTrainSweep,
            2,
            3,
            ExperimentParams {
                d: 4,
                hidden: 4,
                m_unlabeled: Some(20),
                n_test: 20,
                epochs: 1,
                epsilon: 0.1,
                ..Default::default()
            },
        );
        cfg.sweep = Some(SweepAxis {
            param: SweepParam::NLabeled,
            values: vec![0.0, 4.0],
        });
        let out = run_experiment(&cfg, 1).unwrap();
        assert_eq!(out.errors.len(), 2);
        assert!(out.errors.iter().all(|e| e.sweep_value == Some(0.0)));
        assert_eq!(out.summary.points[0].failed, 2);
        assert_eq!(out.summary.points[1].completed, 2);
        assert_eq!(out.csv.lines().count(), 5);
    }

    #[test]
    fn failing_assertion_fails_the_run() {
        let mut cfg = spectral_cfg(2);
        cfg.params.d = 30;
        cfg.assertions[0].threshold = -1.0;
        assert!(!run_experiment(&cfg, 1).unwrap().passed());
    }

    #[test]
    fn reruns_are_byte_identical_and_jobs_do_not_matter() {
        let mut cfg = spectral_cfg(4);
        cfg.params.d = 40;
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 3).unwrap();
        assert_eq!(a.csv, b.csv);
        let strip = |s: &Summary| Summary { generated_at: 0, ..s.clone() };
        assert_eq!(strip(&a.summary), strip(&b.summary));
    }
}
