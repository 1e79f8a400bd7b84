use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use advssl::data::{read_container, write_container};
use advssl::harness::check::{run_battery, write_battery, CheckScale, CRITERIA};
use advssl::harness::config::{Comparison, Statistic};
use advssl::harness::{emit_plot_data, run_experiment, ExperimentConfig, TrainJob};
use advssl::risk::{decomposition_report, decomposition_report_mc, PerturbationBudget, RiskReport};
use advssl::rng::purpose;
use advssl::spectral::{default_max_iters, estimate_spectral, EigenResult, DEFAULT_TOL};
use advssl::{Dataset, GmmParams, LinearClassifier, RngSeed};

/// Adversarial robustness with unlabeled data: mixture-model experiments,
/// spectral estimation and adversarial training.
#[derive(Parser)]
#[command(name = "advssl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "ADVSSL_OUT", default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labeled + unlabeled mixture sample and save it.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_coeff: f64,
        #[arg(long, default_value_t = 1)]
        n_labeled: usize,
        /// Defaults to 8·d.
        #[arg(long)]
        m_unlabeled: Option<usize>,
    },
    /// Fit the spectral classifier to a saved dataset.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Dataset written by `gen`.
        #[arg(long)]
        data: PathBuf,
        /// Optional mixture parameters, to report the eigenvector error.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Robust-risk decomposition of a linear classifier.
    Risk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: PathBuf,
        /// JSON `{"w": [...]}`.
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Size of the freshly drawn evaluation set.
        #[arg(long, default_value_t = 2000)]
        n_eval: usize,
        /// Estimate population terms by Monte Carlo instead of closed form.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Adversarial training from a job file.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an experiment config over seeded trials.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the acceptance battery.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Few trials per criterion; verdicts are not meaningful.
        #[arg(long)]
        quick: bool,
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Aggregate a trial CSV into group,x,y_median,y_q25,y_q75.
    PlotData {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        group_by: Option<String>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen {
            common,
            d,
            sigma_coeff,
            n_labeled,
            m_unlabeled,
        } => {
            let seed = RngSeed::new(common.seed, 0);
            let params = GmmParams::sphere(d, sigma_coeff, seed)?;
            let m = m_unlabeled.unwrap_or(8 * d);
            let ds = Dataset::new(params.sample_labeled(n_labeled, seed), params.sample_unlabeled(m, seed), d)?;
            std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
            write_container(common.out.join("dataset.gmmd"), &ds)?;
            eprintln!("wrote {}", common.out.join("dataset.gmmd").display());
            write(&common.out.join("params.json"), serde_json::to_string_pretty(&params)?)?;
            Ok(true)
        }
        Command::Estimate {
            common,
            data,
            params,
            tol,
            max_iters,
        } => {
            let ds = read_container(&data)?;
            let Some(first) = ds.labeled.first() else {
                bail!("{} has no labeled points", data.display());
            };
            let est = estimate_spectral(
                ds.d,
                first,
                &ds.unlabeled,
                tol,
                max_iters.unwrap_or_else(|| default_max_iters(ds.d)),
                RngSeed::new(common.seed, 0),
            )?;
            if !est.eigen.converged {
                eprintln!("warning: power iteration stopped at residual {:e}", est.eigen.residual);
            }
            if est.tie {
                eprintln!("warning: labeled point is orthogonal to the eigenvector; kept +v");
            }
            write(&common.out.join("classifier.json"), serde_json::to_string_pretty(&est.classifier)?)?;
            write(
                &common.out.join("eigen.csv"),
                format!("{}\n{}\n", EigenResult::CSV_HEADER, est.eigen.csv_row()),
            )?;
            if let Some(p) = params {
                let params: GmmParams = read_json(&p)?;
                let err = advssl::linalg::sign_invariant_distance(&est.eigen.v, &params.direction());
                let nat = advssl::risk::natural_risk(&params, &est.classifier)?;
                println!("eigenvector_error {err}\nnatural_risk {nat}");
            }
            Ok(true)
        }
        Command::Risk {
            common,
            params,
            classifier,
            epsilon,
            delta,
            n_eval,
            mc,
        } => {
            let params: GmmParams = read_json(&params)?;
            let clf: LinearClassifier = read_json(&classifier)?;
            let seed = RngSeed::new(common.seed, 0);
            let eval = params.sample_labeled(n_eval, seed.child(purpose::EVAL));
            let budget = PerturbationBudget::linf(epsilon)?;
            let report = match mc {
                Some(n) => decomposition_report_mc(&params, &clf, &eval, &budget, delta, n, seed)?,
                None => decomposition_report(&params, &clf, &eval, &budget, delta)?,
            };
            write(
                &common.out.join("risk_report.csv"),
                format!("{}\n{}\n", RiskReport::CSV_HEADER, report.csv_row()),
            )?;
            write(&common.out.join("risk_report.json"), serde_json::to_string_pretty(&report)?)?;
            println!(
                "robust_risk {} bound {} holds {}",
                report.robust_risk, report.bound_value, report.bound_holds
            );
            Ok(true)
        }
        Command::Train { common, config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let job = TrainJob::from_json(&text)?;
            let out = job.run(RngSeed::new(common.seed, 0))?;
            write(&common.out.join("train_metrics.csv"), &out.metrics_csv)?;
            write(&common.out.join("checkpoint.json"), serde_json::to_string(&out.checkpoint)?)?;
            let summary = serde_json::json!({
                "clean_test_acc": out.clean_test_acc,
                "robust_test_acc": out.robust_test_acc,
                "dsr": out.dsr,
                "diverged_at_epoch": out.diverged_at,
            });
            write(&common.out.join("train_summary.json"), serde_json::to_string_pretty(&summary)?)?;
            println!("{summary}");
            Ok(out.diverged_at.is_none())
        }
        Command::Sweep {
            common,
            config,
            trials,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.seed = common.seed;
            cfg.validate()?;
            let out = run_experiment(&cfg, jobs)?;
            for e in &out.errors {
                eprintln!(
                    "trial {} (seed {}, stream {}) failed: {}",
                    e.trial, e.seed.seed, e.seed.stream_id, e.message
                );
            }
            let dir = cfg.output.clone().unwrap_or(common.out);
            let (csv, json) = out.write(&dir, cfg.kind.as_str())?;
            eprintln!("wrote {}\nwrote {}", csv.display(), json.display());
            for p in &out.summary.points {
                for a in &p.assertions {
                    let at = match (&out.summary.sweep_param, p.sweep_value) {
                        (Some(name), Some(v)) => format!(" {name}={v}"),
                        _ => String::new(),
                    };
                    let stat = match a.assertion.stat {
                        Statistic::Median => "median",
                        Statistic::Mean => "mean",
                    };
                    let op = match a.assertion.op {
                        Comparison::Le => "<=",
                        Comparison::Ge => ">=",
                    };
                    let value = a.value.map(|v| v.to_string()).unwrap_or_else(|| "n/a".into());
                    println!(
                        "{}{at} {stat} {} = {value} (need {op} {}) {}",
                        cfg.kind.as_str(),
                        a.assertion.metric,
                        a.assertion.threshold,
                        if a.passed { "PASS" } else { "FAIL" }
                    );
                }
            }
            Ok(out.passed())
        }
        Command::Check {
            common,
            jobs,
            quick,
            only,
        } => {
            let scale = if quick { CheckScale::Quick } else { CheckScale::Full };
            let ids: Vec<usize> = if only.is_empty() { (1..=CRITERIA).collect() } else { only };
            let mut results = Vec::new();
            for id in ids {
                let r = run_battery(common.seed, scale, jobs, [id])?.remove(0);
                println!("{}", r.line());
                results.push(r);
            }
            write_battery(&results, &common.out)?;
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            Ok(failed == 0)
        }
        Command::PlotData {
            input,
            x,
            y,
            group_by,
            out,
        } => {
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let tidy = emit_plot_data(&text, &x, &y, group_by.as_deref())?;
            match out {
                Some(p) => write(&p, tidy)?,
                None => print!("{tidy}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
