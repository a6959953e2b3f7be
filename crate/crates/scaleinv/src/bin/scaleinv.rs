//! Command-line front end: run experiments, check invariance, replay the
//! adversary, verify the per-trial lemmas, and measure scaling.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scaleinv::bounds::{check_core_inequality, interval_lower_bound, INTERVAL_TABLE};
use scaleinv::harness::bench::bench_scaling;
use scaleinv::harness::experiment::{
    run_experiment, AnyLearner, DataSource, ExperimentConfig, GModeSpec, LearnerSpec, LossSpec,
};
use scaleinv::harness::invariance::{invariance_check, TransformKind};
use scaleinv::{Error, Loss};

const SEED_ENV: &str = "SCALEINV_SEED";

#[derive(Parser)]
#[command(name = "scaleinv", version, about = "Scale-invariant online learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerKind {
    Coordwise,
    Fullinv,
    Ogd,
    Zero,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossKind {
    Logistic,
    Hinge,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    Diagonal,
    General,
}

#[derive(Args)]
struct LearnerArgs {
    /// Learner to run
    #[arg(long, value_enum, default_value = "coordwise")]
    learner: LearnerKind,
    /// α for the paper learners (must exceed 9/8)
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Rate constant c for OGD (η_t = c/√t)
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
}

impl LearnerArgs {
    fn spec(&self) -> LearnerSpec {
        match self.learner {
            LearnerKind::Coordwise => LearnerSpec::Coordwise { alpha: self.alpha },
            LearnerKind::Fullinv => LearnerSpec::Fullinv { alpha: self.alpha },
            LearnerKind::Ogd => LearnerSpec::Ogd { c: self.rate },
            LearnerKind::Zero => LearnerSpec::Zero,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Dense CSV file ("y,x1,...,xd" header)
    #[arg(long, conflicts_with_all = ["sparse", "synthetic_d"])]
    csv: Option<PathBuf>,
    /// Sparse "label idx:val" file
    #[arg(long, conflicts_with = "synthetic_d")]
    sparse: Option<PathBuf>,
    /// Synthetic stream dimension (enables the generator)
    #[arg(long)]
    synthetic_d: Option<usize>,
    /// Synthetic stream length
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Synthetic feature scale range, low end
    #[arg(long, default_value_t = 1e-3)]
    scale_lo: f64,
    /// Synthetic feature scale range, high end
    #[arg(long, default_value_t = 1e3)]
    scale_hi: f64,
}

impl DataArgs {
    fn source(&self) -> Result<DataSource, Error> {
        if let Some(path) = &self.csv {
            Ok(DataSource::Csv { path: path.clone() })
        } else if let Some(path) = &self.sparse {
            Ok(DataSource::Sparse { path: path.clone() })
        } else if let Some(d) = self.synthetic_d {
            Ok(DataSource::Synthetic {
                d,
                t: self.trials,
                scale_lo: self.scale_lo,
                scale_hi: self.scale_hi,
                g_mode: GModeSpec::FromLoss,
            })
        } else {
            Err(Error::InvalidParameter(
                "no data source: pass --csv, --sparse, or --synthetic-d".into(),
            ))
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and emit per-trial CSV and summary JSON
    Run {
        /// JSON config file; other flags are ignored when present
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Loss function
        #[arg(long, value_enum, default_value = "logistic")]
        loss: LossKind,
        /// RNG seed (overrides the SCALEINV_SEED env var)
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for trials.csv and summary.json
        #[arg(long)]
        output: Option<PathBuf>,
        /// Number of comparators for certificate checks
        #[arg(long, default_value_t = 20)]
        comparators: usize,
    },
    /// Measure prediction deviation under instance transforms
    Invariance {
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "logistic")]
        loss: LossKind,
        #[arg(long, value_enum, default_value = "diagonal")]
        transform: TransformArg,
        /// Condition-number cap for general transforms
        #[arg(long, default_value_t = 1e3)]
        cond_cap: f64,
        /// Number of sampled transforms
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Fail (exit 1) if the deviation exceeds this value
        #[arg(long)]
        max_deviation: Option<f64>,
    },
    /// Replay the lower-bound adversary against a learner
    Adversary {
        #[command(flatten)]
        learner: LearnerArgs,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 3.0)]
        beta: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Verify the per-trial potential lemmas and scalar inequalities
    VerifyLemmas {
        /// Number of seeded runs per algorithm
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Measure per-trial cost scaling in d
    Bench {
        #[command(flatten)]
        learner: LearnerArgs,
        /// Dimensions to measure
        #[arg(long, value_delimiter = ',', default_values_t = vec![16, 32, 64, 128, 256])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV).ok().and_then(|v| v.parse().ok())
}

fn resolve_seed(flag: Option<u64>) -> Option<u64> {
    flag.or_else(env_seed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            config,
            learner,
            data,
            loss,
            seed,
            output,
            comparators,
        } => {
            let config = match config {
                Some(path) => {
                    let mut c = ExperimentConfig::from_json_file(&path)?;
                    if c.seed.is_none() {
                        c.seed = env_seed();
                    }
                    c
                }
                None => ExperimentConfig {
                    learner: learner.spec(),
                    loss: match loss {
                        LossKind::Logistic => LossSpec::Logistic,
                        LossKind::Hinge => LossSpec::Hinge,
                    },
                    data: data.source()?,
                    seed: resolve_seed(seed),
                    output_dir: output,
                    comparators,
                    invariance: None,
                },
            };
            let report = run_experiment(&config)?;
            let json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
            println!("{json}");
            Ok(())
        }
        Command::Invariance {
            learner,
            data,
            loss,
            transform,
            cond_cap,
            reps,
            seed,
            max_deviation,
        } => {
            let spec = learner.spec();
            let loss = match loss {
                LossKind::Logistic => Loss::Logistic,
                LossKind::Hinge => Loss::Hinge,
            };
            let seed = resolve_seed(seed).ok_or_else(|| {
                Error::InvalidParameter("invariance requires a seed (flag or env)".into())
            })?;
            let config = ExperimentConfig {
                learner: spec.clone(),
                loss: LossSpec::Logistic,
                data: data.source()?,
                seed: Some(seed),
                output_dir: None,
                comparators: 1,
                invariance: None,
            };
            let (examples, _) = scaleinv::harness::experiment::materialize(&config)?;
            let d = examples.first().map(|e| e.x.len()).unwrap_or(1);
            let kind = match transform {
                TransformArg::Diagonal => TransformKind::Diagonal,
                TransformArg::General => TransformKind::General,
            };
            let dev = invariance_check(
                || AnyLearner::from_spec(&spec, d).expect("validated above"),
                &examples,
                &loss,
                kind,
                cond_cap,
                reps,
                seed,
            )?;
            println!("max_rel_deviation: {dev:.3e}");
            if let Some(cap) = max_deviation {
                if dev > cap {
                    return Err(Error::InvalidParameter(format!(
                        "deviation {dev:.3e} exceeds limit {cap:.3e}"
                    )));
                }
            }
            Ok(())
        }
        Command::Adversary {
            learner,
            d,
            trials,
            beta,
            seed,
            output,
        } => {
            let config = ExperimentConfig {
                learner: learner.spec(),
                loss: LossSpec::Logistic,
                data: DataSource::Adversary {
                    d,
                    t: trials,
                    beta,
                },
                seed: Some(resolve_seed(seed).unwrap_or(0)),
                output_dir: output,
                comparators: 1,
                invariance: None,
            };
            let report = run_experiment(&config)?;
            let adv = report.summary.adversary.expect("adversary summary present");
            println!(
                "regret: {:.6} (lower bound {:.6}, comparator S-norm {:.6})",
                adv.regret_vs_comparator, adv.lower_bound, adv.norm_u_s
            );
            Ok(())
        }
        Command::VerifyLemmas {
            runs,
            d,
            trials,
            alpha,
            seed,
        } => {
            let base_seed = resolve_seed(seed).unwrap_or(0);
            let mut worst = f64::INFINITY;
            for kind in [
                LearnerSpec::Coordwise { alpha },
                LearnerSpec::Fullinv { alpha },
            ] {
                let mut min_margin = f64::INFINITY;
                for r in 0..runs {
                    let config = ExperimentConfig {
                        learner: kind.clone(),
                        loss: LossSpec::Logistic,
                        data: DataSource::Synthetic {
                            d,
                            t: trials,
                            scale_lo: 1e-3,
                            scale_hi: 1e3,
                            g_mode: GModeSpec::FromLoss,
                        },
                        seed: Some(base_seed.wrapping_add(r as u64)),
                        output_dir: None,
                        comparators: 1,
                        invariance: None,
                    };
                    let report = run_experiment(&config)?;
                    if let Some(m) = report.summary.lemma_margin_min {
                        min_margin = min_margin.min(m);
                    }
                }
                let name = match kind {
                    LearnerSpec::Coordwise { .. } => "coordwise",
                    _ => "fullinv",
                };
                println!("{name}: min lemma margin {min_margin:.3e} over {runs} runs");
                worst = worst.min(min_margin);
            }
            let mut core_ok = true;
            let mut x = -50.0f64;
            while x <= 50.0 {
                let (lhs, rhs, holds) = check_core_inequality(x);
                if !holds {
                    core_ok = false;
                    eprintln!("core inequality fails at x={x}: {lhs} > {rhs}");
                }
                x += 0.01;
            }
            println!(
                "core inequality on [-50,50]: {}",
                if core_ok { "ok" } else { "FAILED" }
            );
            let mut table_ok = true;
            for &(u, v, _) in INTERVAL_TABLE.iter() {
                let lb = interval_lower_bound(u, v)?;
                if lb <= 0.0 {
                    table_ok = false;
                    eprintln!("interval [{u},{v}] lower bound {lb} not positive");
                }
            }
            println!(
                "interval table bounds: {}",
                if table_ok { "ok" } else { "FAILED" }
            );
            if worst < -1e-9 || !core_ok || !table_ok {
                return Err(Error::InvalidParameter(
                    "lemma verification failed".into(),
                ));
            }
            Ok(())
        }
        Command::Bench {
            learner,
            dims,
            trials,
            seed,
        } => {
            let report = bench_scaling(
                &learner.spec(),
                &dims,
                trials,
                resolve_seed(seed).unwrap_or(0),
            )?;
            for p in &report.points {
                println!("d={:>4}  {:.3e} s/trial", p.d, p.seconds_per_trial);
            }
            println!("log-log slope: {:.3}", report.loglog_slope);
            Ok(())
        }
    }
}
