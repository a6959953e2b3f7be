//! Experiment configs, the unified learner wrapper, and report emission.
//!
//! A run executes the online protocol while tracking the per-trial lemma
//! margins and the quantities the regret certificates need, then emits a
//! per-trial CSV and a summary JSON. Identical config + seed gives
//! byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{lower_bound_sequence, random_stream, GMode};
use crate::bounds::{kappa, regret_bound_coordwise, regret_bound_full, zero_predictor_bound};
use crate::coordwise::CoordwiseLearner;
use crate::error::{Error, Result};
use crate::fullinv::FullInvLearner;
use crate::harness::baselines::{OgdLearner, ZeroPredictor};
use crate::harness::data::{load_csv, load_sparse};
use crate::harness::invariance::{invariance_check, TransformKind};
use crate::linalg::quad_form;
use crate::protocol::{Example, Instance, Learner, Loss};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Coordwise { alpha: f64 },
    Fullinv { alpha: f64 },
    Ogd { c: f64 },
    Zero,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossSpec {
    Logistic,
    Hinge,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GModeSpec {
    Signs,
    Uniform,
    FromLoss,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Csv {
        path: PathBuf,
    },
    Sparse {
        path: PathBuf,
    },
    Synthetic {
        d: usize,
        t: usize,
        scale_lo: f64,
        scale_hi: f64,
        g_mode: GModeSpec,
    },
    Adversary {
        d: usize,
        t: usize,
        beta: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceSpec {
    pub kind: TransformKind,
    pub cond_cap: f64,
    pub reps: usize,
}

fn default_comparators() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub learner: LearnerSpec,
    pub loss: LossSpec,
    pub data: DataSource,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_comparators")]
    pub comparators: usize,
    #[serde(default)]
    pub invariance: Option<InvarianceSpec>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        match &self.data {
            DataSource::Synthetic { .. } | DataSource::Adversary { .. } if self.seed.is_none() => {
                Err(Error::InvalidParameter(
                    "randomized data sources require an explicit seed".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Uniform wrapper so the harness can construct any learner from a spec and
/// still reach the algorithm-specific state (potentials, Γ) for reporting.
#[derive(Debug, Clone)]
pub enum AnyLearner {
    Coordwise(CoordwiseLearner),
    FullInv(FullInvLearner),
    Ogd(OgdLearner),
    Zero(ZeroPredictor),
}

impl AnyLearner {
    pub fn from_spec(spec: &LearnerSpec, d: usize) -> Result<Self> {
        Ok(match spec {
            LearnerSpec::Coordwise { alpha } => {
                AnyLearner::Coordwise(CoordwiseLearner::new(*alpha, d)?)
            }
            LearnerSpec::Fullinv { alpha } => AnyLearner::FullInv(FullInvLearner::new(*alpha, d)?),
            LearnerSpec::Ogd { c } => AnyLearner::Ogd(OgdLearner::new(*c, d)?),
            LearnerSpec::Zero => AnyLearner::Zero(ZeroPredictor::new(d)),
        })
    }

    pub fn overflowed(&self) -> bool {
        match self {
            AnyLearner::Coordwise(l) => l.overflowed(),
            AnyLearner::FullInv(l) => l.overflowed(),
            _ => false,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            AnyLearner::FullInv(l) => Some(l.gamma()),
            _ => None,
        }
    }
}

impl Learner for AnyLearner {
    fn dim(&self) -> usize {
        match self {
            AnyLearner::Coordwise(l) => l.dim(),
            AnyLearner::FullInv(l) => l.dim(),
            AnyLearner::Ogd(l) => l.dim(),
            AnyLearner::Zero(l) => l.dim(),
        }
    }

    fn predict(&mut self, x: &Instance) -> Result<DVector<f64>> {
        match self {
            AnyLearner::Coordwise(l) => l.predict(x),
            AnyLearner::FullInv(l) => l.predict(x),
            AnyLearner::Ogd(l) => l.predict(x),
            AnyLearner::Zero(l) => l.predict(x),
        }
    }

    fn update(&mut self, g: f64, x: &Instance) -> Result<()> {
        match self {
            AnyLearner::Coordwise(l) => l.update(g, x),
            AnyLearner::FullInv(l) => l.update(g, x),
            AnyLearner::Ogd(l) => l.update(g, x),
            AnyLearner::Zero(l) => l.update(g, x),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparatorReport {
    pub comparator: Vec<f64>,
    pub true_regret: f64,
    pub linearized_regret: f64,
    /// Certificate from the matching theorem, when the learner has one.
    pub certificate: Option<f64>,
    /// certificate − true regret; nonnegative when the bound holds.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub total_loss: f64,
    pub overflow: bool,
    /// Minimum over trials of the per-trial lemma margin, when applicable.
    pub lemma_margin_min: Option<f64>,
    pub gamma: Option<f64>,
    pub comparators: Vec<ComparatorReport>,
    pub invariance_max_rel_deviation: Option<f64>,
    /// Adversary runs only: (certified min |hᵀS†h − t/2|-margin, ‖u‖_S, regret).
    pub adversary: Option<AdversarySummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversarySummary {
    pub beta_target: f64,
    pub norm_u_s: f64,
    pub regret_vs_comparator: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trial_csv: String,
    pub summary: Summary,
}

fn fmt(v: f64) -> String {
    // 17 significant digits: round-trippable doubles
    format!("{v:.16e}")
}

const CSV_HEADER: &str = "t,yhat,y,g,loss,cum_loss,potential,gamma_or_psi,overflow\n";

struct TrialRow {
    t: usize,
    yhat: f64,
    y: f64,
    g: f64,
    loss: f64,
    cum_loss: f64,
    potential: f64,
    gamma_or_psi: f64,
    overflow: bool,
}

fn render_csv(rows: &[TrialRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.t,
            fmt(r.yhat),
            fmt(r.y),
            fmt(r.g),
            fmt(r.loss),
            fmt(r.cum_loss),
            fmt(r.potential),
            fmt(r.gamma_or_psi),
            r.overflow as u8
        ));
    }
    out
}

/// Materialize the example stream and loss a config describes. Adversary
/// sources are adaptive and have no fixed stream, so they are rejected.
pub fn materialize(config: &ExperimentConfig) -> Result<(Vec<Example>, Loss)> {
    if matches!(config.data, DataSource::Adversary { .. }) {
        return Err(Error::InvalidParameter(
            "adversary data is adaptive; it cannot be materialized up front".into(),
        ));
    }
    config.validate()?;
    resolve_data(config)
}

fn resolve_data(config: &ExperimentConfig) -> Result<(Vec<Example>, Loss)> {
    let base_loss = match config.loss {
        LossSpec::Logistic => Loss::Logistic,
        LossSpec::Hinge => Loss::Hinge,
    };
    match &config.data {
        DataSource::Csv { path } => Ok((load_csv(path)?, base_loss)),
        DataSource::Sparse { path } => Ok((load_sparse(path)?, base_loss)),
        DataSource::Synthetic {
            d,
            t,
            scale_lo,
            scale_hi,
            g_mode,
        } => {
            let mode = match g_mode {
                GModeSpec::Signs => GMode::Signs,
                GModeSpec::Uniform => GMode::Uniform,
                GModeSpec::FromLoss => GMode::FromLoss(base_loss),
            };
            let stream = random_stream(*d, *t, (*scale_lo, *scale_hi), mode, config.seed.unwrap())?;
            Ok((stream.examples, stream.loss))
        }
        DataSource::Adversary { .. } => unreachable!("adversary runs take a dedicated path"),
    }
}

/// Comparators used for certificate checks: the zero vector, an empirical
/// loss minimizer found by coordinate descent, and seeded random vectors at
/// several scales.
fn comparator_set(
    count: usize,
    d: usize,
    data: &[Example],
    loss: &Loss,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut out = vec![DVector::zeros(d)];
    if count > 1 && !data.is_empty() && d <= 16 {
        out.push(empirical_minimizer(d, data, loss));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
    let scales = [0.1, 1.0, 10.0];
    let mut i = 0;
    while out.len() < count {
        let scale = scales[i % scales.len()];
        out.push(DVector::from_fn(d, |_, _| {
            scale * rng.random_range(-1.0..1.0)
        }));
        i += 1;
    }
    out.truncate(count.max(1));
    out
}

/// Cyclic coordinate descent with a ternary line search per coordinate.
fn empirical_minimizer(d: usize, data: &[Example], loss: &Loss) -> DVector<f64> {
    let objective = |u: &DVector<f64>| -> f64 {
        data.iter()
            .enumerate()
            .map(|(idx, ex)| loss.value(idx + 1, ex.y, ex.x.dot(u)))
            .sum()
    };
    let mut u = DVector::zeros(d);
    for _sweep in 0..4 {
        for i in 0..d {
            let mut lo = -10.0f64;
            let mut hi = 10.0f64;
            for _ in 0..40 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                u[i] = m1;
                let v1 = objective(&u);
                u[i] = m2;
                let v2 = objective(&u);
                if v1 < v2 {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            u[i] = 0.5 * (lo + hi);
        }
    }
    u
}

fn run_adversary(config: &ExperimentConfig, d: usize, t: usize, beta: f64) -> Result<RunReport> {
    let seed = config.seed.unwrap();
    let mut learner = AnyLearner::from_spec(&config.learner, d)?;
    let trace = lower_bound_sequence(&mut learner, t, beta, d, seed)?;
    let mut rows = Vec::with_capacity(t);
    let mut cum_loss = 0.0;
    for (idx, ((x, g), yhat)) in trace.examples.iter().zip(&trace.predictions).enumerate() {
        let loss = g * yhat;
        cum_loss += loss;
        rows.push(TrialRow {
            t: idx + 1,
            yhat: *yhat,
            y: 0.0,
            g: *g,
            loss,
            cum_loss,
            potential: trace.certified[idx],
            gamma_or_psi: learner.gamma().unwrap_or(0.0),
            overflow: learner.overflowed(),
        });
        let _ = x;
    }
    let regret = trace.regret_vs_comparator();
    let lower = beta * (t as f64 / 2.0).sqrt();
    let summary = Summary {
        trials: t,
        total_loss: cum_loss,
        overflow: learner.overflowed(),
        lemma_margin_min: None,
        gamma: learner.gamma(),
        comparators: vec![ComparatorReport {
            comparator: trace.comparator.iter().copied().collect(),
            true_regret: regret,
            linearized_regret: regret,
            certificate: None,
            margin: None,
        }],
        invariance_max_rel_deviation: None,
        adversary: Some(AdversarySummary {
            beta_target: beta,
            norm_u_s: trace.norm_u_s,
            regret_vs_comparator: regret,
            lower_bound: lower,
        }),
    };
    Ok(RunReport {
        trial_csv: render_csv(&rows),
        summary,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let report = match &config.data {
        DataSource::Adversary { d, t, beta } => run_adversary(config, *d, *t, *beta)?,
        _ => run_regular(config)?,
    };
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let write = |name: &str, content: &str| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })
        };
        write("trials.csv", &report.trial_csv)?;
        let json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
        write("summary.json", &format!("{json}\n"))?;
    }
    Ok(report)
}

fn run_regular(config: &ExperimentConfig) -> Result<RunReport> {
    let (data, loss) = resolve_data(config)?;
    let d = data.first().map(|e| e.x.len()).unwrap_or(1);
    let mut learner = AnyLearner::from_spec(&config.learner, d)?;

    let mut rows = Vec::with_capacity(data.len());
    let mut cum_loss = 0.0;
    let mut lemma_margin_min: Option<f64> = None;
    let mut s_total = DMatrix::zeros(d, d);
    let mut trials = Vec::with_capacity(data.len());

    for (idx, ex) in data.iter().enumerate() {
        let t = idx + 1;
        if ex.x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: ex.x.len(),
            });
        }
        let psi_cw_before = match &learner {
            AnyLearner::Coordwise(l) => Some(l.potential()),
            _ => None,
        };
        let psi_fi_before = match &learner {
            AnyLearner::FullInv(l) => Some(l.potential()),
            _ => None,
        };
        let w = learner.predict(&ex.x)?;
        let yhat = ex.x.dot(&w);
        let g = loss.subgradient(t, ex.y, yhat);
        let loss_val = loss.value(t, ex.y, yhat);
        learner.update(g, &ex.x)?;
        s_total.ger(1.0, &ex.x, &ex.x, 1.0);
        cum_loss += loss_val;

        let (potential, gamma_or_psi, margin) = match &learner {
            AnyLearner::Coordwise(l) => {
                let psi_after = l.potential();
                let before = psi_cw_before.unwrap();
                let kap = kappa(l.alpha()).unwrap();
                let td = (t * d) as f64;
                let m = (0..d)
                    .map(|i| before[i] + kap / td - g * w[i] * ex.x[i] - psi_after[i])
                    .fold(f64::INFINITY, f64::min);
                let psi_sum: f64 = psi_after.iter().sum();
                (psi_sum, psi_sum, Some(m))
            }
            AnyLearner::FullInv(l) => {
                let psi_after = l.potential();
                let m = psi_fi_before.unwrap() - g * yhat - psi_after;
                (psi_after, l.gamma(), Some(m))
            }
            _ => (0.0, 0.0, None),
        };
        if let Some(m) = margin {
            lemma_margin_min = Some(lemma_margin_min.map_or(m, |cur| cur.min(m)));
        }
        rows.push(TrialRow {
            t,
            yhat,
            y: ex.y,
            g,
            loss: loss_val,
            cum_loss,
            potential,
            gamma_or_psi,
            overflow: learner.overflowed(),
        });
        trials.push((ex.clone(), yhat, g, loss_val));
    }

    // regret and certificates per comparator
    let comparators = comparator_set(config.comparators, d, &data, &loss, config.seed.unwrap_or(0));
    let t_total = data.len();
    let mut reports = Vec::new();
    for u in &comparators {
        let mut true_regret = 0.0;
        let mut lin_regret = 0.0;
        for (idx, (ex, yhat, g, loss_val)) in trials.iter().enumerate() {
            let yhat_u = ex.x.dot(u);
            true_regret += loss_val - loss.value(idx + 1, ex.y, yhat_u);
            lin_regret += g * (yhat - yhat_u);
        }
        let certificate = match &learner {
            AnyLearner::Coordwise(l) => {
                let s: Vec<f64> = l.s2().iter().map(|&v| v.sqrt()).collect();
                let u_slice: Vec<f64> = u.iter().copied().collect();
                Some(regret_bound_coordwise(&u_slice, &s, l.alpha(), t_total, d)?)
            }
            AnyLearner::FullInv(l) => {
                let norm_u_s = quad_form(&s_total, u)?.sqrt();
                Some(regret_bound_full(norm_u_s, l.gamma(), l.alpha())?)
            }
            AnyLearner::Zero(_) => {
                let norm_u_s = quad_form(&s_total, u)?.sqrt();
                Some(zero_predictor_bound(norm_u_s, t_total))
            }
            AnyLearner::Ogd(_) => None,
        };
        reports.push(ComparatorReport {
            comparator: u.iter().copied().collect(),
            true_regret,
            linearized_regret: lin_regret,
            margin: certificate.map(|c| c - true_regret),
            certificate,
        });
    }

    let invariance_dev = match &config.invariance {
        Some(spec) => {
            let learner_spec = config.learner.clone();
            Some(invariance_check(
                || AnyLearner::from_spec(&learner_spec, d).expect("spec validated"),
                &data,
                &loss,
                spec.kind,
                spec.cond_cap,
                spec.reps,
                config.seed.unwrap_or(0) ^ 0x1177,
            )?)
        }
        None => None,
    };

    let summary = Summary {
        trials: t_total,
        total_loss: cum_loss,
        overflow: learner.overflowed(),
        lemma_margin_min,
        gamma: learner.gamma(),
        comparators: reports,
        invariance_max_rel_deviation: invariance_dev,
        adversary: None,
    };
    Ok(RunReport {
        trial_csv: render_csv(&rows),
        summary,
    })
}
