//! Online protocol: losses, the trial loop, and regret bookkeeping.
//!
//! Each trial follows the same fixed order: the instance is revealed, the
//! learner commits to a weight vector, the label is revealed, the learner
//! suffers loss and receives the loss subderivative. All learners plug into
//! [`run_protocol`] through the two-phase [`Learner`] trait.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Feature vector revealed at the start of a trial.
pub type Instance = DVector<f64>;

/// One labelled observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Instance,
    pub y: f64,
}

impl Example {
    pub fn new(x: Instance, y: f64) -> Self {
        Example { x, y }
    }
}

/// Convex 1-Lipschitz losses on the prediction.
///
/// `Linear` carries an explicit per-trial subgradient sequence so that
/// lemma-level tests can drive arbitrary g_t ∈ [−1,1] directly; its label is
/// ignored.
#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    /// log(1 + exp(−y·ŷ))
    Logistic,
    /// (1 − y·ŷ)₊
    Hinge,
    /// g_t · ŷ with the g-sequence fixed up front.
    Linear(Vec<f64>),
}

impl Loss {
    /// Linear loss from an explicit g-sequence; every |g_t| must be ≤ 1.
    pub fn linear(gs: Vec<f64>) -> Result<Self> {
        for &g in &gs {
            if !(g.abs() <= 1.0 + 1e-12) {
                return Err(Error::SubgradientOutOfRange(g));
            }
        }
        Ok(Loss::Linear(gs))
    }

    /// Loss value at trial `t` (1-based; only used by `Linear`).
    pub fn value(&self, t: usize, y: f64, yhat: f64) -> f64 {
        match self {
            Loss::Logistic => {
                // log1p(exp(-m)) overflows for very negative m; use the
                // stable split.
                let m = y * yhat;
                if m < -30.0 {
                    -m
                } else {
                    (-m).exp().ln_1p()
                }
            }
            Loss::Hinge => (1.0 - y * yhat).max(0.0),
            Loss::Linear(gs) => gs[t - 1] * yhat,
        }
    }

    /// A valid subderivative of ℓ(y, ·) at ŷ, deterministic in (y, ŷ).
    ///
    /// At the hinge kink (y·ŷ = 1) the returned value is 0.
    pub fn subgradient(&self, t: usize, y: f64, yhat: f64) -> f64 {
        match self {
            Loss::Logistic => {
                let m = y * yhat;
                // -y * sigmoid(-m)
                -y / (1.0 + m.exp())
            }
            Loss::Hinge => {
                if y * yhat < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::Linear(gs) => gs[t - 1],
        }
    }
}

/// Record of a completed trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub x: Instance,
    pub yhat: f64,
    pub y: f64,
    pub g: f64,
    pub loss: f64,
    pub w: DVector<f64>,
}

/// Full run transcript, retaining the loss so regrets can be evaluated
/// against arbitrary comparators afterwards.
#[derive(Debug, Clone)]
pub struct TrialLog {
    pub trials: Vec<Trial>,
    pub loss: Loss,
}

impl TrialLog {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// (true regret, linearized regret) against comparator `u`.
    ///
    /// The linearized regret Σ g_t x_tᵀ(w_t − u) upper-bounds the true regret
    /// by convexity of the loss.
    pub fn regret(&self, u: &DVector<f64>) -> Result<(f64, f64)> {
        let mut true_regret = 0.0;
        let mut lin_regret = 0.0;
        for (idx, trial) in self.trials.iter().enumerate() {
            if trial.x.len() != u.len() {
                return Err(Error::DimensionMismatch {
                    expected: trial.x.len(),
                    got: u.len(),
                });
            }
            let yhat_u = trial.x.dot(u);
            true_regret += trial.loss - self.loss.value(idx + 1, trial.y, yhat_u);
            lin_regret += trial.g * (trial.yhat - yhat_u);
        }
        Ok((true_regret, lin_regret))
    }
}

/// Two-phase online learner: commit to weights on seeing x, then consume the
/// loss subderivative. The runner never reorders these calls.
pub trait Learner {
    fn dim(&self) -> usize;

    /// Weight vector for this trial. May mutate internal state that depends
    /// on the instance (trial counters, scale accumulators).
    fn predict(&mut self, x: &Instance) -> Result<DVector<f64>>;

    /// Incorporate the subderivative for the instance just predicted on.
    fn update(&mut self, g: f64, x: &Instance) -> Result<()>;
}

/// Run the online protocol over `data` and return the transcript.
pub fn run_protocol<L: Learner>(learner: &mut L, data: &[Example], loss: &Loss) -> Result<TrialLog> {
    let d = learner.dim();
    let mut trials = Vec::with_capacity(data.len());
    for (idx, ex) in data.iter().enumerate() {
        let t = idx + 1;
        if ex.x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: ex.x.len(),
            });
        }
        let w = learner.predict(&ex.x)?;
        let yhat = ex.x.dot(&w);
        let g = loss.subgradient(t, ex.y, yhat);
        let loss_val = loss.value(t, ex.y, yhat);
        learner.update(g, &ex.x)?;
        trials.push(Trial {
            x: ex.x.clone(),
            yhat,
            y: ex.y,
            g,
            loss: loss_val,
            w,
        });
    }
    Ok(TrialLog {
        trials,
        loss: loss.clone(),
    })
}
