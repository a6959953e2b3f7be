//! Invariance test driver: runs a fresh learner on an original and a
//! linearly transformed stream and reports the worst relative prediction
//! deviation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{run_protocol, Example, Learner, Loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// Positive diagonal rescaling, entries log-uniform in [1e−3, 1e3].
    Diagonal,
    /// Random invertible matrix with bounded condition number.
    General,
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(d, d, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v
    });
    gauss.qr().q()
}

/// Sample a transform of the given kind. General transforms are built as
/// Q₁·diag(σ)·Q₂ᵀ with log-uniform σ spanning exactly the condition cap,
/// which gives direct control of the conditioning.
pub fn sample_transform(
    kind: TransformKind,
    d: usize,
    cond_cap: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    if !(cond_cap >= 1.0 && cond_cap.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "condition cap must be >= 1, got {cond_cap}"
        )));
    }
    match kind {
        TransformKind::Diagonal => {
            let diag = DVector::from_fn(d, |_, _| 10f64.powf(rng.random_range(-3.0..3.0)));
            Ok(DMatrix::from_diagonal(&diag))
        }
        TransformKind::General => {
            let half = cond_cap.sqrt();
            let sigma =
                DVector::from_fn(d, |_, _| {
                    let lo = (1.0 / half).log10();
                    let hi = half.log10();
                    10f64.powf(rng.random_range(lo..hi))
                });
            let q1 = random_orthogonal(d, rng);
            let q2 = random_orthogonal(d, rng);
            Ok(&q1 * DMatrix::from_diagonal(&sigma) * q2.transpose())
        }
    }
}

/// Max over trials of |ŷ_t − ŷ'_t| / max(1, |ŷ_t|) between a run on `data`
/// and a run on the transformed stream, over `reps` sampled transforms.
///
/// The loss must have deterministic subgradients (all losses in this crate
/// do) so that the two runs stay synchronized.
pub fn invariance_check<L, F>(
    factory: F,
    data: &[Example],
    loss: &Loss,
    kind: TransformKind,
    cond_cap: f64,
    reps: usize,
    seed: u64,
) -> Result<f64>
where
    L: Learner,
    F: Fn() -> L,
{
    let d = if let Some(ex) = data.first() {
        ex.x.len()
    } else {
        return Ok(0.0);
    };
    let base = run_protocol(&mut factory(), data, loss)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..reps {
        let a = sample_transform(kind, d, cond_cap, &mut rng)?;
        let transformed: Vec<Example> = data
            .iter()
            .map(|ex| Example::new(&a * &ex.x, ex.y))
            .collect();
        let alt = run_protocol(&mut factory(), &transformed, loss)?;
        for (t0, t1) in base.trials.iter().zip(&alt.trials) {
            let dev = (t0.yhat - t1.yhat).abs() / t0.yhat.abs().max(1.0);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}
