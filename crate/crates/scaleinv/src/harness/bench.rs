//! Wall-clock scaling measurements: per-trial cost as a function of d,
//! summarized by a least-squares slope in log-log space.

use std::time::Instant;

use serde::Serialize;

use crate::adversary::{random_stream, GMode};
use crate::error::Result;
use crate::harness::experiment::{AnyLearner, LearnerSpec};
use crate::protocol::run_protocol;

#[derive(Debug, Clone, Serialize)]
pub struct BenchPoint {
    pub d: usize,
    pub seconds_per_trial: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub learner: String,
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of log(seconds/trial) against log(d).
    pub loglog_slope: f64,
}

/// Least-squares slope of log(y) vs log(x).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn time_per_trial(spec: &LearnerSpec, d: usize, t: usize, seed: u64) -> Result<f64> {
    let stream = random_stream(d, t, (0.5, 2.0), GMode::Signs, seed)?;
    // warm-up pass so allocation and code paths are hot before timing
    let mut warm = AnyLearner::from_spec(spec, d)?;
    run_protocol(&mut warm, &stream.examples, &stream.loss)?;
    // take the best of three repetitions: transient load on the machine can
    // only inflate a measurement, so the minimum is the robust estimate
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let mut learner = AnyLearner::from_spec(spec, d)?;
        let start = Instant::now();
        run_protocol(&mut learner, &stream.examples, &stream.loss)?;
        best = best.min(start.elapsed().as_secs_f64() / t as f64);
    }
    Ok(best)
}

/// Measure per-trial cost over the given dimensions and fit the scaling
/// exponent. `t` trials per dimension; the same seeded stream family is
/// used at every d.
pub fn bench_scaling(spec: &LearnerSpec, dims: &[usize], t: usize, seed: u64) -> Result<BenchReport> {
    let mut points = Vec::with_capacity(dims.len());
    for &d in dims {
        let secs = time_per_trial(spec, d, t, seed ^ d as u64)?;
        points.push(BenchPoint {
            d,
            seconds_per_trial: secs,
        });
    }
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.d as f64, p.seconds_per_trial.max(1e-12)))
        .collect();
    let name = match spec {
        LearnerSpec::Coordwise { .. } => "coordwise",
        LearnerSpec::Fullinv { .. } => "fullinv",
        LearnerSpec::Ogd { .. } => "ogd",
        LearnerSpec::Zero => "zero",
    };
    Ok(BenchReport {
        learner: name.to_string(),
        points,
        loglog_slope: loglog_slope(&pairs),
    })
}
