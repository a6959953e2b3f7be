//! Baseline learners: the zero predictor and unprojected online gradient
//! descent with rate c/√t.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::protocol::{Instance, Learner};

/// Always predicts 0. Its regret is bounded by ‖u‖_{S_T}√T.
#[derive(Debug, Clone)]
pub struct ZeroPredictor {
    d: usize,
}

impl ZeroPredictor {
    pub fn new(d: usize) -> Self {
        ZeroPredictor { d }
    }
}

impl Learner for ZeroPredictor {
    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&mut self, _x: &Instance) -> Result<DVector<f64>> {
        Ok(DVector::zeros(self.d))
    }

    fn update(&mut self, _g: f64, _x: &Instance) -> Result<()> {
        Ok(())
    }
}

/// Unprojected OGD: w_{t+1} = w_t − (c/√t) g_t x_t.
#[derive(Debug, Clone)]
pub struct OgdLearner {
    c: f64,
    t: usize,
    w: DVector<f64>,
}

impl OgdLearner {
    pub fn new(c: f64, d: usize) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "OGD rate constant must be positive, got {c}"
            )));
        }
        Ok(OgdLearner {
            c,
            t: 0,
            w: DVector::zeros(d),
        })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }
}

impl Learner for OgdLearner {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn predict(&mut self, x: &Instance) -> Result<DVector<f64>> {
        if x.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                got: x.len(),
            });
        }
        self.t += 1;
        Ok(self.w.clone())
    }

    fn update(&mut self, g: f64, x: &Instance) -> Result<()> {
        if !(g.abs() <= 1.0 + 1e-12) {
            return Err(Error::SubgradientOutOfRange(g));
        }
        let eta = self.c / (self.t as f64).sqrt();
        self.w.axpy(-eta * g, x, 1.0);
        Ok(())
    }
}
