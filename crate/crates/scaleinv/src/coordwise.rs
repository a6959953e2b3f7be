//! Coordinate-wise scale-invariant learner (first-order, O(d) per trial).
//!
//! Each coordinate keeps the negative cumulative linearized loss h_i and the
//! running sum of squared feature values s²_i. The weight on coordinate i is
//!
//!   w_i = η_i h_i / s²_i,   η_i = (1/(α t d)) exp((h_i² + x²_i)/(2α s²_i)),
//!
//! with w_i = 0 while s²_i = 0. Rescaling a feature leaves the exponent and
//! the prediction unchanged, which is the invariance the method is built
//! around.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::protocol::{Instance, Learner};

/// Exponent clamp in nats; beyond this the weight is formed in the log
/// domain and the overflow flag is raised.
pub const EXP_CLAMP: f64 = 700.0;

/// Minimum admissible α; the per-trial lemma constant κ(α) diverges at 9/8.
pub const ALPHA_MIN: f64 = 9.0 / 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordwiseLearner {
    alpha: f64,
    d: usize,
    /// trial counter; incremented when an instance is received
    t: usize,
    h: Vec<f64>,
    s2: Vec<f64>,
    overflow: bool,
}

impl CoordwiseLearner {
    pub fn new(alpha: f64, d: usize) -> Result<Self> {
        if !(alpha > ALPHA_MIN) {
            return Err(Error::InvalidParameter(format!(
                "alpha must exceed 9/8 = 1.125, got {alpha}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(CoordwiseLearner {
            alpha,
            d,
            t: 0,
            h: vec![0.0; d],
            s2: vec![0.0; d],
            overflow: false,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn trial(&self) -> usize {
        self.t
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn s2(&self) -> &[f64] {
        &self.s2
    }

    /// True once any trial produced an exponent beyond [`EXP_CLAMP`].
    pub fn overflowed(&self) -> bool {
        self.overflow
    }

    /// Per-coordinate potential ψ_t(h_i, s_i) = (td)⁻¹ exp(h²/(2αs²)) for
    /// s_i > 0, and 0 otherwise. At t = 0 every coordinate is 0.
    pub fn potential(&self) -> Vec<f64> {
        let td = (self.t * self.d) as f64;
        self.h
            .iter()
            .zip(&self.s2)
            .map(|(&h, &s2)| {
                if s2 > 0.0 {
                    (h * h / (2.0 * self.alpha * s2)).exp() / td
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// State as decimal text (17 significant digits per value) for
    /// bit-faithful resume across runs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("alpha {:.16e}\n", self.alpha));
        out.push_str(&format!("d {}\n", self.d));
        out.push_str(&format!("t {}\n", self.t));
        out.push_str(&format!("overflow {}\n", self.overflow));
        for i in 0..self.d {
            out.push_str(&format!("coord {:.16e} {:.16e}\n", self.h[i], self.s2[i]));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut alpha = None;
        let mut d = None;
        let mut t = None;
        let mut overflow = false;
        let mut coords: Vec<(f64, f64)> = vec![];
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("alpha") => {
                    alpha = Some(
                        parts
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| parse_err(line_no, "bad alpha"))?,
                    )
                }
                Some("d") => {
                    d = Some(
                        parts
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| parse_err(line_no, "bad d"))?,
                    )
                }
                Some("t") => {
                    t = Some(
                        parts
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| parse_err(line_no, "bad t"))?,
                    )
                }
                Some("overflow") => {
                    overflow = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "bad overflow"))?
                }
                Some("coord") => {
                    let h = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "bad h"))?;
                    let s2 = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| parse_err(line_no, "bad s2"))?;
                    coords.push((h, s2));
                }
                Some(other) => return Err(parse_err(line_no, &format!("unknown field {other}"))),
                None => {}
            }
        }
        let alpha = alpha.ok_or_else(|| parse_err(0, "missing alpha"))?;
        let d: usize = d.ok_or_else(|| parse_err(0, "missing d"))?;
        let t = t.ok_or_else(|| parse_err(0, "missing t"))?;
        if coords.len() != d {
            return Err(parse_err(0, "coordinate count does not match d"));
        }
        let mut state = CoordwiseLearner::new(alpha, d)?;
        state.t = t;
        state.overflow = overflow;
        state.h = coords.iter().map(|c| c.0).collect();
        state.s2 = coords.iter().map(|c| c.1).collect();
        Ok(state)
    }
}

impl Learner for CoordwiseLearner {
    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&mut self, x: &Instance) -> Result<DVector<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        self.t += 1;
        let log_atd = (self.alpha * (self.t * self.d) as f64).ln();
        let mut w = DVector::zeros(self.d);
        for i in 0..self.d {
            let xi = x[i];
            self.s2[i] += xi * xi;
            let s2 = self.s2[i];
            if s2 > 0.0 {
                let h = self.h[i];
                let exponent = (h * h + xi * xi) / (2.0 * self.alpha * s2);
                if exponent > EXP_CLAMP {
                    self.overflow = true;
                }
                if h != 0.0 {
                    // log-domain assembly keeps moderate overshoots of the
                    // exponent representable
                    let log_w = exponent - log_atd + h.abs().ln() - s2.ln();
                    w[i] = h.signum() * log_w.exp();
                }
            }
        }
        Ok(w)
    }

    fn update(&mut self, g: f64, x: &Instance) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if !(g.abs() <= 1.0 + 1e-12) {
            return Err(Error::SubgradientOutOfRange(g));
        }
        for i in 0..self.d {
            self.h[i] -= g * x[i];
        }
        Ok(())
    }
}
