//! Scale-invariant unconstrained online learning.
//!
//! Two online learners whose predictions are unaffected by rescaling of the
//! input features: a coordinate-wise first-order method ([`coordwise`],
//! invariant under positive diagonal rescaling, O(d) per trial) and a fully
//! invariant second-order method ([`fullinv`], invariant under arbitrary
//! invertible linear transformations, O(d²) per trial via incremental
//! pseudoinverse updates).
//!
//! The crate also ships the supporting machinery: the online protocol runner
//! and losses ([`protocol`]), rank-one Moore–Penrose pseudoinverse updates
//! ([`linalg`]), regret-bound certificates and the scalar inequalities behind
//! them ([`bounds`]), an adversarial sequence construction that forces
//! Ω(‖u‖_S √T) regret on any learner ([`adversary`]), and a CLI harness
//! ([`harness`]).

pub mod adversary;
pub mod bounds;
pub mod coordwise;
pub mod dd;
pub mod error;
pub mod fullinv;
pub mod harness;
pub mod linalg;
pub mod protocol;

pub use error::Error;
pub use protocol::{run_protocol, Example, Instance, Learner, Loss, TrialLog};
