//! Force sensing with a qubit longitudinally coupled to a harmonic oscillator.
//!
//! The crate pairs closed-form protocol algebra with brute-force numerics in a
//! truncated Fock space so that every formula has an independent check.

// Input guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod diagnostics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod metrology;
pub mod open_system;
pub mod phase_space;
pub mod protocol;
pub mod states;

pub use diagnostics::{Checked, Warning};
pub use error::{Error, Result};
pub use fock::{FockOperator, HilbertParams, JointOperator, JointState, OscillatorState, QubitState, Spin};
pub use linalg::{CMatrix, C64};
pub use metrology::{FisherEstimate, FisherMethod};
pub use open_system::{NoiseChannel, NoiseKind, NoisyOutcome, NoisySchedule};
pub use phase_space::{Snapshot, WignerGrid, WignerSpec};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
