//! Benchmark fixtures shared by the criterion targets.

use geophase::closed_form::SensingParams;
use geophase::states::{joint_plus_state, make_state, OscStateSpec};
use geophase::{HilbertParams, JointState};

pub fn hilbert(cutoff: usize) -> HilbertParams {
    HilbertParams::new(cutoff).expect("positive cutoff")
}

/// Parameters of the squeezed geometric loop at 10 dB.
pub fn loop_params() -> SensingParams {
    SensingParams::force_sensing_defaults()
}

/// `|+⟩ ⊗ |1⟩_coherent`, a dense joint state with support across the ladder.
pub fn coherent_joint(h: HilbertParams) -> JointState {
    let osc = make_state(&OscStateSpec::Coherent { amplitude: 1.0.into() }, h).expect("valid state").value;
    joint_plus_state(&osc)
}
