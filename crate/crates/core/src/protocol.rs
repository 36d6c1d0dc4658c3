//! Joint unitaries of the sensing loops, built from closed forms, plus a
//! brute-force Schrödinger integrator used to check them.
//!
//! Every loop is a four-step [`ProtocolPlan`]. Unitaries are instantaneous;
//! durations only matter when noise is interleaved between the steps.

use std::collections::HashSet;
use std::f64::consts::PI;

use crate::closed_form::{DispersiveParams, SensingParams};
use crate::diagnostics::{Checked, Warning};
use crate::error::{invalid, Error, Result};
use crate::fock::{
    self, bogoliubov, displacement, spin_conditional, FockOperator, HilbertParams, JointOperator, JointState,
    OscillatorState, QubitState, Spin,
};
use crate::linalg::{self, CMatrix, C64, I, ZERO};

/// One instantaneous joint unitary and the wall-clock time it stands for.
#[derive(Clone, Debug)]
pub struct ProtocolStep {
    pub unitary: JointOperator,
    pub duration: f64,
    pub label: String,
}

/// Ordered loop of joint unitaries.
#[derive(Clone, Debug)]
pub struct ProtocolPlan {
    steps: Vec<ProtocolStep>,
    hilbert: HilbertParams,
    pulse_count: usize,
    warnings: Vec<Warning>,
}

impl ProtocolPlan {
    /// Checks dimensions, durations and label uniqueness.
    pub fn new(hilbert: HilbertParams, steps: Vec<ProtocolStep>, pulse_count: usize) -> Result<Self> {
        let mut labels = HashSet::new();
        for step in &steps {
            if step.unitary.osc_dim() != hilbert.dim() {
                return Err(Error::DimensionMismatch { expected: hilbert.dim(), found: step.unitary.osc_dim() });
            }
            if !(step.duration >= 0.0 && step.duration.is_finite()) {
                return Err(invalid(format!("step '{}' has invalid duration {}", step.label, step.duration)));
            }
            if !labels.insert(step.label.as_str()) {
                return Err(invalid(format!("duplicate step label '{}'", step.label)));
            }
        }
        Ok(ProtocolPlan { steps, hilbert, pulse_count, warnings: Vec::new() })
    }

    fn with_warnings(mut self, warnings: Vec<Warning>) -> Self {
        self.warnings = warnings;
        self
    }

    /// The identity loop: a single step that does nothing.
    pub fn identity(hilbert: HilbertParams) -> Self {
        let step = ProtocolStep { unitary: JointOperator::identity(hilbert), duration: 0.0, label: "I".into() };
        ProtocolPlan { steps: vec![step], hilbert, pulse_count: 0, warnings: Vec::new() }
    }

    pub fn steps(&self) -> &[ProtocolStep] {
        &self.steps
    }

    pub fn hilbert(&self) -> HilbertParams {
        self.hilbert
    }

    /// Qubit π pulses applied per loop.
    pub fn pulse_count(&self) -> usize {
        self.pulse_count
    }

    /// Truncation warnings raised while building the unitaries.
    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn total_time(&self) -> f64 {
        self.steps.iter().map(|s| s.duration).sum()
    }

    /// Product of the step unitaries, last step leftmost.
    pub fn loop_unitary(&self) -> JointOperator {
        let mut u = JointOperator::identity(self.hilbert);
        for step in &self.steps {
            u = &step.unitary * &u;
        }
        u
    }

    /// Phases and closure of `n_loops` repetitions.
    pub fn loop_result(&self, n_loops: u32) -> LoopResult {
        let single = self.loop_unitary();
        let mut u = JointOperator::identity(self.hilbert);
        for _ in 0..n_loops {
            u = &single * &u;
        }
        LoopResult::from_unitary(u, self.hilbert.trusted_levels())
    }
}

/// Phase kickback and oscillator closure of a loop unitary.
///
/// Phases are read from the trace of each diagonal spin block over the
/// trusted low-lying levels. `closure_error` is the max-norm distance of that
/// block region from `diag(e^{i theta_up}, e^{i theta_down}) ⊗ I`, including
/// any leakage into the off-diagonal spin blocks.
#[derive(Clone, Debug)]
pub struct LoopResult {
    pub final_unitary: JointOperator,
    /// s-odd part of the block phase on `|↑⟩`, equal to `relative_phase / 2`.
    pub phase_up: f64,
    /// s-odd part on `|↓⟩`, equal to `-relative_phase / 2`.
    pub phase_down: f64,
    /// s-even block phase, invisible to the qubit.
    pub common_phase: f64,
    /// `theta_up - theta_down` wrapped to `(-pi, pi]`.
    ///
    /// The qubit coherence `⟨σ⁺⟩` carries `arg = -relative_phase`.
    pub relative_phase: f64,
    pub closure_error: f64,
}

impl LoopResult {
    pub fn from_unitary(u: JointOperator, levels: usize) -> Self {
        let k = levels.min(u.osc_dim());
        let mut z = [ZERO; 2];
        for s in Spin::BOTH {
            let block = u.block(s, s);
            z[s.index()] = (0..k).map(|n| block.matrix()[(n, n)]).sum::<C64>() / k as f64;
        }
        let relative = (z[0] * z[1].conj()).arg();
        let common = (z[0] * C64::from_polar(1.0, -relative / 2.0)).arg();
        let mut closure = 0.0f64;
        for row in Spin::BOTH {
            for col in Spin::BOTH {
                let block = u.block(row, col);
                let target = if row == col {
                    CMatrix::identity(u.osc_dim(), u.osc_dim()) * C64::from_polar(1.0, z[row.index()].arg())
                } else {
                    CMatrix::zeros(u.osc_dim(), u.osc_dim())
                };
                closure = closure.max(linalg::leading_block_max_diff(block.matrix(), &target, k));
            }
        }
        LoopResult {
            final_unitary: u,
            phase_up: relative / 2.0,
            phase_down: -relative / 2.0,
            common_phase: common,
            relative_phase: relative,
            closure_error: closure,
        }
    }
}

/// Global phase `e^{i (eta² + gamma²)(t1 - t0) / omega}` separating the exact
/// propagator of the rotating-frame Hamiltonian from
/// [`free_evolution_unitary`]. It is spin independent and never visible to
/// the qubit.
pub fn floquet_global_phase(p: &SensingParams, t0: f64, t1: f64) -> C64 {
    C64::from_polar(1.0, (p.eta * p.eta + p.gamma * p.gamma) * (t1 - t0) / p.omega)
}

fn free_evolution_parts(p: &SensingParams, s: Spin, t0: f64, t1: f64) -> (C64, C64, C64) {
    let a = p.alpha(s);
    let phase = C64::from_polar(1.0, 2.0 * p.eta * p.gamma * s.sign() * (t1 - t0) / p.omega);
    (phase, -a * C64::from_polar(1.0, p.omega * t1), a * C64::from_polar(1.0, p.omega * t0))
}

/// Branch propagator
/// `U_s(t1, t0) = e^{i (2 eta gamma s / omega)(t1 - t0)} D†(alpha_s e^{i omega t1}) D(alpha_s e^{i omega t0})`.
///
/// The two displacements are merged analytically into a single one, so the
/// result is one truncated exponential.
pub fn free_evolution_unitary(
    p: &SensingParams,
    s: Spin,
    t0: f64,
    t1: f64,
    h: HilbertParams,
) -> Result<Checked<FockOperator>> {
    p.validate()?;
    if !(t1 >= t0) {
        return Err(invalid(format!("free evolution needs t1 >= t0, got [{t0}, {t1}]")));
    }
    let (phase, x, y) = free_evolution_parts(p, s, t0, t1);
    let weyl = C64::from_polar(1.0, (x * y.conj()).im);
    Ok(displacement(x + y, h).map(|d| d.scaled(phase * weyl)))
}

/// The same propagator as a product of the two truncated displacements, each
/// first mapped through squeeze conjugation `S†(r) · S(r)`.
fn free_evolution_factored(
    p: &SensingParams,
    s: Spin,
    t0: f64,
    t1: f64,
    r: f64,
    h: HilbertParams,
) -> Checked<FockOperator> {
    let (phase, x, y) = free_evolution_parts(p, s, t0, t1);
    let xi = C64::new(r, 0.0);
    let mut warnings = Vec::new();
    let dx = displacement(bogoliubov(x, xi), h).collect_into(&mut warnings);
    let dy = displacement(bogoliubov(y, xi), h).collect_into(&mut warnings);
    Checked::with_warnings((&dx * &dy).scaled(phase), warnings)
}

fn joint_from(mut branch: impl FnMut(Spin) -> Checked<FockOperator>, warnings: &mut Vec<Warning>) -> JointOperator {
    let up = branch(Spin::Up).collect_into(warnings);
    let down = branch(Spin::Down).collect_into(warnings);
    spin_conditional(&up, &down).expect("branches share the cutoff")
}

/// Rotating-frame Hamiltonian `(eta + gamma s)(a e^{-i omega t} + a† e^{i omega t})`
/// of the qubit branch `s`.
pub fn longitudinal_hamiltonian(p: &SensingParams, s: Spin, h: HilbertParams) -> impl Fn(f64) -> CMatrix {
    let a = fock::annihilation(h).into_matrix();
    let ad = a.adjoint();
    let g = p.eta + p.gamma * s.sign();
    let omega = p.omega;
    move |t| {
        let e = C64::from_polar(g, omega * t);
        &a * e.conj() + &ad * e
    }
}

/// Relative step-halving change above which a propagator is flagged.
pub const PROPAGATOR_TOL: f64 = 1e-9;

/// Propagator of `dU/dt = -i H(t) U` from `U(t0) = I`, by classical
/// fourth-order Runge-Kutta with step at most `dt`.
///
/// The integration is repeated with half the step; the finer result is
/// returned and flagged when the two differ by more than `10 * PROPAGATOR_TOL`.
pub fn schrodinger_propagate(
    hamiltonian: impl Fn(f64) -> CMatrix,
    t0: f64,
    t1: f64,
    dt: f64,
    h: HilbertParams,
) -> Result<Checked<FockOperator>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("integration step must be positive, got {dt}")));
    }
    if !(t1 >= t0) {
        return Err(invalid(format!("propagation needs t1 >= t0, got [{t0}, {t1}]")));
    }
    let probe = hamiltonian(t0);
    if probe.nrows() != h.dim() || probe.ncols() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: probe.nrows() });
    }
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let coarse = rk4_propagator(&hamiltonian, t0, t1, steps, h.dim());
    let fine = rk4_propagator(&hamiltonian, t0, t1, 2 * steps, h.dim());
    if !linalg::is_finite(&fine) {
        return Err(Error::NonFinite("Schrödinger propagator"));
    }
    let change = linalg::max_abs_diff(&coarse, &fine);
    let mut warnings = Vec::new();
    if change > 10.0 * PROPAGATOR_TOL {
        warnings.push(Warning::Convergence { context: "schrodinger_propagate".into(), change });
    }
    Ok(Checked::with_warnings(FockOperator::from_matrix(h, fine)?, warnings))
}

fn rk4_propagator(hamiltonian: &impl Fn(f64) -> CMatrix, t0: f64, t1: f64, steps: usize, dim: usize) -> CMatrix {
    let dt = (t1 - t0) / steps as f64;
    let minus_i = -I;
    let rhs = |t: f64, u: &CMatrix| linalg::matmul(&hamiltonian(t), u) * minus_i;
    let mut u = CMatrix::identity(dim, dim);
    if t1 == t0 {
        return u;
    }
    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let k1 = rhs(t, &u);
        let k2 = rhs(t + dt / 2.0, &(&u + &k1 * half));
        let k3 = rhs(t + dt / 2.0, &(&u + &k2 * half));
        let k4 = rhs(t + dt, &(&u + &k3 * full));
        u += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
    }
    u
}

/// Full-period free evolution drawn as a single-step plan.
pub fn build_free_evolution(p: &SensingParams, t: f64, h: HilbertParams) -> Result<ProtocolPlan> {
    let mut warnings = Vec::new();
    let branch = |s| free_evolution_unitary(p, s, 0.0, t, h);
    let up = branch(Spin::Up)?.collect_into(&mut warnings);
    let down = branch(Spin::Down)?.collect_into(&mut warnings);
    let step = ProtocolStep { unitary: spin_conditional(&up, &down)?, duration: t, label: "U".into() };
    Ok(ProtocolPlan::new(h, vec![step], 0)?.with_warnings(warnings))
}

fn phased_displacement(phase: f64, alpha: C64, h: HilbertParams) -> Checked<FockOperator> {
    displacement(alpha, h).map(|d| d.scaled(C64::from_polar(1.0, phase)))
}

/// `D(alpha) D(beta) D†(alpha) = e^{2i Im(alpha beta*)} D(beta)`
fn conjugated_kick(alpha: C64, beta: C64, h: HilbertParams) -> Checked<FockOperator> {
    phased_displacement(2.0 * (alpha * beta.conj()).im, beta, h)
}

fn kick(p: &SensingParams, s: Spin) -> C64 {
    C64::new(0.0, 4.0 * p.gamma * s.sign() / p.omega)
}

fn echo_steps(p: &SensingParams, h: HilbertParams, warnings: &mut Vec<Warning>) -> (JointOperator, JointOperator) {
    let u2 = joint_from(|s| conjugated_kick(C64::new(p.alpha(s), 0.0), kick(p, s), h), warnings);
    // D†(alpha) D†(beta) D(alpha): the echo run backwards in phase space.
    let u4 = joint_from(|s| conjugated_kick(C64::new(-p.alpha(s), 0.0), -kick(p, s), h), warnings);
    (u2, u4)
}

fn four_steps(
    h: HilbertParams,
    unitaries: [JointOperator; 4],
    durations: [f64; 4],
    pulses: usize,
    warnings: Vec<Warning>,
) -> Result<ProtocolPlan> {
    let steps = unitaries
        .into_iter()
        .zip(durations)
        .enumerate()
        .map(|(i, (unitary, duration))| ProtocolStep { unitary, duration, label: format!("U{}", i + 1) })
        .collect();
    Ok(ProtocolPlan::new(h, steps, pulses)?.with_warnings(warnings))
}

/// Longitudinal geometric loop from its closed-form steps:
/// `U1 = e^{i s phi0/4} D(2 e^r alpha_s)`, `U2 = D(alpha_s) D(beta_s) D†(alpha_s)`,
/// `U3 = e^{i s phi0/4} D†(2 e^r alpha_s)`, `U4 = D†(alpha_s) D†(beta_s) D(alpha_s)`
/// with `beta_s = 4 i gamma s / omega` and durations `(tau/2, tau, tau/2, tau)`.
pub fn build_geometric_loop(p: &SensingParams, h: HilbertParams) -> Result<ProtocolPlan> {
    p.validate()?;
    let tau = p.period();
    let er = p.r.exp();
    let quarter = p.phi0() / 4.0;
    let mut warnings = Vec::new();
    let u1 =
        joint_from(|s| phased_displacement(s.sign() * quarter, C64::new(2.0 * er * p.alpha(s), 0.0), h), &mut warnings);
    let u3 = joint_from(
        |s| phased_displacement(s.sign() * quarter, C64::new(-2.0 * er * p.alpha(s), 0.0), h),
        &mut warnings,
    );
    let (u2, u4) = echo_steps(p, h, &mut warnings);
    four_steps(h, [u1, u2, u3, u4], [tau / 2.0, tau, tau / 2.0, tau], 4, warnings)
}

fn free_joint(
    p: &SensingParams,
    t0: f64,
    t1: f64,
    r: f64,
    h: HilbertParams,
    warnings: &mut Vec<Warning>,
) -> JointOperator {
    joint_from(|s| free_evolution_factored(p, s, t0, t1, r, h), warnings)
}

/// `F(t3, t2) X F(t2, t1) X F(t1, t0)`: free evolution with the branches
/// swapped by two π pulses during the middle interval.
fn echo_pulsed(p: &SensingParams, t: [f64; 4], h: HilbertParams, warnings: &mut Vec<Warning>) -> JointOperator {
    let x = fock::pi_pulse(h);
    let first = free_joint(p, t[0], t[1], 0.0, h, warnings);
    let middle = free_joint(p, t[1], t[2], 0.0, h, warnings);
    let last = free_joint(p, t[2], t[3], 0.0, h, warnings);
    &(&(&(&last * &x) * &middle) * &x) * &first
}

/// Geometric loop assembled from free-evolution propagators only: steps 1
/// and 3 are squeeze-conjugated half periods, steps 2 and 4 are full periods
/// with π pulses at quarter-period offsets.
pub fn build_geometric_loop_pulsed(p: &SensingParams, h: HilbertParams) -> Result<ProtocolPlan> {
    build_pulsed(p, h, true)
}

/// Negative control for [`build_geometric_loop_pulsed`] with every π pulse
/// removed. The loop still closes, but the area term is lost and the phase
/// collapses to `3 phi0`.
pub fn build_geometric_loop_unpulsed(p: &SensingParams, h: HilbertParams) -> Result<ProtocolPlan> {
    build_pulsed(p, h, false)
}

fn build_pulsed(p: &SensingParams, h: HilbertParams, pulses: bool) -> Result<ProtocolPlan> {
    p.validate()?;
    let tau = p.period();
    let mut w = Vec::new();
    let u1 = free_joint(p, 0.0, tau / 2.0, p.r, h, &mut w);
    let u3 = free_joint(p, 1.5 * tau, 2.0 * tau, p.r, h, &mut w);
    let (u2, u4) = if pulses {
        let q = tau / 4.0;
        (
            echo_pulsed(p, [2.0 * q, 3.0 * q, 5.0 * q, 6.0 * q], h, &mut w),
            echo_pulsed(p, [8.0 * q, 9.0 * q, 11.0 * q, 12.0 * q], h, &mut w),
        )
    } else {
        (free_joint(p, tau / 2.0, 1.5 * tau, 0.0, h, &mut w), free_joint(p, 2.0 * tau, 3.0 * tau, 0.0, h, &mut w))
    };
    let count = if pulses { 4 } else { 0 };
    four_steps(h, [u1, u2, u3, u4], [tau / 2.0, tau, tau / 2.0, tau], count, w)
}

/// Frequency-switch loop: the oscillator is quenched to `omega'` for steps 1
/// and 3, `U1 = e^{i phi0 e^{4r} s / 4} D(2 alpha_s e^{3r})` and `U3` the
/// same with `D†`; steps 2 and 4 are the echo steps of the geometric loop.
/// Durations are `(tau'/2, tau, tau'/2, tau)`.
pub fn build_freq_switch_loop(p: &SensingParams, h: HilbertParams) -> Result<ProtocolPlan> {
    let q = crate::closed_form::freq_switch_quantities(p)?;
    let tau = p.period();
    let tau_p = 2.0 * PI / p.omega_prime.expect("checked by freq_switch_quantities");
    let e3 = (3.0 * q.r).exp();
    let quarter = q.phi0_prime / 4.0;
    let mut w = Vec::new();
    let u1 = joint_from(|s| phased_displacement(s.sign() * quarter, C64::new(2.0 * e3 * p.alpha(s), 0.0), h), &mut w);
    let u3 = joint_from(|s| phased_displacement(s.sign() * quarter, C64::new(-2.0 * e3 * p.alpha(s), 0.0), h), &mut w);
    let (u2, u4) = echo_steps(p, h, &mut w);
    four_steps(h, [u1, u2, u3, u4], [tau_p / 2.0, tau, tau_p / 2.0, tau], 4, w)
}

/// Frequency-switch loop built from the quench itself: half a period of
/// free evolution at `omega'`, expressed in the `omega` mode basis through
/// squeeze conjugation with `r = ln(omega / omega') / 2`.
pub fn build_freq_switch_loop_quenched(p: &SensingParams, h: HilbertParams) -> Result<ProtocolPlan> {
    let r = crate::closed_form::freq_switch_r(p)?;
    let tau = p.period();
    let quenched = SensingParams { omega: p.omega_prime.expect("checked by freq_switch_r"), ..*p };
    let tau_p = quenched.period();
    let mut w = Vec::new();
    let u1 = free_joint(&quenched, 0.0, tau_p / 2.0, r, h, &mut w);
    let u3 = free_joint(&quenched, tau_p / 2.0, tau_p, r, h, &mut w);
    let (u2, u4) = echo_steps(p, h, &mut w);
    four_steps(h, [u1, u2, u3, u4], [tau_p / 2.0, tau, tau_p / 2.0, tau], 4, w)
}

/// Dispersive parallelogram loop `U4 U3 U2 U1` with
/// `U1 = D(alpha e^{i s chi t / 2})`, `U2 = D(alpha e^r)`, `U3 = U1†`, `U4 = U2†`.
///
/// Steps 1 and 3 take the two free-evolution arms of length `t` around the
/// drive; the squeezed drives are instantaneous.
pub fn build_dispersive_loop(d: &DispersiveParams, h: HilbertParams) -> Result<ProtocolPlan> {
    d.validate()?;
    let half = d.chi * d.t / 2.0;
    let er = d.r.exp();
    let mut w = Vec::new();
    let u1 = joint_from(|s| displacement(C64::from_polar(d.alpha, s.sign() * half), h), &mut w);
    let u2 = joint_from(|_| displacement(C64::new(d.alpha * er, 0.0), h), &mut w);
    let u3 = u1.adjoint();
    let u4 = u2.adjoint();
    four_steps(h, [u1, u2, u3, u4], [2.0 * d.t, 0.0, 2.0 * d.t, 0.0], 0, w)
}

/// Dispersive loop with step 1 written as the rotation sandwich
/// `R† D(alpha) R`, `R = exp(-i s chi t n / 2)`, and step 2 as the matrix
/// squeeze conjugation `S†(r) D(alpha) S(r)`.
pub fn build_dispersive_loop_rotated(d: &DispersiveParams, h: HilbertParams) -> Result<ProtocolPlan> {
    d.validate()?;
    let half = d.chi * d.t / 2.0;
    let mut w = Vec::new();
    let drive = displacement(C64::new(d.alpha, 0.0), h).collect_into(&mut w);
    let u1 = joint_from(
        |s| {
            let diag = nalgebra::DVector::from_fn(h.dim(), |n, _| C64::from_polar(1.0, -s.sign() * half * n as f64));
            let rot = FockOperator::from_matrix(h, CMatrix::from_diagonal(&diag)).expect("cutoff-sized");
            Checked::ok(&(&rot.adjoint() * &drive) * &rot)
        },
        &mut w,
    );
    let sq = fock::squeeze(C64::new(d.r, 0.0), h).collect_into(&mut w);
    let squeezed = &(&sq.adjoint() * &drive) * &sq;
    let u2 = fock::lift_oscillator(&squeezed);
    let u3 = u1.adjoint();
    let u4 = u2.adjoint();
    four_steps(h, [u1, u2, u3, u4], [2.0 * d.t, 0.0, 2.0 * d.t, 0.0], 0, w)
}

/// Qubit readout after an interference run.
#[derive(Clone, Copy, Debug)]
pub struct Interference {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub qubit: QubitState,
}

/// Prepares `|+⟩ ⊗ rho_osc`, runs the plan `n_loops` times and reads out the qubit.
pub fn run_interference(
    plan: &ProtocolPlan,
    initial_osc: &OscillatorState,
    n_loops: u32,
) -> Result<Checked<Interference>> {
    if initial_osc.dim() != plan.hilbert().dim() {
        return Err(Error::DimensionMismatch { expected: plan.hilbert().dim(), found: initial_osc.dim() });
    }
    let mut rho = JointState::product(&QubitState::plus(), initial_osc);
    for _ in 0..n_loops {
        for step in plan.steps() {
            rho = rho.evolve(&step.unitary);
        }
    }
    let qubit = rho.reduced_qubit();
    let out = Interference { sigma_x: qubit.sigma_x(), sigma_y: qubit.sigma_y(), qubit };
    Ok(Checked::with_warnings(out, plan.warnings().to_vec()))
}
