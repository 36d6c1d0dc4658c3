//! Lindblad dissipation for the six elementary noise channels and the noisy
//! protocol in which unitary steps alternate with dissipative segments.
//!
//! Each channel is a single jump operator lifted to the joint space. Their
//! dissipators act entry by entry on the spin blocks of `rho`, so the master
//! equation is integrated with structured kernels instead of dense products;
//! [`lindblad_rhs_dense`] keeps the generic form as a reference.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Checked, Warning};
use crate::error::{invalid, Error, Result};
use crate::fock::{self, HilbertParams, JointOperator, JointState, QubitState};
use crate::linalg::{self, CMatrix, C64};
use crate::protocol::ProtocolPlan;

/// Largest allowed `lambda * dt`.
pub const MAX_RATE_STEP: f64 = 1e-3;
/// Fewest integration steps per dissipative segment.
pub const MIN_SEGMENT_STEPS: usize = 200;
/// Step-halving change (max-norm) above which a segment is flagged.
pub const DISSIPATION_TOL: f64 = 1e-8;
/// Top-level population above which leakage is reported.
pub const LEAKAGE_TOL: f64 = 1e-4;
/// Number of top Fock levels watched for leakage.
pub const LEAKAGE_LEVELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `L = sqrt(lambda) a`
    BosonLoss,
    /// `L = sqrt(lambda) a†`
    BosonHeat,
    /// `L = sqrt(lambda) a†a`
    BosonDephase,
    /// `L = sqrt(lambda) σ⁻`
    QubitDecay,
    /// `L = sqrt(lambda) σ⁺`
    QubitHeat,
    /// `L = sqrt(lambda) σz`
    QubitDephase,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 6] = [
        NoiseKind::BosonLoss,
        NoiseKind::BosonHeat,
        NoiseKind::BosonDephase,
        NoiseKind::QubitDecay,
        NoiseKind::QubitHeat,
        NoiseKind::QubitDephase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::BosonLoss => "boson_loss",
            NoiseKind::BosonHeat => "boson_heat",
            NoiseKind::BosonDephase => "boson_dephase",
            NoiseKind::QubitDecay => "qubit_decay",
            NoiseKind::QubitHeat => "qubit_heat",
            NoiseKind::QubitDephase => "qubit_dephase",
        }
    }

    /// Loss and heating couple neighbouring Fock levels.
    fn is_chain(self) -> bool {
        matches!(self, NoiseKind::BosonLoss | NoiseKind::BosonHeat)
    }

    pub fn is_bosonic(self) -> bool {
        matches!(self, NoiseKind::BosonLoss | NoiseKind::BosonHeat | NoiseKind::BosonDephase)
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown noise channel '{s}'")))
    }
}

/// One dissipator with its rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseChannel {
    pub kind: NoiseKind,
    #[serde(alias = "lambda")]
    pub rate: f64,
}

impl NoiseChannel {
    pub fn new(kind: NoiseKind, rate: f64) -> Result<Self> {
        let ch = NoiseChannel { kind, rate };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(invalid(format!("noise rate must be non-negative, got {}", self.rate)));
        }
        Ok(())
    }

    /// Jump operator `L` on the joint space, rate included.
    pub fn jump_operator(&self, h: HilbertParams) -> JointOperator {
        let g = C64::new(self.rate.sqrt(), 0.0);
        match self.kind {
            NoiseKind::BosonLoss => fock::lift_oscillator(&fock::annihilation(h).scaled(g)),
            NoiseKind::BosonHeat => fock::lift_oscillator(&fock::creation(h).scaled(g)),
            NoiseKind::BosonDephase => fock::lift_oscillator(&fock::number(h).scaled(g)),
            NoiseKind::QubitDecay => fock::lift_qubit(&(fock::sigma_minus() * g), h),
            NoiseKind::QubitHeat => fock::lift_qubit(&(fock::sigma_plus() * g), h),
            NoiseKind::QubitDephase => fock::lift_qubit(&(fock::sigma_z() * g), h),
        }
    }

    /// Largest decay rate of the dissipator at this cutoff.
    pub fn stiffness(&self, h: HilbertParams) -> f64 {
        let n = h.cutoff() as f64;
        self.rate
            * match self.kind {
                NoiseKind::BosonLoss | NoiseKind::BosonHeat => n,
                NoiseKind::BosonDephase => n * n / 2.0,
                _ => 2.0,
            }
    }

    /// Default step for a segment of length `t`: `lambda dt <= 1e-3`, at least
    /// 200 steps, and `dt * stiffness <= 1` to stay well inside the RK4
    /// stability region.
    pub fn default_dt(&self, t: f64, h: HilbertParams) -> f64 {
        let mut dt = t / MIN_SEGMENT_STEPS as f64;
        if self.rate > 0.0 {
            dt = dt.min(MAX_RATE_STEP / self.rate).min(1.0 / self.stiffness(h));
        }
        dt
    }
}

/// `L rho L† - (L†L rho + rho L†L) / 2` for a generic jump operator.
pub fn lindblad_rhs_dense(rho: &CMatrix, jump: &CMatrix) -> CMatrix {
    let ll = linalg::adj_matmul(jump, jump);
    let gain = linalg::conjugate(jump, rho);
    gain - (linalg::matmul(&ll, rho) + linalg::matmul(rho, &ll)) * C64::new(0.5, 0.0)
}

/// Dissipator of `ch` applied to a joint density matrix with oscillator
/// dimension `d`, evaluated entry by entry.
pub fn lindblad_rhs(rho: &CMatrix, ch: &NoiseChannel, d: usize) -> CMatrix {
    let dim = 2 * d;
    assert_eq!(rho.shape(), (dim, dim), "density matrix does not match the cutoff");
    let lam = ch.rate;
    let src = rho.as_slice();
    let at = |i: usize, j: usize| src[j * dim + i];
    let sqrt: Vec<f64> = (0..=d).map(|k| (k as f64).sqrt()).collect();
    let mut out = CMatrix::zeros(dim, dim);
    let dst = out.as_mut_slice();
    for j in 0..dim {
        let (qc, n) = (j / d, j % d);
        for i in 0..dim {
            let (qr, m) = (i / d, i % d);
            let v = at(i, j);
            let r = match ch.kind {
                NoiseKind::BosonLoss => {
                    let mut r = -v * ((m + n) as f64 / 2.0);
                    if m + 1 < d && n + 1 < d {
                        r += at(i + 1, j + 1) * (sqrt[m + 1] * sqrt[n + 1]);
                    }
                    r
                }
                NoiseKind::BosonHeat => {
                    // a a† on the truncated space is diag(1, ..., N, 0)
                    let c = |k: usize| if k + 1 < d { (k + 1) as f64 } else { 0.0 };
                    let mut r = -v * ((c(m) + c(n)) / 2.0);
                    if m > 0 && n > 0 {
                        r += at(i - 1, j - 1) * (sqrt[m] * sqrt[n]);
                    }
                    r
                }
                NoiseKind::BosonDephase => {
                    let k = m as f64 - n as f64;
                    -v * (k * k / 2.0)
                }
                NoiseKind::QubitDecay => match (qr, qc) {
                    (0, 0) => -v,
                    (1, 1) => at(i - d, j - d),
                    _ => -v * 0.5,
                },
                NoiseKind::QubitHeat => match (qr, qc) {
                    (1, 1) => -v,
                    (0, 0) => at(i + d, j + d),
                    _ => -v * 0.5,
                },
                NoiseKind::QubitDephase => {
                    if qr == qc {
                        C64::new(0.0, 0.0)
                    } else {
                        -v * 2.0
                    }
                }
            };
            dst[j * dim + i] = r * lam;
        }
    }
    out
}

/// `1 + z + z^2/2 + z^3/6 + z^4/24`: one RK4 step of `x' = c x` with `z = c dt`.
fn rk4_factor(z: f64) -> f64 {
    1.0 + z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))
}

/// The map produced by `steps` fixed RK4 steps of one channel's master
/// equation over a segment of length `t`.
///
/// The equation is linear and time independent, so the stepper is the
/// polynomial `P(hA)^steps` with `P` the quartic Taylor polynomial. Dephasing
/// and the qubit channels only rescale entries or move weight between spin
/// blocks, and `P` reduces to scalar factors. Loss and heating couple Fock
/// levels along each diagonal `m - n = k`; for those the chain propagator is
/// formed once per offset by repeated squaring and reused for every state.
#[derive(Clone, Debug)]
pub struct SegmentMap {
    kind: NoiseKind,
    d: usize,
    /// rate * dt
    z: f64,
    steps: usize,
    /// chain propagators by offset `|m - n|` (loss and heating only)
    chains: Vec<DMatrix<f64>>,
}

impl SegmentMap {
    pub fn new(ch: &NoiseChannel, t: f64, steps: usize, d: usize) -> Self {
        let z = ch.rate * t / steps as f64;
        let chains = if ch.kind.is_chain() {
            (0..d).map(|k| chain_propagator(ch.kind, d, k, z, steps)).collect()
        } else {
            Vec::new()
        };
        SegmentMap { kind: ch.kind, d, z, steps, chains }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.d;
        let dim = 2 * d;
        assert_eq!(rho.shape(), (dim, dim), "density matrix does not match the cutoff");
        let pow = |z: f64| rk4_factor(z).powi(self.steps as i32);
        let z = -self.z;
        let mut out = rho.clone();
        let x = out.as_mut_slice();
        match self.kind {
            NoiseKind::BosonDephase => {
                let f: Vec<f64> = (0..d).map(|k| pow(z * (k * k) as f64 / 2.0)).collect();
                for j in 0..dim {
                    for i in 0..dim {
                        x[j * dim + i] *= f[(i % d).abs_diff(j % d)];
                    }
                }
            }
            NoiseKind::QubitDephase => {
                let f = pow(2.0 * z);
                for j in 0..dim {
                    for i in 0..dim {
                        if i / d != j / d {
                            x[j * dim + i] *= f;
                        }
                    }
                }
            }
            NoiseKind::QubitDecay | NoiseKind::QubitHeat => {
                // RK4 keeps the linear invariant `src + dst` exactly.
                let (from, to) = if self.kind == NoiseKind::QubitDecay { (0, 1) } else { (1, 0) };
                let (keep, coh) = (pow(z), pow(z / 2.0));
                for n in 0..d {
                    for m in 0..d {
                        let a = (from * d + n) * dim + from * d + m;
                        let b = (to * d + n) * dim + to * d + m;
                        let moved = x[a] * (1.0 - keep);
                        x[a] *= keep;
                        x[b] += moved;
                        x[(d + n) * dim + m] *= coh;
                        x[n * dim + d + m] *= coh;
                    }
                }
            }
            NoiseKind::BosonLoss | NoiseKind::BosonHeat => {
                let src = rho.as_slice();
                let mut v = Vec::with_capacity(d);
                for (qr, qc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    for k in 0..d {
                        let prop = &self.chains[k];
                        // k = m - n >= 0, then its mirror n - m = k
                        for mirror in [false, true] {
                            if mirror && k == 0 {
                                continue;
                            }
                            let idx = |l: usize| {
                                let (m, n) = if mirror { (l, l + k) } else { (l + k, l) };
                                (qc * d + n) * dim + qr * d + m
                            };
                            v.clear();
                            v.extend((0..d - k).map(|l| src[idx(l)]));
                            for a in 0..d - k {
                                let row = prop.row(a);
                                let mut acc = C64::default();
                                for (b, &w) in row.iter().enumerate() {
                                    if w != 0.0 {
                                        acc += v[b] * w;
                                    }
                                }
                                x[idx(a)] = acc;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// `P(hA)^steps` for the loss or heating chain at Fock offset `k`, where
/// chain site `l` is the entry `(l + k, l)`.
fn chain_propagator(kind: NoiseKind, d: usize, k: usize, h: f64, steps: usize) -> DMatrix<f64> {
    let len = d - k;
    let loss = kind == NoiseKind::BosonLoss;
    // a a† on the truncated space is diag(1, ..., N, 0)
    let decay = |j: usize| {
        if loss {
            j as f64
        } else if j + 1 < d {
            (j + 1) as f64
        } else {
            0.0
        }
    };
    let mut a = DMatrix::<f64>::zeros(len, len);
    for l in 0..len {
        let (m, n) = (l + k, l);
        a[(l, l)] = -(decay(m) + decay(n)) / 2.0;
        if loss && l + 1 < len {
            a[(l, l + 1)] = (((m + 1) * (n + 1)) as f64).sqrt();
        }
        if !loss && l > 0 {
            a[(l, l - 1)] = ((m * n) as f64).sqrt();
        }
    }
    let x = a * h;
    let id = DMatrix::<f64>::identity(len, len);
    // I + X (I + X/2 (I + X/3 (I + X/4)))
    let mut p = &id + &x * 0.25;
    p = &id + (&x * p) / 3.0;
    p = &id + (&x * p) / 2.0;
    p = &id + &x * p;
    let mut out = id;
    let mut base = p;
    let mut e = steps;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    out
}

/// A dissipative segment at step `dt` together with its half-step check.
#[derive(Clone, Debug)]
pub struct Segment {
    channel: NoiseChannel,
    t: f64,
    coarse: SegmentMap,
    fine: SegmentMap,
}

impl Segment {
    pub fn new(ch: &NoiseChannel, t: f64, dt: f64, d: usize) -> Result<Self> {
        ch.validate()?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("dissipation time must be non-negative, got {t}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("integration step must be positive, got {dt}")));
        }
        let steps = (t / dt).ceil().max(1.0) as usize;
        Ok(Segment {
            channel: *ch,
            t,
            coarse: SegmentMap::new(ch, t, steps, d),
            fine: SegmentMap::new(ch, t, 2 * steps, d),
        })
    }

    /// [`Segment::new`] with [`NoiseChannel::default_dt`].
    pub fn with_default_dt(ch: &NoiseChannel, t: f64, h: HilbertParams) -> Result<Self> {
        Segment::new(ch, t, ch.default_dt(t, h), h.dim())
    }

    pub fn duration(&self) -> f64 {
        self.t
    }

    /// Applies the segment; see [`dissipate`].
    pub fn apply(&self, rho: &JointState) -> Result<Checked<JointState>> {
        let d = rho.osc_dim();
        if d != self.coarse.d {
            return Err(Error::DimensionMismatch { expected: self.coarse.d, found: d });
        }
        if self.channel.rate == 0.0 || self.t == 0.0 {
            return Ok(Checked::ok(rho.clone()));
        }
        let coarse = self.coarse.apply(rho.matrix());
        let fine = self.fine.apply(rho.matrix());
        if !linalg::is_finite(&fine) {
            return Err(Error::NonFinite("dissipated density matrix"));
        }
        let kind = self.channel.kind;
        let mut warnings = Vec::new();
        let change = linalg::max_abs_diff(&coarse, &fine);
        if change > DISSIPATION_TOL {
            warnings.push(Warning::Convergence { context: format!("{kind} segment"), change });
        }
        let out = JointState::from_raw(fine, d);
        let top = out.top_population(LEAKAGE_LEVELS);
        if top > LEAKAGE_TOL {
            warnings.push(Warning::Leakage { context: format!("{kind} segment"), top_population: top });
        }
        Ok(Checked::with_warnings(out, warnings))
    }
}

/// Integrates `d rho / dt = D[L] rho` for time `t` with fourth-order
/// Runge-Kutta at step at most `dt`.
///
/// The segment is repeated at half the step and the finer result returned; a
/// change above [`DISSIPATION_TOL`] raises a convergence warning. Population
/// above [`LEAKAGE_TOL`] in the top four Fock levels raises a leakage warning.
pub fn dissipate(rho: &JointState, ch: &NoiseChannel, t: f64, dt: f64) -> Result<Checked<JointState>> {
    Segment::new(ch, t, dt, rho.osc_dim())?.apply(rho)
}

/// [`dissipate`] with [`NoiseChannel::default_dt`].
pub fn dissipate_default(rho: &JointState, ch: &NoiseChannel, t: f64) -> Result<Checked<JointState>> {
    dissipate(rho, ch, t, ch.default_dt(t, rho.hilbert()))
}

/// A protocol plan with one noise channel acting between its steps; each
/// dissipative segment lasts as long as the unitary step before it.
#[derive(Clone, Debug)]
pub struct NoisySchedule {
    plan: ProtocolPlan,
    channel: NoiseChannel,
    segments: Vec<Arc<Segment>>,
}

impl NoisySchedule {
    pub fn new(plan: ProtocolPlan, channel: NoiseChannel) -> Result<Self> {
        let h = plan.hilbert();
        let mut segments: Vec<Arc<Segment>> = Vec::with_capacity(plan.steps().len());
        for step in plan.steps() {
            let seg = match segments.iter().find(|g| g.duration() == step.duration) {
                Some(g) => Arc::clone(g),
                None => Arc::new(Segment::with_default_dt(&channel, step.duration, h)?),
            };
            segments.push(seg);
        }
        Ok(NoisySchedule { plan, channel, segments })
    }

    /// The same channel on another plan; segment maps are reused when the
    /// step durations and cutoff agree.
    pub fn with_plan(&self, plan: ProtocolPlan) -> Result<Self> {
        let same = plan.hilbert() == self.plan.hilbert()
            && plan.steps().len() == self.segments.len()
            && plan.steps().iter().zip(&self.segments).all(|(s, g)| s.duration == g.duration());
        if same {
            Ok(NoisySchedule { plan, channel: self.channel, segments: self.segments.clone() })
        } else {
            NoisySchedule::new(plan, self.channel)
        }
    }

    pub fn plan(&self) -> &ProtocolPlan {
        &self.plan
    }

    pub fn channel(&self) -> NoiseChannel {
        self.channel
    }
}

/// Outcome of a noisy run.
#[derive(Clone, Debug)]
pub struct NoisyOutcome {
    pub final_state: JointState,
    pub qubit: QubitState,
    /// `arg ⟨σ⁺⟩`
    pub coherence_phase: f64,
    /// `|⟨σ⁺⟩|`
    pub coherence_mag: f64,
}

impl NoisyOutcome {
    fn from_state(final_state: JointState) -> Self {
        let qubit = final_state.reduced_qubit();
        let c = qubit.coherence();
        NoisyOutcome { final_state, qubit, coherence_phase: c.arg(), coherence_mag: c.norm() }
    }
}

/// Runs `E_{t4} ∘ U4 ∘ E_{t3} ∘ U3 ∘ E_{t2} ∘ U2 ∘ E_{t1} ∘ U1` `n_loops`
/// times, calling `observe(label, state)` after every unitary step and at the
/// end with label `"final"`.
pub fn run_noisy_protocol_observed(
    sched: &NoisySchedule,
    initial: &JointState,
    n_loops: u32,
    mut observe: impl FnMut(&str, &JointState),
) -> Result<Checked<NoisyOutcome>> {
    if initial.osc_dim() != sched.plan.hilbert().dim() {
        return Err(Error::DimensionMismatch { expected: sched.plan.hilbert().dim(), found: initial.osc_dim() });
    }
    let mut warnings = sched.plan.warnings().to_vec();
    let mut rho = initial.clone();
    for _ in 0..n_loops {
        for (step, seg) in sched.plan.steps().iter().zip(&sched.segments) {
            rho = rho.evolve(&step.unitary);
            observe(&step.label, &rho);
            rho = seg.apply(&rho)?.collect_into(&mut warnings);
        }
    }
    observe("final", &rho);
    Ok(Checked::with_warnings(NoisyOutcome::from_state(rho), warnings))
}

pub fn run_noisy_protocol(sched: &NoisySchedule, initial: &JointState, n_loops: u32) -> Result<Checked<NoisyOutcome>> {
    run_noisy_protocol_observed(sched, initial, n_loops, |_, _| {})
}

/// One row of [`phase_deviation_report`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseDeviation {
    pub label: String,
    /// Coherence phase relative to the reference, wrapped to `(-pi, pi]`.
    pub delta_phi: f64,
    pub magnitude_ratio: f64,
}

/// Coherence phase and magnitude of each run relative to `reference`.
pub fn phase_deviation_report(reference: &NoisyOutcome, runs: &[(String, NoisyOutcome)]) -> Vec<PhaseDeviation> {
    let c0 = reference.qubit.coherence();
    runs.iter()
        .map(|(label, out)| {
            let c = out.qubit.coherence();
            PhaseDeviation {
                label: label.clone(),
                delta_phi: (c * c0.conj()).arg(),
                magnitude_ratio: c.norm() / c0.norm(),
            }
        })
        .collect()
}
