//! Finite-difference quantum and classical Fisher information of the qubit
//! reduced state, and the noisy QFI sweep over channels, rates and states.

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::SensingParams;
use crate::diagnostics::{Checked, Warning};
use crate::error::{invalid, Result};
use crate::fock::{HilbertParams, OscillatorState, QubitState};
use crate::linalg::C64;
use crate::open_system::{run_noisy_protocol, NoiseChannel, NoiseKind, NoisySchedule};
use crate::protocol::{build_free_evolution, build_geometric_loop, run_interference, ProtocolPlan};
use crate::states::{joint_plus_state, make_state, OscStateSpec};

/// Default working point for the force.
pub const DEFAULT_ETA0: f64 = 1e-5;
/// Default absolute finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-7;
/// Relative change between steps `h` and `h/2` that sets the convergence flag.
pub const HALVING_TOL: f64 = 1e-3;
/// Below this `1 - |r|^2` the state is treated as pure.
pub const PURE_TOL: f64 = 1e-9;
/// Eigenvalue pairs with `p_i + p_j` below this are dropped from the SLD sum.
pub const SLD_FLOOR: f64 = 1e-12;
/// Smallest `1 - <σx>^2` for which the binary CFI is evaluated directly.
pub const CFI_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMethod {
    BlochQfi,
    SldEigenQfi,
    BinaryCfi,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherEstimate {
    pub value: f64,
    pub method: FisherMethod,
    pub step: f64,
    /// Set when the estimates at `h` and `h/2` differ by more than
    /// [`HALVING_TOL`] relative; CFI changes are measured against the QFI.
    pub convergence_flag: bool,
}

/// Qubit states sampled at `theta0`, `theta0 ± h` and `theta0 ± h/2`.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub theta0: f64,
    pub step: f64,
    pub center: QubitState,
    /// `[-h, +h, -h/2, +h/2]`
    pub sides: [QubitState; 4],
}

impl Stencil {
    pub const OFFSETS: [f64; 4] = [-1.0, 1.0, -0.5, 0.5];

    /// The five parameter values at which the family is sampled, center first.
    pub fn points(theta0: f64, h: f64) -> [f64; 5] {
        let o = Self::OFFSETS;
        [theta0, theta0 + o[0] * h, theta0 + o[1] * h, theta0 + o[2] * h, theta0 + o[3] * h]
    }

    pub fn from_samples(theta0: f64, h: f64, samples: [QubitState; 5]) -> Self {
        let [center, a, b, c, d] = samples;
        Stencil { theta0, step: h, center, sides: [a, b, c, d] }
    }

    pub fn sample<F>(family: F, theta0: f64, h: f64) -> Result<Checked<Stencil>>
    where
        F: Fn(f64) -> Result<Checked<QubitState>>,
    {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("finite-difference step must be positive, got {h}")));
        }
        let mut warnings = Vec::new();
        let mut out = Vec::with_capacity(5);
        for x in Self::points(theta0, h) {
            out.push(family(x)?.collect_into(&mut warnings));
        }
        let samples: [QubitState; 5] = out.try_into().expect("five samples");
        Ok(Checked::with_warnings(Self::from_samples(theta0, h, samples), warnings))
    }

    /// Evaluates `method` at steps `h` and `h/2` and flags disagreement.
    pub fn estimate(&self, method: FisherMethod) -> Checked<FisherEstimate> {
        let mut warnings = Vec::new();
        let f = |minus: &QubitState, plus: &QubitState, h: f64, w: &mut Vec<Warning>| match method {
            FisherMethod::BlochQfi => bloch_qfi(&self.center, minus, plus, h),
            FisherMethod::SldEigenQfi => sld_qfi(&self.center, minus, plus, h),
            FisherMethod::BinaryCfi => binary_cfi(&self.center, minus, plus, h, w),
        };
        let coarse = f(&self.sides[0], &self.sides[1], self.step, &mut warnings);
        let mut scratch = Vec::new();
        let fine = f(&self.sides[2], &self.sides[3], self.step / 2.0, &mut scratch);
        let change = (coarse - fine).abs();
        let mut scale = coarse.abs().max(fine.abs());
        if method == FisherMethod::BinaryCfi {
            // CFI is bounded by the QFI, which sets its natural scale where
            // the readout carries almost no information.
            scale = scale.max(bloch_qfi(&self.center, &self.sides[0], &self.sides[1], self.step));
        }
        let convergence_flag = change > HALVING_TOL * scale;
        if convergence_flag {
            warnings.push(Warning::Convergence { context: format!("{method:?} step halving"), change: change / scale });
        }
        Checked::with_warnings(FisherEstimate { value: coarse, method, step: self.step, convergence_flag }, warnings)
    }
}

fn bloch_qfi(center: &QubitState, minus: &QubitState, plus: &QubitState, h: f64) -> f64 {
    let r = center.bloch();
    let (a, b) = (minus.bloch(), plus.bloch());
    let dr: Vec<f64> = (0..3).map(|k| (b[k] - a[k]) / (2.0 * h)).collect();
    let speed2: f64 = dr.iter().map(|x| x * x).sum();
    let radial: f64 = (0..3).map(|k| r[k] * dr[k]).sum();
    let mixedness = 1.0 - r.iter().map(|x| x * x).sum::<f64>();
    if mixedness > PURE_TOL {
        speed2 + radial * radial / mixedness
    } else {
        speed2
    }
}

fn sld_qfi(center: &QubitState, minus: &QubitState, plus: &QubitState, h: f64) -> f64 {
    let drho: Matrix2<C64> = (plus.matrix() - minus.matrix()) / C64::new(2.0 * h, 0.0);
    let eig = center.matrix().symmetric_eigen();
    let v = eig.eigenvectors;
    let d = v.adjoint() * drho * v;
    let mut f = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let s = eig.eigenvalues[i] + eig.eigenvalues[j];
            if s > SLD_FLOOR {
                f += 2.0 * d[(i, j)].norm_sqr() / s;
            }
        }
    }
    f
}

fn binary_cfi(center: &QubitState, minus: &QubitState, plus: &QubitState, h: f64, w: &mut Vec<Warning>) -> f64 {
    let x = center.sigma_x();
    let slope = (plus.sigma_x() - minus.sigma_x()) / (2.0 * h);
    let denom = (1.0 - x) * (1.0 + x);
    if denom > CFI_FLOOR {
        return slope * slope / denom;
    }
    // At <σx> = ±1 the ratio tends to -sign(x) times the curvature.
    w.push(Warning::RemovableSingularity { context: "binary CFI at <σx> = ±1".into() });
    let curvature = (plus.sigma_x() + minus.sigma_x() - 2.0 * x) / (h * h);
    (-x.signum() * curvature).max(0.0)
}

/// QFI of the qubit family `family` at `theta0` by the Bloch-vector formula.
pub fn qubit_qfi<F>(family: F, theta0: f64, h: f64) -> Result<Checked<FisherEstimate>>
where
    F: Fn(f64) -> Result<Checked<QubitState>>,
{
    fisher(family, theta0, h, FisherMethod::BlochQfi)
}

/// QFI through the eigen-decomposition of `rho`; a cross-check of [`qubit_qfi`].
pub fn qubit_qfi_sld<F>(family: F, theta0: f64, h: f64) -> Result<Checked<FisherEstimate>>
where
    F: Fn(f64) -> Result<Checked<QubitState>>,
{
    fisher(family, theta0, h, FisherMethod::SldEigenQfi)
}

/// Classical Fisher information of the binary σx readout.
pub fn qubit_cfi_sigma_x<F>(family: F, theta0: f64, h: f64) -> Result<Checked<FisherEstimate>>
where
    F: Fn(f64) -> Result<Checked<QubitState>>,
{
    fisher(family, theta0, h, FisherMethod::BinaryCfi)
}

fn fisher<F>(family: F, theta0: f64, h: f64, method: FisherMethod) -> Result<Checked<FisherEstimate>>
where
    F: Fn(f64) -> Result<Checked<QubitState>>,
{
    let (stencil, mut warnings) = Stencil::sample(family, theta0, h)?.into_parts();
    let est = stencil.estimate(method).collect_into(&mut warnings);
    Ok(Checked::with_warnings(est, warnings))
}

fn plan_family(
    build: impl Fn(&SensingParams) -> Result<ProtocolPlan>,
    p: SensingParams,
    osc: OscillatorState,
    n_loops: u32,
) -> impl Fn(f64) -> Result<Checked<QubitState>> {
    move |eta| {
        let plan = build(&p.with_eta(eta))?;
        Ok(run_interference(&plan, &osc, n_loops)?.map(|i| i.qubit))
    }
}

/// `eta -> qubit after free evolution for time t`.
pub fn free_evolution_family(
    p: SensingParams,
    t: f64,
    h: HilbertParams,
    osc: OscillatorState,
) -> impl Fn(f64) -> Result<Checked<QubitState>> {
    plan_family(move |q| build_free_evolution(q, t, h), p, osc, 1)
}

/// `eta -> qubit after p.n_loops geometric loops`.
pub fn geometric_loop_family(
    p: SensingParams,
    h: HilbertParams,
    osc: OscillatorState,
) -> impl Fn(f64) -> Result<Checked<QubitState>> {
    let n = p.n_loops;
    plan_family(move |q| build_geometric_loop(q, h), p, osc, n)
}

/// The default rate grid, `0, 0.00625, ..., 0.05`.
pub fn default_rate_grid() -> Vec<f64> {
    (0..9).map(|k| 0.05 * k as f64 / 8.0).collect()
}

/// Channels, rates and input states of a noisy QFI sweep around `params.eta`.
#[derive(Clone, Debug)]
pub struct NoiseSweepSpec {
    pub channels: Vec<NoiseKind>,
    pub rates: Vec<f64>,
    pub states: Vec<OscStateSpec>,
    pub params: SensingParams,
    pub step: f64,
}

impl NoiseSweepSpec {
    /// Six channels, nine rates and the five library states.
    pub fn full(params: SensingParams) -> Self {
        NoiseSweepSpec {
            channels: NoiseKind::ALL.to_vec(),
            rates: default_rate_grid(),
            states: OscStateSpec::library().to_vec(),
            params,
            step: DEFAULT_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.channels.is_empty() || self.rates.is_empty() || self.states.is_empty() {
            return Err(invalid("noise sweep needs at least one channel, rate and state"));
        }
        for &rate in &self.rates {
            NoiseChannel::new(NoiseKind::QubitDephase, rate)?;
        }
        for s in &self.states {
            s.validate()?;
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("finite-difference step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

/// One cell of the noisy sweep.
#[derive(Clone, Debug, Serialize)]
pub struct NoiseSweepRow {
    pub channel: NoiseKind,
    pub rate: f64,
    pub state: String,
    /// NaN when the cell failed.
    pub qfi: f64,
    pub qfi_converged: bool,
    /// Coherence phase relative to the noiseless run of the same state.
    pub phase_deviation: f64,
    pub magnitude_ratio: f64,
    pub warnings: Vec<Warning>,
    pub error: Option<String>,
}

/// Runs every (channel, rate, state) cell of `spec` in parallel on the
/// current rayon pool. Rows come back channel-major, then rate, then state.
/// A failing cell is reported in its row and never aborts the sweep.
pub fn noise_qfi_sweep(spec: &NoiseSweepSpec, h: HilbertParams) -> Result<Vec<NoiseSweepRow>> {
    spec.validate()?;
    let points = Stencil::points(spec.params.eta, spec.step);
    let plans: Vec<ProtocolPlan> =
        points.iter().map(|&eta| build_geometric_loop(&spec.params.with_eta(eta), h)).collect::<Result<_>>()?;
    let states: Vec<Result<Checked<OscillatorState>>> = spec.states.iter().map(|s| make_state(s, h)).collect();

    // Noiseless reference coherence per state, at the working point.
    let n_loops = spec.params.n_loops;
    let references: Vec<Option<C64>> = states
        .iter()
        .map(|s| {
            let s = s.as_ref().ok()?;
            let i = run_interference(&plans[0], &s.value, n_loops).ok()?;
            Some(i.value.qubit.coherence())
        })
        .collect();

    // Segment maps depend only on the channel and the step durations, so one
    // set of schedules per (channel, rate) serves every state.
    let groups: Vec<(NoiseKind, f64)> =
        spec.channels.iter().flat_map(|&k| spec.rates.iter().map(move |&r| (k, r))).collect();
    let rows = groups
        .par_iter()
        .map(|&(kind, rate)| {
            let schedules = NoiseChannel::new(kind, rate).and_then(|channel| {
                let first = NoisySchedule::new(plans[0].clone(), channel)?;
                let mut all = vec![first.clone()];
                for plan in &plans[1..] {
                    all.push(first.with_plan(plan.clone())?);
                }
                Ok(all)
            });
            (0..spec.states.len())
                .map(|si| {
                    let name = spec.states[si].name().to_string();
                    let run = || -> Result<NoiseSweepRow> {
                        let state = states[si].as_ref().map_err(Clone::clone)?;
                        let schedules = schedules.as_ref().map_err(Clone::clone)?;
                        let mut warnings = state.warnings.clone();
                        let initial = joint_plus_state(&state.value);
                        let mut samples = Vec::with_capacity(5);
                        for sched in schedules {
                            samples
                                .push(run_noisy_protocol(sched, &initial, n_loops)?.collect_into(&mut warnings).qubit);
                        }
                        let center = samples[0].coherence();
                        let samples: [QubitState; 5] = samples.try_into().expect("five samples");
                        let est = Stencil::from_samples(spec.params.eta, spec.step, samples)
                            .estimate(FisherMethod::BlochQfi)
                            .collect_into(&mut warnings);
                        let c0 = references[si].ok_or_else(|| invalid("noiseless reference run failed"))?;
                        dedup(&mut warnings);
                        Ok(NoiseSweepRow {
                            channel: kind,
                            rate,
                            state: name.clone(),
                            qfi: est.value,
                            qfi_converged: !est.convergence_flag,
                            phase_deviation: (center * c0.conj()).arg(),
                            magnitude_ratio: center.norm() / c0.norm(),
                            warnings,
                            error: None,
                        })
                    };
                    run().unwrap_or_else(|e| NoiseSweepRow {
                        channel: kind,
                        rate,
                        state: name.clone(),
                        qfi: f64::NAN,
                        qfi_converged: false,
                        phase_deviation: f64::NAN,
                        magnitude_ratio: f64::NAN,
                        warnings: Vec::new(),
                        error: Some(e.to_string()),
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(rows)
}

fn dedup(warnings: &mut Vec<Warning>) {
    let mut seen: Vec<Warning> = Vec::with_capacity(warnings.len());
    for w in warnings.drain(..) {
        if !seen.contains(&w) {
            seen.push(w);
        }
    }
    *warnings = seen;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{cfi_free, db_to_r, qfi_free, qfi_geometric};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rotation(theta: f64) -> Result<Checked<QubitState>> {
        Ok(Checked::ok(QubitState::from_bloch(theta.cos(), theta.sin(), 0.0)))
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn equator_rotation_has_unit_qfi() {
        for theta in [0.0, 0.7, 2.0] {
            let f = qubit_qfi(rotation, theta, 1e-4).unwrap().value;
            assert!((f.value - 1.0).abs() < 1e-7);
            assert!(!f.convergence_flag);
            let g = qubit_qfi_sld(rotation, theta, 1e-4).unwrap().value;
            assert!((g.value - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_family_has_zero_information() {
        let fam = |_: f64| Ok(Checked::ok(QubitState::from_bloch(0.3, 0.1, 0.2)));
        assert_eq!(qubit_qfi(fam, 0.0, 1e-3).unwrap().value.value, 0.0);
        assert_eq!(qubit_cfi_sigma_x(fam, 0.0, 1e-3).unwrap().value.value, 0.0);
    }

    #[test]
    fn cfi_singular_point_uses_limit() {
        let out = qubit_cfi_sigma_x(rotation, 0.0, 1e-4).unwrap();
        assert!(out.warnings.iter().any(|w| matches!(w, Warning::RemovableSingularity { .. })));
        assert!((out.value.value - 1.0).abs() < 1e-4);
    }

    #[test]
    fn free_evolution_matches_closed_forms() {
        let h = HilbertParams::new(120).unwrap();
        let p = SensingParams::new(1.0, 0.2, DEFAULT_ETA0);
        let fam = free_evolution_family(p, 2.0 * PI, h, OscillatorState::vacuum(h));
        let qfi = qubit_qfi(&fam, DEFAULT_ETA0, DEFAULT_STEP).unwrap().value;
        assert!(rel(qfi.value, qfi_free(&p, 2.0 * PI)) < 1e-4);
        assert!(rel(qfi.value, 25.2662) < 1e-4);
        let cfi = qubit_cfi_sigma_x(&fam, DEFAULT_ETA0, DEFAULT_STEP).unwrap().value;
        assert!(rel(cfi.value, qfi.value) < 1e-4);

        // At a generic time the signal only becomes well conditioned once the
        // phase is of order one, so the working point moves away from eta0.
        let (eta, step) = (0.05, 1e-6);
        let fam = free_evolution_family(p, 1.0, h, OscillatorState::vacuum(h));
        let cfi = qubit_cfi_sigma_x(&fam, eta, step).unwrap().value;
        assert!(rel(cfi.value, cfi_free(&p.with_eta(eta), 1.0).value) < 1e-5);
        let b = qubit_qfi(&fam, eta, step).unwrap().value.value;
        let s = qubit_qfi_sld(&fam, eta, step).unwrap().value.value;
        assert!(rel(b, s) < 1e-6);
        assert!(cfi.value <= b * (1.0 + 2e-4));
    }

    #[test]
    fn geometric_loop_matches_closed_form() {
        let h = HilbertParams::new(60).unwrap();
        let p = SensingParams::new(1.0, 0.2, DEFAULT_ETA0).with_r(db_to_r(10.0).unwrap());
        let fam = geometric_loop_family(p, h, OscillatorState::vacuum(h));
        let f = qubit_qfi(fam, DEFAULT_ETA0, DEFAULT_STEP).unwrap();
        assert!(!f.value.convergence_flag);
        assert!(rel(f.value.value, qfi_geometric(&p)) < 1e-4);
    }

    #[test]
    fn rate_grid_has_nine_points() {
        let g = default_rate_grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], 0.00625);
        assert_eq!(g[8], 0.05);
    }

    #[test]
    fn small_sweep_rows_are_ordered_and_reduce_at_zero_rate() {
        let h = HilbertParams::new(30).unwrap();
        let p = SensingParams::new(1.0, 0.2, DEFAULT_ETA0).with_r(db_to_r(10.0).unwrap());
        let spec = NoiseSweepSpec {
            channels: vec![NoiseKind::QubitDephase, NoiseKind::BosonLoss],
            rates: vec![0.0, 0.05],
            states: vec![OscStateSpec::Vacuum, OscStateSpec::Coherent { amplitude: 1.0.into() }],
            params: p,
            step: DEFAULT_STEP,
        };
        let rows = noise_qfi_sweep(&spec, h).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].channel, NoiseKind::QubitDephase);
        assert_eq!(rows[3].rate, 0.05);
        assert_eq!(rows[5].state, "coherent");
        let clean = qfi_geometric(&p);
        for r in rows.iter().filter(|r| r.rate == 0.0) {
            assert!(rel(r.qfi, clean) < 1e-4, "{r:?}");
        }
        // qubit dephasing: QFI scales with the squared magnitude ratio
        for r in &rows[2..4] {
            assert!(r.phase_deviation.abs() < 1e-9);
            assert!(rel(r.qfi, clean * r.magnitude_ratio.powi(2)) < 1e-4);
        }
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        let h = HilbertParams::new(10).unwrap();
        let mut spec = NoiseSweepSpec::full(SensingParams::force_sensing_defaults());
        spec.rates = vec![-1.0];
        assert!(noise_qfi_sweep(&spec, h).is_err());
        spec.rates = vec![];
        assert!(noise_qfi_sweep(&spec, h).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bloch_and_sld_agree_on_mixed_families(
            radius in 0.05f64..0.95, tilt in -1.0f64..1.0, speed in 0.1f64..3.0, theta in -3.0f64..3.0,
        ) {
            // radius and polar angle both depend on theta
            let fam = move |t: f64| {
                let rad = radius * (1.0 - 0.03 * (t - theta).powi(2));
                let pol = tilt + 0.2 * t;
                let az = speed * t;
                Ok(Checked::ok(QubitState::from_bloch(
                    rad * pol.cos() * az.cos(), rad * pol.cos() * az.sin(), rad * pol.sin(),
                )))
            };
            let b = qubit_qfi(fam, theta, 1e-4).unwrap().value.value;
            let s = qubit_qfi_sld(fam, theta, 1e-4).unwrap().value.value;
            prop_assert!((b - s).abs() <= 1e-6 * b.max(1e-12));
            let c = qubit_cfi_sigma_x(fam, theta, 1e-4).unwrap().value.value;
            prop_assert!(c <= b * (1.0 + 2e-4) + 1e-12);
        }
    }
}
