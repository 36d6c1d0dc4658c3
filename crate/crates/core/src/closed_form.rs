//! Analytic protocol algebra: phases, overlaps and Fisher informations as
//! plain scalar functions. These are the oracles the numerics are tested
//! against.
//!
//! All formulas keep `omega` explicit. Phases are per loop unless a name says
//! otherwise; Fisher informations include the `n_loops²` factor.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Checked, Warning};
use crate::error::{invalid, Result};
use crate::fock::Spin;

/// Physical parameters of the longitudinally coupled sensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingParams {
    /// Oscillator angular frequency.
    pub omega: f64,
    /// Longitudinal coupling strength.
    pub gamma: f64,
    /// Force amplitude `F / sqrt(2 m omega hbar)`.
    pub eta: f64,
    /// Squeeze magnitude.
    #[serde(default)]
    pub r: f64,
    #[serde(default = "one_loop")]
    pub n_loops: u32,
    /// Post-quench frequency, frequency-switch variant only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_prime: Option<f64>,
}

fn one_loop() -> u32 {
    1
}

impl SensingParams {
    pub fn new(omega: f64, gamma: f64, eta: f64) -> Self {
        SensingParams { omega, gamma, eta, r: 0.0, n_loops: 1, omega_prime: None }
    }

    /// `omega = 1`, `gamma = 0.2`, `eta = 1e-5` with 10 dB of squeezing.
    pub fn force_sensing_defaults() -> Self {
        SensingParams::new(1.0, 0.2, 1e-5).with_r(db_to_r(10.0).expect("positive dB"))
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_loops(mut self, n: u32) -> Self {
        self.n_loops = n;
        self
    }

    pub fn with_omega_prime(mut self, omega_prime: f64) -> Self {
        self.omega_prime = Some(omega_prime);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(invalid(format!("omega must be positive and finite, got {}", self.omega)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !self.eta.is_finite() {
            return Err(invalid("eta must be finite"));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(invalid(format!("r must be non-negative, got {}", self.r)));
        }
        if self.n_loops < 1 {
            return Err(invalid("n_loops must be at least 1"));
        }
        if let Some(wp) = self.omega_prime {
            if !(wp > 0.0 && wp.is_finite()) {
                return Err(invalid(format!("omega_prime must be positive, got {wp}")));
            }
            if wp > self.omega {
                return Err(invalid(format!(
                    "omega_prime = {wp} exceeds omega = {}; anti-squeezing quenches are not supported",
                    self.omega
                )));
            }
        }
        Ok(())
    }

    /// Oscillator period `tau = 2 pi / omega`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Branch amplitude `alpha_s = (eta + gamma s) / omega`.
    pub fn alpha(&self, s: Spin) -> f64 {
        (self.eta + self.gamma * s.sign()) / self.omega
    }

    /// Free-evolution phase after one period, `phi_0 = 8 pi eta gamma / omega²`.
    pub fn phi0(&self) -> f64 {
        8.0 * PI * self.eta * self.gamma / (self.omega * self.omega)
    }
}

/// Parameters of the dispersively coupled sensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersiveParams {
    /// Dispersive shift.
    pub chi: f64,
    /// Real drive displacement.
    pub alpha: f64,
    #[serde(default)]
    pub r: f64,
    /// Free-evolution time per arm.
    pub t: f64,
    #[serde(default = "one_loop")]
    pub n_loops: u32,
}

impl DispersiveParams {
    pub fn new(chi: f64, alpha: f64, r: f64, t: f64) -> Self {
        DispersiveParams { chi, alpha, r, t, n_loops: 1 }
    }

    pub fn with_loops(mut self, n: u32) -> Self {
        self.n_loops = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.chi, self.alpha, self.r, self.t].iter().all(|v| v.is_finite());
        if !finite {
            return Err(invalid("dispersive parameters must be finite"));
        }
        if self.chi < 0.0 || self.alpha < 0.0 || self.r < 0.0 {
            return Err(invalid("chi, alpha and r must be non-negative"));
        }
        if self.t < 0.0 {
            return Err(invalid("t must be non-negative"));
        }
        if self.n_loops < 1 {
            return Err(invalid("n_loops must be at least 1"));
        }
        Ok(())
    }
}

/// Qubit phase accumulated in free evolution, `4 eta gamma (omega t - sin omega t) / omega²`.
pub fn free_phase(p: &SensingParams, t: f64) -> f64 {
    p.eta * free_phase_slope(p, t)
}

/// `d phi / d eta` of [`free_phase`].
pub fn free_phase_slope(p: &SensingParams, t: f64) -> f64 {
    let wt = p.omega * t;
    4.0 * p.gamma * (wt - wt.sin()) / (p.omega * p.omega)
}

/// Conditional oscillator displacement `alpha_s (1 - e^{i omega t})`.
pub fn branch_displacement(p: &SensingParams, s: Spin, t: f64) -> Complex64 {
    p.alpha(s) * (1.0 - Complex64::from_polar(1.0, p.omega * t))
}

/// Overlap exponent `d(t) = 8 gamma² sin²(omega t / 2) / omega²`.
pub fn overlap_damping(p: &SensingParams, t: f64) -> f64 {
    let s = (p.omega * t / 2.0).sin();
    8.0 * p.gamma * p.gamma * s * s / (p.omega * p.omega)
}

/// Interference signal `e^{-d(t)} cos phi(t)`.
pub fn sigma_x_free(p: &SensingParams, t: f64) -> f64 {
    (-overlap_damping(p, t)).exp() * free_phase(p, t).cos()
}

/// Quantum Fisher information of free evolution, `e^{-2d} (d phi / d eta)²`.
pub fn qfi_free(p: &SensingParams, t: f64) -> f64 {
    let slope = free_phase_slope(p, t);
    (-2.0 * overlap_damping(p, t)).exp() * slope * slope
}

/// Standard-quantum-limit QFI after `n` full periods, `64 n² pi² gamma² / omega⁴`.
pub fn qfi_sql(p: &SensingParams) -> f64 {
    let n = p.n_loops as f64;
    64.0 * n * n * PI * PI * p.gamma * p.gamma / p.omega.powi(4)
}

/// Classical Fisher information of the sigma_x readout during free evolution,
/// `(d phi/d eta)² sin² phi / (e^{2d} - cos² phi)`.
///
/// The denominator is evaluated as `expm1(2d) + sin² phi`. Where both terms
/// vanish (`d = 0`, `phi = k pi`) the value along `d = 0` is returned and a
/// removable-singularity warning is attached.
pub fn cfi_free(p: &SensingParams, t: f64) -> Checked<f64> {
    let slope = free_phase_slope(p, t);
    let phi = free_phase(p, t);
    let d = overlap_damping(p, t);
    let s2 = phi.sin().powi(2);
    let denom = (2.0 * d).exp_m1() + s2;
    if denom > f64::MIN_POSITIVE {
        Checked::ok(slope * slope * s2 / denom)
    } else {
        Checked::with_warnings(
            slope * slope,
            vec![Warning::RemovableSingularity { context: format!("cfi_free at t = {t}") }],
        )
    }
}

/// Oriented area term `A_s = 8 (e^r - 1) s gamma eta / omega²` of the geometric loop.
pub fn geometric_area(p: &SensingParams, s: Spin) -> f64 {
    8.0 * p.r.exp_m1() * s.sign() * p.gamma * p.eta / (p.omega * p.omega)
}

/// Per-loop geometric protocol phase `phi_T = phi_0 s + 4 A_s`.
pub fn geometric_phase_total(p: &SensingParams, s: Spin) -> f64 {
    p.phi0() * s.sign() + 4.0 * geometric_area(p, s)
}

/// `F^g = 64 n² (pi + 4 (e^r - 1))² gamma² / omega⁴`
pub fn qfi_geometric(p: &SensingParams) -> f64 {
    let n = p.n_loops as f64;
    let lever = PI + 4.0 * p.r.exp_m1();
    64.0 * n * n * lever * lever * p.gamma * p.gamma / p.omega.powi(4)
}

/// Sensitivity gain of the geometric loop (duration `3 tau`) over free
/// evolution at equal total time, `(pi + 4 (e^r - 1)) / (pi sqrt 3)`.
pub fn relative_sensitivity_geometric(p: &SensingParams) -> f64 {
    relative_sensitivity_geometric_at(p.r)
}

/// [`relative_sensitivity_geometric`] as a function of `r` alone.
pub fn relative_sensitivity_geometric_at(r: f64) -> f64 {
    (PI + 4.0 * r.exp_m1()) / (PI * 3f64.sqrt())
}

/// Squeezing at which the geometric loop breaks even, `ln(1 + pi (sqrt 3 - 1) / 4)`.
pub fn break_even_r() -> f64 {
    (PI * (3f64.sqrt() - 1.0) / 4.0).ln_1p()
}

/// Squeezing in dB, `10 log10 e^{2r}`, converted to `r`.
pub fn db_to_r(db: f64) -> Result<f64> {
    if !(db >= 0.0 && db.is_finite()) {
        return Err(invalid(format!("squeezing must be a non-negative number of dB, got {db}")));
    }
    Ok(db * LN_10 / 20.0)
}

/// Inverse of [`db_to_r`].
pub fn r_to_db(r: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("squeeze magnitude must be non-negative, got {r}")));
    }
    Ok(20.0 * r / LN_10)
}

/// Closed-form figures of the frequency-switch loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqSwitchQuantities {
    /// Effective squeeze `ln(omega / omega') / 2`.
    pub r: f64,
    /// Free phase in the quenched half-periods, `phi_0 e^{4r}`.
    pub phi0_prime: f64,
    /// Oriented area `A_+ = 8 (e^{3r} - 1) gamma eta / omega²`.
    pub area: f64,
    /// Per-loop phase `phi_0 e^{4r} + 4 A_+`.
    pub phase: f64,
    pub qfi: f64,
    /// `tau (2 + e^{2r})`
    pub loop_time: f64,
    pub relative_sensitivity: f64,
}

/// Effective squeeze of a quench to `omega_prime`.
pub fn freq_switch_r(p: &SensingParams) -> Result<f64> {
    let wp = p.omega_prime.ok_or_else(|| invalid("frequency switch needs omega_prime"))?;
    p.validate()?;
    Ok((p.omega / wp).ln() / 2.0)
}

pub fn freq_switch_quantities(p: &SensingParams) -> Result<FreqSwitchQuantities> {
    let r = freq_switch_r(p)?;
    let w2 = p.omega * p.omega;
    let n = p.n_loops as f64;
    let phi0_prime = p.phi0() * (4.0 * r).exp();
    let area = 8.0 * (3.0 * r).exp_m1() * p.gamma * p.eta / w2;
    let lever = (4.0 * r).exp() * PI + 4.0 * (3.0 * r).exp_m1();
    Ok(FreqSwitchQuantities {
        r,
        phi0_prime,
        area,
        phase: phi0_prime + 4.0 * area,
        qfi: 64.0 * n * n * lever * lever * p.gamma * p.gamma / (w2 * w2),
        loop_time: p.period() * (2.0 + (2.0 * r).exp()),
        relative_sensitivity: freq_switch_relative_sensitivity(r),
    })
}

/// `[1 + 4 (e^{3r} - 1) / (pi e^{4r})] sqrt(e^{2r} / (2 + e^{2r}))`, the gain
/// over free evolution held at the quenched frequency.
pub fn freq_switch_relative_sensitivity(r: f64) -> f64 {
    let e2 = (2.0 * r).exp();
    (1.0 + 4.0 * (3.0 * r).exp_m1() / (PI * (4.0 * r).exp())) * (e2 / (2.0 + e2)).sqrt()
}

/// Closed-form figures of the dispersive loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveQuantities {
    /// Per-loop phase `4 A`.
    pub phase: f64,
    /// Parallelogram area `alpha² e^r sin(chi t / 2)`.
    pub area: f64,
    pub qfi_alpha: f64,
    pub qfi_chi: f64,
    /// Gain `e^r` over the unsqueezed loop, equal for alpha and chi.
    pub relative_sensitivity: f64,
}

pub fn dispersive_quantities(d: &DispersiveParams) -> DispersiveQuantities {
    let n = d.n_loops as f64;
    let half = d.chi * d.t / 2.0;
    let er = d.r.exp();
    let area = d.alpha * d.alpha * er * half.sin();
    DispersiveQuantities {
        phase: 4.0 * area,
        area,
        qfi_alpha: 64.0 * n * n * d.alpha * d.alpha * er * er * half.sin().powi(2),
        qfi_chi: 4.0 * n * n * d.t * d.t * d.alpha.powi(4) * er * er * half.cos().powi(2),
        relative_sensitivity: er,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> SensingParams {
        SensingParams::new(1.0, 0.2, 1e-5)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn free_phase_examples() {
        assert_eq!(free_phase(&p(), 0.0), 0.0);
        assert!((free_phase(&p(), 2.0 * PI) - 5.0265482e-5).abs() < 1e-12);
    }

    #[test]
    fn branch_displacement_examples() {
        assert!(branch_displacement(&p(), Spin::Up, 2.0 * PI).norm() < 1e-15);
        let b = branch_displacement(&p(), Spin::Up, PI);
        assert!((b.re - 0.40002).abs() < 1e-12 && b.im.abs() < 1e-15);
    }

    #[test]
    fn overlap_examples() {
        assert!(overlap_damping(&p(), 2.0 * PI) < 1e-30);
        assert!((overlap_damping(&p(), PI) - 0.32).abs() < 1e-15);
        assert_eq!(overlap_damping(&p().with_eta(0.0), 1.3), overlap_damping(&p().with_eta(1e-3), 1.3));
    }

    #[test]
    fn sigma_x_examples() {
        assert_eq!(sigma_x_free(&p(), 0.0), 1.0);
        let want = (-0.32f64).exp() * (8e-6 * PI).cos();
        assert!((sigma_x_free(&p(), PI) - want).abs() < 1e-15);
        assert!((sigma_x_free(&p(), PI) - 0.726148).abs() < 2e-6);
    }

    #[test]
    fn qfi_free_examples() {
        assert_eq!(qfi_free(&p(), 0.0), 0.0);
        assert!((qfi_free(&p(), 2.0 * PI) - 25.2662).abs() < 1e-4);
        assert!(rel(qfi_free(&p(), 2.0 * PI), qfi_sql(&p())) < 1e-12);
    }

    #[test]
    fn cfi_free_limits() {
        let at_period = cfi_free(&p(), 2.0 * PI);
        assert!(rel(at_period.value, qfi_free(&p(), 2.0 * PI)) < 1e-9);
        let at_zero = cfi_free(&p(), 0.0);
        assert_eq!(at_zero.value, 0.0);
        assert!(matches!(at_zero.warnings[0], Warning::RemovableSingularity { .. }));
        for k in 1..40 {
            let t = 0.17 * k as f64;
            let c = cfi_free(&p(), t).value;
            assert!(c <= qfi_free(&p(), t) * (1.0 + 1e-12), "t = {t}");
        }
    }

    #[test]
    fn geometric_phase_examples() {
        let base = p();
        assert!((geometric_phase_total(&base, Spin::Up) - 5.0265482e-5).abs() < 1e-12);
        let sq = base.with_r(2f64.ln());
        assert!((geometric_phase_total(&sq, Spin::Up) - (5.0265482e-5 + 6.4e-5)).abs() < 1e-12);
        assert_eq!(geometric_phase_total(&sq, Spin::Down), -geometric_phase_total(&sq, Spin::Up));
    }

    #[test]
    fn qfi_geometric_examples() {
        assert_eq!(qfi_geometric(&p()), qfi_sql(&p()));
        let ten_db = p().with_r(db_to_r(10.0).unwrap());
        let want = 2.56 * (PI + 4.0 * (10f64.sqrt() - 1.0)).powi(2);
        assert!(rel(qfi_geometric(&ten_db), want) < 1e-12);
        assert!((qfi_geometric(&ten_db) - 355.893).abs() < 1e-3);
    }

    #[test]
    fn relative_sensitivity_examples() {
        assert!((relative_sensitivity_geometric(&p()) - 0.57735).abs() < 1e-5);
        let r0 = break_even_r();
        assert!((0.4542..0.4543).contains(&r0));
        assert!((relative_sensitivity_geometric_at(r0) - 1.0).abs() < 1e-14);
        assert!((r_to_db(r0).unwrap() - 3.945).abs() < 0.001);
    }

    #[test]
    fn db_examples() {
        assert_eq!(db_to_r(0.0).unwrap(), 0.0);
        assert!((db_to_r(10.0).unwrap() - 1.151293).abs() < 1e-6);
        assert!((db_to_r(15.0).unwrap() - 1.726939).abs() < 1e-6);
        assert!(db_to_r(-1.0).is_err());
        assert!(r_to_db(-0.1).is_err());
    }

    #[test]
    fn freq_switch_examples() {
        let same = p().with_omega_prime(1.0);
        let q = freq_switch_quantities(&same).unwrap();
        assert_eq!(q.r, 0.0);
        assert!((q.relative_sensitivity - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(rel(q.qfi, qfi_geometric(&p())) < 1e-15);
        assert!((freq_switch_relative_sensitivity(0.8) - 1.283).abs() < 0.005);
        assert!(freq_switch_quantities(&p().with_omega_prime(1.5)).is_err());
        assert!(freq_switch_quantities(&p()).is_err());
    }

    #[test]
    fn dispersive_examples() {
        let q = dispersive_quantities(&DispersiveParams::new(PI, 1.0, 0.0, 1.0));
        assert!((q.phase - 4.0).abs() < 1e-15);
        assert!((q.qfi_alpha - 64.0).abs() < 1e-13);
        assert!(q.qfi_chi.abs() < 1e-28);
        let r15 = db_to_r(15.0).unwrap();
        let q = dispersive_quantities(&DispersiveParams::new(1.0, 1.0, r15, 1.0));
        assert!((q.relative_sensitivity - 5.623).abs() < 1e-3);
    }

    #[test]
    fn parameter_validation() {
        assert!(p().validate().is_ok());
        assert!(SensingParams::new(0.0, 0.2, 1e-5).validate().is_err());
        assert!(SensingParams::new(1.0, -0.2, 1e-5).validate().is_err());
        assert!(p().with_r(-1.0).validate().is_err());
        assert!(p().with_loops(0).validate().is_err());
        assert!(DispersiveParams::new(-1.0, 1.0, 0.0, 1.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn cfi_bounded_by_qfi(t in 0.01f64..30.0, gamma in 0.01f64..0.5) {
            let q = SensingParams::new(1.0, gamma, 1e-5);
            prop_assert!(cfi_free(&q, t).value <= qfi_free(&q, t) * (1.0 + 1e-12));
        }

        #[test]
        fn qfi_independent_of_eta(t in 0.0f64..20.0, r in 0.0f64..2.0, n in 1u32..5) {
            let vals: Vec<(f64, f64)> = [0.0, 1e-5, 1e-3]
                .iter()
                .map(|&eta| {
                    let q = SensingParams::new(1.0, 0.2, eta).with_r(r).with_loops(n);
                    (qfi_free(&q, t), qfi_geometric(&q))
                })
                .collect();
            prop_assert!(vals.iter().all(|v| *v == vals[0]));
        }

        #[test]
        fn relative_sensitivity_increasing(r in 0.0f64..3.0, dr in 1e-6f64..0.5) {
            prop_assert!(relative_sensitivity_geometric_at(r + dr) > relative_sensitivity_geometric_at(r));
        }

        #[test]
        fn db_round_trip(db in 0.0f64..40.0) {
            let back = r_to_db(db_to_r(db).unwrap()).unwrap();
            prop_assert!((back - db).abs() <= 1e-12 * db.max(1.0));
        }

        #[test]
        fn dispersive_ratio_identity(alpha in 0.05f64..1.5, r in 0.0f64..1.5, ct in 0.1f64..3.0, t in 0.1f64..5.0) {
            let chi = ct / t;
            let q = dispersive_quantities(&DispersiveParams::new(chi, alpha, r, t));
            let half = ct / 2.0;
            let want = t * t * alpha * alpha / (16.0 * half.tan().powi(2));
            prop_assert!(rel(q.qfi_chi / q.qfi_alpha, want) < 1e-10);
        }
    }

    #[test]
    fn break_even_root_is_bracketed() {
        assert!(relative_sensitivity_geometric_at(0.4542) < 1.0);
        assert!(relative_sensitivity_geometric_at(0.4543) > 1.0);
    }
}
