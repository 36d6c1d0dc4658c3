//! Initial oscillator states used as protocol inputs.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diagnostics::{Checked, Warning};
use crate::error::{invalid, Result};
use crate::fock::{self, HilbertParams, JointState, OscillatorState, QubitState, TRUNCATION_DEFICIT_TOL};
use crate::linalg::{CMatrix, C64, ONE, ZERO};

/// Extra Fock levels used while assembling a GKP state before truncating.
pub const GKP_PADDING: usize = 80;

/// Complex amplitude accepted in configs either as a number or as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Amplitude(pub C64);

impl Serialize for Amplitude {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            s.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Amplitude {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Real(f64),
            Pair([f64; 2]),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Real(re) => Amplitude(C64::new(re, 0.0)),
            Raw::Pair([re, im]) => Amplitude(C64::new(re, im)),
        })
    }
}

impl From<f64> for Amplitude {
    fn from(re: f64) -> Self {
        Amplitude(C64::new(re, 0.0))
    }
}

/// One of the five library states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OscStateSpec {
    Vacuum,
    Coherent {
        amplitude: Amplitude,
    },
    Thermal {
        nbar: f64,
    },
    /// Even cat `|alpha⟩ + |-alpha⟩`.
    Cat {
        amplitude: Amplitude,
    },
    /// Finite-energy GKP logical zero with envelope `delta` and `2 peaks + 1` peaks.
    Gkp {
        delta: f64,
        peaks: u32,
    },
}

impl OscStateSpec {
    /// The five inputs of the state-independence study: vacuum, coherent(1),
    /// thermal(1), cat(1) and GKP(0.3, 3).
    pub fn library() -> [OscStateSpec; 5] {
        [
            OscStateSpec::Vacuum,
            OscStateSpec::Coherent { amplitude: 1.0.into() },
            OscStateSpec::Thermal { nbar: 1.0 },
            OscStateSpec::Cat { amplitude: 1.0.into() },
            OscStateSpec::Gkp { delta: 0.3, peaks: 3 },
        ]
    }

    /// Short name used in tables.
    pub fn name(&self) -> &'static str {
        match self {
            OscStateSpec::Vacuum => "vacuum",
            OscStateSpec::Coherent { .. } => "coherent",
            OscStateSpec::Thermal { .. } => "thermal",
            OscStateSpec::Cat { .. } => "cat",
            OscStateSpec::Gkp { .. } => "gkp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OscStateSpec::Coherent { amplitude } | OscStateSpec::Cat { amplitude } => {
                if !(amplitude.0.re.is_finite() && amplitude.0.im.is_finite()) {
                    return Err(invalid("state amplitude must be finite"));
                }
                if matches!(self, OscStateSpec::Cat { .. }) && amplitude.0 == ZERO {
                    return Err(invalid("cat amplitude must be non-zero"));
                }
            }
            OscStateSpec::Thermal { nbar } => {
                if !(nbar >= 0.0 && nbar.is_finite()) {
                    return Err(invalid(format!("thermal nbar must be non-negative, got {nbar}")));
                }
            }
            OscStateSpec::Gkp { delta, peaks } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(invalid(format!("gkp delta must lie in (0, 1), got {delta}")));
                }
                if peaks < 1 {
                    return Err(invalid("gkp needs at least one peak"));
                }
            }
            OscStateSpec::Vacuum => {}
        }
        Ok(())
    }
}

/// `|N|² = 1 / (2 (1 + e^{-2|alpha|²}))` of the even cat.
pub fn cat_normalization(alpha: C64) -> f64 {
    1.0 / (2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp()))
}

fn coherent_ket(alpha: C64, levels: usize) -> DVector<C64> {
    let mut v = DVector::zeros(levels);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..levels {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        v[n] = c;
    }
    v
}

fn normalized_pure(ket: DVector<C64>, ideal_norm_sqr: f64, what: &str) -> Checked<OscillatorState> {
    let kept = ket.norm_squared();
    let deficit = (1.0 - kept / ideal_norm_sqr).max(0.0);
    let mut warnings = Vec::new();
    if deficit > TRUNCATION_DEFICIT_TOL {
        warnings.push(Warning::Truncation { context: what.to_string(), deficit });
    }
    let ket = ket / C64::new(kept.sqrt(), 0.0);
    Checked::with_warnings(OscillatorState::from_raw(&ket * ket.adjoint()), warnings)
}

/// Density matrix of `spec` at cutoff `h`, normalized within the truncated
/// space. Norm lost to the cutoff beyond `1e-6` is reported as a warning.
pub fn make_state(spec: &OscStateSpec, h: HilbertParams) -> Result<Checked<OscillatorState>> {
    spec.validate()?;
    let d = h.dim();
    Ok(match *spec {
        OscStateSpec::Vacuum => Checked::ok(OscillatorState::vacuum(h)),
        OscStateSpec::Coherent { amplitude } => normalized_pure(coherent_ket(amplitude.0, d), 1.0, "coherent state"),
        OscStateSpec::Thermal { nbar } => {
            let q = nbar / (1.0 + nbar);
            let p: Vec<f64> = (0..d).map(|n| q.powi(n as i32) / (1.0 + nbar)).collect();
            let kept: f64 = p.iter().sum();
            let deficit = 1.0 - kept;
            let diag = DVector::from_iterator(d, p.iter().map(|x| C64::new(x / kept, 0.0)));
            let rho = OscillatorState::from_raw(CMatrix::from_diagonal(&diag));
            let mut warnings = Vec::new();
            if deficit > TRUNCATION_DEFICIT_TOL {
                warnings.push(Warning::Truncation { context: "thermal state".into(), deficit });
            }
            Checked::with_warnings(rho, warnings)
        }
        OscStateSpec::Cat { amplitude } => {
            let plus = coherent_ket(amplitude.0, d);
            let minus = coherent_ket(-amplitude.0, d);
            let ideal = 1.0 / cat_normalization(amplitude.0);
            normalized_pure(plus + minus, ideal, "cat state")
        }
        OscStateSpec::Gkp { delta, peaks } => gkp(h, delta, peaks),
    })
}

fn gkp(h: HilbertParams, delta: f64, peaks: u32) -> Checked<OscillatorState> {
    let wide = HilbertParams::new(h.cutoff() + GKP_PADDING).expect("positive cutoff");
    let m = wide.dim();
    let envelope = DVector::from_vec(fock::squeezed_vacuum_amplitudes(C64::new(-delta.ln(), 0.0), m));
    let step = (2.0 * PI).sqrt();
    let mut warnings = Vec::new();
    let forward = fock::displacement(C64::new(step, 0.0), wide).collect_into(&mut warnings);
    let backward = forward.adjoint();
    let weight = |k: i32| (-PI * delta * delta * (2.0 * k as f64).powi(2) / 2.0).exp();

    let mut sum = &envelope * C64::new(weight(0), 0.0);
    let (mut right, mut left) = (envelope.clone(), envelope);
    for k in 1..=peaks as i32 {
        right = forward.apply(&right);
        left = backward.apply(&left);
        sum += (&right + &left) * C64::new(weight(k), 0.0);
    }
    // The padded vector stands in for the untruncated state.
    let ideal = sum.norm_squared();
    let ket = sum.rows(0, h.dim()).into_owned();
    // The padded displacement itself only needs to be accurate where the
    // state lives, so its own truncation warning is not forwarded.
    warnings.clear();
    let state = normalized_pure(ket, ideal, "gkp state");
    let (value, mut w) = state.into_parts();
    warnings.append(&mut w);
    Checked::with_warnings(value, warnings)
}

/// `|+⟩⟨+| ⊗ rho_osc`
pub fn joint_plus_state(osc: &OscillatorState) -> JointState {
    JointState::product(&QubitState::plus(), osc)
}

/// `|0⟩`-column helper for tests and benches.
pub fn vacuum_ket(h: HilbertParams) -> DVector<C64> {
    let mut v = DVector::zeros(h.dim());
    v[0] = ONE;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn h(n: usize) -> HilbertParams {
        HilbertParams::new(n).unwrap()
    }

    #[test]
    fn vacuum_state() {
        let rho = make_state(&OscStateSpec::Vacuum, h(10)).unwrap().value;
        assert_eq!(rho.matrix()[(0, 0)], ONE);
        assert_eq!(linalg::max_abs(rho.matrix()), 1.0);
        assert!((rho.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_state() {
        let hp = h(60);
        let rho = make_state(&OscStateSpec::Thermal { nbar: 1.0 }, hp).unwrap();
        assert!(rho.is_clean());
        for n in 0..10 {
            assert!((rho.value.matrix()[(n, n)].re - 0.5f64.powi(n as i32 + 1)).abs() < 1e-15);
        }
        let mean = rho.value.expectation(&fock::number(hp)).re;
        assert!((mean - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cat_state() {
        let hp = h(60);
        let rho = make_state(&OscStateSpec::Cat { amplitude: 1.0.into() }, hp).unwrap();
        assert!(rho.is_clean());
        let parity = rho.value.expectation(&fock::parity(hp)).re;
        assert!((parity - 1.0).abs() < 1e-8);
        assert!((rho.value.purity() - 1.0).abs() < 1e-8);
        // ⟨0|ρ|0⟩ = |N|² (2 e^{-1/2})²
        let want = cat_normalization(ONE) * 4.0 * (-1.0f64).exp();
        assert!((rho.value.matrix()[(0, 0)].re - want).abs() < 1e-12);
        assert!((cat_normalization(ONE) - 1.0 / (2.0 * (1.0 + (-2.0f64).exp()))).abs() < 1e-16);
    }

    #[test]
    fn coherent_matches_displaced_vacuum() {
        let hp = h(60);
        let alpha = C64::new(0.6, -0.8);
        let rho = make_state(&OscStateSpec::Coherent { amplitude: Amplitude(alpha) }, hp).unwrap().value;
        let d = fock::displacement(alpha, hp).value;
        let psi = d.apply(&vacuum_ket(hp));
        assert!(linalg::max_abs_diff(rho.matrix(), &(&psi * psi.adjoint())) < 1e-12);
    }

    #[test]
    fn library_states_are_valid_at_large_cutoff() {
        let hp = h(200);
        for spec in OscStateSpec::library() {
            let rho = make_state(&spec, hp).unwrap();
            assert!(rho.is_clean(), "{}: {:?}", spec.name(), rho.warnings);
            rho.value.check_invariants().unwrap_or_else(|e| panic!("{}: {e}", spec.name()));
        }
    }

    #[test]
    fn gkp_stabilizer_expectation() {
        let hp = h(200);
        let stab = fock::displacement(C64::new(0.0, (2.0 * PI).sqrt()), hp).value;
        for (delta, floor) in [(0.3, 0.74), (0.2, 0.8)] {
            let rho = make_state(&OscStateSpec::Gkp { delta, peaks: 3 }, hp).unwrap().value;
            let v = rho.expectation(&stab).norm();
            // finite-energy estimate e^{-pi delta²}
            assert!((v - (-PI * delta * delta).exp()).abs() < 0.02, "delta {delta}: {v}");
            assert!(v > floor, "delta {delta}: {v}");
        }
    }

    #[test]
    fn small_cutoff_is_flagged() {
        let rho = make_state(&OscStateSpec::Coherent { amplitude: 3.0.into() }, h(5)).unwrap();
        assert!(!rho.is_clean());
        assert!((rho.value.trace() - 1.0).abs() < 1e-12);
        let gkp = make_state(&OscStateSpec::Gkp { delta: 0.3, peaks: 3 }, h(20)).unwrap();
        assert!(!gkp.is_clean());
    }

    #[test]
    fn invalid_specs() {
        assert!(make_state(&OscStateSpec::Thermal { nbar: -1.0 }, h(5)).is_err());
        assert!(make_state(&OscStateSpec::Gkp { delta: 0.0, peaks: 3 }, h(5)).is_err());
        assert!(make_state(&OscStateSpec::Gkp { delta: 0.3, peaks: 0 }, h(5)).is_err());
        assert!(make_state(&OscStateSpec::Cat { amplitude: 0.0.into() }, h(5)).is_err());
    }

    #[test]
    fn plus_state_embedding() {
        let hp = h(8);
        let osc = make_state(&OscStateSpec::Thermal { nbar: 0.5 }, hp).unwrap().value;
        let joint = joint_plus_state(&osc);
        assert!((joint.trace() - 1.0).abs() < 1e-14);
        let q = joint.reduced_qubit();
        assert!((q.sigma_x() - 1.0).abs() < 1e-14);
        assert!((q.matrix() - QubitState::plus().matrix()).norm() < 1e-14);
    }

    #[test]
    fn spec_serde_forms() {
        let spec: OscStateSpec = serde_json::from_str(r#"{"kind":"coherent","amplitude":[0.5,0.25]}"#).unwrap();
        assert_eq!(spec, OscStateSpec::Coherent { amplitude: Amplitude(C64::new(0.5, 0.25)) });
        let spec: OscStateSpec = serde_json::from_str(r#"{"kind":"cat","amplitude":1}"#).unwrap();
        assert_eq!(spec, OscStateSpec::Cat { amplitude: 1.0.into() });
        assert!(serde_json::from_str::<OscStateSpec>(r#"{"kind":"thermal","nbar":1,"extra":2}"#).is_err());
        assert!(serde_json::from_str::<OscStateSpec>(r#"{"kind":"squeezed"}"#).is_err());
        for spec in OscStateSpec::library() {
            let text = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<OscStateSpec>(&text).unwrap(), spec);
        }
    }
}
