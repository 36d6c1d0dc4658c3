//! Experiment configuration: parsing, validation and default resolution.
//!
//! A config is one JSON object. Parsing happens in two passes over the same
//! text so that every schema error, including the ones inside the
//! experiment-specific `params` block, carries a line and column.

use std::f64::consts::PI;
use std::fmt;

use geophase::closed_form::{DispersiveParams, SensingParams};
use geophase::metrology::{default_rate_grid, DEFAULT_STEP};
use geophase::states::OscStateSpec;
use geophase::{NoiseKind, WignerSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Cutoff for the longitudinal protocols when neither the config nor the
/// command line sets one.
pub const DEFAULT_CUTOFF: usize = 120;
/// Dispersive loops with `alpha <= 1` stay well inside 80 levels.
pub const DISPERSIVE_CUTOFF: usize = 80;
/// Density-matrix experiments: dimension 122 keeps RK4 and Wigner grids cheap.
pub const OPEN_SYSTEM_CUTOFF: usize = 60;

pub fn default_cutoff(kind: ExperimentKind) -> usize {
    match kind {
        ExperimentKind::Dispersive => DISPERSIVE_CUTOFF,
        ExperimentKind::NoiseSweep | ExperimentKind::WignerSnapshots => OPEN_SYSTEM_CUTOFF,
        _ => DEFAULT_CUTOFF,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Dispersive,
    FreeEvolution,
    FreqSwitch,
    Geometric,
    NoiseSweep,
    SensitivityCurve,
    WignerSnapshots,
}

impl ExperimentKind {
    /// Alphabetical.
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Dispersive,
        ExperimentKind::FreeEvolution,
        ExperimentKind::FreqSwitch,
        ExperimentKind::Geometric,
        ExperimentKind::NoiseSweep,
        ExperimentKind::SensitivityCurve,
        ExperimentKind::WignerSnapshots,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Dispersive => "dispersive",
            ExperimentKind::FreeEvolution => "free-evolution",
            ExperimentKind::FreqSwitch => "freq-switch",
            ExperimentKind::Geometric => "geometric",
            ExperimentKind::NoiseSweep => "noise-sweep",
            ExperimentKind::SensitivityCurve => "sensitivity-curve",
            ExperimentKind::WignerSnapshots => "wigner-snapshots",
        }
    }

    pub fn figure(self) -> &'static str {
        match self {
            ExperimentKind::Dispersive => "Fig. 4(d)",
            ExperimentKind::FreeEvolution => "Fig. 2(a)",
            ExperimentKind::FreqSwitch => "Fig. 3(b)",
            ExperimentKind::Geometric => "Fig. 1(d)",
            ExperimentKind::NoiseSweep => "Fig. 5(b)",
            ExperimentKind::SensitivityCurve => "Fig. 2(b)",
            ExperimentKind::WignerSnapshots => "Fig. 5(a)",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Dispersive => "dispersive parallelogram loop phase and relative sensitivity vs squeezing",
            ExperimentKind::FreeEvolution => "qubit signal, QFI and sigma_x CFI during free evolution vs time",
            ExperimentKind::FreqSwitch => "frequency-switch loop phase and relative sensitivity vs r",
            ExperimentKind::Geometric => "geometric loop phase, closure and QFI against the closed form",
            ExperimentKind::NoiseSweep => "QFI of five input states under six noise channels vs rate",
            ExperimentKind::SensitivityCurve => "relative sensitivity of the geometric loop vs squeezing in dB",
            ExperimentKind::WignerSnapshots => "oscillator Wigner function and qubit phase after each protocol step",
        }
    }

    fn uses_dispersive_params(self) -> bool {
        self == ExperimentKind::Dispersive
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Noise channels and rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<NoiseKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
}

/// Evenly spaced sweep of the experiment's independent variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        (0..self.points).map(|k| self.start + (self.stop - self.start) * k as f64 / (self.points - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

/// The schema; `P` is the parameter block of the experiment family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "P: Deserialize<'de>"))]
pub struct ExperimentConfig<P> {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<P>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<OscStateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<OscStateSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerSpec>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Reserved; every pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
}

/// A parsed config of either parameter family.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Config {
    Sensing(ExperimentConfig<SensingParams>),
    Dispersive(ExperimentConfig<DispersiveParams>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError { message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn json_error(e: serde_json::Error) -> ConfigError {
    // serde_json already appends "at line L column C"
    ConfigError::new(e.to_string())
}

fn strict<P: DeserializeOwned>(text: &str) -> Result<ExperimentConfig<P>, ConfigError> {
    serde_json::from_str(text).map_err(json_error)
}

/// Parses a config, or the `resolved_config` of a run manifest.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
    if let Some(inner) = value.get("resolved_config") {
        let inner = serde_json::to_string_pretty(inner).expect("JSON value");
        return parse_config(&inner);
    }
    // First pass: the experiment name, with free-form params.
    let probe: ExperimentConfig<serde_json::Value> = strict(text)?;
    let cfg = if probe.experiment.uses_dispersive_params() {
        Config::Dispersive(strict(text)?)
    } else {
        Config::Sensing(strict(text)?)
    };
    Ok(cfg)
}

/// Command-line overrides applied during resolution.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub cutoff: Option<usize>,
    pub output_dir: Option<String>,
}

impl Config {
    pub fn experiment(&self) -> ExperimentKind {
        match self {
            Config::Sensing(c) => c.experiment,
            Config::Dispersive(c) => c.experiment,
        }
    }

    pub fn output(&self) -> &OutputConfig {
        match self {
            Config::Sensing(c) => &c.output,
            Config::Dispersive(c) => &c.output,
        }
    }

    /// Fills every default the experiment uses, applies overrides and
    /// validates. Sections the experiment does not read are rejected.
    pub fn resolve(self, ov: &Overrides) -> Result<Config, ConfigError> {
        match self {
            Config::Sensing(c) => resolve_sensing(c, ov).map(Config::Sensing),
            Config::Dispersive(c) => resolve_dispersive(c, ov).map(Config::Dispersive),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

struct Uses {
    params: bool,
    state: bool,
    states: bool,
    noise: bool,
    cutoff: bool,
    sweep: bool,
    fd_step: bool,
    wigner: bool,
}

fn uses(kind: ExperimentKind) -> Uses {
    let none = Uses {
        params: false,
        state: false,
        states: false,
        noise: false,
        cutoff: false,
        sweep: false,
        fd_step: false,
        wigner: false,
    };
    match kind {
        ExperimentKind::FreeEvolution => {
            Uses { params: true, state: true, cutoff: true, sweep: true, fd_step: true, ..none }
        }
        ExperimentKind::Geometric => Uses { params: true, state: true, cutoff: true, fd_step: true, ..none },
        ExperimentKind::FreqSwitch => Uses { params: true, state: true, cutoff: true, sweep: true, ..none },
        ExperimentKind::Dispersive => Uses { params: true, state: true, cutoff: true, sweep: true, ..none },
        ExperimentKind::NoiseSweep => {
            Uses { params: true, states: true, noise: true, cutoff: true, fd_step: true, ..none }
        }
        ExperimentKind::WignerSnapshots => {
            Uses { params: true, state: true, noise: true, cutoff: true, wigner: true, ..none }
        }
        ExperimentKind::SensitivityCurve => Uses { sweep: true, ..none },
    }
}

fn reject_unused<P>(c: &ExperimentConfig<P>) -> Result<(), ConfigError> {
    let u = uses(c.experiment);
    let present = [
        ("params", c.params.is_some(), u.params),
        ("state", c.state.is_some(), u.state),
        ("states", c.states.is_some(), u.states),
        ("noise", c.noise.is_some(), u.noise),
        ("cutoff", c.cutoff.is_some(), u.cutoff),
        ("sweep", c.sweep.is_some(), u.sweep),
        ("fd_step", c.fd_step.is_some(), u.fd_step),
        ("wigner", c.wigner.is_some(), u.wigner),
    ];
    for (key, given, used) in present {
        if given && !used {
            return Err(ConfigError::new(format!("key '{key}' is not used by experiment '{}'", c.experiment)));
        }
    }
    Ok(())
}

fn lib_err(key: &str, e: geophase::Error) -> ConfigError {
    ConfigError::new(format!("invalid '{key}': {e}"))
}

fn resolve_common<P>(c: &mut ExperimentConfig<P>, ov: &Overrides) -> Result<(), ConfigError> {
    reject_unused(c)?;
    let u = uses(c.experiment);
    if u.cutoff {
        let n = ov.cutoff.or(c.cutoff).unwrap_or(default_cutoff(c.experiment));
        geophase::HilbertParams::new(n).map_err(|e| lib_err("cutoff", e))?;
        c.cutoff = Some(n);
    }
    if u.state {
        let s = c.state.take().unwrap_or(OscStateSpec::Vacuum);
        s.validate().map_err(|e| lib_err("state", e))?;
        c.state = Some(s);
    }
    if u.states {
        let s = c.states.take().unwrap_or_else(|| OscStateSpec::library().to_vec());
        if s.is_empty() {
            return Err(ConfigError::new("invalid 'states': at least one state is required"));
        }
        for st in &s {
            st.validate().map_err(|e| lib_err("states", e))?;
        }
        c.states = Some(s);
    }
    if u.fd_step {
        let h = c.fd_step.unwrap_or(DEFAULT_STEP);
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError::new(format!("invalid 'fd_step': must be positive, got {h}")));
        }
        c.fd_step = Some(h);
    }
    if u.noise {
        let n = c.noise.take().unwrap_or(NoiseConfig { channels: None, rates: None });
        let channels = n.channels.unwrap_or_else(|| NoiseKind::ALL.to_vec());
        let default_rates = if c.experiment == ExperimentKind::NoiseSweep { default_rate_grid() } else { vec![0.05] };
        let rates = n.rates.unwrap_or(default_rates);
        if channels.is_empty() || rates.is_empty() {
            return Err(ConfigError::new("invalid 'noise': channels and rates must be non-empty"));
        }
        if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(ConfigError::new(format!("invalid 'noise.rates': rate {bad} must be non-negative")));
        }
        c.noise = Some(NoiseConfig { channels: Some(channels), rates: Some(rates) });
    }
    if u.wigner {
        let w = c.wigner.unwrap_or_default();
        w.validate().map_err(|e| lib_err("wigner", e))?;
        c.wigner = Some(w);
    }
    if let Some(dir) = &ov.output_dir {
        c.output.dir = Some(dir.clone());
    }
    if c.output.dir.is_none() {
        c.output.dir = Some(".".into());
    }
    if c.output.stem.is_none() {
        c.output.stem = Some(c.experiment.name().into());
    }
    let stem = c.output.stem.as_deref().unwrap_or_default();
    if stem.is_empty() || stem.contains(['/', '\\']) {
        return Err(ConfigError::new("invalid 'output.stem': must be a non-empty file name"));
    }
    Ok(())
}

fn check_sweep(s: &SweepRange, name: &str, min: f64) -> Result<(), ConfigError> {
    if s.points == 0 || !s.start.is_finite() || !s.stop.is_finite() || s.start < min || s.stop < min {
        return Err(ConfigError::new(format!(
            "invalid 'sweep': {name} range must be finite, >= {min}, with at least one point"
        )));
    }
    Ok(())
}

fn resolve_sensing(
    mut c: ExperimentConfig<SensingParams>,
    ov: &Overrides,
) -> Result<ExperimentConfig<SensingParams>, ConfigError> {
    resolve_common(&mut c, ov)?;
    let kind = c.experiment;
    if uses(kind).params {
        let mut p = c.params.take().unwrap_or_else(|| match kind {
            ExperimentKind::FreqSwitch => SensingParams::force_sensing_defaults().with_r(0.5),
            _ => SensingParams::force_sensing_defaults(),
        });
        if kind == ExperimentKind::FreqSwitch && p.omega_prime.is_none() {
            // quench depth follows r
            p.omega_prime = Some(p.omega * (-2.0 * p.r).exp());
        }
        if kind != ExperimentKind::FreqSwitch && p.omega_prime.is_some() {
            return Err(ConfigError::new(format!("invalid 'params': omega_prime is not used by '{kind}'")));
        }
        p.validate().map_err(|e| lib_err("params", e))?;
        c.params = Some(p);
    }
    if uses(kind).sweep {
        let sweep = match (kind, c.sweep) {
            (_, Some(s)) => s,
            (ExperimentKind::FreeEvolution, None) => {
                let tau = 2.0 * PI / c.params.expect("resolved").omega;
                SweepRange { start: tau / 10.0, stop: 2.0 * tau, points: 20 }
            }
            (ExperimentKind::FreqSwitch, None) => SweepRange { start: 0.0, stop: 2.0, points: 401 },
            _ => SweepRange { start: 0.0, stop: 15.0, points: 301 },
        };
        check_sweep(&sweep, if kind == ExperimentKind::FreeEvolution { "time" } else { "squeezing" }, 0.0)?;
        c.sweep = Some(sweep);
    }
    Ok(c)
}

fn resolve_dispersive(
    mut c: ExperimentConfig<DispersiveParams>,
    ov: &Overrides,
) -> Result<ExperimentConfig<DispersiveParams>, ConfigError> {
    resolve_common(&mut c, ov)?;
    let p = c.params.take().unwrap_or(DispersiveParams::new(1.0, 0.5, 0.3, PI / 2.0));
    p.validate().map_err(|e| lib_err("params", e))?;
    c.params = Some(p);
    let sweep = c.sweep.unwrap_or(SweepRange { start: 0.0, stop: 15.0, points: 61 });
    check_sweep(&sweep, "squeezing", 0.0)?;
    c.sweep = Some(sweep);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let cfg = parse_config(r#"{"experiment": "geometric"}"#).unwrap();
        let r = cfg.resolve(&Overrides::default()).unwrap();
        let Config::Sensing(c) = &r else { panic!("sensing expected") };
        assert_eq!(c.cutoff, Some(DEFAULT_CUTOFF));
        assert_eq!(c.state, Some(OscStateSpec::Vacuum));
        assert_eq!(c.output.stem.as_deref(), Some("geometric"));
        // resolved configs are fixed points
        let again = parse_config(&serde_json::to_string(&r).unwrap()).unwrap().resolve(&Overrides::default()).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = "{\n  \"experiment\": \"geometric\",\n  \"colour\": 3\n}";
        let e = parse_config(text).unwrap_err();
        assert!(e.message.contains("colour") && e.message.contains("line 3"), "{e}");
        let text = "{\n  \"experiment\": \"geometric\",\n  \"params\": {\"omega\": 1, \"gamma\": 0.2,\n \"eta\": 1e-5, \"spin\": 1}\n}";
        let e = parse_config(text).unwrap_err();
        assert!(e.message.contains("spin") && e.message.contains("line 4"), "{e}");
    }

    #[test]
    fn bad_channel_name_is_a_config_error() {
        let text = "{\"experiment\": \"noise-sweep\",\n \"noise\": {\"channels\": [\"photon_loss\"]}}";
        let e = parse_config(text).unwrap_err();
        assert!(e.message.contains("photon_loss") && e.message.contains("line 2"), "{e}");
    }

    #[test]
    fn unused_sections_and_bad_values_are_rejected() {
        let c = parse_config(r#"{"experiment": "sensitivity-curve", "cutoff": 40}"#).unwrap();
        assert!(c.resolve(&Overrides::default()).is_err());
        let c = parse_config(r#"{"experiment": "noise-sweep", "noise": {"rates": [-0.1]}}"#).unwrap();
        assert!(c.resolve(&Overrides::default()).is_err());
        let c = parse_config(r#"{"experiment": "free-evolution", "cutoff": 0}"#).unwrap();
        assert!(c.resolve(&Overrides::default()).is_err());
        assert!(parse_config(r#"{"experiment": "teleport"}"#).is_err());
        assert!(parse_config("{").is_err());
    }

    #[test]
    fn dispersive_params_are_typed() {
        let c = parse_config(r#"{"experiment": "dispersive", "params": {"chi": 1, "alpha": 0.5, "r": 0.3, "t": 1.5}}"#)
            .unwrap();
        assert!(matches!(c, Config::Dispersive(_)));
        assert!(
            parse_config(r#"{"experiment": "dispersive", "params": {"omega": 1, "gamma": 0.2, "eta": 0}}"#).is_err()
        );
    }

    #[test]
    fn overrides_apply() {
        let ov = Overrides { cutoff: Some(30), output_dir: Some("out".into()) };
        let r = parse_config(r#"{"experiment": "free-evolution", "cutoff": 80}"#).unwrap().resolve(&ov).unwrap();
        let Config::Sensing(c) = r else { panic!() };
        assert_eq!(c.cutoff, Some(30));
        assert_eq!(c.output.dir.as_deref(), Some("out"));
        assert_eq!(c.sweep.unwrap().points, 20);
    }

    #[test]
    fn manifest_wrapper_is_unwrapped() {
        let text = r#"{"tool": "x", "resolved_config": {"experiment": "sensitivity-curve"}}"#;
        assert_eq!(parse_config(text).unwrap().experiment(), ExperimentKind::SensitivityCurve);
    }

    #[test]
    fn listing_is_alphabetical() {
        let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
    }
}
