//! Numerical-health diagnostics attached to results.
//!
//! Truncation and convergence problems are reported as warnings riding along
//! with a value instead of failing the computation, so that long sweeps keep
//! going and record what went wrong where.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// Norm missing from a state or operator column because of the Fock cutoff.
    Truncation { context: String, deficit: f64 },
    /// Population in the top Fock levels after a dissipative segment.
    Leakage { context: String, top_population: f64 },
    /// Step-halving changed the result by more than the allowed tolerance.
    Convergence { context: String, change: f64 },
    /// A formula was evaluated at a removable singularity; its limit was used.
    RemovableSingularity { context: String },
    /// The Wigner window clips the state.
    WindowTooSmall { boundary_ratio: f64 },
}

impl Warning {
    pub fn is_convergence(&self) -> bool {
        matches!(self, Warning::Convergence { .. })
    }

    /// Short tag used in CSV flag columns.
    pub fn tag(&self) -> &'static str {
        match self {
            Warning::Truncation { .. } => "truncation",
            Warning::Leakage { .. } => "leakage",
            Warning::Convergence { .. } => "convergence",
            Warning::RemovableSingularity { .. } => "singular_limit",
            Warning::WindowTooSmall { .. } => "window",
        }
    }
}

/// A value together with the warnings produced while computing it.
#[derive(Clone, Debug)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Checked<T> {
    pub fn ok(value: T) -> Self {
        Checked { value, warnings: Vec::new() }
    }

    pub fn with_warnings(value: T, warnings: Vec<Warning>) -> Self {
        Checked { value, warnings }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Checked<U> {
        Checked { value: f(self.value), warnings: self.warnings }
    }

    /// Moves the warnings into `sink` and returns the bare value.
    pub fn collect_into(self, sink: &mut Vec<Warning>) -> T {
        sink.extend(self.warnings);
        self.value
    }

    pub fn into_parts(self) -> (T, Vec<Warning>) {
        (self.value, self.warnings)
    }
}

/// Joins warning tags into a stable, deduplicated flag string (`ok` when empty).
pub fn flag_string(warnings: &[Warning]) -> String {
    let mut tags: Vec<&str> = warnings.iter().map(Warning::tag).collect();
    tags.sort_unstable();
    tags.dedup();
    if tags.is_empty() {
        "ok".to_string()
    } else {
        tags.join(";")
    }
}
