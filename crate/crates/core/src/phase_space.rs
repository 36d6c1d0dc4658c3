//! Wigner functions of the oscillator and per-step protocol snapshots.
//!
//! Conventions: `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, `β = (x + ip)/√2`,
//! and `W(x, p) = Tr[ρ D(2β) P] / π`, so that `∫ W dx dp = 1` and the vacuum
//! has `W(0, 0) = 1/π`.
//!
//! Matrix elements `⟨m|D(γ)|n⟩` come from the exact recurrence
//! `√(m+1) f[m+1][n] = √n f[m][n−1] + γ f[m][n]`, so no truncated operator
//! exponential is involved and each grid point costs `O(d²)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Checked, Warning};
use crate::error::{invalid, Result};
use crate::fock::{JointState, OscillatorState};
use crate::linalg::{CMatrix, C64};
use crate::open_system::{run_noisy_protocol_observed, NoiseChannel, NoiseKind, NoisySchedule};
use crate::protocol::ProtocolPlan;

/// Boundary-to-peak ratio of `|W|` above which the window is too small.
pub const WINDOW_TOL: f64 = 1e-3;
/// Widening factor and attempts used by [`wigner_auto`].
pub const WIDEN_FACTOR: f64 = 1.5;
pub const WIDEN_ATTEMPTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSpec {
    pub x_range: (f64, f64),
    pub p_range: (f64, f64),
    pub nx: usize,
    pub np: usize,
}

impl Default for WignerSpec {
    fn default() -> Self {
        WignerSpec { x_range: (-4.0, 4.0), p_range: (-4.0, 4.0), nx: 81, np: 81 }
    }
}

impl WignerSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 < r.1;
        if !ok(self.x_range) || !ok(self.p_range) {
            return Err(invalid("Wigner window ranges must be finite and increasing"));
        }
        if self.nx < 2 || self.np < 2 {
            return Err(invalid("Wigner grid needs at least 2 points per axis"));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_range, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        linspace(self.p_range, self.np)
    }

    /// Cell area `dx dp`.
    pub fn cell_area(&self) -> f64 {
        (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64 * (self.p_range.1 - self.p_range.0)
            / (self.np - 1) as f64
    }

    /// Same point counts over a window scaled about its center.
    pub fn widened(&self, factor: f64) -> Self {
        let grow = |(a, b): (f64, f64)| {
            let (c, w) = ((a + b) / 2.0, (b - a) / 2.0 * factor);
            (c - w, c + w)
        };
        WignerSpec { x_range: grow(self.x_range), p_range: grow(self.p_range), ..*self }
    }
}

fn linspace((a, b): (f64, f64), n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Wigner function sampled on a grid; `values[(i, j)]` is at `(xs[i], ps[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub spec: WignerSpec,
    pub values: DMatrix<f64>,
    /// Largest imaginary part discarded from the trace.
    pub max_imag: f64,
}

impl WignerGrid {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Riemann sum of `W dx dp`.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.spec.cell_area()
    }

    /// Largest `|W|` on the window edge relative to the largest `|W|` overall.
    pub fn boundary_ratio(&self) -> f64 {
        let (nx, np) = (self.spec.nx, self.spec.np);
        let mut edge: f64 = 0.0;
        for i in 0..nx {
            edge = edge.max(self.values[(i, 0)].abs()).max(self.values[(i, np - 1)].abs());
        }
        for j in 0..np {
            edge = edge.max(self.values[(0, j)].abs()).max(self.values[(nx - 1, j)].abs());
        }
        let peak = self.max_abs();
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }

    /// Grid point with the largest `W`.
    pub fn argmax(&self) -> (f64, f64) {
        let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
        for j in 0..self.spec.np {
            for i in 0..self.spec.nx {
                if self.values[(i, j)] > best {
                    best = self.values[(i, j)];
                    at = (i, j);
                }
            }
        }
        (self.spec.xs()[at.0], self.spec.ps()[at.1])
    }

    pub fn max_abs_diff(&self, other: &WignerGrid) -> f64 {
        assert_eq!(self.spec, other.spec, "grids differ");
        (&self.values - &other.values).amax()
    }
}

/// `Tr[ρ D(γ) P]` using the exact displacement matrix elements; `rho` is
/// passed column-major.
fn displaced_parity(rho: &CMatrix, gamma: C64) -> C64 {
    let d = rho.nrows();
    let sqrt: Vec<f64> = (0..=d).map(|k| (k as f64).sqrt()).collect();
    // row 0: f[0][n] = e^{-|γ|²/2} (−γ*)^n / √n!
    let mut row = vec![C64::new(0.0, 0.0); d];
    row[0] = C64::new((-gamma.norm_sqr() / 2.0).exp(), 0.0);
    for n in 1..d {
        row[n] = row[n - 1] * (-gamma.conj()) / sqrt[n];
    }
    let mut next = vec![C64::new(0.0, 0.0); d];
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..d {
        // Σ_n ρ[n][m] f[m][n] (−1)^n
        for (n, f) in row.iter().enumerate() {
            let term = rho[(n, m)] * f;
            if n % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        if m + 1 < d {
            let inv = 1.0 / sqrt[m + 1];
            next[0] = gamma * row[0] * inv;
            for n in 1..d {
                next[n] = (row[n - 1] * sqrt[n] + gamma * row[n]) * inv;
            }
            std::mem::swap(&mut row, &mut next);
        }
    }
    acc
}

/// Wigner function of `rho` on `spec`, points evaluated in parallel.
pub fn wigner(rho: &OscillatorState, spec: &WignerSpec) -> Result<Checked<WignerGrid>> {
    spec.validate()?;
    let (xs, ps) = (spec.xs(), spec.ps());
    let m = rho.matrix();
    let samples: Vec<C64> = (0..spec.nx * spec.np)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % spec.nx, k / spec.nx);
            let beta = C64::new(xs[i], ps[j]) / 2f64.sqrt();
            displaced_parity(m, beta * 2.0) / PI
        })
        .collect();
    let max_imag = samples.iter().fold(0.0f64, |a, w| a.max(w.im.abs()));
    let values = DMatrix::from_iterator(spec.nx, spec.np, samples.iter().map(|w| w.re));
    let grid = WignerGrid { spec: *spec, values, max_imag };
    let ratio = grid.boundary_ratio();
    let warnings =
        if ratio > WINDOW_TOL { vec![Warning::WindowTooSmall { boundary_ratio: ratio }] } else { Vec::new() };
    Ok(Checked::with_warnings(grid, warnings))
}

/// [`wigner`], widening the window while the boundary diagnostic fires.
pub fn wigner_auto(rho: &OscillatorState, spec: &WignerSpec) -> Result<Checked<WignerGrid>> {
    let mut s = *spec;
    let mut out = wigner(rho, &s)?;
    for _ in 0..WIDEN_ATTEMPTS {
        if out.is_clean() {
            break;
        }
        s = s.widened(WIDEN_FACTOR);
        out = wigner(rho, &s)?;
    }
    Ok(out)
}

/// Oscillator Wigner function and qubit x-y projection at one protocol instant.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub label: String,
    pub wigner: WignerGrid,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// `arg ⟨σ⁺⟩`
    pub coherence_phase: f64,
}

/// Six snapshots of one loop: the initial state, the state after each
/// unitary step (before its noise segment) and the final state.
///
/// All snapshots share one window, widened together when any of them clips.
pub fn protocol_snapshots(
    plan: &ProtocolPlan,
    initial: &JointState,
    channel: Option<NoiseChannel>,
    spec: &WignerSpec,
) -> Result<Checked<Vec<Snapshot>>> {
    spec.validate()?;
    let channel = channel.unwrap_or(NoiseChannel { kind: NoiseKind::QubitDephase, rate: 0.0 });
    let sched = NoisySchedule::new(plan.clone(), channel)?;
    let mut states = vec![("initial".to_string(), initial.clone())];
    let (_, mut warnings) =
        run_noisy_protocol_observed(&sched, initial, 1, |label, rho| states.push((label.to_string(), rho.clone())))?
            .into_parts();

    let mut s = *spec;
    let mut grids = Vec::new();
    for attempt in 0..=WIDEN_ATTEMPTS {
        grids = states.iter().map(|(_, rho)| wigner(&rho.reduced_oscillator(), &s)).collect::<Result<Vec<_>>>()?;
        if attempt == WIDEN_ATTEMPTS || grids.iter().all(Checked::is_clean) {
            break;
        }
        s = s.widened(WIDEN_FACTOR);
    }
    let snaps = states
        .into_iter()
        .zip(grids)
        .map(|((label, rho), grid)| {
            let q = rho.reduced_qubit();
            Snapshot {
                label,
                wigner: grid.collect_into(&mut warnings),
                sigma_x: q.sigma_x(),
                sigma_y: q.sigma_y(),
                coherence_phase: q.coherence().arg(),
            }
        })
        .collect();
    Ok(Checked::with_warnings(snaps, warnings))
}
