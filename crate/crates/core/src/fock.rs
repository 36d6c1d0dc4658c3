//! Truncated Fock-space linear algebra for one qubit coupled to one oscillator.
//!
//! The oscillator is truncated to levels `0..=N` (dimension `N + 1`). Joint
//! operators act on qubit ⊗ oscillator with the qubit index outermost and the
//! qubit basis ordered `|↑⟩` (σz = +1) first, then `|↓⟩` (σz = -1): joint index
//! `q * (N + 1) + n` with `q = 0` for `|↑⟩`.
//!
//! All values are immutable after construction.

use std::ops::Mul;

use nalgebra::{DVector, Matrix2};

use crate::diagnostics::{Checked, Warning};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix, C64, DEFAULT_EXPM_TOL, ONE, ZERO};

/// Norm deficit above which a displacement or squeeze is flagged.
pub const TRUNCATION_DEFICIT_TOL: f64 = 1e-6;

/// Fock-space truncation: levels `0..=cutoff`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertParams {
    cutoff: usize,
}

impl HilbertParams {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(invalid("Fock cutoff must be at least 1"));
        }
        Ok(HilbertParams { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Oscillator dimension `N + 1`.
    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    /// Joint qubit-oscillator dimension `2 (N + 1)`.
    pub fn joint_dim(&self) -> usize {
        2 * self.dim()
    }

    /// Number of low-lying levels on which truncated operator identities are
    /// trusted (levels `0..=N/2`).
    ///
    /// Truncation artefacts of products of displacements are born at the
    /// cutoff and reach downwards roughly like a displaced Fock ring, so
    /// identities such as loop closure are certified on this block only.
    pub fn trusted_levels(&self) -> usize {
        self.cutoff / 2 + 1
    }
}

/// Qubit basis state, `Up` carrying σz eigenvalue `s = +1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    /// Block index in the joint space.
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// Square operator on the truncated oscillator space.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    m: CMatrix,
}

impl FockOperator {
    pub fn from_matrix(h: HilbertParams, m: CMatrix) -> Result<Self> {
        if m.nrows() != h.dim() || m.ncols() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: m.nrows().max(m.ncols()) });
        }
        Ok(FockOperator { m })
    }

    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        FockOperator { m }
    }

    pub fn identity(h: HilbertParams) -> Self {
        FockOperator { m: CMatrix::identity(h.dim(), h.dim()) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        FockOperator { m: self.m.adjoint() }
    }

    pub fn scaled(&self, c: C64) -> Self {
        FockOperator { m: &self.m * c }
    }

    pub fn exp(&self) -> Result<Self> {
        Ok(FockOperator { m: linalg::expm(&self.m, DEFAULT_EXPM_TOL)? })
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        linalg::unitarity_error(&self.m) <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_error(&self.m) <= tol
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.m * v
    }
}

impl Mul for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &FockOperator) -> FockOperator {
        FockOperator { m: linalg::matmul(&self.m, &rhs.m) }
    }
}

impl Mul for FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: FockOperator) -> FockOperator {
        &self * &rhs
    }
}

/// Ladder operator `a` with `a[n-1, n] = sqrt(n)`.
pub fn annihilation(h: HilbertParams) -> FockOperator {
    let d = h.dim();
    let mut m = CMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    FockOperator { m }
}

pub fn creation(h: HilbertParams) -> FockOperator {
    annihilation(h).adjoint()
}

/// `a†a = diag(0, 1, ..., N)`
pub fn number(h: HilbertParams) -> FockOperator {
    diagonal(h, |n| n as f64)
}

/// Photon-number parity `diag((-1)^n)`.
pub fn parity(h: HilbertParams) -> FockOperator {
    diagonal(h, |n| if n % 2 == 0 { 1.0 } else { -1.0 })
}

fn diagonal(h: HilbertParams, f: impl Fn(usize) -> f64) -> FockOperator {
    let v = DVector::from_fn(h.dim(), |n, _| C64::new(f(n), 0.0));
    FockOperator { m: CMatrix::from_diagonal(&v) }
}

/// Norm of the exact coherent state `|alpha⟩` lying above level `cutoff`.
pub fn coherent_tail_deficit(alpha: C64, cutoff: usize) -> f64 {
    let mean = alpha.norm_sqr();
    // Poisson weights accumulated in a numerically safe running product.
    let mut w = (-mean).exp();
    let mut kept = w;
    for n in 1..=cutoff {
        w *= mean / n as f64;
        kept += w;
    }
    (1.0 - kept).max(0.0)
}

/// Fock amplitudes `⟨n| S(xi) |0⟩` for `n = 0..levels`.
pub fn squeezed_vacuum_amplitudes(xi: C64, levels: usize) -> Vec<C64> {
    let r = xi.norm();
    let phase = if r > 0.0 { xi / r } else { ONE };
    let ratio = -phase * r.tanh();
    let mut amps = vec![ZERO; levels];
    if levels == 0 {
        return amps;
    }
    amps[0] = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut n = 2;
    while n < levels {
        let m = n as f64;
        amps[n] = amps[n - 2] * ratio * ((m - 1.0) / m).sqrt();
        n += 2;
    }
    amps
}

/// Norm of the exact squeezed vacuum `S(xi)|0⟩` lying above level `cutoff`.
pub fn squeeze_tail_deficit(xi: C64, cutoff: usize) -> f64 {
    let kept: f64 = squeezed_vacuum_amplitudes(xi, cutoff + 1).iter().map(|c| c.norm_sqr()).sum();
    (1.0 - kept).max(0.0)
}

/// Displacement `D(alpha) = exp(alpha a† - alpha* a)`.
///
/// The truncated generator is anti-Hermitian, so the result is unitary to
/// rounding. The attached warning fires when the coherent state `D(alpha)|0⟩`
/// loses more than [`TRUNCATION_DEFICIT_TOL`] of its norm to the cutoff.
pub fn displacement(alpha: C64, h: HilbertParams) -> Checked<FockOperator> {
    let mut warnings = Vec::new();
    let deficit = coherent_tail_deficit(alpha, h.cutoff());
    if deficit > TRUNCATION_DEFICIT_TOL {
        warnings.push(Warning::Truncation { context: format!("displacement({alpha})"), deficit });
    }
    if alpha == ZERO {
        return Checked::with_warnings(FockOperator::identity(h), warnings);
    }
    let a = annihilation(h);
    let gen = a.m.adjoint() * alpha - &a.m * alpha.conj();
    let m = linalg::expm(&gen, DEFAULT_EXPM_TOL).expect("finite displacement generator");
    Checked::with_warnings(FockOperator { m }, warnings)
}

/// Squeeze `S(xi) = exp((xi* a² - xi a†²) / 2)`.
///
/// With this sign, `S†(r) D(alpha) S(r) = D(alpha cosh r + alpha* sinh r)` for
/// real `r`, so real displacements are amplified by `e^r`.
pub fn squeeze(xi: C64, h: HilbertParams) -> Checked<FockOperator> {
    let mut warnings = Vec::new();
    let deficit = squeeze_tail_deficit(xi, h.cutoff());
    if deficit > TRUNCATION_DEFICIT_TOL {
        warnings.push(Warning::Truncation { context: format!("squeeze({xi})"), deficit });
    }
    if xi == ZERO {
        return Checked::with_warnings(FockOperator::identity(h), warnings);
    }
    let a = annihilation(h);
    let a2 = linalg::matmul(&a.m, &a.m);
    let gen = (&a2 * xi.conj() - a2.adjoint() * xi) * C64::new(0.5, 0.0);
    let m = linalg::expm(&gen, DEFAULT_EXPM_TOL).expect("finite squeeze generator");
    Checked::with_warnings(FockOperator { m }, warnings)
}

/// Image of a displacement amplitude under squeeze conjugation,
/// `S†(xi) D(alpha) S(xi) = D(bogoliubov(alpha, xi))`.
pub fn bogoliubov(alpha: C64, xi: C64) -> C64 {
    let r = xi.norm();
    if r == 0.0 {
        return alpha;
    }
    let phase = xi / r;
    alpha * r.cosh() + alpha.conj() * phase * r.sinh()
}

/// Operator on qubit ⊗ oscillator.
#[derive(Clone, Debug, PartialEq)]
pub struct JointOperator {
    m: CMatrix,
    osc_dim: usize,
}

impl JointOperator {
    pub fn from_matrix(h: HilbertParams, m: CMatrix) -> Result<Self> {
        if m.nrows() != h.joint_dim() || m.ncols() != h.joint_dim() {
            return Err(Error::DimensionMismatch { expected: h.joint_dim(), found: m.nrows().max(m.ncols()) });
        }
        Ok(JointOperator { m, osc_dim: h.dim() })
    }

    pub fn identity(h: HilbertParams) -> Self {
        JointOperator { m: CMatrix::identity(h.joint_dim(), h.joint_dim()), osc_dim: h.dim() }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn osc_dim(&self) -> usize {
        self.osc_dim
    }

    pub fn adjoint(&self) -> Self {
        JointOperator { m: self.m.adjoint(), osc_dim: self.osc_dim }
    }

    pub fn exp(&self) -> Result<Self> {
        Ok(JointOperator { m: linalg::expm(&self.m, DEFAULT_EXPM_TOL)?, osc_dim: self.osc_dim })
    }

    /// Oscillator block `⟨row| U |col⟩`.
    pub fn block(&self, row: Spin, col: Spin) -> FockOperator {
        let d = self.osc_dim;
        FockOperator::from_raw(self.m.view((row.index() * d, col.index() * d), (d, d)).into_owned())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        linalg::unitarity_error(&self.m) <= tol
    }
}

impl Mul for &JointOperator {
    type Output = JointOperator;
    fn mul(self, rhs: &JointOperator) -> JointOperator {
        assert_eq!(self.osc_dim, rhs.osc_dim);
        JointOperator { m: linalg::matmul(&self.m, &rhs.m), osc_dim: self.osc_dim }
    }
}

impl Mul for JointOperator {
    type Output = JointOperator;
    fn mul(self, rhs: JointOperator) -> JointOperator {
        &self * &rhs
    }
}

/// `|↑⟩⟨↑| ⊗ up + |↓⟩⟨↓| ⊗ down`
pub fn spin_conditional(up: &FockOperator, down: &FockOperator) -> Result<JointOperator> {
    let d = up.dim();
    if down.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: down.dim() });
    }
    let mut m = CMatrix::zeros(2 * d, 2 * d);
    m.view_mut((0, 0), (d, d)).copy_from(&up.m);
    m.view_mut((d, d), (d, d)).copy_from(&down.m);
    Ok(JointOperator { m, osc_dim: d })
}

/// Qubit bit flip `σx ⊗ I`, exchanging the two spin blocks.
pub fn pi_pulse(h: HilbertParams) -> JointOperator {
    lift_qubit(&sigma_x(), h)
}

/// `q ⊗ I` for a 2x2 qubit operator.
pub fn lift_qubit(q: &Matrix2<C64>, h: HilbertParams) -> JointOperator {
    let d = h.dim();
    let mut m = CMatrix::zeros(2 * d, 2 * d);
    for r in 0..2 {
        for c in 0..2 {
            let v = q[(r, c)];
            if v != ZERO {
                for n in 0..d {
                    m[(r * d + n, c * d + n)] = v;
                }
            }
        }
    }
    JointOperator { m, osc_dim: d }
}

/// `I ⊗ op`
pub fn lift_oscillator(op: &FockOperator) -> JointOperator {
    spin_conditional(op, op).expect("same operand twice")
}

pub fn sigma_x() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Matrix2<C64> {
    Matrix2::new(ZERO, -linalg::I, linalg::I, ZERO)
}

pub fn sigma_z() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// `σ⁻ = |↓⟩⟨↑|`
pub fn sigma_minus() -> Matrix2<C64> {
    Matrix2::new(ZERO, ZERO, ONE, ZERO)
}

/// `σ⁺ = |↑⟩⟨↓|`
pub fn sigma_plus() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ZERO, ZERO)
}

/// Density matrix of the qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState {
    m: Matrix2<C64>,
}

impl QubitState {
    pub fn from_matrix(m: Matrix2<C64>) -> Self {
        QubitState { m }
    }

    /// `|+⟩⟨+|`, the σx eigenstate with eigenvalue +1.
    pub fn plus() -> Self {
        let h = C64::new(0.5, 0.0);
        QubitState { m: Matrix2::new(h, h, h, h) }
    }

    /// Qubit with Bloch vector `(x, y, z)`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Self {
        let m = (Matrix2::identity()
            + sigma_x() * C64::new(x, 0.0)
            + sigma_y() * C64::new(y, 0.0)
            + sigma_z() * C64::new(z, 0.0))
            * C64::new(0.5, 0.0);
        QubitState { m }
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.m
    }

    pub fn trace(&self) -> C64 {
        self.m[(0, 0)] + self.m[(1, 1)]
    }

    pub fn sigma_x(&self) -> f64 {
        2.0 * self.m[(1, 0)].re
    }

    pub fn sigma_y(&self) -> f64 {
        2.0 * self.m[(1, 0)].im
    }

    pub fn sigma_z(&self) -> f64 {
        (self.m[(0, 0)] - self.m[(1, 1)]).re
    }

    pub fn bloch(&self) -> [f64; 3] {
        [self.sigma_x(), self.sigma_y(), self.sigma_z()]
    }

    /// Qubit coherence `⟨σ⁺⟩ = ⟨↓|ρ|↑⟩ = (⟨σx⟩ + i⟨σy⟩) / 2`.
    ///
    /// Its argument is the azimuth of the Bloch vector in the x-y plane; a
    /// spin-conditional phase `e^{i s θ}` therefore shows up as `arg = -2θ`.
    pub fn coherence(&self) -> C64 {
        self.m[(1, 0)]
    }

    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }
}

/// Oscillator density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorState {
    rho: CMatrix,
}

impl OscillatorState {
    /// Wraps a density matrix after checking Hermiticity, trace and positivity.
    pub fn new(h: HilbertParams, rho: CMatrix) -> Result<Self> {
        if rho.nrows() != h.dim() || rho.ncols() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: rho.nrows() });
        }
        let s = OscillatorState { rho };
        s.check_invariants()?;
        Ok(s)
    }

    pub(crate) fn from_raw(rho: CMatrix) -> Self {
        OscillatorState { rho }
    }

    /// `|ψ⟩⟨ψ|` for a normalized ket.
    pub fn pure(h: HilbertParams, ket: &DVector<C64>) -> Result<Self> {
        if ket.len() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: ket.len() });
        }
        let norm = ket.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidState(format!("ket norm {norm} differs from 1")));
        }
        Ok(OscillatorState { rho: ket * ket.adjoint() })
    }

    pub fn vacuum(h: HilbertParams) -> Self {
        let mut rho = CMatrix::zeros(h.dim(), h.dim());
        rho[(0, 0)] = ONE;
        OscillatorState { rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &FockOperator) -> C64 {
        linalg::matmul(&self.rho, op.matrix()).trace()
    }

    /// `U ρ U†`
    pub fn evolve(&self, u: &FockOperator) -> Self {
        OscillatorState { rho: linalg::conjugate(u.matrix(), &self.rho) }
    }

    /// Population summed over the top `k` Fock levels.
    pub fn top_population(&self, k: usize) -> f64 {
        let d = self.dim();
        (d.saturating_sub(k)..d).map(|n| self.rho[(n, n)].re).sum()
    }

    pub fn check_invariants(&self) -> Result<()> {
        check_density(&self.rho, "oscillator state")
    }
}

fn check_density(rho: &CMatrix, what: &str) -> Result<()> {
    if !linalg::is_finite(rho) {
        return Err(Error::InvalidState(format!("{what} has non-finite entries")));
    }
    let herm = linalg::hermiticity_error(rho);
    if herm > 1e-10 {
        return Err(Error::InvalidState(format!("{what} is not Hermitian (error {herm:e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::InvalidState(format!("{what} has trace {tr}")));
    }
    if !linalg::is_positive_semidefinite(rho, 1e-8) {
        return Err(Error::InvalidState(format!("{what} has an eigenvalue below -1e-8")));
    }
    Ok(())
}

/// Density matrix on qubit ⊗ oscillator.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    rho: CMatrix,
    osc_dim: usize,
}

impl JointState {
    pub fn from_matrix(h: HilbertParams, rho: CMatrix) -> Result<Self> {
        if rho.nrows() != h.joint_dim() || rho.ncols() != h.joint_dim() {
            return Err(Error::DimensionMismatch { expected: h.joint_dim(), found: rho.nrows() });
        }
        Ok(JointState { rho, osc_dim: h.dim() })
    }

    pub(crate) fn from_raw(rho: CMatrix, osc_dim: usize) -> Self {
        JointState { rho, osc_dim }
    }

    /// `ρ_qubit ⊗ ρ_osc`
    pub fn product(qubit: &QubitState, osc: &OscillatorState) -> Self {
        let q = CMatrix::from_fn(2, 2, |i, j| qubit.m[(i, j)]);
        JointState { rho: linalg::kron(&q, &osc.rho), osc_dim: osc.dim() }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn osc_dim(&self) -> usize {
        self.osc_dim
    }

    pub fn hilbert(&self) -> HilbertParams {
        HilbertParams { cutoff: self.osc_dim - 1 }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// `U ρ U†`
    pub fn evolve(&self, u: &JointOperator) -> Self {
        assert_eq!(u.osc_dim, self.osc_dim, "operator and state cutoffs differ");
        JointState { rho: linalg::conjugate(&u.m, &self.rho), osc_dim: self.osc_dim }
    }

    /// Oscillator block `⟨row| ρ |col⟩`.
    pub fn block(&self, row: Spin, col: Spin) -> CMatrix {
        let d = self.osc_dim;
        self.rho.view((row.index() * d, col.index() * d), (d, d)).into_owned()
    }

    pub fn reduced_qubit(&self) -> QubitState {
        partial_trace_oscillator(self)
    }

    /// Trace over the qubit.
    pub fn reduced_oscillator(&self) -> OscillatorState {
        let d = self.osc_dim;
        let rho = self.rho.view((0, 0), (d, d)) + self.rho.view((d, d), (d, d));
        OscillatorState { rho }
    }

    /// Population in the top `k` Fock levels, summed over both spin blocks.
    pub fn top_population(&self, k: usize) -> f64 {
        self.reduced_oscillator().top_population(k)
    }

    pub fn check_invariants(&self) -> Result<()> {
        check_density(&self.rho, "joint state")
    }
}

/// Trace over the oscillator, leaving the 2x2 qubit density matrix.
pub fn partial_trace_oscillator(rho: &JointState) -> QubitState {
    let d = rho.osc_dim;
    let mut q = Matrix2::zeros();
    for r in 0..2 {
        for c in 0..2 {
            let mut t = ZERO;
            for n in 0..d {
                t += rho.rho[(r * d + n, c * d + n)];
            }
            q[(r, c)] = t;
        }
    }
    QubitState { m: q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn h(n: usize) -> HilbertParams {
        HilbertParams::new(n).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cutoff_must_be_positive() {
        assert!(HilbertParams::new(0).is_err());
        assert_eq!(h(3).dim(), 4);
        assert_eq!(h(3).joint_dim(), 8);
    }

    #[test]
    fn annihilation_entries() {
        let a1 = annihilation(h(1));
        assert_eq!(a1.matrix()[(0, 1)], ONE);
        assert_eq!(a1.matrix()[(0, 0)], ZERO);
        assert_eq!(a1.matrix()[(1, 0)], ZERO);
        assert_eq!(a1.matrix()[(1, 1)], ZERO);
        let a2 = annihilation(h(2));
        assert!((a2.matrix()[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn truncated_commutator() {
        let n = 7;
        let a = annihilation(h(n));
        let ad = creation(h(n));
        let comm = (&a * &ad).into_matrix() - (&ad * &a).into_matrix();
        for i in 0..=n {
            for j in 0..=n {
                let want = if i != j {
                    0.0
                } else if i < n {
                    1.0
                } else {
                    -(n as f64)
                };
                assert!((comm[(i, j)] - c(want, 0.0)).norm() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn exp_of_half_pi_sigma_z() {
        let hp = h(3);
        let gen = lift_qubit(&(sigma_z() * c(0.0, PI / 2.0)), hp);
        let e = gen.exp().unwrap();
        let d = hp.dim();
        for k in 0..2 * d {
            let want = if k < d { c(0.0, 1.0) } else { c(0.0, -1.0) };
            assert!((e.matrix()[(k, k)] - want).norm() < 1e-12);
        }
        assert!(linalg::max_abs(&(e.matrix() - CMatrix::from_diagonal(&e.matrix().diagonal()))) < 1e-14);
    }

    #[test]
    fn exp_times_inverse_exp_is_identity() {
        let hp = h(60);
        let alpha = c(0.7, 0.2);
        let a = annihilation(hp);
        let gen = FockOperator::from_raw(a.matrix().adjoint() * alpha - a.matrix() * alpha.conj());
        let p = &gen.exp().unwrap() * &gen.scaled(-ONE).exp().unwrap();
        assert!(linalg::max_abs_diff(p.matrix(), &CMatrix::identity(61, 61)) < 1e-10);
    }

    #[test]
    fn displacement_zero_and_vacuum_overlap() {
        let hp = h(60);
        assert_eq!(displacement(ZERO, hp).value, FockOperator::identity(hp));
        let d1 = displacement(ONE, hp);
        assert!(d1.is_clean());
        assert!((d1.value.matrix()[(0, 0)].re - 0.60653066).abs() < 1e-8);
        // series oracle: Σ_n |⟨n|D(1)|0⟩|² e^{...}: amplitudes e^{-1/2}/sqrt(n!)
        let mut amp = (-0.5f64).exp();
        for n in 0..20 {
            if n > 0 {
                amp /= (n as f64).sqrt();
            }
            assert!((d1.value.matrix()[(n, 0)].re - amp).abs() < 1e-12, "level {n}");
        }
    }

    #[test]
    fn displacement_composition_example() {
        let hp = h(60);
        let lhs = &displacement(ONE, hp).value * &displacement(c(0.0, 1.0), hp).value;
        let rhs = displacement(c(1.0, 1.0), hp).value.scaled(C64::from_polar(1.0, -1.0));
        assert!(linalg::leading_block_max_diff(lhs.matrix(), rhs.matrix(), hp.trusted_levels()) < 1e-9);
    }

    #[test]
    fn displacement_flags_small_cutoff() {
        let d = displacement(c(3.0, 0.0), h(5));
        assert!(!d.is_clean());
        assert!(matches!(d.warnings[0], Warning::Truncation { .. }));
    }

    #[test]
    fn squeeze_examples() {
        let hp = h(60);
        assert_eq!(squeeze(ZERO, hp).value, FockOperator::identity(hp));
        let s = squeeze(c(0.5, 0.0), hp).value;
        let conj = &(&s.adjoint() * &displacement(c(0.3, 0.0), hp).value) * &s;
        let want = displacement(c(0.3 * 0.5f64.exp(), 0.0), hp).value;
        // Squeezing spreads Fock states over ~e^{2r} more levels; the identity
        // is certified on the lowest ten.
        assert!(linalg::leading_block_max_diff(conj.matrix(), want.matrix(), 8) < 1e-9);
        let vac_err = (0..=60).map(|n| (conj.matrix()[(n, 0)] - want.matrix()[(n, 0)]).norm()).fold(0.0, f64::max);
        assert!(vac_err < 1e-9);
    }

    #[test]
    fn squeezed_quadrature_variance() {
        let hp = h(60);
        let r = 0.3;
        let s = squeeze(c(r, 0.0), hp).value;
        let mut vac = DVector::zeros(hp.dim());
        vac[0] = ONE;
        let psi = s.apply(&vac);
        let a = annihilation(hp);
        let x = (a.matrix() + a.matrix().adjoint()) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let xm = (psi.adjoint() * &x * &psi)[(0, 0)].re;
        let x2 = (psi.adjoint() * &x * &x * &psi)[(0, 0)].re;
        assert!((x2 - xm * xm - (-2.0 * r).exp() / 2.0).abs() < 1e-8);
        // matches the analytic squeezed-vacuum amplitudes
        let amps = squeezed_vacuum_amplitudes(c(r, 0.0), 30);
        for (n, a) in amps.iter().enumerate() {
            assert!((psi[n] - a).norm() < 1e-12, "level {n}");
        }
    }

    #[test]
    fn bogoliubov_matches_matrix_conjugation() {
        let hp = h(80);
        let xi = C64::from_polar(0.4, 0.9);
        let alpha = c(0.3, -0.2);
        let s = squeeze(xi, hp).value;
        let conj = &(&s.adjoint() * &displacement(alpha, hp).value) * &s;
        let want = displacement(bogoliubov(alpha, xi), hp).value;
        assert!(linalg::leading_block_max_diff(conj.matrix(), want.matrix(), 10) < 1e-9);
    }

    #[test]
    fn spin_conditional_blocks() {
        let hp = h(4);
        let id = FockOperator::identity(hp);
        assert_eq!(spin_conditional(&id, &id).unwrap(), JointOperator::identity(hp));
        let a = annihilation(hp);
        let j = spin_conditional(&a, &id).unwrap();
        assert!(linalg::max_abs(j.block(Spin::Up, Spin::Down).matrix()) == 0.0);
        assert!(linalg::max_abs(j.block(Spin::Down, Spin::Up).matrix()) == 0.0);
        assert_eq!(j.block(Spin::Up, Spin::Up), a);
        assert!(spin_conditional(&a, &FockOperator::identity(h(5))).is_err());
    }

    #[test]
    fn spin_conditional_phase_shows_in_coherence() {
        let hp = h(6);
        let theta = 0.1;
        let up = FockOperator::identity(hp).scaled(C64::from_polar(1.0, theta));
        let down = FockOperator::identity(hp).scaled(C64::from_polar(1.0, -theta));
        let u = spin_conditional(&up, &down).unwrap();
        let mut ket = DVector::zeros(hp.dim());
        ket[2] = c(0.6, 0.0);
        ket[3] = c(0.0, 0.8);
        let osc = OscillatorState::pure(hp, &ket).unwrap();
        let rho = JointState::product(&QubitState::plus(), &osc).evolve(&u);
        let coh = rho.reduced_qubit().coherence();
        assert!((coh - C64::from_polar(0.5, -2.0 * theta)).norm() < 1e-14);
    }

    #[test]
    fn pi_pulse_properties() {
        let hp = h(5);
        let x = pi_pulse(hp);
        assert_eq!(&x * &x, JointOperator::identity(hp));
        let a = annihilation(hp);
        let b = number(hp);
        let swapped = &(&x * &spin_conditional(&a, &b).unwrap()) * &x;
        assert_eq!(swapped, spin_conditional(&b, &a).unwrap());
        let s = JointState::product(&QubitState::plus(), &OscillatorState::vacuum(hp));
        assert!(linalg::max_abs_diff(s.evolve(&x).matrix(), s.matrix()) < 1e-15);
    }

    #[test]
    fn partial_traces() {
        let hp = h(5);
        let mut ket = DVector::zeros(hp.dim());
        ket[1] = c(0.8, 0.0);
        ket[4] = c(0.0, -0.6);
        let osc = OscillatorState::pure(hp, &ket).unwrap();
        let q = JointState::product(&QubitState::plus(), &osc).reduced_qubit();
        assert!((q.matrix() - QubitState::plus().matrix()).norm() < 1e-15);

        // (|↑,0⟩ + |↓,1⟩)/√2
        let d = hp.dim();
        let mut psi = DVector::zeros(2 * d);
        psi[0] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        psi[d + 1] = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let rho = JointState::from_matrix(hp, &psi * psi.adjoint()).unwrap();
        rho.check_invariants().unwrap();
        let q = rho.reduced_qubit();
        assert!((q.matrix() - Matrix2::identity() * c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn parity_examples() {
        let hp = h(60);
        let p = parity(hp);
        assert_eq!(&p * &p, FockOperator::identity(hp));
        assert_eq!(p.matrix()[(0, 0)], ONE);
        let thermal = CMatrix::from_diagonal(&DVector::from_fn(61, |n, _| c(0.5f64.powi(n as i32 + 1), 0.0)));
        let val = linalg::matmul(&thermal, p.matrix()).trace().re;
        assert!((val - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn generated_unitaries_are_unitary() {
        let hp = h(60);
        assert!(displacement(c(1.2, -0.7), hp).value.is_unitary(1e-10));
        assert!(squeeze(c(0.8, 0.3), hp).value.is_unitary(1e-10));
    }

    #[test]
    fn density_checks_reject_bad_states() {
        let hp = h(2);
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = c(0.5, 0.0);
        assert!(OscillatorState::new(hp, m.clone()).is_err());
        m[(1, 1)] = c(0.5, 0.0);
        assert!(OscillatorState::new(hp, m.clone()).is_ok());
        m[(0, 1)] = c(0.2, 0.0);
        assert!(OscillatorState::new(hp, m.clone()).is_err());
        m[(1, 0)] = c(0.2, 0.0);
        assert!(OscillatorState::new(hp, m.clone()).is_ok());
        m[(0, 1)] = c(0.9, 0.0);
        m[(1, 0)] = c(0.9, 0.0);
        assert!(OscillatorState::new(hp, m).is_err());
    }
}
