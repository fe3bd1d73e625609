//! Piecewise-constant propagation and the GRAPE gradient family.
//!
//! Slot `j` (1-based) evolves under `H_j = H_d + ε_j H_c` for `dt`. The
//! forward states are `ψ_j = U_j ⋯ U_1 |i⟩` and the backward states
//! `χ_j = β U_{j+1}† ⋯ U_M† |f⟩` with `β = ⟨f|ψ_M⟩`. Both live at the
//! right edge of slot `j`, so
//!
//! ```text
//! g_j = −2 Im⟨χ_j|H_c|ψ_j⟩
//! ```
//!
//! samples the functional derivative of the infidelity at `t = j·dt`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{KrylovPropagator, KrylovStepConfig};
use crate::linalg::{dot, eigh, DenseHermitianEig, HermitianOperator, SparseHermitianOperator, StateVector, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// `H(ε) = H_d + ε H_c` stored on the union sparsity pattern, so a slot
/// Hamiltonian is applied in a single pass.
#[derive(Clone, Debug)]
pub struct ControlledHamiltonian {
    drift: SparseHermitianOperator,
    control: SparseHermitianOperator,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    drift_vals: Vec<C64>,
    control_vals: Vec<C64>,
    /// Real parts of both value arrays when every entry is real.
    real_vals: Option<(Vec<f64>, Vec<f64>)>,
}

impl ControlledHamiltonian {
    pub fn new(drift: SparseHermitianOperator, control: SparseHermitianOperator) -> Result<Self> {
        let dim = drift.dim();
        if control.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: control.dim() });
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut drift_vals = Vec::new();
        let mut control_vals = Vec::new();
        for r in 0..dim {
            let mut a = drift.row(r).peekable();
            let mut b = control.row(r).peekable();
            loop {
                let next = match (a.peek(), b.peek()) {
                    (None, None) => break,
                    (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                        a.next();
                        b.next();
                        (ca, va, vb)
                    }
                    (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                        a.next();
                        (ca, va, ZERO)
                    }
                    (Some(&(ca, va)), None) => {
                        a.next();
                        (ca, va, ZERO)
                    }
                    (_, Some(&(cb, vb))) => {
                        b.next();
                        (cb, ZERO, vb)
                    }
                };
                cols.push(next.0);
                drift_vals.push(next.1);
                control_vals.push(next.2);
            }
            row_ptr.push(cols.len());
        }
        let real_vals = drift_vals.iter().chain(&control_vals).all(|z| z.im == 0.0).then(|| {
            (drift_vals.iter().map(|z| z.re).collect(), control_vals.iter().map(|z| z.re).collect())
        });
        Ok(Self { drift, control, row_ptr, cols, drift_vals, control_vals, real_vals })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn drift(&self) -> &SparseHermitianOperator {
        &self.drift
    }

    pub fn control(&self) -> &SparseHermitianOperator {
        &self.control
    }

    /// The slot Hamiltonian `H_d + eps·H_c`.
    pub fn at(&self, eps: f64) -> SlotHamiltonian<'_> {
        SlotHamiltonian { parent: self, eps }
    }

    pub fn dense_at(&self, eps: f64) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.drift_vals[k] + self.control_vals[k] * eps;
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SlotHamiltonian<'a> {
    parent: &'a ControlledHamiltonian,
    eps: f64,
}

impl HermitianOperator for SlotHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.parent.dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let p = self.parent;
        if let Some((d, c)) = &p.real_vals {
            for (r, yr) in y.iter_mut().enumerate() {
                let mut acc = ZERO;
                for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                    acc += x[p.cols[k]] * (d[k] + c[k] * self.eps);
                }
                *yr = acc;
            }
            return;
        }
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                acc += (p.drift_vals[k] + p.control_vals[k] * self.eps) * x[p.cols[k]];
            }
            *yr = acc;
        }
    }
}

/// Drift, control, and the state-transfer endpoints.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    hamiltonian: ControlledHamiltonian,
    initial: StateVector,
    target: StateVector,
}

impl ControlProblem {
    pub fn new(
        drift: SparseHermitianOperator,
        control: SparseHermitianOperator,
        initial: StateVector,
        target: StateVector,
    ) -> Result<Self> {
        let dim = drift.dim();
        for found in [control.dim(), initial.dim(), target.dim()] {
            if found != dim {
                return Err(Error::DimensionMismatch { expected: dim, found });
            }
        }
        if !initial.is_normalized() || !target.is_normalized() {
            return Err(Error::InvalidArgument("initial and target states must be normalized".into()));
        }
        Ok(Self { hamiltonian: ControlledHamiltonian::new(drift, control)?, initial, target })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &ControlledHamiltonian {
        &self.hamiltonian
    }

    pub fn drift(&self) -> &SparseHermitianOperator {
        self.hamiltonian.drift()
    }

    pub fn control(&self) -> &SparseHermitianOperator {
        self.hamiltonian.control()
    }

    pub fn initial(&self) -> &StateVector {
        &self.initial
    }

    pub fn target(&self) -> &StateVector {
        &self.target
    }
}

/// Piecewise-constant control: `ε(t) = ε_j` on `((j−1)dt, j·dt]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwcProtocol {
    amplitudes: Vec<f64>,
    dt: f64,
}

impl PwcProtocol {
    pub fn new(amplitudes: Vec<f64>, dt: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("protocol needs at least one slot".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("slot width must be positive, got {dt}")));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("control amplitude".into()));
        }
        Ok(Self { amplitudes, dt })
    }

    pub fn constant(value: f64, slots: usize, dt: f64) -> Result<Self> {
        Self::new(vec![value; slots], dt)
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn slots(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total duration `T = M·dt`.
    pub fn duration(&self) -> f64 {
        self.dt * self.amplitudes.len() as f64
    }

    pub fn with_amplitudes(&self, amplitudes: Vec<f64>) -> Result<Self> {
        Self::new(amplitudes, self.dt)
    }
}

/// How slot propagators `e^{−iH_j dt}` are applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorBackend {
    /// Full eigendecomposition of every `H_j`. With `cache_eigensystems`
    /// the forward sweep's eigensystems are kept for the backward sweep
    /// (`M` dense `D×D` matrices of memory).
    DenseEig { cache_eigensystems: bool },
    /// Truncated Lanczos propagation.
    Krylov(KrylovStepConfig),
}

impl PropagatorBackend {
    pub fn dense() -> Self {
        PropagatorBackend::DenseEig { cache_eigensystems: false }
    }

    pub fn dense_cached() -> Self {
        PropagatorBackend::DenseEig { cache_eigensystems: true }
    }

    pub fn krylov(dimension: usize) -> Self {
        PropagatorBackend::Krylov(KrylovStepConfig::new(dimension))
    }

    pub fn label(&self) -> &'static str {
        match self {
            PropagatorBackend::DenseEig { cache_eigensystems: false } => "dense",
            PropagatorBackend::DenseEig { cache_eigensystems: true } => "dense_cached",
            PropagatorBackend::Krylov(_) => "krylov",
        }
    }

    pub fn krylov_dimension(&self) -> Option<usize> {
        match self {
            PropagatorBackend::Krylov(cfg) => Some(cfg.dimension),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PropagatorBackend::Krylov(cfg) => cfg.validate(),
            PropagatorBackend::DenseEig { .. } => Ok(()),
        }
    }
}

/// Forward and backward states of one propagation sweep.
#[derive(Clone, Debug)]
pub struct TrajectoryCache {
    /// `ψ_0 … ψ_M`.
    pub forward: Vec<StateVector>,
    /// `χ_1 … χ_M` stored at indices `0 … M−1`.
    pub backward: Vec<StateVector>,
    /// `β = ⟨f|ψ_M⟩`.
    pub overlap: C64,
}

impl TrajectoryCache {
    pub fn slots(&self) -> usize {
        self.backward.len()
    }

    /// `ψ_j`, `0 ≤ j ≤ M`.
    pub fn psi(&self, j: usize) -> &StateVector {
        &self.forward[j]
    }

    /// `χ_j`, `1 ≤ j ≤ M`.
    pub fn chi(&self, j: usize) -> &StateVector {
        &self.backward[j - 1]
    }

    pub fn infidelity(&self) -> f64 {
        infidelity(self)
    }
}

enum Stepper {
    Dense { cache: Option<Vec<DenseHermitianEig>> },
    Krylov(KrylovPropagator),
}

impl Stepper {
    fn new(backend: &PropagatorBackend, dim: usize) -> Result<Self> {
        backend.validate()?;
        Ok(match backend {
            PropagatorBackend::DenseEig { cache_eigensystems } => Stepper::Dense {
                cache: cache_eigensystems.then(Vec::new),
            },
            PropagatorBackend::Krylov(cfg) => Stepper::Krylov(KrylovPropagator::new(*cfg, dim)?),
        })
    }

    /// Propagates `input` through slot `slot` (0-based) for `dt` (negative
    /// for the adjoint sweep).
    fn step(
        &mut self,
        ham: &ControlledHamiltonian,
        slot: usize,
        eps: f64,
        input: &[C64],
        dt: f64,
        out: &mut [C64],
    ) -> Result<()> {
        match self {
            Stepper::Dense { cache } => {
                let fresh;
                let eig = match cache {
                    Some(store) if slot < store.len() => &store[slot],
                    Some(store) => {
                        store.push(eigh(&ham.dense_at(eps))?);
                        &store[slot]
                    }
                    None => {
                        fresh = eigh(&ham.dense_at(eps))?;
                        &fresh
                    }
                };
                out.copy_from_slice(&eig.apply_exp(dt, input));
            }
            Stepper::Krylov(work) => {
                if input.iter().all(|z| *z == ZERO) {
                    out.iter_mut().for_each(|o| *o = ZERO);
                } else {
                    work.step(&ham.at(eps), input, dt, out)?;
                }
            }
        }
        Ok(())
    }
}

fn check_problem(problem: &ControlProblem, protocol: &PwcProtocol) -> Result<()> {
    if protocol.slots() == 0 {
        return Err(Error::InvalidArgument("empty protocol".into()));
    }
    let _ = problem;
    Ok(())
}

/// Forward sweep from `|i⟩` and adjoint sweep from `β|f⟩`.
pub fn propagate(
    problem: &ControlProblem,
    protocol: &PwcProtocol,
    backend: &PropagatorBackend,
) -> Result<TrajectoryCache> {
    check_problem(problem, protocol)?;
    let dim = problem.dim();
    let m = protocol.slots();
    let dt = protocol.dt();
    let eps = protocol.amplitudes();
    let ham = problem.hamiltonian();
    let mut stepper = Stepper::new(backend, dim)?;

    let mut forward: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    forward.push(problem.initial().as_slice().to_vec());
    for j in 0..m {
        let mut next = vec![ZERO; dim];
        stepper.step(ham, j, eps[j], &forward[j], dt, &mut next)?;
        forward.push(next);
    }

    let overlap = dot(problem.target().as_slice(), &forward[m]);
    let mut backward: Vec<Vec<C64>> = vec![Vec::new(); m];
    backward[m - 1] = problem.target().as_slice().iter().map(|f| f * overlap).collect();
    // χ_j = U_{j+1}† χ_{j+1}; slot j+1 is index j.
    for j in (0..m - 1).rev() {
        let mut prev = vec![ZERO; dim];
        stepper.step(ham, j + 1, eps[j + 1], &backward[j + 1], -dt, &mut prev)?;
        backward[j] = prev;
    }

    let wrap = |v: Vec<Vec<C64>>| -> Result<Vec<StateVector>> { v.into_iter().map(StateVector::new).collect() };
    Ok(TrajectoryCache { forward: wrap(forward)?, backward: wrap(backward)?, overlap })
}

/// `1 − |β|²`.
pub fn infidelity(cache: &TrajectoryCache) -> f64 {
    let value = 1.0 - cache.overlap.norm_sqr();
    debug_assert!(
        (-1e-10..=1.0 + 1e-10).contains(&value),
        "infidelity {value} outside [0, 1] beyond roundoff"
    );
    value.clamp(0.0, 1.0)
}

/// `−2 dt Im⟨χ_j|H_c|ψ_j⟩` for every slot.
pub fn zeroth_from_cache(problem: &ControlProblem, protocol: &PwcProtocol, cache: &TrajectoryCache) -> Vec<f64> {
    let dt = protocol.dt();
    let control = problem.control();
    let mut hc_psi = vec![ZERO; problem.dim()];
    (1..=protocol.slots())
        .map(|j| {
            control.apply_into(cache.psi(j).as_slice(), &mut hc_psi);
            let z = dot(cache.chi(j).as_slice(), &hc_psi);
            -2.0 * dt * z.im
        })
        .collect()
}

/// Trapezoidal average over each slot: slot `j` spans the sampling
/// points `j−1` and `j`. Slot 1 has no left sample and keeps its
/// zeroth-order value.
pub fn centered_from_zeroth(zeroth: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(zeroth.len());
    if let Some(&first) = zeroth.first() {
        out.push(first);
    }
    out.extend(zeroth.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out
}

/// Truncated expansion of the slot-averaged control operator,
/// `Σ_{p≤P} (−i dt)^p/(p+1)! · ad_{H_j}^p(H_c)`, sandwiched between `χ_j`
/// and `ψ_j`. Commutators are expanded binomially into operator-vector
/// products and never formed as matrices.
pub fn taylor_from_cache(
    problem: &ControlProblem,
    protocol: &PwcProtocol,
    cache: &TrajectoryCache,
    order: usize,
) -> Vec<f64> {
    let dt = protocol.dt();
    let dim = problem.dim();
    let control = problem.control();
    let ham = problem.hamiltonian();

    let mut coeff = Vec::with_capacity(order + 1);
    let mut c = C64::new(1.0, 0.0);
    for p in 0..=order {
        if p > 0 {
            c *= C64::new(0.0, -dt) / (p + 1) as f64;
            // (−i dt)^p/(p+1)! from (−i dt)^{p−1}/p!
        }
        coeff.push(c);
    }
    let binom = pascal(order);

    (1..=protocol.slots())
        .map(|j| {
            let h = ham.at(protocol.amplitudes()[j - 1]);
            let powers = |v: &[C64]| -> Vec<Vec<C64>> {
                let mut out = vec![v.to_vec()];
                for k in 1..=order {
                    let mut next = vec![ZERO; dim];
                    h.apply_into(&out[k - 1], &mut next);
                    out.push(next);
                }
                out
            };
            let h_psi = powers(cache.psi(j).as_slice());
            let h_chi = powers(cache.chi(j).as_slice());
            let hc_h_psi: Vec<Vec<C64>> = h_psi
                .iter()
                .map(|v| {
                    let mut out = vec![ZERO; dim];
                    control.apply_into(v, &mut out);
                    out
                })
                .collect();
            let mut total = ZERO;
            for (p, &cp) in coeff.iter().enumerate() {
                // ⟨χ|ad^p(H_c)|ψ⟩ = Σ_k C(p,k)(−1)^k ⟨H^{p−k}χ|H_c|H^k ψ⟩
                let mut term = ZERO;
                for k in 0..=p {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    term += dot(&h_chi[p - k], &hc_h_psi[k]) * (sign * binom[p][k]);
                }
                total += cp * term;
            }
            -2.0 * dt * total.im
        })
        .collect()
}

fn pascal(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
    for p in 1..=n {
        let prev = &rows[p - 1];
        let mut row = vec![1.0; p + 1];
        for k in 1..p {
            row[k] = prev[k - 1] + prev[k];
        }
        rows.push(row);
    }
    rows
}

pub fn gradient_zeroth(problem: &ControlProblem, protocol: &PwcProtocol, backend: &PropagatorBackend) -> Result<Vec<f64>> {
    let cache = propagate(problem, protocol, backend)?;
    Ok(zeroth_from_cache(problem, protocol, &cache))
}

pub fn gradient_centered(problem: &ControlProblem, protocol: &PwcProtocol, backend: &PropagatorBackend) -> Result<Vec<f64>> {
    Ok(centered_from_zeroth(&gradient_zeroth(problem, protocol, backend)?))
}

pub fn gradient_taylor(
    problem: &ControlProblem,
    protocol: &PwcProtocol,
    backend: &PropagatorBackend,
    order: usize,
) -> Result<Vec<f64>> {
    let cache = propagate(problem, protocol, backend)?;
    Ok(taylor_from_cache(problem, protocol, &cache, order))
}

/// Largest dimension accepted by [`gradient_exact_dense`].
pub const EXACT_GRADIENT_CAP: usize = 512;

/// Exact `∂I/∂ε_j` with the infidelity, from per-slot eigendecompositions.
///
/// In the eigenbasis of `H_j` the propagator derivative is
/// `(H_c)_ab · (e^{−iλ_a dt} − e^{−iλ_b dt})/(λ_a − λ_b)`, evaluated as
/// `−i dt e^{−iλ̄ dt} sinc(Δλ dt/2)` so degenerate pairs need no special
/// case.
pub fn exact_dense_evaluation(problem: &ControlProblem, protocol: &PwcProtocol) -> Result<(f64, Vec<f64>)> {
    check_problem(problem, protocol)?;
    let dim = problem.dim();
    if dim > EXACT_GRADIENT_CAP {
        return Err(Error::DimensionCap { dim, cap: EXACT_GRADIENT_CAP });
    }
    let m = protocol.slots();
    let dt = protocol.dt();
    let eps = protocol.amplitudes();
    let ham = problem.hamiltonian();
    let hc = problem.control().to_dense();

    let mut forward: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    forward.push(problem.initial().as_slice().to_vec());
    for j in 0..m {
        let eig = eigh(&ham.dense_at(eps[j]))?;
        let next = eig.apply_exp(dt, &forward[j]);
        forward.push(next);
    }
    let overlap = dot(problem.target().as_slice(), &forward[m]);
    let value = (1.0 - overlap.norm_sqr()).clamp(0.0, 1.0);

    let mut grad = vec![0.0; m];
    let mut chi: Vec<C64> = problem.target().as_slice().iter().map(|f| f * overlap).collect();
    for j in (0..m).rev() {
        let eig = eigh(&ham.dense_at(eps[j]))?;
        let q = &eig.eigenvectors;
        let hc_eig = q.adjoint() * &hc * q;
        let a = eig.to_eigenbasis(&forward[j]);
        let b = eig.to_eigenbasis(&chi);
        let lam = &eig.eigenvalues;
        let mut s = ZERO;
        for (r, (&br, &lr)) in b.iter().zip(lam).enumerate() {
            if br == ZERO {
                continue;
            }
            let mut row = ZERO;
            for (c, (&ac, &lc)) in a.iter().zip(lam).enumerate() {
                let half = 0.5 * (lr - lc) * dt;
                let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
                let divided = C64::from_polar(dt * sinc, -0.5 * (lr + lc) * dt) * C64::new(0.0, -1.0);
                row += hc_eig[(r, c)] * divided * ac;
            }
            s += br.conj() * row;
        }
        grad[j] = -2.0 * s.re;
        chi = eig.apply_exp(-dt, &chi);
    }
    Ok((value, grad))
}

pub fn gradient_exact_dense(problem: &ControlProblem, protocol: &PwcProtocol) -> Result<Vec<f64>> {
    Ok(exact_dense_evaluation(problem, protocol)?.1)
}

/// Which gradient the optimizer is fed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GradientKind {
    Zeroth,
    Centered,
    /// Expansion order `P`.
    Taylor(usize),
    /// Ignores the propagator backend; always dense.
    ExactDense,
}

impl fmt::Display for GradientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradientKind::Zeroth => f.write_str("zeroth"),
            GradientKind::Centered => f.write_str("centered"),
            GradientKind::Taylor(p) => write!(f, "taylor:{p}"),
            GradientKind::ExactDense => f.write_str("exact_dense"),
        }
    }
}

impl FromStr for GradientKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeroth" => Ok(GradientKind::Zeroth),
            "centered" => Ok(GradientKind::Centered),
            "exact_dense" => Ok(GradientKind::ExactDense),
            other => match other.strip_prefix("taylor:").map(str::parse) {
                Some(Ok(p)) => Ok(GradientKind::Taylor(p)),
                _ => Err(Error::Config(format!(
                    "unknown gradient '{other}' (zeroth | centered | taylor:<P> | exact_dense)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for GradientKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GradientKind> for String {
    fn from(k: GradientKind) -> String {
        k.to_string()
    }
}

/// Infidelity and gradient from a single sweep.
pub fn evaluate(
    problem: &ControlProblem,
    protocol: &PwcProtocol,
    backend: &PropagatorBackend,
    kind: GradientKind,
) -> Result<(f64, Vec<f64>)> {
    if kind == GradientKind::ExactDense {
        return exact_dense_evaluation(problem, protocol);
    }
    let cache = propagate(problem, protocol, backend)?;
    let grad = match kind {
        GradientKind::Zeroth => zeroth_from_cache(problem, protocol, &cache),
        GradientKind::Centered => centered_from_zeroth(&zeroth_from_cache(problem, protocol, &cache)),
        GradientKind::Taylor(p) => taylor_from_cache(problem, protocol, &cache, p),
        GradientKind::ExactDense => unreachable!(),
    };
    Ok((infidelity(&cache), grad))
}

/// Infidelity of `protocol` under exact (dense) propagation.
pub fn exact_infidelity(problem: &ControlProblem, protocol: &PwcProtocol) -> Result<f64> {
    let m = protocol.slots();
    let ham = problem.hamiltonian();
    let mut psi = problem.initial().as_slice().to_vec();
    for j in 0..m {
        psi = eigh(&ham.dense_at(protocol.amplitudes()[j]))?.apply_exp(protocol.dt(), &psi);
    }
    Ok((1.0 - dot(problem.target().as_slice(), &psi).norm_sqr()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_hermitian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(dim: usize, seed: u64) -> ControlProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hd = SparseHermitianOperator::from_dense(&random_hermitian(dim, &mut rng)).unwrap();
        let hc = SparseHermitianOperator::from_dense(&random_hermitian(dim, &mut rng)).unwrap();
        let i = StateVector::random(dim, &mut rng);
        let f = StateVector::random(dim, &mut rng);
        ControlProblem::new(hd, hc, i, f).unwrap()
    }

    fn random_protocol(m: usize, dt: f64, seed: u64) -> PwcProtocol {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PwcProtocol::new((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(), dt).unwrap()
    }

    /// Central differences of the exact infidelity.
    fn finite_difference(problem: &ControlProblem, protocol: &PwcProtocol, h: f64) -> Vec<f64> {
        (0..protocol.slots())
            .map(|j| {
                let mut plus = protocol.amplitudes().to_vec();
                let mut minus = plus.clone();
                plus[j] += h;
                minus[j] -= h;
                let fp = exact_infidelity(problem, &protocol.with_amplitudes(plus).unwrap()).unwrap();
                let fm = exact_infidelity(problem, &protocol.with_amplitudes(minus).unwrap()).unwrap();
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn controlled_hamiltonian_matches_dense_sum() {
        let p = random_problem(7, 1);
        let eps = 0.73;
        let mut expected = p.drift().to_dense();
        expected += p.control().to_dense() * C64::new(eps, 0.0);
        assert!((p.hamiltonian().dense_at(eps) - &expected).camax() < 1e-15);
        let v = StateVector::random(7, &mut ChaCha8Rng::seed_from_u64(2));
        let got = p.hamiltonian().at(eps).apply(&v).unwrap();
        let want = &expected * nalgebra::DVector::from_column_slice(v.as_slice());
        for (a, b) in got.as_slice().iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn protocol_validation() {
        assert!(PwcProtocol::new(vec![], 0.1).is_err());
        assert!(PwcProtocol::new(vec![1.0], 0.0).is_err());
        assert!(PwcProtocol::new(vec![f64::NAN], 0.1).is_err());
        assert_eq!(PwcProtocol::constant(0.0, 4, 0.25).unwrap().duration(), 1.0);
    }

    #[test]
    fn null_evolution() {
        let zero = SparseHermitianOperator::diagonal(&[0.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let i = StateVector::random(3, &mut rng);
        let f = StateVector::random(3, &mut rng);
        let p = ControlProblem::new(zero.clone(), zero, i.clone(), f.clone()).unwrap();
        let proto = PwcProtocol::constant(0.0, 1, 0.5).unwrap();
        for backend in [PropagatorBackend::dense(), PropagatorBackend::krylov(3)] {
            let cache = propagate(&p, &proto, &backend).unwrap();
            assert!(cache.psi(1).sub(&i).unwrap().norm() < 1e-15);
            assert!((cache.overlap - dot(f.as_slice(), i.as_slice())).norm() < 1e-15);
        }
    }

    #[test]
    fn self_transfer_has_zero_infidelity() {
        let p = random_problem(6, 4);
        let proto = random_protocol(5, 0.3, 5);
        let cache = propagate(&p, &proto, &PropagatorBackend::dense()).unwrap();
        let final_state = cache.psi(5).clone();
        let p2 = ControlProblem::new(p.drift().clone(), p.control().clone(), p.initial().clone(), final_state.clone()).unwrap();
        let cache2 = propagate(&p2, &proto, &PropagatorBackend::dense()).unwrap();
        assert!(infidelity(&cache2) < 1e-14);
        assert!(cache2.chi(5).sub(&final_state).unwrap().norm() < 1e-12);
    }

    #[test]
    fn infidelity_values() {
        let mk = |beta: C64| TrajectoryCache { forward: vec![], backward: vec![], overlap: beta };
        assert_eq!(infidelity(&mk(C64::new(1.0, 0.0))), 0.0);
        assert_eq!(infidelity(&mk(ZERO)), 1.0);
        assert!((infidelity(&mk(C64::new(0.5, 0.5))) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn backends_agree_at_full_krylov_dimension() {
        let p = random_problem(10, 6);
        let proto = random_protocol(8, 0.4, 7);
        let dense = propagate(&p, &proto, &PropagatorBackend::dense()).unwrap();
        let cached = propagate(&p, &proto, &PropagatorBackend::dense_cached()).unwrap();
        let kry = propagate(&p, &proto, &PropagatorBackend::krylov(10)).unwrap();
        assert!(dense.psi(8).sub(kry.psi(8)).unwrap().norm() < 1e-10);
        assert!(dense.chi(1).sub(kry.chi(1)).unwrap().norm() < 1e-10);
        assert_eq!(dense.psi(8), cached.psi(8));
        assert_eq!(dense.chi(1), cached.chi(1));
    }

    #[test]
    fn trajectory_norms_are_conserved() {
        let p = random_problem(12, 8);
        let proto = random_protocol(15, 0.5, 9);
        for backend in [PropagatorBackend::dense(), PropagatorBackend::krylov(5)] {
            let cache = propagate(&p, &proto, &backend).unwrap();
            let beta = cache.overlap.norm();
            assert!(beta <= 1.0 + 1e-10);
            for psi in &cache.forward {
                assert!((psi.norm() - 1.0).abs() < 1e-10);
            }
            for chi in &cache.backward {
                assert!((chi.norm() / beta - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orthogonal_target_gives_zero_gradient() {
        // H = 0 keeps the state fixed, so β = ⟨f|i⟩ = 0.
        let zero = SparseHermitianOperator::diagonal(&[0.0; 4]).unwrap();
        let hc = SparseHermitianOperator::from_dense(&random_hermitian(4, &mut ChaCha8Rng::seed_from_u64(10))).unwrap();
        let p = ControlProblem::new(zero, hc, StateVector::basis(4, 0), StateVector::basis(4, 3)).unwrap();
        let proto = PwcProtocol::constant(0.0, 6, 0.2).unwrap();
        for backend in [PropagatorBackend::dense(), PropagatorBackend::krylov(3)] {
            let g = gradient_zeroth(&p, &proto, &backend).unwrap();
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn global_phase_control_has_no_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hd = SparseHermitianOperator::from_dense(&random_hermitian(6, &mut rng)).unwrap();
        let p = ControlProblem::new(
            hd,
            SparseHermitianOperator::identity(6),
            StateVector::random(6, &mut rng),
            StateVector::random(6, &mut rng),
        )
        .unwrap();
        let proto = random_protocol(7, 0.3, 12);
        let backend = PropagatorBackend::krylov(6);
        for g in [
            gradient_zeroth(&p, &proto, &backend).unwrap(),
            gradient_centered(&p, &proto, &backend).unwrap(),
            gradient_taylor(&p, &proto, &backend, 3).unwrap(),
            gradient_exact_dense(&p, &proto).unwrap(),
        ] {
            assert!(g.iter().all(|x| x.abs() < 1e-12), "{g:?}");
        }
    }

    #[test]
    fn centered_gradient_edge_cases() {
        assert_eq!(centered_from_zeroth(&[0.7]), vec![0.7]);
        assert_eq!(centered_from_zeroth(&[2.0; 5]), vec![2.0; 5]);
        assert_eq!(centered_from_zeroth(&[1.0, 3.0, 5.0]), vec![1.0, 2.0, 4.0]);
        let p = random_problem(5, 13);
        let proto = random_protocol(1, 0.2, 14);
        let b = PropagatorBackend::dense();
        assert_eq!(gradient_centered(&p, &proto, &b).unwrap(), gradient_zeroth(&p, &proto, &b).unwrap());
    }

    #[test]
    fn taylor_order_zero_is_bitwise_zeroth() {
        let p = random_problem(9, 15);
        let proto = random_protocol(11, 0.1, 16);
        for backend in [PropagatorBackend::dense(), PropagatorBackend::krylov(4)] {
            assert_eq!(
                gradient_taylor(&p, &proto, &backend, 0).unwrap(),
                gradient_zeroth(&p, &proto, &backend).unwrap()
            );
        }
    }

    #[test]
    fn commuting_operators_truncate_taylor_series() {
        let hd = SparseHermitianOperator::diagonal(&[0.3, -1.2, 0.8, 2.0]).unwrap();
        let hc = SparseHermitianOperator::diagonal(&[1.0, 0.5, -0.7, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = ControlProblem::new(hd, hc, StateVector::random(4, &mut rng), StateVector::random(4, &mut rng)).unwrap();
        let proto = random_protocol(6, 0.3, 18);
        let b = PropagatorBackend::dense();
        let g0 = gradient_taylor(&p, &proto, &b, 0).unwrap();
        let g4 = gradient_taylor(&p, &proto, &b, 4).unwrap();
        for (a, c) in g0.iter().zip(&g4) {
            assert!((a - c).abs() < 1e-15);
        }
    }

    #[test]
    fn taylor_hierarchy_converges_to_exact_gradient() {
        let p = random_problem(10, 19);
        let proto = random_protocol(12, 0.05, 20);
        let exact = gradient_exact_dense(&p, &proto).unwrap();
        let mut last = f64::INFINITY;
        for order in 0..=4 {
            let g = gradient_taylor(&p, &proto, &PropagatorBackend::dense(), order).unwrap();
            let err = g.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < last, "order {order}: {err} !< {last}");
            last = err;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let p = random_problem(10, 21);
        let proto = random_protocol(12, 0.5, 22);
        let exact = gradient_exact_dense(&p, &proto).unwrap();
        let fd = finite_difference(&p, &proto, 1e-6);
        let scale = fd.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (a, b) in exact.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_gradient_for_diagonal_evolution() {
        // With diagonal H_d, H_c the overlap is β = Σ_k conj(f_k) i_k e^{−i φ_k},
        // φ_k = dt Σ_j (d_k + ε_j c_k), so ∂β/∂ε_j = −i dt Σ_k conj(f_k) i_k c_k e^{−iφ_k}.
        let d = [0.4, -1.0, 0.9];
        let c = [1.0, -0.5, 0.25];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let i = StateVector::random(3, &mut rng);
        let f = StateVector::random(3, &mut rng);
        let p = ControlProblem::new(
            SparseHermitianOperator::diagonal(&d).unwrap(),
            SparseHermitianOperator::diagonal(&c).unwrap(),
            i.clone(),
            f.clone(),
        )
        .unwrap();
        let proto = random_protocol(5, 0.7, 24);
        let total: f64 = proto.amplitudes().iter().sum();
        let dt = proto.dt();
        let mut beta = ZERO;
        let mut dbeta = ZERO;
        for k in 0..3 {
            let phase = dt * (5.0 * d[k] + total * c[k]);
            let w = f.as_slice()[k].conj() * i.as_slice()[k] * C64::from_polar(1.0, -phase);
            beta += w;
            dbeta += w * C64::new(0.0, -dt * c[k]);
        }
        let expected = -2.0 * (beta.conj() * dbeta).re;
        for g in gradient_exact_dense(&p, &proto).unwrap() {
            assert!((g - expected).abs() < 1e-13, "{g} vs {expected}");
        }
    }

    #[test]
    fn exact_gradient_tends_to_zeroth_for_small_steps() {
        let p = random_problem(6, 25);
        let proto = random_protocol(4, 1e-5, 26);
        let exact = gradient_exact_dense(&p, &proto).unwrap();
        let zeroth = gradient_zeroth(&p, &proto, &PropagatorBackend::dense()).unwrap();
        for (a, b) in exact.iter().zip(&zeroth) {
            assert!((a / b - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn gradient_kind_parsing() {
        for k in [GradientKind::Zeroth, GradientKind::Centered, GradientKind::Taylor(3), GradientKind::ExactDense] {
            assert_eq!(k.to_string().parse::<GradientKind>().unwrap(), k);
        }
        assert!("taylor:x".parse::<GradientKind>().is_err());
    }

    #[test]
    fn evaluate_is_consistent_with_pieces() {
        let p = random_problem(8, 27);
        let proto = random_protocol(6, 0.2, 28);
        let b = PropagatorBackend::krylov(5);
        let (value, grad) = evaluate(&p, &proto, &b, GradientKind::Centered).unwrap();
        assert_eq!(grad, gradient_centered(&p, &proto, &b).unwrap());
        assert_eq!(value, infidelity(&propagate(&p, &proto, &b).unwrap()));
        let (ev, eg) = evaluate(&p, &proto, &b, GradientKind::ExactDense).unwrap();
        assert!((ev - exact_infidelity(&p, &proto).unwrap()).abs() < 1e-13);
        assert_eq!(eg, gradient_exact_dense(&p, &proto).unwrap());
    }
}
