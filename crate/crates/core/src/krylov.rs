//! Lanczos tridiagonalization and the projected Krylov propagator.
//!
//! A step maps `ψ` onto the first Lanczos vector, evolves `‖ψ‖·e_1` under
//! the small tridiagonal matrix `T`, and lifts the result back through the
//! Krylov basis:
//!
//! ```text
//! e^{−iHΔt} ψ ≈ ‖ψ‖ · V† e^{−iTΔt} e_1
//! ```
//!
//! The local error behaves like `O(Δt^N)` as long as `Δt` stays well below
//! `N²/W`, `W` being the spectral width of `H`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, eigh, norm_sqr, HermitianOperator, StateVector, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reorthogonalization {
    /// Plain three-term recurrence.
    None,
    /// Gram-Schmidt against every previous basis vector.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovStepConfig {
    /// Requested number of Krylov vectors `N`.
    pub dimension: usize,
    pub reorthogonalize: Reorthogonalization,
    /// A residual `b_j ≤ breakdown_tol · max(1, ‖H v_{j−1}‖)` is treated as
    /// an invariant subspace.
    pub breakdown_tol: f64,
}

impl KrylovStepConfig {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            reorthogonalize: Reorthogonalization::Full,
            breakdown_tol: 1e-12,
        }
    }

    pub fn with_reorthogonalization(mut self, mode: Reorthogonalization) -> Self {
        self.reorthogonalize = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("Krylov dimension must be at least 1".into()));
        }
        if !(self.breakdown_tol >= 0.0 && self.breakdown_tol.is_finite()) {
            return Err(Error::InvalidArgument("breakdown tolerance must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Orthonormal Krylov basis `V` with the projected tridiagonal `T = V H V†`.
#[derive(Clone, Debug)]
pub struct KrylovFactorization {
    pub full_dim: usize,
    pub requested: usize,
    /// `basis[0] = ψ/‖ψ‖`.
    pub basis: Vec<StateVector>,
    /// Diagonal of `T`.
    pub alpha: Vec<f64>,
    /// Off-diagonal of `T`, all strictly positive.
    pub beta: Vec<f64>,
    /// Norm of the start vector.
    pub start_norm: f64,
}

impl KrylovFactorization {
    /// Effective dimension `m ≤ N`; smaller than requested only on breakdown.
    pub fn effective_dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn tridiagonal(&self) -> DMatrix<f64> {
        let m = self.effective_dim();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
        }
        for (i, &b) in self.beta.iter().enumerate() {
            t[(i, i + 1)] = b;
            t[(i + 1, i)] = b;
        }
        t
    }

    /// `max |⟨v_i|v_j⟩ − δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, vi) in self.basis.iter().enumerate() {
            for (j, vj) in self.basis.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(vi.as_slice(), vj.as_slice()) - target).norm());
            }
        }
        worst
    }
}

/// Eigenvalues (ascending) and row-major eigenvector matrix `Z` of the
/// symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
/// Column `k` of `Z` belongs to eigenvalue `k`.
///
/// Implicit QL with Wilkinson-type shifts.
pub fn symmetric_tridiagonal_eig(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::EmptyInput("tridiagonal matrix".into()));
    }
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n - 1, found: off.len() });
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > 60 {
                    return Err(Error::ConvergenceFailure("tridiagonal QL iteration".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zk = &mut z[k * n..(k + 1) * n];
                        let h = zk[i + 1];
                        zk[i + 1] = s * zk[i] + c * h;
                        zk[i] = c * zk[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut sorted = vec![0.0; n * n];
    for r in 0..n {
        for (c, &k) in order.iter().enumerate() {
            sorted[r * n + c] = z[r * n + k];
        }
    }
    Ok((values, sorted))
}

/// Reusable Lanczos workspace; one per propagation sweep avoids
/// reallocating the basis for every time slot.
#[derive(Clone, Debug)]
pub struct KrylovPropagator {
    cfg: KrylovStepConfig,
    dim: usize,
    capacity: usize,
    basis: Vec<C64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    work: Vec<C64>,
    coeffs: Vec<C64>,
}

impl KrylovPropagator {
    pub fn new(cfg: KrylovStepConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        let capacity = cfg.dimension.min(dim);
        Ok(Self {
            cfg,
            dim,
            capacity,
            basis: vec![ZERO; capacity * dim],
            alpha: Vec::with_capacity(capacity),
            beta: Vec::with_capacity(capacity),
            work: vec![ZERO; dim],
            coeffs: vec![ZERO; capacity],
        })
    }

    pub fn config(&self) -> &KrylovStepConfig {
        &self.cfg
    }

    fn vector(&self, k: usize) -> &[C64] {
        &self.basis[k * self.dim..(k + 1) * self.dim]
    }

    /// Runs Lanczos from `psi`; returns `‖psi‖`. The factorization lives in
    /// the workspace afterwards.
    fn factorize<O: HermitianOperator + ?Sized>(&mut self, op: &O, psi: &[C64]) -> Result<f64> {
        let dim = self.dim;
        if op.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
        }
        if psi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: psi.len() });
        }
        let norm = norm_sqr(psi).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite("Krylov start vector".into()));
        }
        self.alpha.clear();
        self.beta.clear();
        let inv = 1.0 / norm;
        for (b, p) in self.basis[..dim].iter_mut().zip(psi) {
            *b = p * inv;
        }

        for j in 0..self.capacity {
            let (done, rest) = self.basis.split_at_mut((j + 1) * dim);
            let vj = &done[j * dim..];
            op.apply_into(vj, &mut self.work);
            let hv_norm = norm_sqr(&self.work).sqrt();
            if j > 0 {
                let b = self.beta[j - 1];
                axpy(C64::new(-b, 0.0), &done[(j - 1) * dim..j * dim], &mut self.work);
            }
            let a = dot(vj, &self.work).re;
            self.alpha.push(a);
            if j + 1 == self.capacity {
                break;
            }
            axpy(C64::new(-a, 0.0), vj, &mut self.work);
            if self.cfg.reorthogonalize == Reorthogonalization::Full {
                for k in 0..=j {
                    let vk = &done[k * dim..(k + 1) * dim];
                    let overlap = dot(vk, &self.work);
                    axpy(-overlap, vk, &mut self.work);
                }
            }
            let b = norm_sqr(&self.work).sqrt();
            if b <= self.cfg.breakdown_tol * hv_norm.max(1.0) {
                break;
            }
            self.beta.push(b);
            let inv = 1.0 / b;
            for (dst, w) in rest[..dim].iter_mut().zip(&self.work) {
                *dst = w * inv;
            }
        }
        Ok(norm)
    }

    /// Snapshot of the last factorization.
    fn factorization(&self, norm: f64) -> KrylovFactorization {
        let m = self.alpha.len();
        KrylovFactorization {
            full_dim: self.dim,
            requested: self.cfg.dimension,
            basis: (0..m)
                .map(|k| StateVector::new(self.vector(k).to_vec()).expect("finite basis"))
                .collect(),
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            start_norm: norm,
        }
    }

    /// Writes the Krylov approximation of `e^{−iH dt} psi` into `out` and
    /// returns the effective subspace dimension used.
    pub fn step<O: HermitianOperator + ?Sized>(
        &mut self,
        op: &O,
        psi: &[C64],
        dt: f64,
        out: &mut [C64],
    ) -> Result<usize> {
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: out.len() });
        }
        let norm = self.factorize(op, psi)?;
        let m = self.alpha.len();
        if dt == 0.0 {
            out.copy_from_slice(psi);
            return Ok(m);
        }
        let (theta, z) = symmetric_tridiagonal_eig(&self.alpha, &self.beta)?;
        // c = Z diag(e^{−iθ dt}) Z[0, :]ᵀ
        let coeffs = &mut self.coeffs[..m];
        coeffs.iter_mut().for_each(|c| *c = ZERO);
        for (k, &t) in theta.iter().enumerate() {
            let w = C64::from_polar(z[k], -t * dt);
            for (i, c) in coeffs.iter_mut().enumerate() {
                *c += w * z[i * m + k];
            }
        }
        out.iter_mut().for_each(|o| *o = ZERO);
        for (k, &c) in coeffs.iter().enumerate() {
            axpy(c, &self.basis[k * self.dim..(k + 1) * self.dim], out);
        }
        let got = norm_sqr(out).sqrt();
        if !got.is_finite() || got == 0.0 {
            return Err(Error::NonFinite("Krylov propagated state".into()));
        }
        let rescale = norm / got;
        out.iter_mut().for_each(|o| *o *= rescale);
        Ok(m)
    }
}

/// Lanczos tridiagonalization of `op` started from `psi`.
pub fn lanczos<O: HermitianOperator + ?Sized>(
    op: &O,
    psi: &StateVector,
    cfg: &KrylovStepConfig,
) -> Result<KrylovFactorization> {
    let mut work = KrylovPropagator::new(*cfg, psi.dim())?;
    let norm = work.factorize(op, psi.as_slice())?;
    Ok(work.factorization(norm))
}

/// Krylov approximation of `e^{−iH dt} psi`; norm is preserved.
pub fn krylov_step<O: HermitianOperator + ?Sized>(
    op: &O,
    psi: &StateVector,
    dt: f64,
    cfg: &KrylovStepConfig,
) -> Result<StateVector> {
    let mut work = KrylovPropagator::new(*cfg, psi.dim())?;
    let mut out = vec![ZERO; psi.dim()];
    work.step(op, psi.as_slice(), dt, &mut out)?;
    StateVector::new(out)
}

/// Dense matrix of a Hermitian operator, assembled column by column.
pub fn operator_to_dense<O: HermitianOperator + ?Sized>(op: &O) -> DMatrix<C64> {
    let n = op.dim();
    let mut m = DMatrix::from_element(n, n, ZERO);
    let mut e = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for c in 0..n {
        e[c] = C64::new(1.0, 0.0);
        op.apply_into(&e, &mut col);
        m.column_mut(c).copy_from_slice(&col);
        e[c] = ZERO;
    }
    m
}

/// Dimensions up to this use a dense eigendecomposition.
pub const SPECTRAL_WIDTH_DENSE_CAP: usize = 64;

/// Lanczos depth used for large operators.
pub const SPECTRAL_WIDTH_DEPTH: usize = 50;

/// `λ_max − λ_min`: exact for small operators, extremal Ritz values otherwise.
pub fn spectral_width<O: HermitianOperator + ?Sized>(op: &O) -> Result<f64> {
    if op.dim() <= SPECTRAL_WIDTH_DENSE_CAP {
        let eig = eigh(&operator_to_dense(op))?;
        let l = &eig.eigenvalues;
        return Ok(l[l.len() - 1] - l[0]);
    }
    spectral_width_lanczos(op, SPECTRAL_WIDTH_DEPTH)
}

/// Ritz estimate of the spectral width from a fixed-seed random start.
pub fn spectral_width_lanczos<O: HermitianOperator + ?Sized>(op: &O, depth: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_0b5e);
    let start = StateVector::random(op.dim(), &mut rng);
    let cfg = KrylovStepConfig::new(depth.min(op.dim()).max(1));
    let fact = lanczos(op, &start, &cfg)?;
    let (ritz, _) = symmetric_tridiagonal_eig(&fact.alpha, &fact.beta)?;
    Ok(ritz[ritz.len() - 1] - ritz[0])
}
