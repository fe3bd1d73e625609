//! Complex dense and sparse kernels shared by the propagators and the
//! optimizer.
//!
//! Sparse operators are stored row-compressed. Dense Hermitian
//! eigendecompositions are delegated to `nalgebra`, with a real-symmetric
//! fast path because every XXZ operator built by [`crate::spinchain`] is real.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entries with modulus at or below this are never stored.
pub const DROP_TOLERANCE: f64 = 1e-15;

/// Absolute Hermiticity tolerance (scaled by `max(1, ‖H‖_max)`).
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A state in a `dim`-dimensional subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::EmptyInput("state vector".into()));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("state amplitude".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "state dimension must be positive");
        Self { amplitudes: vec![ZERO; dim] }
    }

    /// The coordinate vector `e_{index}` (zero-based index).
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut v = Self::zeros(dim);
        v.amplitudes[index] = C64::new(1.0, 0.0);
        v
    }

    /// A normalized state with independent Gaussian real and imaginary parts.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let amplitudes = (0..dim)
            .map(|_| C64::new(gaussian(rng), gaussian(rng)))
            .collect();
        Self { amplitudes }.normalized().expect("random state is nonzero")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// `self - other`, used for error norms.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; avoids pulling in rand_distr for one sampler.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `⟨u|v⟩` on raw slices. Caller guarantees equal lengths.
#[inline]
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in u.iter().zip(v) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    C64::new(re, im)
}

#[inline]
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// `y += a x`
#[inline]
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Conjugate-linear in `u`, linear in `v`.
pub fn inner(u: &StateVector, v: &StateVector) -> Result<C64> {
    check_dims(u.dim(), v.dim())?;
    Ok(dot(u.as_slice(), v.as_slice()))
}

/// Anything that can act on a state as a Hermitian matrix.
pub trait HermitianOperator {
    fn dim(&self) -> usize;

    /// `y ← A x`. Both slices have length `dim()`.
    fn apply_into(&self, x: &[C64], y: &mut [C64]);

    fn apply(&self, v: &StateVector) -> Result<StateVector> {
        check_dims(self.dim(), v.dim())?;
        let mut out = vec![ZERO; v.dim()];
        self.apply_into(v.as_slice(), &mut out);
        Ok(StateVector { amplitudes: out })
    }
}

/// Row-compressed Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitianOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseHermitianOperator {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed,
    /// entries below [`DROP_TOLERANCE`] dropped, and Hermiticity verified.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("operator dimension must be positive".into()));
        }
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.max(c) + 1 });
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = ZERO;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v.norm() > DROP_TOLERANCE {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let op = Self { dim, row_ptr, cols, vals };
        let deviation = op.hermiticity_error();
        if deviation > HERMITIAN_TOLERANCE * op.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(op)
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let n = m.nrows();
        Self::from_triplets(
            n,
            (0..n).flat_map(|r| (0..n).map(move |c| (r, c, m[(r, c)]))),
        )
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_triplets(
            values.len(),
            values.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))),
        )
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// All stored entries as `(row, column, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest `|H_rc − conj(H_cr)|` over stored entries.
    pub fn hermiticity_error(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// True if every stored value has a vanishing imaginary part.
    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im.abs() <= DROP_TOLERANCE)
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn matvec(&self, v: &StateVector) -> Result<StateVector> {
        self.apply(v)
    }
}

impl HermitianOperator for SparseHermitianOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }
}

/// `matvec` as a free function.
pub fn matvec(op: &SparseHermitianOperator, v: &StateVector) -> Result<StateVector> {
    op.apply(v)
}

/// Eigendecomposition `H = Q Λ Q†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct DenseHermitianEig {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<C64>,
}

impl DenseHermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Q Λ Q†`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(l);
        }
        scaled * q.adjoint()
    }

    /// Components of `v` in the eigenbasis, `Q† v`.
    pub fn to_eigenbasis(&self, v: &[C64]) -> Vec<C64> {
        let q = &self.eigenvectors;
        (0..self.dim()).map(|k| dot(q.column(k).as_slice(), v)).collect()
    }

    /// `Q c` for eigenbasis coefficients `c`.
    pub fn from_eigenbasis(&self, c: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let q = &self.eigenvectors;
        let mut out = vec![ZERO; n];
        for (k, &ck) in c.iter().enumerate() {
            if ck != ZERO {
                axpy(ck, q.column(k).as_slice(), &mut out);
            }
        }
        out
    }

    /// `Q diag(e^{−iλt}) Q† v`.
    pub fn apply_exp(&self, t: f64, v: &[C64]) -> Vec<C64> {
        let mut c = self.to_eigenbasis(v);
        for (ck, &l) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= C64::from_polar(1.0, -l * t);
        }
        self.from_eigenbasis(&c)
    }
}

/// Largest `|H_ij − conj(H_ji)|`.
pub fn dense_hermiticity_error(h: &DMatrix<C64>) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn dense_max_abs(h: &DMatrix<C64>) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn eigh(h: &DMatrix<C64>) -> Result<DenseHermitianEig> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::DimensionMismatch { expected: n, found: h.ncols() });
    }
    if n == 0 {
        return Err(Error::EmptyInput("matrix".into()));
    }
    let deviation = dense_hermiticity_error(h);
    if deviation > HERMITIAN_TOLERANCE * dense_max_abs(h).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }

    let (values, vectors): (Vec<f64>, DMatrix<C64>) = if h.iter().all(|z| z.im == 0.0) {
        let real = h.map(|z| z.re);
        let eig = SymmetricEigen::try_new(real, f64::EPSILON, 0)
            .ok_or_else(|| Error::ConvergenceFailure("real symmetric eigensolver".into()))?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::ConvergenceFailure("Hermitian eigensolver".into()))?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors,
        )
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(DenseHermitianEig { eigenvalues, eigenvectors })
}

/// `e^{−iHt} v` through the spectral decomposition of `H`.
pub fn expm_apply_dense(h: &DMatrix<C64>, t: f64, v: &StateVector) -> Result<StateVector> {
    check_dims(h.nrows(), v.dim())?;
    let eig = eigh(h)?;
    StateVector::new(eig.apply_exp(t, v.as_slice()))
}

/// Dense random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for i in 0..dim {
        m[(i, i)] = C64::new(gaussian(rng), 0.0);
        for j in (i + 1)..dim {
            let z = C64::new(gaussian(rng), gaussian(rng)) / std::f64::consts::SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Dense random real symmetric matrix (stored complex).
pub fn random_real_symmetric<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    for i in 0..dim {
        for j in i..dim {
            let x = C64::new(gaussian(rng), 0.0);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }
    fn pauli_y() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }
    fn pauli_z() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_matvec_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = StateVector::random(7, &mut rng);
        let out = matvec(&SparseHermitianOperator::identity(7), &v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn diagonal_matvec() {
        let op = SparseHermitianOperator::diagonal(&[0.25, -0.25, -0.25, 0.25]).unwrap();
        let out = op.matvec(&StateVector::basis(4, 0)).unwrap();
        assert_eq!(out, StateVector::basis(4, 0).scaled(c(0.25, 0.0)));
    }

    #[test]
    fn two_site_xxz_matvec_against_kronecker_oracle() {
        // (J/2)(XX + YY + αz ZZ), J = 1, αz = 0.5, up = basis state 0.
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        let h = (x.kronecker(&x) + y.kronecker(&y) + z.kronecker(&z) * c(0.5, 0.0)) * c(0.5, 0.0);
        let op = SparseHermitianOperator::from_dense(&h).unwrap();
        // |↑↓⟩ = index 0b01, |↓↑⟩ = index 0b10.
        let out = op.matvec(&StateVector::basis(4, 1)).unwrap();
        let expected = [c(0., 0.), c(-0.25, 0.), c(1.0, 0.), c(0., 0.)];
        assert!(max_diff(out.as_slice(), &expected) < 1e-15);
    }

    #[test]
    fn matvec_rejects_dimension_mismatch() {
        let op = SparseHermitianOperator::identity(3);
        assert!(matches!(
            op.matvec(&StateVector::zeros(4)),
            Err(Error::DimensionMismatch { expected: 3, found: 4 })
        ));
    }

    #[test]
    fn non_hermitian_triplets_rejected() {
        let err = SparseHermitianOperator::from_triplets(2, [(0, 1, c(1.0, 0.0))]).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn explicit_zeros_are_dropped() {
        let op = SparseHermitianOperator::from_triplets(
            2,
            [(0, 0, c(1e-17, 0.0)), (1, 1, c(2.0, 0.0)), (0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(op.nnz(), 1);
    }

    #[test]
    fn inner_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = StateVector::random(9, &mut rng);
        let v = StateVector::random(9, &mut rng);
        let vv = inner(&v, &v).unwrap();
        assert!(vv.im.abs() < 1e-15 && vv.re > 0.0);
        assert_eq!(inner(&StateVector::basis(3, 0), &StateVector::basis(3, 2)).unwrap(), c(0., 0.));
        // direct summation oracle
        let direct: C64 = u.as_slice().iter().zip(v.as_slice()).map(|(a, b)| a.conj() * b).sum();
        let uv = inner(&u, &v).unwrap();
        let vu = inner(&v, &u).unwrap();
        assert!((uv - direct).norm() < 1e-14);
        assert!((uv - vu.conj()).norm() < 1e-14);
        assert!(inner(&u, &StateVector::zeros(3)).is_err());
    }

    #[test]
    fn eigh_known_spectra() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3., 0.), c(1., 0.), c(2., 0.)]));
        assert_eq!(eigh(&d).unwrap().eigenvalues, vec![1.0, 2.0, 3.0]);
        let sx = eigh(&pauli_x()).unwrap().eigenvalues;
        assert!((sx[0] + 1.0).abs() < 1e-15 && (sx[1] - 1.0).abs() < 1e-15);
        let sy = eigh(&pauli_y()).unwrap().eigenvalues;
        assert!((sy[0] + 1.0).abs() < 1e-14 && (sy[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(8, &mut rng);
        let eig = eigh(&h).unwrap();
        let q = &eig.eigenvectors;
        let gram = q.adjoint() * q - DMatrix::<C64>::identity(8, 8);
        assert!(dense_max_abs(&gram) <= 1e-10);
        assert!(dense_max_abs(&(eig.reconstruct() - &h)) <= 1e-10 * dense_max_abs(&h));
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(eigh(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn expm_zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_hermitian(5, &mut rng);
        let v = StateVector::random(5, &mut rng);
        let out = expm_apply_dense(&h, 0.0, &v).unwrap();
        assert!(max_diff(out.as_slice(), v.as_slice()) < 1e-14);
    }

    #[test]
    fn expm_pauli_z_phase() {
        let up = StateVector::basis(2, 0);
        let out = expm_apply_dense(&pauli_z(), std::f64::consts::FRAC_PI_2, &up).unwrap();
        let expected = [C64::from_polar(1.0, -std::f64::consts::FRAC_PI_2), c(0., 0.)];
        assert!(max_diff(out.as_slice(), &expected) < 1e-15);
    }

    #[test]
    fn expm_small_time_matches_taylor_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(6, &mut rng);
        let v = StateVector::random(6, &mut rng);
        let t = 1e-3;
        // Σ_{k<6} (−iHt)^k v / k!
        let mut term: Vec<C64> = v.as_slice().to_vec();
        let mut sum = term.clone();
        for k in 1..6 {
            let hv = &h * nalgebra::DVector::from_vec(term.clone());
            term = hv.iter().map(|z| z * c(0.0, -t) / k as f64).collect();
            for (s, x) in sum.iter_mut().zip(&term) {
                *s += x;
            }
        }
        let out = expm_apply_dense(&h, t, &v).unwrap();
        assert!(max_diff(out.as_slice(), &sum) < 1e-12);
    }

    fn arb_hermitian(max_dim: usize) -> impl Strategy<Value = DMatrix<C64>> {
        (1..=max_dim, any::<u64>()).prop_map(|(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_hermitian(n, &mut rng)
        })
    }

    proptest! {
        #[test]
        fn quadratic_form_is_real(h in arb_hermitian(12), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let op = SparseHermitianOperator::from_dense(&h).unwrap();
            let v = StateVector::random(op.dim(), &mut rng).scaled(c(3.0, 0.0));
            let q = inner(&v, &op.matvec(&v).unwrap()).unwrap();
            prop_assert!(q.im.abs() <= 1e-12 * op.max_abs().max(1.0) * op.dim() as f64 * v.norm_sqr());
        }

        #[test]
        fn dense_exponential_is_unitary(h in arb_hermitian(10), t in -20.0f64..20.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = StateVector::random(h.nrows(), &mut rng);
            let out = expm_apply_dense(&h, t, &v).unwrap();
            prop_assert!((out.norm() - v.norm()).abs() <= 1e-12);
        }

        #[test]
        fn real_symmetric_spectrum_matches_power_sums(n in 1usize..=4, seed in any::<u64>()) {
            // Newton's identities: tr(H^k) for k = 1..n fix the characteristic polynomial.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_real_symmetric(n, &mut rng);
            let eig = eigh(&h).unwrap();
            let mut power = DMatrix::<C64>::identity(n, n);
            for k in 1..=n {
                power = &power * &h;
                let trace = power.trace();
                let sum: f64 = eig.eigenvalues.iter().map(|l| l.powi(k as i32)).sum();
                prop_assert!(trace.im.abs() < 1e-12);
                prop_assert!((trace.re - sum).abs() <= 1e-10 * (1.0 + trace.re.abs()));
            }
        }
    }
}
