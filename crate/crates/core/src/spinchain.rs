//! XXZ chain with edge-field control, reduced to a parity-excitation (PE)
//! subspace.
//!
//! Configurations are `L`-bit integers: spin up is `0`, spin down is `1`,
//! and site 1 (leftmost) is the most significant bit. A `K`-excitation
//! configuration therefore has exactly `K` zero bits. The excitation basis
//! is sorted by that integer, ascending.
//!
//! The mirror operator `Π` reverses the bit string. Even-sector basis rows
//! are `(|s⟩ + |Πs⟩)/√2` for mirror pairs and `|s⟩` for palindromes; odd
//! rows are `(|s⟩ − |Πs⟩)/√2`. Rows are ordered by the smaller
//! configuration index of each pair. With this convention the first even
//! row of `L = 5, K = 2` is `(|↑↑↓↓↓⟩ + |↓↓↓↑↑⟩)/√2`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::ControlProblem;
use crate::linalg::{SparseHermitianOperator, StateVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(Error::Config(format!("unknown parity '{other}'"))),
        }
    }
}

/// Largest chain length representable in the configuration integers.
pub const MAX_SITES: usize = 62;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Number of sites `L`.
    pub sites: usize,
    /// Coupling `J`.
    pub coupling: f64,
    /// Anisotropy `α_z`.
    pub anisotropy: f64,
    /// Number of up spins `K`.
    pub excitations: usize,
    pub parity: Parity,
}

impl ChainSpec {
    pub fn new(sites: usize, excitations: usize, coupling: f64, anisotropy: f64, parity: Parity) -> Result<Self> {
        let spec = Self { sites, coupling, anisotropy, excitations, parity };
        spec.validate()?;
        Ok(spec)
    }

    /// `J = 1`, `α_z = 0.5`: breaks the total-spin symmetry while keeping
    /// magnetization and mirror parity.
    pub fn xxz(sites: usize, excitations: usize, parity: Parity) -> Result<Self> {
        Self::new(sites, excitations, 1.0, 0.5, parity)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 sites, got {}", self.sites)));
        }
        if self.sites > MAX_SITES {
            return Err(Error::InvalidSpec(format!("at most {MAX_SITES} sites supported")));
        }
        if self.excitations < 1 || self.excitations >= self.sites {
            return Err(Error::InvalidSpec(format!(
                "excitations must lie in 1..={}, got {}",
                self.sites - 1,
                self.excitations
            )));
        }
        if !self.coupling.is_finite() || !self.anisotropy.is_finite() {
            return Err(Error::InvalidSpec("coupling and anisotropy must be finite".into()));
        }
        Ok(())
    }

    /// `D_K = C(L, K)`.
    pub fn excitation_dim(&self) -> usize {
        binomial(self.sites, self.excitations)
    }

    /// Number of mirror-symmetric configurations in `S_K`.
    pub fn palindromes(&self) -> usize {
        palindrome_count(self.sites, self.excitations)
    }

    /// Dimension of the selected PE subspace, from the closed form.
    pub fn pe_dim(&self) -> usize {
        let (dk, p) = (self.excitation_dim(), self.palindromes());
        match self.parity {
            Parity::Even => (dk + p) / 2,
            Parity::Odd => (dk - p) / 2,
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Palindromic `L`-site strings with `K` up spins: mirror pairs carry two
/// spins each, the middle site of an odd chain carries the parity of `K`.
pub fn palindrome_count(sites: usize, excitations: usize) -> usize {
    let pairs = sites / 2;
    if sites.is_multiple_of(2) {
        if excitations % 2 == 1 {
            0
        } else {
            binomial(pairs, excitations / 2)
        }
    } else {
        binomial(pairs, excitations / 2)
    }
}

/// Bit-reversal of an `L`-site configuration.
pub fn mirror(config: u64, sites: usize) -> u64 {
    config.reverse_bits() >> (64 - sites)
}

/// `z_i` of site `i` (1-based): `+1` for up, `−1` for down.
pub fn site_z(config: u64, sites: usize, site: usize) -> f64 {
    if (config >> (sites - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Arrow rendering of a configuration, leftmost site first.
pub fn render_config(config: u64, sites: usize) -> String {
    (1..=sites)
        .map(|i| if site_z(config, sites, i) > 0.0 { '↑' } else { '↓' })
        .collect()
}

/// Ascending list of `K`-excitation configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceBasis {
    pub sites: usize,
    pub excitations: usize,
    pub configs: Vec<u64>,
}

impl SubspaceBasis {
    pub fn new(sites: usize, excitations: usize) -> Result<Self> {
        if !(1..=MAX_SITES).contains(&sites) || excitations > sites {
            return Err(Error::InvalidSpec(format!("no basis for L={sites}, K={excitations}")));
        }
        let downs = sites - excitations;
        let limit = 1u64 << sites;
        let mut configs = Vec::with_capacity(binomial(sites, excitations));
        // Gosper's hack walks fixed-popcount integers in ascending order.
        let mut x: u64 = if downs == 0 { 0 } else { (1u64 << downs) - 1 };
        loop {
            configs.push(x);
            if x == 0 {
                break;
            }
            let c = x & x.wrapping_neg();
            let r = x + c;
            let next = (((r ^ x) >> 2) / c) | r;
            if next >= limit {
                break;
            }
            x = next;
        }
        Ok(Self { sites, excitations, configs })
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        self.configs.binary_search(&config).ok()
    }
}

/// XXZ drift restricted to `S_K`.
pub fn build_drift(spec: &ChainSpec) -> Result<SparseHermitianOperator> {
    spec.validate()?;
    let basis = SubspaceBasis::new(spec.sites, spec.excitations)?;
    let l = spec.sites;
    let half_j = 0.5 * spec.coupling;
    let mut trip = Vec::new();
    for (idx, &s) in basis.configs.iter().enumerate() {
        let mut diag = 0.0;
        for i in 1..l {
            let (zi, zj) = (site_z(s, l, i), site_z(s, l, i + 1));
            diag += zi * zj;
            if zi != zj {
                // σˣσˣ + σʸσʸ = 2(σ⁺σ⁻ + σ⁻σ⁺) exchanges antiparallel neighbours
                let flip = (1u64 << (l - i)) | (1u64 << (l - i - 1));
                let t = s ^ flip;
                let tdx = basis.index_of(t).expect("exchange preserves excitation number");
                trip.push((idx, tdx, C64::new(spec.coupling, 0.0)));
            }
        }
        trip.push((idx, idx, C64::new(half_j * spec.anisotropy * diag, 0.0)));
    }
    SparseHermitianOperator::from_triplets(basis.dim(), trip)
}

/// Edge-field control `(J/2)(σᶻ_1 + σᶻ_L)` restricted to `S_K`.
pub fn build_control(spec: &ChainSpec) -> Result<SparseHermitianOperator> {
    spec.validate()?;
    let basis = SubspaceBasis::new(spec.sites, spec.excitations)?;
    let l = spec.sites;
    let diag: Vec<f64> = basis
        .configs
        .iter()
        .map(|&s| 0.5 * spec.coupling * (site_z(s, l, 1) + site_z(s, l, l)))
        .collect();
    SparseHermitianOperator::diagonal(&diag)
}

/// Permutation `Π` on `S_K` as an index map.
pub fn mirror_permutation(basis: &SubspaceBasis) -> Vec<usize> {
    basis
        .configs
        .iter()
        .map(|&s| basis.index_of(mirror(s, basis.sites)).expect("mirror keeps excitation number"))
        .collect()
}

/// Largest `|H[Πr, Πc] − H[r, c]|`, i.e. the size of `[H, Π]`.
pub fn mirror_commutator_error(op: &SparseHermitianOperator, perm: &[usize]) -> f64 {
    op.triplets()
        .map(|(r, c, v)| (op.get(perm[r], perm[c]) - v).norm())
        .fold(0.0, f64::max)
}

/// Rectangular change of basis `Q` from `S_K` onto one parity sector.
#[derive(Clone, Debug)]
pub struct ParityProjector {
    pub basis: SubspaceBasis,
    pub parity: Parity,
    /// Row `a` of `Q` as `(S_K index, coefficient)`.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// For each `S_K` index, the row containing it and its coefficient.
    owner: Vec<Option<(usize, f64)>>,
    perm: Vec<usize>,
}

impl ParityProjector {
    pub fn new(sites: usize, excitations: usize, parity: Parity) -> Result<Self> {
        let basis = SubspaceBasis::new(sites, excitations)?;
        let perm = mirror_permutation(&basis);
        let sign = parity.sign();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut rows = Vec::new();
        let mut owner = vec![None; basis.dim()];
        for (i, &j) in perm.iter().enumerate() {
            if j < i {
                continue;
            }
            let row = rows.len();
            if j == i {
                if parity == Parity::Even {
                    owner[i] = Some((row, 1.0));
                    rows.push(vec![(i, 1.0)]);
                }
            } else {
                owner[i] = Some((row, r));
                owner[j] = Some((row, sign * r));
                rows.push(vec![(i, r), (j, sign * r)]);
            }
        }
        Ok(Self { basis, parity, rows, owner, perm })
    }

    pub fn for_spec(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        Self::new(spec.sites, spec.excitations, spec.parity)
    }

    /// Reduced dimension `D`.
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn q_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.dim(), self.basis.dim());
        for (a, row) in self.rows.iter().enumerate() {
            for &(s, w) in row {
                q[(a, s)] = w;
            }
        }
        q
    }

    /// `Q H Q†`; fails if `H` does not commute with `Π`.
    pub fn reduce(&self, op: &SparseHermitianOperator) -> Result<SparseHermitianOperator> {
        if op.dim() != self.basis.dim() {
            return Err(Error::DimensionMismatch { expected: self.basis.dim(), found: op.dim() });
        }
        let deviation = mirror_commutator_error(op, &self.perm);
        if deviation > 1e-12 * op.max_abs().max(1.0) {
            return Err(Error::SymmetryBroken { deviation });
        }
        let mut trip = Vec::new();
        for (a, row) in self.rows.iter().enumerate() {
            let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
            for &(s, qa) in row {
                for (t, h) in op.row(s) {
                    if let Some((b, qb)) = self.owner[t] {
                        *acc.entry(b).or_default() += h * (qa * qb);
                    }
                }
            }
            trip.extend(acc.into_iter().map(|(b, v)| (a, b, v)));
        }
        SparseHermitianOperator::from_triplets(self.dim(), trip)
    }

    /// `Q† v`: a reduced state expressed in `S_K`.
    pub fn lift(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.dim() });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.basis.dim()];
        for (a, row) in self.rows.iter().enumerate() {
            for &(s, w) in row {
                out[s] += v.as_slice()[a] * w;
            }
        }
        StateVector::new(out)
    }
}

/// Drift and control reduced to one PE subspace.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    pub spec: ChainSpec,
    pub projector: ParityProjector,
    pub drift: SparseHermitianOperator,
    pub control: SparseHermitianOperator,
}

impl ReducedModel {
    /// Builds the XXZ drift and edge control for `spec` and reduces both.
    pub fn build(spec: &ChainSpec) -> Result<Self> {
        let drift = build_drift(spec)?;
        let control = build_control(spec)?;
        parity_reduce(&drift, &control, spec)
    }

    pub fn dim(&self) -> usize {
        self.projector.dim()
    }

    /// `e_1 → e_D` in the reduced basis.
    pub fn transfer_problem(&self) -> Result<ControlProblem> {
        let (initial, target) = task_states(self.dim())?;
        ControlProblem::new(self.drift.clone(), self.control.clone(), initial, target)
    }
}

/// Reduces drift and control (both on `S_K`) to the sector `spec.parity`.
pub fn parity_reduce(
    drift: &SparseHermitianOperator,
    control: &SparseHermitianOperator,
    spec: &ChainSpec,
) -> Result<ReducedModel> {
    let projector = ParityProjector::for_spec(spec)?;
    if projector.dim() == 0 {
        return Err(Error::InvalidSpec(format!(
            "{} sector of L={}, K={} is empty",
            spec.parity, spec.sites, spec.excitations
        )));
    }
    let drift = projector.reduce(drift)?;
    let control = projector.reduce(control)?;
    Ok(ReducedModel { spec: *spec, projector, drift, control })
}

/// First and last coordinate vectors of a `dim`-dimensional space.
pub fn task_states(dim: usize) -> Result<(StateVector, StateVector)> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("transfer task needs D >= 2, got {dim}")));
    }
    Ok((StateVector::basis(dim, 0), StateVector::basis(dim, dim - 1)))
}

/// Default dimension cap for [`controllability_rank`].
pub const CONTROLLABILITY_CAP: usize = 64;

/// Dimension of the real Lie algebra generated by `−iH_d` and `−iH_c`.
///
/// `D² − 1` (traceless part) or `D²` means the pair is fully controllable.
pub fn controllability_rank(
    drift: &SparseHermitianOperator,
    control: &SparseHermitianOperator,
    max_dim_cap: usize,
) -> Result<usize> {
    let d = drift.dim();
    if control.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: control.dim() });
    }
    if d > max_dim_cap {
        return Err(Error::DimensionCap { dim: d, cap: max_dim_cap });
    }
    let minus_i = C64::new(0.0, -1.0);
    let gens: Vec<DMatrix<C64>> = [drift, control]
        .iter()
        .map(|op| op.to_dense() * minus_i)
        .filter_map(|m| {
            let n = m.norm();
            (n > 0.0).then(|| m / C64::new(n, 0.0))
        })
        .collect();

    let threshold = 1e-10;
    let mut basis: Vec<DMatrix<C64>> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();

    // Real inner product Re tr(A† B) on the algebra.
    let real_inner = |a: &DMatrix<C64>, b: &DMatrix<C64>| -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
    };
    let try_add = |candidate: DMatrix<C64>, basis: &mut Vec<DMatrix<C64>>| -> bool {
        if candidate.norm() <= threshold {
            return false;
        }
        let mut r = candidate;
        for _ in 0..2 {
            for b in basis.iter() {
                let c = real_inner(b, &r);
                r -= b * C64::new(c, 0.0);
            }
        }
        let n = r.norm();
        if n <= threshold {
            return false;
        }
        basis.push(r / C64::new(n, 0.0));
        true
    };

    for g in &gens {
        if try_add(g.clone(), &mut basis) {
            queue.push_back(basis.len() - 1);
        }
    }
    while let Some(k) = queue.pop_front() {
        if basis.len() == d * d {
            break;
        }
        for g in &gens {
            let x = &basis[k];
            let comm = g * x - x * g;
            if try_add(comm, &mut basis) {
                queue.push_back(basis.len() - 1);
            }
        }
    }
    Ok(basis.len())
}

/// Full `2^L` reference construction from Kronecker products of Pauli
/// matrices. Only meant for small chains; it cross-checks the direct
/// subspace builders.
pub mod full_space {
    use nalgebra::DMatrix;

    use super::{site_z, ChainSpec, SubspaceBasis};

    fn pauli(kind: char) -> DMatrix<f64> {
        match kind {
            'x' => DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            'z' => DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            'y' => unreachable!("σʸσʸ is handled through its real product"),
            _ => DMatrix::identity(2, 2),
        }
    }

    /// `⊗` over sites with `ops[i]` on site `i + 1`.
    fn chain_product(ops: &[DMatrix<f64>]) -> DMatrix<f64> {
        ops.iter().skip(1).fold(ops[0].clone(), |acc, m| acc.kronecker(m))
    }

    fn two_site(l: usize, i: usize, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let ops: Vec<DMatrix<f64>> = (1..=l)
            .map(|s| {
                if s == i {
                    a.clone()
                } else if s == i + 1 {
                    b.clone()
                } else {
                    pauli('1')
                }
            })
            .collect();
        chain_product(&ops)
    }

    /// Dense XXZ drift on the full space (real; `σʸ⊗σʸ = −(iσʸ)⊗(iσʸ)`).
    pub fn drift(spec: &ChainSpec) -> DMatrix<f64> {
        let l = spec.sites;
        let x = pauli('x');
        let z = pauli('z');
        // iσʸ is the real matrix [[0, 1], [−1, 0]]
        let iy = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let n = 1usize << l;
        let mut h = DMatrix::zeros(n, n);
        for i in 1..l {
            h += two_site(l, i, &x, &x);
            h -= two_site(l, i, &iy, &iy);
            h += two_site(l, i, &z, &z) * spec.anisotropy;
        }
        h * (0.5 * spec.coupling)
    }

    pub fn control(spec: &ChainSpec) -> DMatrix<f64> {
        let l = spec.sites;
        let z = pauli('z');
        let mut first: Vec<DMatrix<f64>> = (0..l).map(|_| pauli('1')).collect();
        first[0] = z.clone();
        let mut last: Vec<DMatrix<f64>> = (0..l).map(|_| pauli('1')).collect();
        last[l - 1] = z;
        (chain_product(&first) + chain_product(&last)) * (0.5 * spec.coupling)
    }

    /// Diagonal of `Σ σᶻ_i`.
    pub fn total_magnetization(sites: usize) -> Vec<f64> {
        (0..1u64 << sites)
            .map(|s| (1..=sites).map(|i| site_z(s, sites, i)).sum())
            .collect()
    }

    /// `Π` as an index permutation on the full space.
    pub fn mirror_permutation(sites: usize) -> Vec<usize> {
        (0..1u64 << sites).map(|s| super::mirror(s, sites) as usize).collect()
    }

    /// `max |[H, Σσᶻ]|`.
    pub fn magnetization_commutator(h: &DMatrix<f64>, sz: &[f64]) -> f64 {
        let n = h.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((h[(r, c)] * (sz[c] - sz[r])).abs());
            }
        }
        worst
    }

    /// `max |[H, Π]|`.
    pub fn mirror_commutator(h: &DMatrix<f64>, perm: &[usize]) -> f64 {
        let n = h.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((h[(perm[r], perm[c])] - h[(r, c)]).abs());
            }
        }
        worst
    }

    /// Block of `h` on the `K`-excitation configurations.
    pub fn restrict(h: &DMatrix<f64>, basis: &SubspaceBasis) -> DMatrix<f64> {
        let idx: Vec<usize> = basis.configs.iter().map(|&s| s as usize).collect();
        DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;

    fn dense_real(op: &SparseHermitianOperator) -> DMatrix<f64> {
        op.to_dense().map(|z| z.re)
    }

    #[test]
    fn spec_validation() {
        assert!(ChainSpec::xxz(1, 1, Parity::Even).is_err());
        assert!(ChainSpec::xxz(4, 0, Parity::Even).is_err());
        assert!(ChainSpec::xxz(4, 4, Parity::Even).is_err());
        assert!(ChainSpec::xxz(4, 3, Parity::Odd).is_ok());
    }

    #[test]
    fn basis_ordering_and_size() {
        let b = SubspaceBasis::new(3, 1).unwrap();
        assert_eq!(b.configs, vec![0b011, 0b101, 0b110]);
        assert_eq!(render_config(b.configs[0], 3), "↑↓↓");
        assert_eq!(SubspaceBasis::new(7, 3).unwrap().dim(), 35);
        for l in 2..=12 {
            for k in 1..l {
                let b = SubspaceBasis::new(l, k).unwrap();
                assert_eq!(b.dim(), binomial(l, k));
                assert!(b.configs.windows(2).all(|w| w[0] < w[1]));
                assert!(b.configs.iter().all(|&s| (l - s.count_ones() as usize) == k));
            }
        }
    }

    #[test]
    fn two_site_drift() {
        let spec = ChainSpec::xxz(2, 1, Parity::Even).unwrap();
        let h = dense_real(&build_drift(&spec).unwrap());
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[-0.25, 1.0, 1.0, -0.25]));
    }

    #[test]
    fn drift_matches_kronecker_oracle() {
        for (l, k) in [(2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (7, 3)] {
            let spec = ChainSpec::new(l, k, 1.3, 0.7, Parity::Even).unwrap();
            let basis = SubspaceBasis::new(l, k).unwrap();
            let oracle = full_space::restrict(&full_space::drift(&spec), &basis);
            let built = dense_real(&build_drift(&spec).unwrap());
            assert!((oracle - built).abs().max() < 1e-14, "L={l} K={k}");
            let oracle_c = full_space::restrict(&full_space::control(&spec), &basis);
            let built_c = dense_real(&build_control(&spec).unwrap());
            assert!((oracle_c - built_c).abs().max() < 1e-14);
        }
    }

    #[test]
    fn control_diagonals() {
        let two = build_control(&ChainSpec::xxz(2, 1, Parity::Even).unwrap()).unwrap();
        assert_eq!(two.nnz(), 0);
        let three = build_control(&ChainSpec::xxz(3, 1, Parity::Even).unwrap()).unwrap();
        let d: Vec<f64> = (0..3).map(|i| three.get(i, i).re).collect();
        assert_eq!(d, vec![0.0, -1.0, 0.0]);
        let spec = ChainSpec::xxz(8, 3, Parity::Even).unwrap();
        let basis = SubspaceBasis::new(8, 3).unwrap();
        let perm = mirror_permutation(&basis);
        assert_eq!(mirror_commutator_error(&build_control(&spec).unwrap(), &perm), 0.0);
    }

    #[test]
    fn full_space_symmetries() {
        for l in 2..=8 {
            let spec = ChainSpec::xxz(l, 1, Parity::Even).unwrap();
            let h = full_space::drift(&spec);
            assert_eq!(full_space::magnetization_commutator(&h, &full_space::total_magnetization(l)), 0.0);
            assert_eq!(full_space::mirror_commutator(&h, &full_space::mirror_permutation(l)), 0.0);
        }
    }

    #[test]
    fn mirror_is_an_involution() {
        for l in 2..=10 {
            for s in 0..(1u64 << l) {
                assert_eq!(mirror(mirror(s, l), l), s);
            }
        }
        assert_eq!(mirror(0b1101, 4), 0b1011);
    }

    #[test]
    fn parity_dimensions_by_enumeration() {
        for l in 2..=12 {
            for k in 1..l {
                let basis = SubspaceBasis::new(l, k).unwrap();
                let pal = basis.configs.iter().filter(|&&s| mirror(s, l) == s).count();
                assert_eq!(pal, palindrome_count(l, k), "L={l} K={k}");
                let even = ParityProjector::new(l, k, Parity::Even).unwrap().dim();
                let odd = ParityProjector::new(l, k, Parity::Odd).unwrap().dim();
                assert_eq!(even, (basis.dim() + pal) / 2);
                assert_eq!(odd, (basis.dim() - pal) / 2);
                assert_eq!(even + odd, basis.dim());
            }
        }
        let even = ParityProjector::new(3, 1, Parity::Even).unwrap();
        let odd = ParityProjector::new(3, 1, Parity::Odd).unwrap();
        assert_eq!((even.dim(), odd.dim()), (2, 1));
        assert_eq!(ChainSpec::xxz(5, 2, Parity::Even).unwrap().pe_dim(), 6);
    }

    #[test]
    fn projector_rows_are_orthonormal() {
        for parity in [Parity::Even, Parity::Odd] {
            let q = ParityProjector::new(9, 4, parity).unwrap().q_dense();
            let gram = &q * q.transpose();
            assert!((gram - DMatrix::identity(q.nrows(), q.nrows())).abs().max() < 1e-12);
        }
    }

    #[test]
    fn reduction_preserves_spectrum() {
        let spec = ChainSpec::xxz(8, 3, Parity::Even).unwrap();
        let drift = build_drift(&spec).unwrap();
        let control = build_control(&spec).unwrap();
        let mut combined = drift.to_dense();
        combined += control.to_dense() * C64::new(0.37, 0.0);
        let full = eigh(&combined).unwrap().eigenvalues;
        let mut sectors = Vec::new();
        for parity in [Parity::Even, Parity::Odd] {
            let spec = ChainSpec { parity, ..spec };
            let m = parity_reduce(&drift, &control, &spec).unwrap();
            let mut h = m.drift.to_dense();
            h += m.control.to_dense() * C64::new(0.37, 0.0);
            sectors.extend(eigh(&h).unwrap().eigenvalues);
        }
        sectors.sort_by(f64::total_cmp);
        for (a, b) in full.iter().zip(&sectors) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetry_breaking_operator_rejected() {
        let spec = ChainSpec::xxz(4, 1, Parity::Even).unwrap();
        let drift = build_drift(&spec).unwrap();
        // field on site 1 only
        let lopsided = SparseHermitianOperator::diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(parity_reduce(&drift, &lopsided, &spec), Err(Error::SymmetryBroken { .. })));
    }

    #[test]
    fn task_states_and_lifted_initial_state() {
        let (e1, e5) = task_states(5).unwrap();
        assert_eq!(e1, StateVector::basis(5, 0));
        assert_eq!(e5, StateVector::basis(5, 4));
        assert!(task_states(1).is_err());

        let spec = ChainSpec::xxz(5, 2, Parity::Even).unwrap();
        let model = ReducedModel::build(&spec).unwrap();
        let lifted = model.projector.lift(&StateVector::basis(model.dim(), 0)).unwrap();
        let basis = &model.projector.basis;
        let a = basis.configs.iter().position(|&s| render_config(s, 5) == "↑↑↓↓↓").unwrap();
        let b = basis.configs.iter().position(|&s| render_config(s, 5) == "↓↓↓↑↑").unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (i, z) in lifted.as_slice().iter().enumerate() {
            let expected = if i == a || i == b { r } else { 0.0 };
            assert!((z.re - expected).abs() < 1e-15 && z.im == 0.0);
        }
    }

    #[test]
    fn controllability_of_known_algebras() {
        let sz = SparseHermitianOperator::diagonal(&[1.0, -1.0]).unwrap();
        let sx = SparseHermitianOperator::from_triplets(
            2,
            [(0, 1, C64::new(1.0, 0.0)), (1, 0, C64::new(1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(controllability_rank(&sz, &sx, 64).unwrap(), 3);
        let a = SparseHermitianOperator::diagonal(&[1.0, 2.0, -0.5]).unwrap();
        let b = SparseHermitianOperator::diagonal(&[0.3, -1.0, 4.0]).unwrap();
        assert_eq!(controllability_rank(&a, &b, 64).unwrap(), 2);
        let big = SparseHermitianOperator::identity(70);
        assert!(matches!(controllability_rank(&big, &big, 64), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn small_pe_subspace_is_controllable() {
        let model = ReducedModel::build(&ChainSpec::xxz(5, 2, Parity::Even).unwrap()).unwrap();
        assert_eq!(model.dim(), 6);
        let rank = controllability_rank(&model.drift, &model.control, CONTROLLABILITY_CAP).unwrap();
        assert!(rank == 35 || rank == 36, "rank {rank}");
    }
}
