//! Structural invariants on small models, runnable as a self-check.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grape::{propagate, PropagatorBackend, PwcProtocol};
use crate::krylov::{lanczos, KrylovStepConfig};
use crate::linalg::{dense_hermiticity_error, eigh, StateVector};
use crate::spinchain::{
    build_control, build_drift, controllability_rank, full_space, mirror, palindrome_count, ChainSpec, Parity,
    ParityProjector, ReducedModel, SubspaceBasis, CONTROLLABILITY_CAP,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const COMMUTATOR_TOL: f64 = 1e-12;
pub const SPECTRUM_TOL: f64 = 1e-10;
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-10;

pub fn hermiticity() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for l in 2..=10 {
        let spec = ChainSpec::xxz(l, 1, Parity::Even)?;
        worst = worst.max(dense_hermiticity_error(&full_space::drift(&spec).map(Into::into)));
        for k in 1..l {
            let spec = ChainSpec::xxz(l, k, Parity::Even)?;
            worst = worst.max(build_drift(&spec)?.hermiticity_error());
            worst = worst.max(build_control(&spec)?.hermiticity_error());
        }
    }
    for spec in [ChainSpec::xxz(10, 3, Parity::Even)?, ChainSpec::xxz(13, 3, Parity::Even)?] {
        let model = ReducedModel::build(&spec)?;
        worst = worst.max(model.drift.hermiticity_error()).max(model.control.hermiticity_error());
    }
    Ok(CheckOutcome::new("hermiticity", worst <= HERMITICITY_TOL, format!("max deviation {worst:.2e}")))
}

/// `[H, Σσᶻ] = [H, Π] = 0` for drift and control on the full space.
pub fn symmetry_commutators() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for l in 2..=10 {
        let spec = ChainSpec::xxz(l, 1, Parity::Even)?;
        let sz = full_space::total_magnetization(l);
        let perm = full_space::mirror_permutation(l);
        for h in [full_space::drift(&spec), full_space::control(&spec)] {
            worst = worst.max(full_space::magnetization_commutator(&h, &sz));
            worst = worst.max(full_space::mirror_commutator(&h, &perm));
        }
    }
    Ok(CheckOutcome::new(
        "symmetry commutators (L <= 10)",
        worst <= COMMUTATOR_TOL,
        format!("max commutator entry {worst:.2e}"),
    ))
}

/// Even and odd sectors together carry the spectrum of the excitation block.
pub fn spectrum_preservation() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for (l, k) in [(8, 3), (7, 2), (9, 4)] {
        let spec = ChainSpec::xxz(l, k, Parity::Even)?;
        let full = eigh(&build_drift(&spec)?.to_dense())?.eigenvalues;
        let mut parts = Vec::new();
        for parity in [Parity::Even, Parity::Odd] {
            let model = ReducedModel::build(&ChainSpec::xxz(l, k, parity)?)?;
            parts.extend(eigh(&model.drift.to_dense())?.eigenvalues);
        }
        parts.sort_by(f64::total_cmp);
        if parts.len() != full.len() {
            return Ok(CheckOutcome::new("spectrum preservation", false, format!("L={l} K={k}: sector sizes disagree")));
        }
        for (a, b) in parts.iter().zip(&full) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(CheckOutcome::new("spectrum preservation", worst <= SPECTRUM_TOL, format!("max eigenvalue shift {worst:.2e}")))
}

pub fn lanczos_orthonormality() -> Result<CheckOutcome> {
    let model = ReducedModel::build(&ChainSpec::xxz(13, 3, Parity::Even)?)?;
    let start = StateVector::random(model.dim(), &mut ChaCha8Rng::seed_from_u64(7));
    let mut worst: f64 = 0.0;
    for n in [10, 20, 30] {
        let f = lanczos(&model.drift, &start, &KrylovStepConfig::new(n))?;
        worst = worst.max(f.orthonormality_error());
    }
    Ok(CheckOutcome::new(
        "Lanczos orthonormality (full reorthogonalization)",
        worst <= ORTHONORMALITY_TOL,
        format!("max |VᴴV − I| entry {worst:.2e} at D={}", model.dim()),
    ))
}

pub fn trajectory_norms() -> Result<CheckOutcome> {
    let model = ReducedModel::build(&ChainSpec::xxz(10, 3, Parity::Even)?)?;
    let problem = model.transfer_problem()?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = 4 * model.dim();
    let amps = (0..m).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
    let protocol = PwcProtocol::new(amps, 0.5)?;
    let mut worst: f64 = 0.0;
    for backend in [PropagatorBackend::krylov(10), PropagatorBackend::dense()] {
        let cache = propagate(&problem, &protocol, &backend)?;
        let beta = cache.overlap.norm();
        for psi in &cache.forward {
            worst = worst.max((psi.norm() - 1.0).abs());
        }
        if beta > 0.0 {
            for chi in &cache.backward {
                worst = worst.max((chi.norm() / beta - 1.0).abs());
            }
        }
    }
    Ok(CheckOutcome::new("trajectory norm conservation", worst <= NORM_TOL, format!("max norm drift {worst:.2e}")))
}

/// `C(L, K)` and `(C(L, K) ± P)/2` against explicit enumeration.
pub fn dimension_formulas() -> Result<CheckOutcome> {
    let mut mismatches = Vec::new();
    for l in 2..=12 {
        for k in 1..l {
            let basis = SubspaceBasis::new(l, k)?;
            let enumerated = (0u64..1 << l).filter(|s| s.count_ones() as usize == k).count();
            let pal = basis.configs.iter().filter(|&&s| mirror(s, l) == s).count();
            let even = ParityProjector::new(l, k, Parity::Even)?.dim();
            let odd = ParityProjector::new(l, k, Parity::Odd)?.dim();
            let spec = ChainSpec::xxz(l, k, Parity::Even)?;
            let odd_spec = ChainSpec::xxz(l, k, Parity::Odd)?;
            if enumerated != spec.excitation_dim()
                || pal != palindrome_count(l, k)
                || even != spec.pe_dim()
                || odd != odd_spec.pe_dim()
            {
                mismatches.push(format!("L={l} K={k}"));
            }
        }
    }
    Ok(CheckOutcome::new(
        "dimension formulas",
        mismatches.is_empty(),
        if mismatches.is_empty() { "all (L, K) with L <= 12 agree".into() } else { mismatches.join(", ") },
    ))
}

pub fn controllability() -> Result<CheckOutcome> {
    let model = ReducedModel::build(&ChainSpec::xxz(5, 2, Parity::Even)?)?;
    let d = model.dim();
    let rank = controllability_rank(&model.drift, &model.control, CONTROLLABILITY_CAP)?;
    Ok(CheckOutcome::new(
        "controllability (L=5, K=2, even)",
        rank == d * d || rank + 1 == d * d,
        format!("Lie rank {rank} at D={d}"),
    ))
}

/// Runs every check in order.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        hermiticity()?,
        symmetry_commutators()?,
        spectrum_preservation()?,
        lanczos_orthonormality()?,
        trajectory_norms()?,
        dimension_formulas()?,
        controllability()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for outcome in run_all().unwrap() {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }
}
