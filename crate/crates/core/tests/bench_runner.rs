use std::collections::BTreeMap;

use kgrape::bench::{
    parse_records, run_plan, write_records, BackendKind, BenchPlan, CellKey, ModelGrid, RunRecord, RunStatus, Study,
};
use kgrape::grape::{exact_infidelity, GradientKind, PropagatorBackend};
use kgrape::optim::{solve_control, OptimizerConfig, SolveSettings};
use kgrape::spinchain::{ChainSpec, Parity, ReducedModel};
use proptest::prelude::*;

fn plan(sites: Vec<usize>, excitations: usize, seeds: Vec<u64>, output: std::path::PathBuf) -> BenchPlan {
    BenchPlan {
        study: Study::WindowSweep,
        models: ModelGrid { sites, excitations: vec![excitations], parity: vec![Parity::Even] },
        backends: vec![BackendKind::Krylov],
        krylov_dims: vec![4],
        dt: vec![0.5],
        m_factor: 4.0,
        gradient: GradientKind::Centered,
        seeds,
        optimizer: OptimizerConfig { max_iterations: 60, ..OptimizerConfig::default() },
        dense_max_iterations: None,
        verify_exact: false,
        output,
        workers: 1,
    }
}

/// Dimension of the even sector by brute-force enumeration of bit strings.
fn enumerated_even_dim(l: usize, k: usize) -> usize {
    let configs: Vec<u64> = (0u64..1 << l).filter(|s| s.count_ones() as usize == k).collect();
    let reverse = |s: u64| (0..l).fold(0u64, |acc, i| acc | (((s >> i) & 1) << (l - 1 - i)));
    let palindromes = configs.iter().filter(|&&s| reverse(s) == s).count();
    let pairs = (configs.len() - palindromes) / 2;
    pairs + palindromes
}

#[test]
fn one_row_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_plan(&plan(vec![6], 3, vec![0, 1, 2], dir.path().join("a.csv"))).unwrap();
    assert_eq!(out.records.len(), 3);
    assert_eq!(out.executed, 3);
    assert_eq!(out.failures, 0);
}

#[test]
fn dimension_sweep_dimensions_match_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_plan(&plan(vec![5, 7, 9], 2, vec![0], dir.path().join("d.csv"))).unwrap();
    let dims: Vec<(usize, usize)> = out.records.iter().map(|r| (r.sites, r.dim)).collect();
    let expected: Vec<(usize, usize)> = [5, 7, 9].iter().map(|&l| (l, enumerated_even_dim(l, 2))).collect();
    assert_eq!(dims, expected);
}

#[test]
fn rows_satisfy_elementary_runtime_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_plan(&plan(vec![6, 7], 3, vec![0, 1], dir.path().join("e.csv"))).unwrap();
    for r in &out.records {
        let derived = r.wall_time_seconds / (r.field_evaluations as f64 * r.slots as f64);
        let stored = r.elementary_runtime.unwrap();
        assert!((stored - derived).abs() <= 1e-12 * derived.abs());
        assert_eq!(r.slots, 4 * r.dim);
    }
}

#[test]
fn verified_rows_record_the_exact_infidelity() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = plan(vec![6], 3, vec![4], dir.path().join("x.csv"));
    p.verify_exact = true;
    let row = run_plan(&p).unwrap().records.remove(0);

    let problem = ReducedModel::build(&ChainSpec::xxz(6, 3, Parity::Even).unwrap()).unwrap().transfer_problem().unwrap();
    let settings = SolveSettings { dt: 0.5, backend: PropagatorBackend::krylov(4), rng_seed: 4, ..SolveSettings::default() };
    let rec = solve_control(&problem, &settings, &p.optimizer).unwrap();
    let exact = exact_infidelity(&problem, &rec.protocol().unwrap()).unwrap();
    assert_eq!(row.final_infidelity, Some(exact));
    assert_ne!(exact, rec.final_infidelity);
}

#[test]
fn verification_beyond_the_dense_cap_fails_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = plan(vec![15], 4, vec![0], dir.path().join("y.csv"));
    p.verify_exact = true;
    p.optimizer.max_iterations = 1;
    let out = run_plan(&p).unwrap();
    assert_eq!(out.failures, 1);
    assert_eq!(out.records[0].status, RunStatus::Failed);
}

fn without_timing(rows: &[RunRecord]) -> BTreeMap<CellKey, RunRecord> {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            r.wall_time_seconds = 0.0;
            r.elementary_runtime = None;
            (r.key(), r)
        })
        .collect()
}

#[test]
fn interrupted_run_resumes_to_the_same_records() {
    let dir = tempfile::tempdir().unwrap();
    let full = run_plan(&plan(vec![6, 7], 3, vec![0, 1, 2], dir.path().join("full.csv"))).unwrap();

    let resumed_path = dir.path().join("resumed.csv");
    let first = run_plan(&plan(vec![6], 3, vec![0, 2], resumed_path.clone())).unwrap();
    assert_eq!(first.executed, 2);
    let second = run_plan(&plan(vec![6, 7], 3, vec![0, 1, 2], resumed_path.clone())).unwrap();
    assert_eq!(second.skipped, 2);
    assert_eq!(second.executed, 4);

    let on_disk = parse_records(std::fs::File::open(&resumed_path).unwrap()).unwrap();
    assert_eq!(without_timing(&on_disk), without_timing(&full.records));
    let again = run_plan(&plan(vec![6, 7], 3, vec![0, 1, 2], resumed_path)).unwrap();
    assert_eq!(again.executed, 0);
}

#[test]
fn parallel_workers_produce_the_same_rows() {
    let dir = tempfile::tempdir().unwrap();
    let serial = run_plan(&plan(vec![6, 7], 3, vec![0, 1], dir.path().join("s.csv"))).unwrap();
    let mut p = plan(vec![6, 7], 3, vec![0, 1], dir.path().join("p.csv"));
    p.workers = 3;
    let parallel = run_plan(&p).unwrap();
    assert_eq!(without_timing(&serial.records), without_timing(&parallel.records));
}

fn arb_record() -> impl Strategy<Value = RunRecord> {
    (
        prop::sample::select(vec![Study::DimensionSweep, Study::TimestepSweep, Study::TruncationSweep, Study::WindowSweep]),
        2usize..40,
        1usize..10,
        prop::bool::ANY,
        1usize..2000,
        prop::sample::select(vec![BackendKind::Krylov, BackendKind::Dense, BackendKind::DenseCached]),
        1usize..30,
        1e-4f64..5.0,
        any::<u64>(),
        (0usize..10_000, 1usize..50_000, 0.0f64..1e4, prop::option::of(0.0f64..1.0)),
        prop::sample::select(vec![RunStatus::TargetReached, RunStatus::Stalled, RunStatus::MaxIter, RunStatus::Failed]),
    )
        .prop_map(|(study, l, k, even, dim, backend, n, dt, seed, (iters, evals, wall, infid), status)| {
            let slots = 4 * dim;
            RunRecord {
                study,
                sites: l,
                excitations: k,
                parity: if even { Parity::Even } else { Parity::Odd },
                dim,
                backend,
                krylov_dim: (backend == BackendKind::Krylov).then_some(n),
                dt,
                slots,
                seed,
                iterations: iters,
                field_evaluations: evals,
                wall_time_seconds: wall,
                elementary_runtime: infid.map(|_| wall / (evals as f64 * slots as f64)),
                final_infidelity: infid,
                status,
            }
        })
}

proptest! {
    #[test]
    fn csv_round_trip(records in prop::collection::vec(arb_record(), 1..20)) {
        let mut buf = Vec::new();
        write_records(&mut buf, &records, true).unwrap();
        let back = parse_records(buf.as_slice()).unwrap();
        prop_assert_eq!(back, records);
    }
}
