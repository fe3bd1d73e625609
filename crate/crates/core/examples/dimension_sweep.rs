//! Small dimension sweep through the benchmark runner: Krylov against the
//! dense baseline, written to CSV and summarized.
//!
//! Usage: `cargo run --release --example dimension_sweep -- [output.csv]`

use std::path::PathBuf;

use kgrape::bench::{run_plan_with, summarize, BackendKind, BenchPlan, Scale, Study};

fn main() -> kgrape::Result<()> {
    let mut plan = BenchPlan::preset(Study::DimensionSweep, Scale::Desk);
    plan.models.sites = vec![7, 8, 9, 10];
    plan.seeds = vec![0, 1];
    plan.backends = vec![BackendKind::Krylov, BackendKind::Dense];
    plan.dense_max_iterations = Some(5);
    plan.output = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("kgrape_dimension_sweep.csv"));
    let _ = std::fs::remove_file(&plan.output);

    let outcome = run_plan_with(&plan, |r| {
        println!(
            "D={:>3} {:<6} seed={} evals={:>4} wall={:.3}s I={:.2e}",
            r.dim,
            r.backend.as_str(),
            r.seed,
            r.field_evaluations,
            r.wall_time_seconds,
            r.final_infidelity.unwrap_or(f64::NAN)
        );
    })?;
    let summary = summarize(&outcome.records)?;
    println!("\nmean time per evaluation and slot:");
    for g in &summary.groups {
        println!("  {:<6} D={:>3}: {:.3e} s", g.backend.as_str(), g.dim, g.mean_elementary_runtime.unwrap_or(f64::NAN));
    }
    for fit in &summary.runtime_scaling {
        println!("{} total runtime ~ D^{:.2}", fit.backend.as_str(), fit.slope);
    }
    println!("rows in {}", plan.output.display());
    Ok(())
}
