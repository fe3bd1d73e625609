use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kgrape::bench::{read_records, run_plan_with, summarize, BenchPlan, Scale, Study};
use kgrape::grape::{GradientKind, PropagatorBackend};
use kgrape::krylov::Reorthogonalization;
use kgrape::optim::{solve_control, OptimizerConfig, SolveSettings};
use kgrape::spinchain::{ChainSpec, Parity, ReducedModel};
use kgrape::Error;

#[derive(Parser)]
#[command(name = "kgrape", version, about = "State-transfer optimal control on XXZ spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one transfer problem and print the record as JSON.
    Solve {
        #[arg(long, default_value_t = 10)]
        sites: usize,
        #[arg(long, default_value_t = 3)]
        excitations: usize,
        #[arg(long, default_value = "even")]
        parity: Parity,
        /// krylov | dense | dense_cached
        #[arg(long, default_value = "krylov")]
        backend: String,
        #[arg(long, default_value_t = 10)]
        krylov_dim: usize,
        #[arg(long)]
        no_reorthogonalization: bool,
        #[arg(long, default_value_t = 0.5)]
        dt: f64,
        #[arg(long, default_value_t = 4.0)]
        m_factor: f64,
        /// zeroth | centered | taylor:<P> | exact_dense
        #[arg(long, default_value = "centered")]
        gradient: GradientKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-2)]
        target: f64,
        #[arg(long, default_value_t = 5000)]
        max_iterations: usize,
        /// Also report the infidelity under exact propagation.
        #[arg(long)]
        verify_exact: bool,
        /// Include the per-iteration trace and final amplitudes.
        #[arg(long)]
        full: bool,
    },
    /// Run a benchmark plan, appending rows to its CSV.
    Bench {
        /// TOML plan file.
        plan: Option<PathBuf>,
        /// Use a built-in plan instead of a file.
        #[arg(long, conflicts_with = "plan")]
        preset: Option<Study>,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        /// Override the plan's output path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Print the resolved plan as TOML and exit.
        #[arg(long)]
        print_plan: bool,
    },
    /// Aggregate a results CSV into a JSON summary.
    Summarize {
        csv: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the structural invariant suite.
    Check,
}

fn config_error(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Solve {
            sites,
            excitations,
            parity,
            backend,
            krylov_dim,
            no_reorthogonalization,
            dt,
            m_factor,
            gradient,
            seed,
            target,
            max_iterations,
            verify_exact,
            full,
        } => {
            let backend = match backend.as_str() {
                "krylov" => {
                    let mut b = kgrape::krylov::KrylovStepConfig::new(krylov_dim);
                    if no_reorthogonalization {
                        b = b.with_reorthogonalization(Reorthogonalization::None);
                    }
                    PropagatorBackend::Krylov(b)
                }
                "dense" => PropagatorBackend::dense(),
                "dense_cached" => PropagatorBackend::dense_cached(),
                other => return config_error(Error::Config(format!("unknown backend '{other}'"))),
            };
            let run = || -> kgrape::Result<serde_json::Value> {
                let model = ReducedModel::build(&ChainSpec::xxz(sites, excitations, parity)?)?;
                let problem = model.transfer_problem()?;
                let settings = SolveSettings { m_factor, dt, gradient, backend, rng_seed: seed, verify_exact, ..SolveSettings::default() };
                let cfg = OptimizerConfig { target_infidelity: target, max_iterations, ..OptimizerConfig::default() };
                let slots = settings.slot_count(model.dim())?;
                let mut rec = solve_control(&problem, &settings, &cfg)?;
                let elementary = kgrape::optim::elementary_runtime(&rec, slots)?;
                if !full {
                    rec.trace.clear();
                    rec.final_amplitudes.clear();
                }
                let mut value = serde_json::to_value(&rec)?;
                value["D"] = model.dim().into();
                value["M"] = slots.into();
                value["elementary_runtime"] = elementary.into();
                Ok(value)
            };
            match run() {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
                    ExitCode::SUCCESS
                }
                Err(e) => config_error(e),
            }
        }
        Command::Bench { plan, preset, scale, output, print_plan } => {
            let plan = match (plan, preset) {
                (Some(path), _) => BenchPlan::load(&path),
                (None, Some(study)) => Ok(BenchPlan::preset(study, scale)),
                (None, None) => Err(Error::Config("give a plan file or --preset".into())),
            };
            let mut plan = match plan {
                Ok(p) => p,
                Err(e) => return config_error(e),
            };
            if let Some(out) = output {
                plan.output = out;
            }
            if print_plan {
                return match plan.to_toml() {
                    Ok(text) => {
                        print!("{text}");
                        ExitCode::SUCCESS
                    }
                    Err(e) => config_error(e),
                };
            }
            let result = run_plan_with(&plan, |r| {
                eprintln!(
                    "L={} K={} D={} {} N={} dt={} seed={} -> {:?} I={} ({:.2}s)",
                    r.sites,
                    r.excitations,
                    r.dim,
                    r.backend,
                    r.krylov_dim.map_or("-".to_string(), |n| n.to_string()),
                    r.dt,
                    r.seed,
                    r.status,
                    r.final_infidelity.map_or("-".to_string(), |i| format!("{i:.3e}")),
                    r.wall_time_seconds
                );
            });
            match result {
                Ok(outcome) => {
                    eprintln!(
                        "{} cells run, {} already present, {} failed -> {}",
                        outcome.executed,
                        outcome.skipped,
                        outcome.failures,
                        plan.output.display()
                    );
                    if outcome.failures > 0 {
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => config_error(e),
            }
        }
        Command::Summarize { csv, output } => {
            let run = || -> kgrape::Result<String> {
                let summary = summarize(&read_records(&csv)?)?;
                Ok(serde_json::to_string_pretty(&summary)?)
            };
            match run() {
                Ok(text) => match output {
                    Some(path) => match fs::write(&path, text + "\n") {
                        Ok(()) => ExitCode::SUCCESS,
                        Err(e) => config_error(e.into()),
                    },
                    None => {
                        println!("{text}");
                        ExitCode::SUCCESS
                    }
                },
                Err(e) => config_error(e),
            }
        }
        Command::Check => match kgrape::check::run_all() {
            Ok(outcomes) => {
                let mut ok = true;
                for o in &outcomes {
                    println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
                    ok &= o.passed;
                }
                if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => config_error(e),
        },
    }
}
