//! The optimizer on its own: L-BFGS with a strong-Wolfe line search on the
//! Rosenbrock function.

use kgrape::optim::{lbfgs_minimize, OptimizerConfig};

fn main() -> kgrape::Result<()> {
    let rosenbrock = |x: &[f64]| -> kgrape::Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let value = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let grad = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((value, grad))
    };
    let cfg = OptimizerConfig { target_infidelity: 1e-14, min_objective_change: 0.0, ..OptimizerConfig::default() };
    let rec = lbfgs_minimize(rosenbrock, &[-1.2, 1.0], &cfg)?;
    for (k, v) in rec.trace.iter().enumerate().step_by(5) {
        println!("iter {k:>3}: f = {v:.3e}");
    }
    println!(
        "{} after {} iterations, {} evaluations: x = ({:.8}, {:.8}), f = {:.3e}",
        rec.status.as_str(),
        rec.iterations,
        rec.field_evaluations,
        rec.final_amplitudes[0],
        rec.final_amplitudes[1],
        rec.final_infidelity
    );
    Ok(())
}
