//! Compares every gradient flavour with central finite differences of the
//! exact infidelity as the slot width shrinks.

use kgrape::grape::{
    exact_infidelity, gradient_centered, gradient_exact_dense, gradient_taylor, gradient_zeroth, ControlProblem,
    PropagatorBackend, PwcProtocol,
};
use kgrape::linalg::StateVector;
use kgrape::spinchain::{ChainSpec, Parity, ReducedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn finite_difference(problem: &ControlProblem, protocol: &PwcProtocol, h: f64) -> kgrape::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(protocol.slots());
    for j in 0..protocol.slots() {
        let mut plus = protocol.amplitudes().to_vec();
        let mut minus = plus.clone();
        plus[j] += h;
        minus[j] -= h;
        let fp = exact_infidelity(problem, &protocol.with_amplitudes(plus)?)?;
        let fm = exact_infidelity(problem, &protocol.with_amplitudes(minus)?)?;
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

fn max_error(g: &[f64], reference: &[f64], skip_ends: bool) -> f64 {
    let n = g.len();
    g.iter()
        .zip(reference)
        .enumerate()
        .filter(|(j, _)| !skip_ends || (*j > 0 && *j + 1 < n))
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max)
}

fn main() -> kgrape::Result<()> {
    let model = ReducedModel::build(&ChainSpec::xxz(6, 3, Parity::Even)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let problem = ControlProblem::new(
        model.drift.clone(),
        model.control.clone(),
        StateVector::random(model.dim(), &mut rng),
        StateVector::random(model.dim(), &mut rng),
    )?;
    let amps: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let backend = PropagatorBackend::dense();

    println!("D={} M=12, max |G - FD|", model.dim());
    println!("{:>9} {:>11} {:>11} {:>11} {:>11} {:>11}", "dt", "zeroth", "centered*", "taylor(2)", "taylor(4)", "exact");
    for k in 0..6 {
        let dt = 0.16 / 2f64.powi(k);
        let protocol = PwcProtocol::new(amps.clone(), dt)?;
        let fd = finite_difference(&problem, &protocol, 1e-4)?;
        println!(
            "{dt:>9.4} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
            max_error(&gradient_zeroth(&problem, &protocol, &backend)?, &fd, false),
            max_error(&gradient_centered(&problem, &protocol, &backend)?, &fd, true),
            max_error(&gradient_taylor(&problem, &protocol, &backend, 2)?, &fd, false),
            max_error(&gradient_taylor(&problem, &protocol, &backend, 4)?, &fd, false),
            max_error(&gradient_exact_dense(&problem, &protocol)?, &fd, false),
        );
    }
    println!("* interior slots only");
    Ok(())
}
