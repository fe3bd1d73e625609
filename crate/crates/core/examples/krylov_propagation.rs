//! Krylov propagation error against exact exponentiation, over the step
//! size and the subspace dimension.

use kgrape::krylov::{krylov_step, spectral_width, KrylovStepConfig};
use kgrape::linalg::{expm_apply_dense, StateVector};
use kgrape::spinchain::{ChainSpec, Parity, ReducedModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kgrape::Result<()> {
    let model = ReducedModel::build(&ChainSpec::xxz(10, 3, Parity::Even)?)?;
    let problem = model.transfer_problem()?;
    let h = problem.hamiltonian().at(0.5);
    let dense = problem.hamiltonian().dense_at(0.5);
    let psi = StateVector::random(model.dim(), &mut ChaCha8Rng::seed_from_u64(0));
    let width = spectral_width(&h)?;
    println!("D={} spectral width {width:.3}", model.dim());

    let dims = [2, 4, 6, 8, 10];
    print!("{:>8}", "dt");
    for n in dims {
        print!("{:>12}", format!("N={n}"));
    }
    println!();
    for dt in [1e-3, 1e-2, 0.1, 0.5, 1.0] {
        let exact = expm_apply_dense(&dense, dt, &psi)?;
        print!("{dt:>8}");
        for n in dims {
            let approx = krylov_step(&h, &psi, dt, &KrylovStepConfig::new(n))?;
            print!("{:>12.2e}", approx.sub(&exact)?.norm());
        }
        println!();
    }
    Ok(())
}
