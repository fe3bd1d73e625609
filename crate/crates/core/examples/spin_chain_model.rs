//! Builds XXZ chain models, prints sector dimensions and sparsity, and
//! checks controllability of a small sector.

use kgrape::spinchain::{
    controllability_rank, palindrome_count, render_config, ChainSpec, Parity, ReducedModel, CONTROLLABILITY_CAP,
};

fn main() -> kgrape::Result<()> {
    println!("{:>3} {:>3} {:>6} {:>5} {:>6} {:>6} {:>8}", "L", "K", "D_K", "P", "even", "odd", "nnz(H)");
    for (l, k) in [(5, 2), (6, 3), (7, 3), (9, 3), (10, 3), (13, 3), (12, 4)] {
        let even = ChainSpec::xxz(l, k, Parity::Even)?;
        let odd = ChainSpec::xxz(l, k, Parity::Odd)?;
        let model = ReducedModel::build(&even)?;
        println!(
            "{l:>3} {k:>3} {:>6} {:>5} {:>6} {:>6} {:>8}",
            even.excitation_dim(),
            palindrome_count(l, k),
            even.pe_dim(),
            odd.pe_dim(),
            model.drift.nnz()
        );
    }

    let model = ReducedModel::build(&ChainSpec::xxz(5, 2, Parity::Even)?)?;
    let d = model.dim();
    let proj = &model.projector;
    let describe = |row: &[(usize, f64)]| -> String {
        row.iter()
            .map(|&(s, w)| format!("{w:+.3}|{}>", render_config(proj.basis.configs[s], 5)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("\nL=5 K=2 even sector, D={d}");
    println!("initial e_1 = {}", describe(&proj.rows[0]));
    println!("target  e_D = {}", describe(&proj.rows[d - 1]));
    let rank = controllability_rank(&model.drift, &model.control, CONTROLLABILITY_CAP)?;
    println!("dynamical Lie algebra dimension {rank} (D^2 = {})", d * d);
    Ok(())
}
