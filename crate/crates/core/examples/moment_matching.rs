//! Builds the moment program for a small polynomial and shows the rows that
//! pin pure-noise moments to those of Uniform(-1, 1).

use ssos::extract::extract_moments;
use ssos::poly::simple_quadratic;
use ssos::sdp::RowKind;
use ssos::{
    assemble_dual, lasserre_basis, solve, HardConstraintSet, NoiseDistribution, SolverOptions,
};

fn main() -> ssos::Result<()> {
    let f = simple_quadratic();
    let basis = lasserre_basis(1, 1, 2);
    let dual = assemble_dual(
        &f,
        &basis,
        &NoiseDistribution::uniform(1),
        &HardConstraintSet::new(),
    )?;
    println!(
        "basis of {} entries, {} constraints",
        basis.len(),
        dual.problem.n_constraints()
    );
    for (row, b) in dual.rows.iter().zip(&dual.problem.b) {
        match row {
            RowKind::Normalization => println!("  E[1] = {b}"),
            RowKind::MomentMatch { alpha } => println!("  E[{alpha}] = {b:.6}"),
            _ => {}
        }
    }
    let sol = solve(&dual.problem, &SolverOptions::default())?;
    println!(
        "status {}, objective {:.10}",
        sol.status, sol.objective_primal
    );
    for k in 0..=4u32 {
        let alpha = ssos::MultiIndex::new(vec![0, k]);
        let (i, j) = dual.moment_position(&alpha).expect("moment present");
        println!("  solved E[w^{k}] = {:+.10}", sol.x.blocks[0].get(i, j));
    }
    let m = extract_moments(&sol, &basis)?;
    println!("E[x] = {:+.6}, Var[x] = {:.6}", m.means[0], m.variances[0]);
    Ok(())
}
