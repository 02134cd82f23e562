//! Writes a moment program in SDPA sparse format, reads it back, and solves
//! both copies.

use ssos::poly::simple_quadratic;
use ssos::sdp::{export_sdpa, import_sdpa};
use ssos::{
    assemble_dual, lasserre_basis, solve, HardConstraintSet, NoiseDistribution, SolverOptions,
};

fn main() -> ssos::Result<()> {
    let dual = assemble_dual(
        &simple_quadratic(),
        &lasserre_basis(1, 1, 2),
        &NoiseDistribution::uniform(1),
        &HardConstraintSet::new(),
    )?;
    let text = export_sdpa(&dual.problem);
    println!("{} lines of SDPA, first four:", text.lines().count());
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    let back = import_sdpa(&text)?;
    assert_eq!(export_sdpa(&back), text, "re-export is byte-identical");
    let opts = SolverOptions::default();
    let a = solve(&dual.problem, &opts)?;
    let b = solve(&back, &opts)?;
    println!(
        "objective {:.10} / re-read {:.10}",
        a.objective_primal, b.objective_primal
    );
    if let Some(csdp) = ssos::solver::ExternalSolver::find("csdp") {
        use ssos::solver::SdpSolver;
        let c = csdp.solve(&back, &opts)?;
        println!("csdp: {} {:.10}", c.status, c.objective_primal);
    }
    Ok(())
}
