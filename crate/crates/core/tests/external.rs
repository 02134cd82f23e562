use std::os::unix::fs::PermissionsExt;

use ssos::basis::lasserre_basis;
use ssos::noise::NoiseDistribution;
use ssos::poly::simple_quadratic;
use ssos::sdp::{assemble_dual, HardConstraintSet, SdpProblem, SparseSym};
use ssos::solver::{solve, ExternalSolver, SdpSolver, SolveStatus, SolverOptions};

/// `min x` subject to `x = 1` on a 1x1 block.
fn unit_problem() -> SdpProblem {
    let mut p = SdpProblem::new(vec![1]);
    p.c.add(0, 0, 0, 1.0);
    let mut a = SparseSym::new();
    a.add(0, 0, 0, 1.0);
    p.push_constraint(a, 1.0);
    p
}

#[test]
fn file_protocol_round_trip_with_a_stub_solver() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("stub-solver");
    // checks it was handed an SDPA file, then writes the known optimum
    std::fs::write(
        &script,
        "#!/bin/sh\ngrep -q '^1 *$' \"$1\" || exit 3\nprintf -- '-1\\n2 1 1 1 1\\n' > \"$2\"\n",
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();

    let solver = ExternalSolver::new(script.to_str().unwrap());
    let s = solver
        .solve(&unit_problem(), &SolverOptions::default())
        .unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    assert_eq!(s.y, vec![1.0]);
    assert_eq!(s.objective_primal, 1.0);
}

#[test]
fn csdp_agrees_with_the_built_in_solver() {
    let Some(csdp) = ExternalSolver::find("csdp") else {
        eprintln!("csdp not on PATH; skipping");
        return;
    };
    let basis = lasserre_basis(1, 1, 2);
    let dual = assemble_dual(
        &simple_quadratic(),
        &basis,
        &NoiseDistribution::uniform(1),
        &HardConstraintSet::new(),
    )
    .unwrap();
    let opts = SolverOptions::default();
    let ours = solve(&dual.problem, &opts).unwrap();
    let theirs = csdp.solve(&dual.problem, &opts).unwrap();
    assert_eq!(theirs.status, SolveStatus::Optimal);
    assert!((ours.objective_primal - theirs.objective_primal).abs() < 1e-6);
}
