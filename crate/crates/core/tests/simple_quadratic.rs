use ssos::basis::lasserre_basis;
use ssos::extract::{convergence_study, gaps_non_increasing};
use ssos::noise::NoiseDistribution;
use ssos::poly::simple_quadratic;
use ssos::sdp::{assemble_dual, assemble_primal, HardConstraintSet};
use ssos::solver::{kkt_residuals, solve, SolveStatus, SolverOptions};

const P_STAR: f64 = std::f64::consts::FRAC_PI_4 - 2.0 / 3.0;

#[test]
fn dual_and_primal_agree_across_degrees() {
    let f = simple_quadratic();
    let dist = NoiseDistribution::uniform(1);
    let opts = SolverOptions::default();
    for s in 2..=5u32 {
        let basis = lasserre_basis(1, 1, s);
        let dual = assemble_dual(&f, &basis, &dist, &HardConstraintSet::new()).unwrap();
        let ds = solve(&dual.problem, &opts).unwrap();
        let primal = assemble_primal(&f, &basis, 2 * s, &dist).unwrap();
        let ps = solve(&primal.problem, &opts).unwrap();
        let bound = primal.bound_from_objective(ps.objective_primal);
        assert_eq!(ds.status, SolveStatus::Optimal, "dual at s = {s}");
        assert_eq!(ps.status, SolveStatus::Optimal, "primal at s = {s}");
        assert!(kkt_residuals(&dual.problem, &ds).max() < 1e-6);
        assert!(kkt_residuals(&primal.problem, &ps).max() < 1e-6);
        assert!((ds.objective_primal - bound).abs() < 1e-6);
        assert!(
            bound <= P_STAR + 1e-7,
            "bound {bound} above the true value at s = {s}"
        );
    }
}

#[test]
fn convergence_rows_shrink_and_bound_from_below() {
    let rows = convergence_study(
        &simple_quadratic(),
        &NoiseDistribution::uniform(1),
        &[2, 3, 4],
        P_STAR,
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert!(gaps_non_increasing(&rows, 1e-7));
    for r in &rows {
        assert!(r.gap >= -1e-7);
        assert!((r.dual_value - r.p_star_2s).abs() < 1e-6);
        // E_w[c(w)] must equal the reported bound
        let q = ssos::gauss_legendre(30).unwrap();
        let mean: f64 = q
            .nodes
            .iter()
            .zip(&q.weights)
            .map(|(w, wt)| 0.5 * wt * r.lower_bound.evaluate(&[*w]).unwrap())
            .sum();
        assert!((mean - r.p_star_2s).abs() < 1e-6, "s = {}", r.s);
    }
}
