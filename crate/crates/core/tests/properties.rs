use proptest::prelude::*;

use ssos::basis::{binomial, lasserre_basis, product_index_table};
use ssos::sdp::{SdpProblem, SparseSym};
use ssos::solver::{kkt_residuals, solve, SolveStatus, SolverOptions};
use ssos::{MultiIndex, Polynomial};

const N_X: usize = 2;
const N_W: usize = 1;

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(
        (-3.0f64..3.0, prop::collection::vec(0u32..3, N_X + N_W)),
        0..6,
    )
    .prop_map(|terms| Polynomial::from_terms(N_X, N_W, terms).unwrap())
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, N_X + N_W)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn ring_operations_commute_with_evaluation(p in poly(), q in poly(), z in point()) {
        let (pv, qv) = (p.evaluate(&z).unwrap(), q.evaluate(&z).unwrap());
        prop_assert!(close(p.try_add(&q).unwrap().evaluate(&z).unwrap(), pv + qv));
        prop_assert!(close(p.try_sub(&q).unwrap().evaluate(&z).unwrap(), pv - qv));
        prop_assert!(close(p.multiply(&q).unwrap().evaluate(&z).unwrap(), pv * qv));
        let diff = p.multiply(&q).unwrap().try_sub(&q.multiply(&p).unwrap()).unwrap();
        prop_assert!(diff.terms().all(|(_, c)| c.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_central_differences(p in poly(), z in point()) {
        let h = 1e-5;
        for (k, g) in p.gradient_x().iter().enumerate() {
            let mut up = z.clone();
            let mut down = z.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (p.evaluate(&up).unwrap() - p.evaluate(&down).unwrap()) / (2.0 * h);
            prop_assert!((g.evaluate(&z).unwrap() - fd).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn text_form_round_trips(p in poly()) {
        prop_assert_eq!(Polynomial::from_text(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn lasserre_basis_size_is_binomial(n_x in 1usize..4, n_w in 0usize..3, s in 0u32..4) {
        let basis = lasserre_basis(n_x, n_w, s);
        let n = (n_x + n_w) as u64;
        prop_assert_eq!(basis.len() as u64, binomial(n + s as u64, s as u64));
        prop_assert!(basis.entries().iter().all(|a| a.degree() <= s));
    }

    #[test]
    fn product_table_is_symmetric_and_exact(n_x in 1usize..3, s in 1u32..3) {
        let basis = lasserre_basis(n_x, 1, s);
        let table = product_index_table(&basis);
        let e = basis.entries();
        let mut count = 0;
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                prop_assert_eq!(table.get(i, j), table.get(j, i));
                let sum: Vec<u32> = e[i].exponents().iter().zip(e[j].exponents()).map(|(a, b)| a + b).collect();
                prop_assert_eq!(table.get(i, j), &MultiIndex::new(sum));
            }
        }
        for positions in table.groups().values() {
            count += positions.len();
        }
        // groups hold the upper triangle exactly once
        prop_assert_eq!(count, basis.len() * (basis.len() + 1) / 2);
        let total = (n_x + 1) as u64;
        prop_assert_eq!(table.n_distinct() as u64, binomial(total + 2 * s as u64, 2 * s as u64));
    }
}

/// `min <C, X>` over `tr X = 1` plus random linear rows satisfied by a
/// known interior point, so the problem is feasible with a strict interior.
fn random_sdp(n: usize, m: usize, seeds: &[f64]) -> SdpProblem {
    let mut next = seeds.iter().copied();
    let mut p = SdpProblem::new(vec![n as i64, -2]);
    for i in 0..n {
        for j in i..n {
            p.c.add(0, i, j, next.next().unwrap());
        }
        p.c.add(0, i, i, 2.0);
    }
    p.c.add(1, 0, 0, 1.0);
    p.c.add(1, 1, 1, 0.5);
    let mut trace = SparseSym::new();
    for i in 0..n {
        trace.add(0, i, i, 1.0);
    }
    trace.add(1, 0, 0, 1.0);
    trace.add(1, 1, 1, 1.0);
    p.push_constraint(trace, 1.0);
    // the interior point X0 = I / (n + 2) on both blocks fixes the right-hand sides
    let x0 = 1.0 / (n + 2) as f64;
    for _ in 0..m {
        let mut a = SparseSym::new();
        // off-diagonal entries vanish on X0
        for i in 0..n {
            a.add(0, i, (i + 1) % n, next.next().unwrap());
        }
        let d = next.next().unwrap();
        a.add(1, 1, 1, d);
        p.push_constraint(a, d * x0);
    }
    p.canonicalize();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interior_point_solves_random_feasible_programs(
        n in 2usize..6,
        m in 0usize..4,
        seeds in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let p = random_sdp(n, m, &seeds);
        p.validate().unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        prop_assert_eq!(s.status, SolveStatus::Optimal);
        prop_assert!(kkt_residuals(&p, &s).max() <= 1e-6);
        prop_assert!(s.x.min_eigenvalue() >= -1e-9);
        prop_assert!(s.z.min_eigenvalue() >= -1e-9);
    }
}
