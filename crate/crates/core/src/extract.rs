//! Reading answers out of solved programs: moments of the minimizing
//! distribution, the lower-bounding function `c(w)`, convergence tables and
//! accuracy metrics.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{lasserre_basis, MonomialBasis};
use crate::error::{Result, SsosError};
use crate::noise::NoiseDistribution;
use crate::poly::{MultiIndex, Polynomial};
use crate::sdp::{assemble_dual, assemble_primal, HardConstraintSet, PrimalSdp};
use crate::solver::{solve, Block, SdpSolution, SolveStatus, SolverOptions};

/// First and second moments of the decision variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub means: Vec<f64>,
    /// Diagonal of the covariance, clamped at zero.
    pub variances: Vec<f64>,
    /// `E[x_i^2]`.
    pub second_moments: Vec<f64>,
    /// Full covariance `E[x_i x_j] - E[x_i] E[x_j]` (unclamped).
    pub covariance: Vec<Vec<f64>>,
}

fn moment_block(sol: &SdpSolution) -> Result<nalgebra::DMatrix<f64>> {
    match sol.x.blocks.first() {
        Some(Block::Dense(m)) => Ok(m.clone()),
        _ => Err(SsosError::Extraction(
            "solution has no moment matrix block".into(),
        )),
    }
}

/// Means and covariance from the first row and the `x`-by-`x` block of the
/// moment matrix. Needs every `x_i` in the basis.
pub fn extract_moments(sol: &SdpSolution, basis: &MonomialBasis) -> Result<MomentSummary> {
    if sol.status == SolveStatus::InfeasibleSuspect {
        return Err(SsosError::Extraction("solve reported infeasibility".into()));
    }
    let m = moment_block(sol)?;
    if m.nrows() != basis.len() {
        return Err(SsosError::Extraction(format!(
            "moment matrix of size {} for a basis of {}",
            m.nrows(),
            basis.len()
        )));
    }
    let n = basis.n_x() + basis.n_w();
    let idx: Vec<usize> = (0..basis.n_x())
        .map(|k| {
            basis
                .position(&MultiIndex::unit(n, k, 1))
                .ok_or_else(|| SsosError::Extraction(format!("basis lacks the monomial x{k}")))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = idx.iter().map(|&i| m[(0, i)]).collect();
    let second_moments: Vec<f64> = (0..basis.n_x())
        .map(|k| match basis.position(&MultiIndex::unit(n, k, 2)) {
            Some(j) => m[(0, j)],
            None => m[(idx[k], idx[k])],
        })
        .collect();
    let variances = second_moments
        .iter()
        .zip(&means)
        .map(|(s, mu)| (s - mu * mu).max(0.0))
        .collect();
    let covariance = idx
        .iter()
        .zip(&means)
        .map(|(&i, mi)| {
            idx.iter()
                .zip(&means)
                .map(|(&j, mj)| m[(i, j)] - mi * mj)
                .collect()
        })
        .collect();
    Ok(MomentSummary {
        means,
        variances,
        second_moments,
        covariance,
    })
}

/// A lower bound `c(w)` on `min_x f(x, w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LowerBoundFn {
    /// Polynomial over the noise variables only (`n_x = 0`).
    Polynomial(Polynomial),
    /// Step function on a strictly increasing grid: `values[i]` holds on
    /// `[grid[i], grid[i+1])`, and the last value at the right endpoint.
    Piecewise { grid: Vec<f64>, values: Vec<f64> },
}

impl LowerBoundFn {
    pub fn evaluate(&self, omega: &[f64]) -> Result<f64> {
        match self {
            LowerBoundFn::Polynomial(c) => c.evaluate(omega),
            LowerBoundFn::Piecewise { grid, values } => {
                if omega.len() != 1 {
                    return Err(SsosError::Dimension(
                        "piecewise bounds take a single noise value".into(),
                    ));
                }
                let w = omega[0];
                let (lo, hi) = (grid[0], grid[grid.len() - 1]);
                if !(lo..=hi).contains(&w) {
                    return Err(SsosError::Parameter(format!("{w} outside [{lo}, {hi}]")));
                }
                let i = grid.partition_point(|g| *g <= w).saturating_sub(1);
                Ok(values[i.min(values.len() - 1)])
            }
        }
    }

    /// `(omega, c(omega))` samples on `k` equally spaced points of `[lo, hi]`.
    pub fn sample(&self, lo: f64, hi: f64, k: usize) -> Result<Vec<(f64, f64)>> {
        linspace(lo, hi, k)
            .into_iter()
            .map(|w| Ok((w, self.evaluate(&[w])?)))
            .collect()
    }
}

pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..k)
            .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
            .collect(),
    }
}

/// `c_a = f_a - <A_a, W>` for every eliminated coefficient.
pub fn extract_lower_bound(sol: &SdpSolution, primal: &PrimalSdp) -> Result<LowerBoundFn> {
    if !sol.is_optimal() {
        return Err(SsosError::Extraction(format!(
            "lower bound needs an optimal solve, status was {}",
            sol.status
        )));
    }
    let n_w = primal.basis.n_w();
    let mut c = Polynomial::zero(0, n_w);
    for row in &primal.c_rows {
        let v = row.f_coeff - sol.x.inner_sparse(&row.gram);
        c.add_term(MultiIndex::new(row.omega_alpha.clone()), v);
    }
    Ok(LowerBoundFn::Polynomial(c))
}

/// Tightest constant lower bound of `g(x)` from a degree-`s` SOS certificate.
fn sos_constant_bound(g: &Polynomial, s: u32, opts: &SolverOptions) -> Result<f64> {
    let basis = lasserre_basis(g.n_x(), 0, s);
    let primal = assemble_primal(g, &basis, 0, &NoiseDistribution::uniform(0))?;
    let sol = solve(&primal.problem, opts)?;
    if !sol.is_optimal() {
        return Err(SsosError::Solver(format!("status {}", sol.status)));
    }
    Ok(primal.bound_from_objective(sol.objective_primal))
}

/// Step-function bound: at each of `s_p` equally spaced noise values the
/// noise is fixed and a plain SOS bound in `x` is computed.
pub fn piecewise_lower_bound(
    f: &Polynomial,
    interval: (f64, f64),
    s_p: usize,
    s: u32,
    opts: &SolverOptions,
) -> Result<LowerBoundFn> {
    if f.n_w() != 1 {
        return Err(SsosError::Dimension(format!(
            "piecewise bounds need exactly one noise variable, found {}",
            f.n_w()
        )));
    }
    if s_p < 2 || interval.0.partial_cmp(&interval.1) != Some(std::cmp::Ordering::Less) {
        return Err(SsosError::Parameter(
            "need at least two grid points on a non-empty interval".into(),
        ));
    }
    let grid = linspace(interval.0, interval.1, s_p);
    let values = grid
        .par_iter()
        .map(|&w| {
            let g = f.fix_noise(&[w])?;
            sos_constant_bound(&g, s, opts).map_err(|e| {
                SsosError::Solver(format!("pointwise bound at omega = {w} failed: {e}"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LowerBoundFn::Piecewise { grid, values })
}

/// `sqrt(sum_i (t_i - m_i)^2 / max(v_i, 1e-10))`, the Mahalanobis distance
/// under a diagonal covariance.
pub fn mahalanobis(truth: &[f64], means: &[f64], variances: &[f64]) -> Result<f64> {
    if truth.len() != means.len() || truth.len() != variances.len() {
        return Err(SsosError::Dimension(format!(
            "lengths {}, {}, {} differ",
            truth.len(),
            means.len(),
            variances.len()
        )));
    }
    const FLOOR: f64 = 1e-10;
    Ok(truth
        .iter()
        .zip(means)
        .zip(variances)
        .map(|((t, m), v)| (t - m).powi(2) / v.max(FLOOR))
        .sum::<f64>()
        .sqrt())
}

/// `E_nu[c*(w)]` for a scalar uniform noise, by Gauss-Legendre quadrature.
pub fn reference_value(c_star: impl Fn(f64) -> f64, nodes: usize) -> Result<f64> {
    Ok(crate::noise::gauss_legendre(nodes)?.uniform_mean(c_star))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub s: u32,
    /// Lower bound from the Gram-form program.
    pub p_star_2s: f64,
    /// Objective of the moment-form program.
    pub dual_value: f64,
    /// `p* - p*_2s`.
    pub gap: f64,
    pub lower_bound: Polynomial,
}

/// Solves both programs at each level `s` and reports the gap to `p_star`.
/// `c(w)` is allowed the full degree `2s`.
pub fn convergence_study(
    f: &Polynomial,
    dist: &NoiseDistribution,
    degrees: &[u32],
    p_star: f64,
    opts: &SolverOptions,
) -> Result<Vec<ConvergenceRow>> {
    degrees
        .iter()
        .map(|&s| {
            let basis = lasserre_basis(f.n_x(), f.n_w(), s);
            let primal = assemble_primal(f, &basis, 2 * s, dist)?;
            let ps = solve(&primal.problem, opts)?;
            let lower_bound = match extract_lower_bound(&ps, &primal)? {
                LowerBoundFn::Polynomial(c) => c,
                LowerBoundFn::Piecewise { .. } => unreachable!(),
            };
            let dual = assemble_dual(f, &basis, dist, &HardConstraintSet::new())?;
            let ds = solve(&dual.problem, opts)?;
            if !ds.is_optimal() {
                return Err(SsosError::Solver(format!(
                    "moment program at s = {s} ended with status {}",
                    ds.status
                )));
            }
            let p = primal.bound_from_objective(ps.objective_primal);
            Ok(ConvergenceRow {
                s,
                p_star_2s: p,
                dual_value: ds.objective_primal,
                gap: p_star - p,
                lower_bound,
            })
        })
        .collect()
}

/// True when gaps never grow by more than `slack` from one row to the next.
pub fn gaps_non_increasing(rows: &[ConvergenceRow], slack: f64) -> bool {
    rows.windows(2).all(|w| w[1].gap <= w[0].gap + slack)
}

/// Linear-interpolation percentile, `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        1 => v[0],
        n => {
            let pos = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

/// Half the spread between the 16th and 84th percentiles, a robust stand-in
/// for one standard deviation.
pub fn sigma34(values: &[f64]) -> f64 {
    0.5 * (percentile(values, 84.0) - percentile(values, 16.0))
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("s,p_star_2s,gap\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.12e},{:.12e}", r.s, r.p_star_2s, r.gap);
    }
    out
}

pub fn lower_bound_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("omega,c_lower\n");
    for (w, c) in samples {
        let _ = writeln!(out, "{w:.6},{c:.12e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::simple_quadratic;

    const P_STAR: f64 = std::f64::consts::FRAC_PI_4 - 2.0 / 3.0;

    fn c_star(w: f64) -> f64 {
        w.powi(4) / (1.0 + w * w)
    }

    #[test]
    fn mahalanobis_examples() {
        assert_eq!(
            mahalanobis(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0]).unwrap(),
            0.0
        );
        assert!((mahalanobis(&[1.0, 0.0], &[0.0, 0.0], &[4.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((mahalanobis(&[0.3], &[0.0], &[0.09]).unwrap() - 1.0).abs() < 1e-12);
        assert!(mahalanobis(&[0.0], &[0.0, 1.0], &[1.0]).is_err());
        // zero variance is floored rather than dividing by zero
        assert!((mahalanobis(&[1e-5], &[0.0], &[0.0]).unwrap() - 1e-5 / 1e-5).abs() < 1e-9);
    }

    #[test]
    fn robust_statistics() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(median(&v), 50.0);
        assert!((sigma34(&v) - 34.0).abs() < 1e-12);
        assert_eq!(percentile(&[3.0, 1.0], 50.0), 2.0);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn piecewise_evaluation() {
        let lb = LowerBoundFn::Piecewise {
            grid: vec![-1.0, 0.0, 1.0],
            values: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(lb.evaluate(&[-0.5]).unwrap(), 1.0);
        assert_eq!(lb.evaluate(&[0.0]).unwrap(), 2.0);
        assert_eq!(lb.evaluate(&[1.0]).unwrap(), 3.0);
        assert!(lb.evaluate(&[1.5]).is_err());
    }

    #[test]
    fn lower_bound_is_below_analytic_and_integrates_to_objective() {
        let f = simple_quadratic();
        let dist = NoiseDistribution::uniform(1);
        let basis = lasserre_basis(1, 1, 2);
        let primal = assemble_primal(&f, &basis, 4, &dist).unwrap();
        let sol = solve(&primal.problem, &SolverOptions::default()).unwrap();
        let lb = extract_lower_bound(&sol, &primal).unwrap();
        let LowerBoundFn::Polynomial(c) = &lb else {
            panic!()
        };
        for w in linspace(-1.0, 1.0, 1001) {
            assert!(c.evaluate(&[w]).unwrap() <= c_star(w) + 1e-6);
        }
        let integral = crate::noise::expected_value(c, &dist).unwrap();
        assert!((integral - primal.bound_from_objective(sol.objective_primal)).abs() < 1e-8);
    }

    #[test]
    fn x_only_function_has_zero_bound() {
        let f = Polynomial::from_terms(1, 1, [(1.0, vec![2, 0])]).unwrap();
        let basis = lasserre_basis(1, 1, 1);
        let primal = assemble_primal(&f, &basis, 2, &NoiseDistribution::uniform(1)).unwrap();
        let sol = solve(&primal.problem, &SolverOptions::default()).unwrap();
        let LowerBoundFn::Polynomial(c) = extract_lower_bound(&sol, &primal).unwrap() else {
            panic!()
        };
        for (_, v) in c.terms() {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn moments_of_simple_quadratic() {
        let f = simple_quadratic();
        let basis = lasserre_basis(1, 1, 2);
        let dual = assemble_dual(
            &f,
            &basis,
            &NoiseDistribution::uniform(1),
            &HardConstraintSet::new(),
        )
        .unwrap();
        let sol = solve(&dual.problem, &SolverOptions::default()).unwrap();
        let m = extract_moments(&sol, &basis).unwrap();
        assert!(m.means[0].abs() < 1e-4);
        assert!(m.variances[0] >= 0.0);
        assert_eq!(m.covariance.len(), 1);
    }

    #[test]
    fn hard_pin_is_exact() {
        let f = simple_quadratic();
        let basis = lasserre_basis(1, 1, 2);
        let hard = HardConstraintSet::from_pins([(0, 0.7)]).unwrap();
        let dual = assemble_dual(&f, &basis, &NoiseDistribution::uniform(1), &hard).unwrap();
        // pinning leaves no strictly feasible moment matrix, so the solve may
        // stop short of the gap tolerance; the pinned moments are still exact
        let sol = solve(&dual.problem, &SolverOptions::default()).unwrap();
        assert_ne!(sol.status, SolveStatus::InfeasibleSuspect);
        let m = extract_moments(&sol, &basis).unwrap();
        assert!((m.means[0] - 0.7).abs() < 1e-6);
        assert!(m.variances[0] < 1e-6);
    }

    #[test]
    fn piecewise_bound_below_analytic() {
        let f = simple_quadratic();
        let lb = piecewise_lower_bound(&f, (-1.0, 1.0), 11, 2, &SolverOptions::default()).unwrap();
        let LowerBoundFn::Piecewise { grid, values } = &lb else {
            panic!()
        };
        for (w, v) in grid.iter().zip(values) {
            assert!(*v <= c_star(*w) + 1e-6);
            // f is quadratic in x, so the pointwise bound is exact
            assert!((*v - c_star(*w)).abs() < 1e-6);
        }
    }

    #[test]
    fn omega_free_function_gives_flat_steps() {
        let f = Polynomial::from_terms(
            1,
            1,
            [(1.0, vec![2, 0]), (-2.0, vec![1, 0]), (3.0, vec![0, 0])],
        )
        .unwrap();
        let lb = piecewise_lower_bound(&f, (-1.0, 1.0), 5, 1, &SolverOptions::default()).unwrap();
        let LowerBoundFn::Piecewise { values, .. } = lb else {
            panic!()
        };
        for v in values {
            assert!((v - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn short_convergence_study() {
        let rows = convergence_study(
            &simple_quadratic(),
            &NoiseDistribution::uniform(1),
            &[2],
            P_STAR,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].gap > 0.0 && rows[0].gap < 5e-2);
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("s,p_star_2s,gap\n2,"));
        let q = reference_value(c_star, 60).unwrap();
        assert!((q - P_STAR).abs() < 1e-12);
    }
}
