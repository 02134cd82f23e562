//! SDP solvers behind a common interface.
//!
//! [`InteriorPoint`] is the built-in reference solver; [`ExternalSolver`]
//! shells out to an SDPA-format solver and reads its solution back.

mod external;
mod ipm;

pub use external::{parse_csdp_solution, ExternalSolver};
pub use ipm::InteriorPoint;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsosError};
use crate::sdp::{SdpProblem, SparseSym};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_gap > 0.0 && self.tol_feas > 0.0) {
            return Err(SsosError::Parameter(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(SsosError::Parameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleSuspect,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::InfeasibleSuspect => "infeasible_suspect",
        })
    }
}

/// One block of a block-diagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Block::Dense(m) => m.nrows(),
            Block::Diag(v) => v.len(),
        }
    }

    /// Entry `(i, j)`; off-diagonal entries of diagonal blocks are zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Block::Dense(m) => m[(i, j)],
            Block::Diag(v) => {
                if i == j {
                    v[i]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Block::Dense(m) => m.clone(),
            Block::Diag(v) => DMatrix::from_diagonal(v),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Block::Dense(m) => {
                if m.nrows() == 0 {
                    return f64::INFINITY;
                }
                m.clone().symmetric_eigen().eigenvalues.min()
            }
            Block::Diag(v) => v.min(),
        }
    }
}

/// Block-diagonal symmetric matrix laid out like an [`SdpProblem`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub blocks: Vec<Block>,
}

impl BlockMatrix {
    pub fn zeros(p: &SdpProblem) -> Self {
        Self::scaled_identity(p, 0.0)
    }

    pub fn scaled_identity(p: &SdpProblem, tau: f64) -> Self {
        let blocks = (0..p.n_blocks())
            .map(|k| {
                let n = p.block_dim(k);
                if p.is_diagonal(k) {
                    Block::Diag(DVector::from_element(n, tau))
                } else {
                    Block::Dense(DMatrix::identity(n, n) * tau)
                }
            })
            .collect();
        BlockMatrix { blocks }
    }

    /// Dense expansion of a sparse symmetric matrix.
    pub fn from_sparse(p: &SdpProblem, a: &SparseSym) -> Self {
        let mut out = Self::zeros(p);
        out.add_sparse(a, 1.0);
        out
    }

    /// `self += scale * a`.
    pub fn add_sparse(&mut self, a: &SparseSym, scale: f64) {
        for e in a.entries() {
            let v = scale * e.value;
            match &mut self.blocks[e.block] {
                Block::Dense(m) => {
                    m[(e.row, e.col)] += v;
                    if e.row != e.col {
                        m[(e.col, e.row)] += v;
                    }
                }
                Block::Diag(d) => d[e.row] += v,
            }
        }
    }

    /// `<A, self>` for a sparse symmetric `A`.
    pub fn inner_sparse(&self, a: &SparseSym) -> f64 {
        a.entries()
            .iter()
            .map(|e| {
                let x = self.blocks[e.block].get(e.row, e.col);
                if e.row == e.col {
                    e.value * x
                } else {
                    2.0 * e.value * x
                }
            })
            .sum()
    }

    /// Frobenius inner product of two block matrices.
    pub fn dot(&self, other: &BlockMatrix) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| match (a, b) {
                (Block::Dense(a), Block::Dense(b)) => a.dot(b),
                (Block::Diag(a), Block::Diag(b)) => a.dot(b),
                _ => panic!("block layout mismatch"),
            })
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Dense(m) => m.amax(),
                Block::Diag(v) => v.amax(),
            })
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(Block::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Dense view of block `k`.
    pub fn block(&self, k: usize) -> DMatrix<f64> {
        self.blocks[k].to_dense()
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: BlockMatrix,
    pub y: Vec<f64>,
    pub z: BlockMatrix,
    /// `<C, X>`.
    pub objective_primal: f64,
    /// `b^T y`.
    pub objective_dual: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResiduals {
    /// `max_i |<A_i, X> - b_i|`.
    pub primal: f64,
    /// `||C - sum_i y_i A_i - Z||_inf`.
    pub dual: f64,
    /// `|<C, X> - b^T y|`.
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

pub fn kkt_residuals(p: &SdpProblem, s: &SdpSolution) -> KktResiduals {
    let primal = p
        .constraints
        .iter()
        .zip(&p.b)
        .map(|(a, b)| (s.x.inner_sparse(a) - b).abs())
        .fold(0.0, f64::max);
    let mut r = BlockMatrix::from_sparse(p, &p.c);
    for (a, yi) in p.constraints.iter().zip(&s.y) {
        r.add_sparse(a, -yi);
    }
    let dual = r
        .blocks
        .iter()
        .zip(&s.z.blocks)
        .map(|(a, z)| match (a, z) {
            (Block::Dense(a), Block::Dense(z)) => (a - z).amax(),
            (Block::Diag(a), Block::Diag(z)) => (a - z).amax(),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    let pobj = s.x.inner_sparse(&p.c);
    let dobj: f64 = p.b.iter().zip(&s.y).map(|(b, y)| b * y).sum();
    KktResiduals {
        primal,
        dual,
        gap: (pobj - dobj).abs(),
    }
}

pub trait SdpSolver {
    fn solve(&self, p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution>;
}

/// Solves with the built-in interior-point method.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    InteriorPoint.solve(p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SdpProblem {
        let mut p = SdpProblem::new(vec![1]);
        p.c.add(0, 0, 0, 1.0);
        let mut a = SparseSym::new();
        a.add(0, 0, 0, 1.0);
        p.push_constraint(a, 1.0);
        p
    }

    fn toy_exact() -> SdpSolution {
        let p = toy();
        SdpSolution {
            status: SolveStatus::Optimal,
            x: BlockMatrix::scaled_identity(&p, 1.0),
            y: vec![1.0],
            z: BlockMatrix::zeros(&p),
            objective_primal: 1.0,
            objective_dual: 1.0,
            iterations: 0,
        }
    }

    #[test]
    fn exact_toy_solution_has_zero_residuals() {
        let r = kkt_residuals(&toy(), &toy_exact());
        assert_eq!(
            r,
            KktResiduals {
                primal: 0.0,
                dual: 0.0,
                gap: 0.0
            }
        );
    }

    #[test]
    fn perturbation_increases_primal_residual() {
        let p = toy();
        let mut s = toy_exact();
        let before = kkt_residuals(&p, &s).primal;
        if let Block::Dense(m) = &mut s.x.blocks[0] {
            m[(0, 0)] += 0.1;
        }
        assert!(kkt_residuals(&p, &s).primal > before);
    }

    #[test]
    fn options_validation() {
        assert!(SolverOptions::default().validate().is_ok());
        let bad = SolverOptions {
            max_iter: 0,
            ..SolverOptions::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverOptions {
            tol_gap: 0.0,
            ..SolverOptions::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sparse_inner_matches_dense() {
        let mut p = SdpProblem::new(vec![2, -2]);
        let mut a = SparseSym::new();
        a.add(0, 0, 1, 0.5);
        a.add(0, 1, 1, 2.0);
        a.add(1, 1, 1, 3.0);
        a.canonicalize();
        p.c = a.clone();
        let x = BlockMatrix::from_sparse(&p, &a);
        // <A, A> = 2 * 0.25 + 4 + 9
        assert!((x.inner_sparse(&a) - 13.5).abs() < 1e-15);
        assert!((x.dot(&x) - 13.5).abs() < 1e-15);
    }
}
