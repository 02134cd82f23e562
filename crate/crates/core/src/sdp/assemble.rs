//! Assembly of the degree-2s S-SOS programs.
//!
//! Dual (moment form): the PSD variable is the moment matrix `M` indexed by
//! the basis, `M[i][j] = E[m_i m_j]`. Entries that share a product monomial
//! are linked, pure-noise moments are pinned to those of the noise law, and
//! the objective is `sum_a f_a y_a`.
//!
//! Primal (Gram form): `f - c = m^T W m` with `W` PSD. The coefficients of
//! `c` enter only through the pure-noise coefficient rows, so they are
//! eliminated: `c_a = f_a - <A_a, W>`. The program then minimizes
//! `<sum_a mu_a A_a, W>`, and the lower bound is `offset - <C, W>` with
//! `offset = sum_a mu_a f_a`.

use serde::{Deserialize, Serialize};

use super::{SdpProblem, SparseSym};
use crate::basis::{product_index_table, MonomialBasis, ProductTable};
use crate::error::{Result, SsosError};
use crate::noise::{joint_moment, NoiseDistribution};
use crate::poly::{MultiIndex, Polynomial};
use crate::solver::{BlockMatrix, SdpSolution};

/// Decision variables pinned to exact values through `E[x_k] = v` and
/// `E[x_k^2] = v^2`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HardConstraintSet {
    pins: Vec<(usize, f64)>,
}

impl HardConstraintSet {
    pub fn new() -> Self {
        HardConstraintSet::default()
    }

    pub fn from_pins(pins: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut set = HardConstraintSet::new();
        for (k, v) in pins {
            set.insert(k, v)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, var: usize, value: f64) -> Result<()> {
        if self.pins.iter().any(|(k, _)| *k == var) {
            return Err(SsosError::Parameter(format!("variable {var} pinned twice")));
        }
        if !value.is_finite() {
            return Err(SsosError::Parameter(format!(
                "non-finite pin for variable {var}"
            )));
        }
        self.pins.push((var, value));
        Ok(())
    }

    pub fn pins(&self) -> &[(usize, f64)] {
        &self.pins
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pins.len()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.pins.iter().any(|(k, _)| *k == var)
    }

    fn validate(&self, n_x: usize) -> Result<()> {
        for (k, _) in &self.pins {
            if *k >= n_x {
                return Err(SsosError::Dimension(format!(
                    "pinned variable {k} outside the {n_x} decision variables"
                )));
            }
        }
        Ok(())
    }
}

/// What a dual constraint row encodes.
#[derive(Clone, Debug, PartialEq)]
pub enum RowKind {
    /// `M[i][j] - M[rep] = 0` for a duplicated product.
    Link {
        alpha: MultiIndex,
        pos: (usize, usize),
    },
    /// `M[0][0] = 1`.
    Normalization,
    /// `y_a` equals the noise moment of `a`.
    MomentMatch {
        alpha: MultiIndex,
    },
    HardMean {
        var: usize,
    },
    HardSecond {
        var: usize,
    },
}

/// Assembled moment-form program plus the maps needed to read it back.
#[derive(Clone, Debug)]
pub struct DualSdp {
    pub problem: SdpProblem,
    pub basis: MonomialBasis,
    pub table: ProductTable,
    pub rows: Vec<RowKind>,
}

impl DualSdp {
    /// Matrix position holding the moment `y_alpha`.
    pub fn moment_position(&self, alpha: &MultiIndex) -> Option<(usize, usize)> {
        self.table.representative(alpha)
    }

    pub fn n_moment_match_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r, RowKind::MomentMatch { .. } | RowKind::Normalization))
            .count()
    }
}

fn check_vars(f: &Polynomial, basis: &MonomialBasis, dist: &NoiseDistribution) -> Result<()> {
    if f.n_x() != basis.n_x() || f.n_w() != basis.n_w() {
        return Err(SsosError::Dimension(format!(
            "polynomial over ({}, {}) variables, basis over ({}, {})",
            f.n_x(),
            f.n_w(),
            basis.n_x(),
            basis.n_w()
        )));
    }
    if dist.dim() != basis.n_w() {
        return Err(SsosError::Dimension(format!(
            "noise distribution has dimension {}, basis has {} noise variables",
            dist.dim(),
            basis.n_w()
        )));
    }
    Ok(())
}

pub fn assemble_dual(
    f: &Polynomial,
    basis: &MonomialBasis,
    dist: &NoiseDistribution,
    hard: &HardConstraintSet,
) -> Result<DualSdp> {
    check_vars(f, basis, dist)?;
    hard.validate(basis.n_x())?;
    let table = product_index_table(basis);
    let n_x = basis.n_x();
    let mut p = SdpProblem::new(vec![basis.len() as i64]);
    let mut rows = Vec::new();

    for (alpha, coeff) in f.terms() {
        let (i, j) = table
            .representative(alpha)
            .ok_or_else(|| SsosError::NotExpressible {
                alpha: alpha.to_string(),
            })?;
        p.c.add_inner(0, i, j, coeff);
    }

    for (alpha, positions) in table.groups() {
        let rep = positions[0];
        for &(i, j) in &positions[1..] {
            let mut a = SparseSym::new();
            a.add_inner(0, i, j, 1.0);
            a.add_inner(0, rep.0, rep.1, -1.0);
            p.push_constraint(a, 0.0);
            rows.push(RowKind::Link {
                alpha: alpha.clone(),
                pos: (i, j),
            });
        }
    }

    // The alpha = 0 moment is the normalization row; it is not repeated.
    for (alpha, positions) in table.groups() {
        if !alpha.is_pure_tail(n_x) {
            continue;
        }
        let (i, j) = positions[0];
        let mut a = SparseSym::new();
        a.add_inner(0, i, j, 1.0);
        if alpha.is_zero() {
            p.push_constraint(a, 1.0);
            rows.push(RowKind::Normalization);
        } else {
            p.push_constraint(a, joint_moment(alpha, n_x, dist)?);
            rows.push(RowKind::MomentMatch {
                alpha: alpha.clone(),
            });
        }
    }

    let n = basis.n_x() + basis.n_w();
    for &(k, v) in hard.pins() {
        for (power, target, kind) in [
            (1, v, RowKind::HardMean { var: k }),
            (2, v * v, RowKind::HardSecond { var: k }),
        ] {
            let alpha = MultiIndex::unit(n, k, power);
            let (i, j) = table.representative(&alpha).ok_or_else(|| {
                SsosError::Structure(format!(
                    "basis cannot represent the moment {alpha} needed to pin variable {k}"
                ))
            })?;
            let mut a = SparseSym::new();
            a.add_inner(0, i, j, 1.0);
            p.push_constraint(a, target);
            rows.push(kind);
        }
    }

    p.canonicalize();
    Ok(DualSdp {
        problem: p,
        basis: basis.clone(),
        table,
        rows,
    })
}

/// The moment program restricted to the face on which the pins hold.
///
/// With `E[x_k] = v` and `E[x_k^2] = v^2` the 2x2 minor on `(1, x_k)` is
/// singular, so every PSD feasible `M` satisfies `M (e_k - v e_0) = 0`.
/// Writing `M = V X V^T`, where `V` folds row `x_k` into row `1` with weight
/// `v`, gives the same feasible set with the pin rows implied by the
/// normalization. Unlike the literal rows, the reduced program has a strict
/// interior, so interior-point iterates converge at the usual rate.
#[derive(Clone, Debug)]
pub struct PinnedFace {
    pub problem: SdpProblem,
    /// Per original basis index: reduced index and weight.
    map: Vec<(usize, f64)>,
    /// Original row of each reduced row.
    kept: Vec<usize>,
}

impl DualSdp {
    pub fn pinned_face(&self, hard: &HardConstraintSet) -> Result<PinnedFace> {
        hard.validate(self.basis.n_x())?;
        let n = self.basis.n_x() + self.basis.n_w();
        let one = self
            .basis
            .position(&MultiIndex::zeros(n))
            .ok_or_else(|| SsosError::Structure("basis lacks the constant monomial".into()))?;
        let mut pinned = vec![None; self.basis.len()];
        for &(k, v) in hard.pins() {
            let i = self
                .basis
                .position(&MultiIndex::unit(n, k, 1))
                .ok_or_else(|| {
                    SsosError::Structure(format!("basis lacks x{k}, which is pinned"))
                })?;
            pinned[i] = Some(v);
        }
        let mut next = 0;
        let mut reduced = vec![0; self.basis.len()];
        for (i, p) in pinned.iter().enumerate() {
            if p.is_none() {
                reduced[i] = next;
                next += 1;
            }
        }
        let map: Vec<(usize, f64)> = pinned
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                Some(v) => (reduced[one], *v),
                None => (reduced[i], 1.0),
            })
            .collect();
        let fold = |a: &SparseSym| {
            let mut out = SparseSym::new();
            for e in a.entries() {
                let (p, cp) = map[e.row];
                let (q, cq) = map[e.col];
                let v = cp * cq * e.value;
                // an off-diagonal pair landing on one diagonal entry counts twice
                let v = if e.row != e.col && p == q { 2.0 * v } else { v };
                out.add(0, p, q, v);
            }
            out.canonicalize();
            out
        };
        let mut problem = SdpProblem::new(vec![next as i64]);
        problem.c = fold(&self.problem.c);
        let mut kept = Vec::new();
        for (r, (a, b)) in self
            .problem
            .constraints
            .iter()
            .zip(&self.problem.b)
            .enumerate()
        {
            if matches!(
                self.rows[r],
                RowKind::HardMean { .. } | RowKind::HardSecond { .. }
            ) {
                continue;
            }
            let a = fold(a);
            if a.nnz() == 0 {
                if b.abs() > 1e-12 {
                    return Err(SsosError::Structure(format!(
                        "pins make row {} inconsistent",
                        r + 1
                    )));
                }
                continue;
            }
            problem.push_constraint(a, *b);
            kept.push(r);
        }
        Ok(PinnedFace { problem, map, kept })
    }
}

impl PinnedFace {
    /// Maps a solution of the reduced program back to the full moment
    /// matrix. Dropped rows get zero multipliers and `z` is recomputed as
    /// `C - sum_i y_i A_i`.
    pub fn lift(&self, full: &SdpProblem, s: &SdpSolution) -> SdpSolution {
        let x = s.x.block(0);
        let a = self.map.len();
        let mut m = nalgebra::DMatrix::zeros(a, a);
        for i in 0..a {
            for j in 0..a {
                let (p, cp) = self.map[i];
                let (q, cq) = self.map[j];
                m[(i, j)] = cp * cq * x[(p, q)];
            }
        }
        let mut y = vec![0.0; full.n_constraints()];
        for (r, yi) in self.kept.iter().zip(&s.y) {
            y[*r] = *yi;
        }
        let mut z = BlockMatrix::from_sparse(full, &full.c);
        for (ai, yi) in full.constraints.iter().zip(&y) {
            z.add_sparse(ai, -yi);
        }
        let mut xm = BlockMatrix::zeros(full);
        xm.blocks[0] = crate::solver::Block::Dense(m);
        SdpSolution {
            status: s.status,
            objective_primal: xm.inner_sparse(&full.c),
            objective_dual: full.b.iter().zip(&y).map(|(b, y)| b * y).sum(),
            x: xm,
            y,
            z,
            iterations: s.iterations,
        }
    }
}

/// A coefficient of the lower bound `c`, recovered as `f_a - <gram, W>`.
#[derive(Clone, Debug)]
pub struct LowerBoundRow {
    /// Exponents over the noise variables only.
    pub omega_alpha: Vec<u32>,
    pub f_coeff: f64,
    pub gram: SparseSym,
}

/// Assembled Gram-form program.
#[derive(Clone, Debug)]
pub struct PrimalSdp {
    pub problem: SdpProblem,
    pub basis: MonomialBasis,
    pub table: ProductTable,
    pub c_degree: u32,
    /// `sum_a mu_a f_a` over the eliminated coefficients.
    pub offset: f64,
    pub c_rows: Vec<LowerBoundRow>,
}

impl PrimalSdp {
    /// Lower-bound value `int c dnu` for a minimization objective `<C, W>`.
    pub fn bound_from_objective(&self, objective: f64) -> f64 {
        self.offset - objective
    }
}

/// Gram-form assembly. `c_degree` may not exceed twice the basis degree.
pub fn assemble_primal(
    f: &Polynomial,
    basis: &MonomialBasis,
    c_degree: u32,
    dist: &NoiseDistribution,
) -> Result<PrimalSdp> {
    check_vars(f, basis, dist)?;
    let cap = 2 * basis.max_degree();
    if c_degree > cap {
        return Err(SsosError::Parameter(format!(
            "lower-bound degree {c_degree} exceeds twice the basis degree ({cap})"
        )));
    }
    let table = product_index_table(basis);
    let n_x = basis.n_x();
    let is_c = |alpha: &MultiIndex| alpha.is_pure_tail(n_x) && alpha.degree() <= c_degree;

    for (alpha, _) in f.terms() {
        if !table.contains(alpha) && !is_c(alpha) {
            return Err(SsosError::NotExpressible {
                alpha: alpha.to_string(),
            });
        }
    }

    let mut p = SdpProblem::new(vec![basis.len() as i64]);
    let mut offset = 0.0;
    let mut c_rows = Vec::new();
    for (alpha, positions) in table.groups() {
        let mut a = SparseSym::new();
        for &(i, j) in positions {
            // coefficient of alpha in m^T W m counts both (i, j) and (j, i)
            a.add(0, i, j, 1.0);
        }
        a.canonicalize();
        let fa = f.coeff(alpha);
        if is_c(alpha) {
            let mu = joint_moment(alpha, n_x, dist)?;
            offset += mu * fa;
            for e in a.entries() {
                p.c.add(e.block, e.row, e.col, mu * e.value);
            }
            c_rows.push(LowerBoundRow {
                omega_alpha: alpha.tail(n_x).to_vec(),
                f_coeff: fa,
                gram: a,
            });
        } else {
            p.push_constraint(a, fa);
        }
    }
    // pure-noise terms of f that no basis product reaches pass straight into c
    for (alpha, fa) in f.terms() {
        if !table.contains(alpha) {
            offset += joint_moment(alpha, n_x, dist)? * fa;
            c_rows.push(LowerBoundRow {
                omega_alpha: alpha.tail(n_x).to_vec(),
                f_coeff: fa,
                gram: SparseSym::new(),
            });
        }
    }
    p.canonicalize();
    Ok(PrimalSdp {
        problem: p,
        basis: basis.clone(),
        table,
        c_degree,
        offset,
        c_rows,
    })
}
