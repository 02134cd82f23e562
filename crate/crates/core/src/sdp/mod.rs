//! Block-structured semidefinite programs in standard equality form
//!
//! ```text
//! minimize    <C, X>
//! subject to  <A_i, X> = b_i,  i = 1..m
//!             X = diag(X_1, .., X_k) with every block PSD
//! ```
//!
//! A negative block size marks a diagonal (non-negative orthant) block, as in
//! the SDPA convention. Matrices are stored sparsely as upper-triangular
//! entries; symmetry is implicit.

mod assemble;
mod sdpa;

pub use assemble::{
    assemble_dual, assemble_primal, DualSdp, HardConstraintSet, LowerBoundRow, PinnedFace,
    PrimalSdp, RowKind,
};
pub use sdpa::{export_sdpa, import_sdpa};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsosError};

/// One stored entry of a symmetric block matrix, `row <= col`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Sparse symmetric block-diagonal matrix, kept sorted and merged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    entries: Vec<SymEntry>,
}

impl SparseSym {
    pub fn new() -> Self {
        SparseSym::default()
    }

    /// Adds `value` to the symmetric pair `(row, col)` / `(col, row)`.
    pub fn add(&mut self, block: usize, row: usize, col: usize, value: f64) {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push(SymEntry {
            block,
            row,
            col,
            value,
        });
    }

    /// Adds a coefficient on the matrix entry `X[row, col]` in the inner
    /// product `<A, X>`; off-diagonal coefficients are halved since both
    /// mirrored positions contribute.
    pub fn add_inner(&mut self, block: usize, row: usize, col: usize, coeff: f64) {
        let v = if row == col { coeff } else { 0.5 * coeff };
        self.add(block, row, col, v);
    }

    /// Sorts by `(block, row, col)`, merges duplicates and drops zeros.
    pub fn canonicalize(&mut self) {
        self.entries.sort_by_key(|e| (e.block, e.row, e.col));
        let mut out: Vec<SymEntry> = Vec::with_capacity(self.entries.len());
        for e in self.entries.drain(..) {
            match out.last_mut() {
                Some(last) if (last.block, last.row, last.col) == (e.block, e.row, e.col) => {
                    last.value += e.value;
                }
                _ => out.push(e),
            }
        }
        out.retain(|e| e.value != 0.0);
        self.entries = out;
    }

    pub fn entries(&self) -> &[SymEntry] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.value.abs()))
    }
}

/// A semidefinite program in standard form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    /// Signed block sizes; negative means a diagonal block of that size.
    pub block_sizes: Vec<i64>,
    pub c: SparseSym,
    pub constraints: Vec<SparseSym>,
    pub b: Vec<f64>,
}

impl SdpProblem {
    pub fn new(block_sizes: Vec<i64>) -> Self {
        SdpProblem {
            block_sizes,
            c: SparseSym::new(),
            constraints: Vec::new(),
            b: Vec::new(),
        }
    }

    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_dim(&self, k: usize) -> usize {
        self.block_sizes[k].unsigned_abs() as usize
    }

    pub fn is_diagonal(&self, k: usize) -> bool {
        self.block_sizes[k] < 0
    }

    /// Total order of the cone, the sum of block dimensions.
    pub fn cone_order(&self) -> usize {
        (0..self.n_blocks()).map(|k| self.block_dim(k)).sum()
    }

    pub fn push_constraint(&mut self, mut a: SparseSym, b: f64) {
        a.canonicalize();
        self.constraints.push(a);
        self.b.push(b);
    }

    pub fn canonicalize(&mut self) {
        self.c.canonicalize();
        for a in &mut self.constraints {
            a.canonicalize();
        }
    }

    /// Checks that every entry lies inside its declared block, upper
    /// triangular, and on the diagonal of diagonal blocks.
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(SsosError::Structure("block sizes must be non-zero".into()));
        }
        if self.constraints.len() != self.b.len() {
            return Err(SsosError::Structure(format!(
                "{} constraint matrices but {} right-hand sides",
                self.constraints.len(),
                self.b.len()
            )));
        }
        let check = |m: &SparseSym, what: &str| -> Result<()> {
            for e in m.entries() {
                if e.block >= self.n_blocks() {
                    return Err(SsosError::Structure(format!(
                        "{what}: block {} out of range",
                        e.block
                    )));
                }
                let n = self.block_dim(e.block);
                if e.row > e.col || e.col >= n {
                    return Err(SsosError::Structure(format!(
                        "{what}: entry ({}, {}) outside block {} of size {n}",
                        e.row, e.col, e.block
                    )));
                }
                if self.is_diagonal(e.block) && e.row != e.col {
                    return Err(SsosError::Structure(format!(
                        "{what}: off-diagonal entry in diagonal block {}",
                        e.block
                    )));
                }
                if !e.value.is_finite() {
                    return Err(SsosError::Structure(format!("{what}: non-finite value")));
                }
            }
            Ok(())
        };
        check(&self.c, "objective")?;
        for (i, a) in self.constraints.iter().enumerate() {
            check(a, &format!("constraint {}", i + 1))?;
        }
        Ok(())
    }
}
