//! External SDPA-format solvers driven through files.
//!
//! The problem is exported with [`export_sdpa`] and the solver is invoked as
//! `program <problem.dat-s> <solution>`, which is the CSDP command line. The
//! solution file holds the dual vector on its first line followed by
//! `matno blk i j value` entries, `matno 1` for `Z` and `matno 2` for `X`.

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DVector;

use super::{
    kkt_residuals, Block, BlockMatrix, SdpSolution, SdpSolver, SolveStatus, SolverOptions,
};
use crate::error::{Result, SsosError};
use crate::sdp::{export_sdpa, SdpProblem};

#[derive(Clone, Debug)]
pub struct ExternalSolver {
    pub program: String,
}

impl ExternalSolver {
    pub fn new(program: impl Into<String>) -> Self {
        ExternalSolver {
            program: program.into(),
        }
    }

    /// Looks up `program` on `PATH`.
    pub fn find(program: &str) -> Option<Self> {
        let path = std::env::var_os("PATH")?;
        std::env::split_paths(&path)
            .map(|d| d.join(program))
            .find(|p| p.is_file())
            .map(|_| ExternalSolver::new(program))
    }
}

static COUNTER: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir() -> Result<PathBuf> {
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("ssos-ext-{}-{n}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

impl SdpSolver for ExternalSolver {
    fn solve(&self, p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
        p.validate()?;
        let dir = scratch_dir()?;
        let input = dir.join("problem.dat-s");
        let output = dir.join("problem.sol");
        std::fs::write(&input, export_sdpa(p))?;
        let run = Command::new(&self.program)
            .arg(&input)
            .arg(&output)
            .output();
        let result = run
            .map_err(|e| SsosError::Solver(format!("cannot run {}: {e}", self.program)))
            .and_then(|_| {
                let text = std::fs::read_to_string(&output).map_err(|e| {
                    SsosError::Solver(format!("{} wrote no solution: {e}", self.program))
                })?;
                parse_csdp_solution(p, &text)
            });
        let _ = std::fs::remove_dir_all(&dir);
        let mut sol = result?;
        let r = kkt_residuals(p, &sol);
        let scale = 1.0 + sol.objective_primal.abs();
        sol.status = if r.primal <= opts.tol_feas.max(1e-6) * scale
            && r.dual <= opts.tol_feas.max(1e-6) * scale
            && r.gap <= opts.tol_gap.max(1e-6) * scale
        {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIter
        };
        Ok(sol)
    }
}

/// Reads a CSDP-style solution for `p`. The solver maximizes `<-C, X>`, so
/// its dual vector is negated to match the minimization form.
pub fn parse_csdp_solution(p: &SdpProblem, text: &str) -> Result<SdpSolution> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| SsosError::parse(1, "empty solution file"))?;
    let y: Vec<f64> = first
        .split_whitespace()
        .map(|t| t.parse::<f64>().map(|v| -v))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| SsosError::parse(1, "malformed dual vector"))?;
    if y.len() != p.n_constraints() {
        return Err(SsosError::parse(
            1,
            format!(
                "expected {} dual values, found {}",
                p.n_constraints(),
                y.len()
            ),
        ));
    }
    let mut z = BlockMatrix::zeros(p);
    let mut x = BlockMatrix::zeros(p);
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || SsosError::parse(ln + 1, "malformed solution entry");
        if f.len() != 5 {
            return Err(bad());
        }
        let matno: usize = f[0].parse().map_err(|_| bad())?;
        let blk: usize = f[1].parse().map_err(|_| bad())?;
        let i: usize = f[2].parse().map_err(|_| bad())?;
        let j: usize = f[3].parse().map_err(|_| bad())?;
        let v: f64 = f[4].parse().map_err(|_| bad())?;
        if blk == 0 || blk > p.n_blocks() || i == 0 || j == 0 {
            return Err(bad());
        }
        let target = match matno {
            1 => &mut z,
            2 => &mut x,
            _ => return Err(bad()),
        };
        let n = p.block_dim(blk - 1);
        if i > n || j > n {
            return Err(bad());
        }
        match &mut target.blocks[blk - 1] {
            Block::Dense(m) => {
                m[(i - 1, j - 1)] = v;
                m[(j - 1, i - 1)] = v;
            }
            Block::Diag(d) => d[i - 1] = v,
        }
    }
    let objective_primal = x.inner_sparse(&p.c);
    let objective_dual = DVector::from_column_slice(&p.b).dot(&DVector::from_column_slice(&y));
    Ok(SdpSolution {
        status: SolveStatus::MaxIter,
        x,
        y,
        z,
        objective_primal,
        objective_dual,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::SparseSym;

    #[test]
    fn parses_handwritten_solution() {
        let mut p = SdpProblem::new(vec![1]);
        p.c.add(0, 0, 0, 1.0);
        let mut a = SparseSym::new();
        a.add(0, 0, 0, 1.0);
        p.push_constraint(a, 1.0);
        let s = parse_csdp_solution(&p, "-1\n2 1 1 1 1\n").unwrap();
        assert_eq!(s.y, vec![1.0]);
        assert_eq!(kkt_residuals(&p, &s).max(), 0.0);
        assert!(parse_csdp_solution(&p, "1 2\n").is_err());
        assert!(parse_csdp_solution(&p, "1\n3 1 1 1 1\n").is_err());
    }

    #[test]
    fn missing_program_is_an_error() {
        let p = SdpProblem::new(vec![1]);
        let s = ExternalSolver::new("definitely-not-a-solver-binary");
        assert!(s.solve(&p, &SolverOptions::default()).is_err());
    }
}
