//! Infeasible primal-dual path-following method with Nesterov-Todd scaling
//! and Mehrotra predictor-corrector steps.
//!
//! Primal `min <C,X>, A(X) = b, X >= 0`; dual `max b^T y, A^T y + Z = C,
//! Z >= 0`. Each iteration solves the Schur system `M dy = r` with
//! `M_ij = <A_i, W A_j W>`, where `W` is the NT scaling point (`W Z W = X`).

use nalgebra::{DMatrix, DVector};

use super::{Block, BlockMatrix, SdpSolution, SdpSolver, SolveStatus, SolverOptions};
use crate::error::Result;
use crate::sdp::SdpProblem;

const STEP_FRACTION: f64 = 0.98;
const RIDGE: f64 = 1e-12;
const BLOWUP: f64 = 1e10;
/// Iterations without halving the merit before giving up.
const STALL_ITERS: usize = 10;

#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl SdpSolver for InteriorPoint {
    fn solve(&self, p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
        opts.validate()?;
        p.validate()?;
        Ok(Ipm::new(p, opts).run())
    }
}

/// Stored entry with its weight in `A = kappa (e_r e_c^T + e_c e_r^T)`.
#[derive(Clone, Copy)]
struct RowEntry {
    block: usize,
    r: usize,
    c: usize,
    v: f64,
    kappa: f64,
}

enum Scale {
    Dense {
        lx_inv: DMatrix<f64>,
        lz_inv: DMatrix<f64>,
        g: DMatrix<f64>,
        g_inv: DMatrix<f64>,
        w: DMatrix<f64>,
        d: DVector<f64>,
    },
    Diag {
        x: DVector<f64>,
        z: DVector<f64>,
        w: DVector<f64>,
        g: DVector<f64>,
        d: DVector<f64>,
    },
}

struct Ipm<'a> {
    p: &'a SdpProblem,
    opts: &'a SolverOptions,
    rows: Vec<Vec<RowEntry>>,
    c: BlockMatrix,
    b: DVector<f64>,
}

struct Direction {
    dx: BlockMatrix,
    dy: DVector<f64>,
    dz: BlockMatrix,
}

impl<'a> Ipm<'a> {
    fn new(p: &'a SdpProblem, opts: &'a SolverOptions) -> Self {
        let rows = p
            .constraints
            .iter()
            .map(|a| {
                a.entries()
                    .iter()
                    .map(|e| RowEntry {
                        block: e.block,
                        r: e.row,
                        c: e.col,
                        v: e.value,
                        kappa: if e.row == e.col {
                            0.5 * e.value
                        } else {
                            e.value
                        },
                    })
                    .collect()
            })
            .collect();
        Ipm {
            p,
            opts,
            rows,
            c: BlockMatrix::from_sparse(p, &p.c),
            b: DVector::from_column_slice(&p.b),
        }
    }

    fn apply_a(&self, x: &BlockMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.p.n_constraints(),
            self.p.constraints.iter().map(|a| x.inner_sparse(a)),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(self.p);
        for (a, yi) in self.p.constraints.iter().zip(y.iter()) {
            if *yi != 0.0 {
                out.add_sparse(a, *yi);
            }
        }
        out
    }

    fn run(&self) -> SdpSolution {
        let p = self.p;
        let opts = self.opts;
        let m = p.n_constraints();
        let n_cone = p.cone_order() as f64;
        let b_inf = self.b.amax();
        let c_inf = self.c.max_abs();
        let tau = 1.0 + b_inf.max(c_inf);

        let mut x = BlockMatrix::scaled_identity(p, tau);
        let mut z = BlockMatrix::scaled_identity(p, tau);
        let mut y = DVector::zeros(m);
        let mut status = SolveStatus::MaxIter;
        let mut iterations = 0;
        let mut stalled = 0;
        // best iterate by the worst of the three scaled residuals
        let mut best: Option<(f64, BlockMatrix, DVector<f64>, BlockMatrix)> = None;
        // merit at the last halving; the stall rule counts from there
        let mut progress_ref = f64::INFINITY;
        let mut since_best = 0;

        loop {
            let rp = &self.b - self.apply_a(&x);
            let mut rd = self.c.clone();
            axpy(&mut rd, -1.0, &self.apply_at(&y));
            axpy(&mut rd, -1.0, &z);
            let pobj = x.dot(&self.c);
            let dobj = self.b.dot(&y);
            let xz = x.dot(&z);
            let pinf = rp
                .iter()
                .zip(self.b.iter())
                .map(|(r, b)| r.abs() / (1.0 + b.abs()))
                .fold(0.0, f64::max);
            let dinf = rd.max_abs() / (1.0 + c_inf);
            let gap = (pobj - dobj).abs().max(xz);
            if opts.verbose {
                eprintln!(
                    "ipm {iterations:3}  pobj {pobj:+.10e}  dobj {dobj:+.10e}  pinf {pinf:.2e}  dinf {dinf:.2e}  gap {gap:.2e}"
                );
            }
            let merit = (pinf / opts.tol_feas)
                .max(dinf / opts.tol_feas)
                .max(gap / (opts.tol_gap * (1.0 + pobj.abs())));
            if merit <= 1.0 {
                status = SolveStatus::Optimal;
                best = None;
                break;
            }
            if x.max_abs() > BLOWUP * tau || z.max_abs() > BLOWUP * tau {
                status = SolveStatus::InfeasibleSuspect;
                best = None;
                break;
            }
            if merit < best.as_ref().map_or(f64::INFINITY, |b| b.0) {
                best = Some((merit, x.clone(), y.clone(), z.clone()));
            }
            if merit < 0.5 * progress_ref {
                progress_ref = merit;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if iterations >= opts.max_iter || stalled >= 3 || since_best >= STALL_ITERS {
                break;
            }
            let mu = xz / n_cone;

            let Some(scales) = x
                .blocks
                .iter()
                .zip(&z.blocks)
                .map(|(xb, zb)| nt_scaling(xb, zb))
                .collect::<Option<Vec<_>>>()
            else {
                break;
            };
            let schur = self.schur(&scales);
            let Some(chol) = factor(&schur) else {
                break;
            };
            let wrdw = w_sandwich(&scales, &rd);
            let solve_dir = |rc: BlockMatrix| -> Direction {
                let mut t = rc.clone();
                axpy(&mut t, -1.0, &wrdw);
                let rhs = &rp - self.apply_a(&t);
                let mut dy = chol.solve(&rhs);
                // one step of iterative refinement against the unridged matrix
                let resid = &rhs - &schur * &dy;
                dy += chol.solve(&resid);
                let mut dz = rd.clone();
                axpy(&mut dz, -1.0, &self.apply_at(&dy));
                let mut dx = rc;
                axpy(&mut dx, -1.0, &w_sandwich(&scales, &dz));
                Direction { dx, dy, dz }
            };

            // predictor
            let mut rc = x.clone();
            scale(&mut rc, -1.0);
            let aff = solve_dir(rc);
            let ap = max_step(&scales, &aff.dx, true).min(1.0);
            let ad = max_step(&scales, &aff.dz, false).min(1.0);
            let mut xa = x.clone();
            axpy(&mut xa, ap, &aff.dx);
            let mut za = z.clone();
            axpy(&mut za, ad, &aff.dz);
            let mu_aff = xa.dot(&za) / n_cone;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let rc = corrector_rhs(&scales, &aff, sigma * mu);
            let dir = solve_dir(rc);
            let ap = (STEP_FRACTION * max_step(&scales, &dir.dx, true)).min(1.0);
            let ad = (STEP_FRACTION * max_step(&scales, &dir.dz, false)).min(1.0);
            axpy(&mut x, ap, &dir.dx);
            axpy(&mut z, ad, &dir.dz);
            y.axpy(ad, &dir.dy, 1.0);
            if opts.verbose {
                eprintln!("      step p {ap:.3e}  step d {ad:.3e}  mu {mu:.3e}  sigma {sigma:.3e}");
            }
            symmetrize(&mut x);
            symmetrize(&mut z);
            iterations += 1;
            if ap < 1e-8 && ad < 1e-8 {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }

        if let Some((_, bx, by, bz)) = best {
            (x, y, z) = (bx, by, bz);
        }
        let objective_primal = x.dot(&self.c);
        let objective_dual = self.b.dot(&y);
        SdpSolution {
            status,
            x,
            y: y.iter().copied().collect(),
            z,
            objective_primal,
            objective_dual,
            iterations,
        }
    }

    fn schur(&self, scales: &[Scale]) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut s = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for e in &self.rows[i] {
                    for f in &self.rows[j] {
                        if e.block != f.block {
                            continue;
                        }
                        match &scales[e.block] {
                            Scale::Dense { w, .. } => {
                                acc += 2.0
                                    * e.kappa
                                    * f.kappa
                                    * (w[(e.c, f.r)] * w[(f.c, e.r)]
                                        + w[(e.c, f.c)] * w[(e.r, f.r)]);
                            }
                            Scale::Diag { w, .. } => {
                                if e.r == f.r {
                                    acc += e.v * f.v * w[e.r] * w[e.r];
                                }
                            }
                        }
                    }
                }
                s[(i, j)] = acc;
                s[(j, i)] = acc;
            }
        }
        s
    }
}

/// Cholesky of the Schur complement, retried once with a small ridge.
fn factor(s: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = s.clone().cholesky() {
        return Some(c);
    }
    let scale = s.diagonal().amax().max(1.0);
    let mut r = s.clone();
    for i in 0..r.nrows() {
        r[(i, i)] += RIDGE * scale;
    }
    r.cholesky()
}

fn nt_scaling(xb: &Block, zb: &Block) -> Option<Scale> {
    match (xb, zb) {
        (Block::Dense(x), Block::Dense(z)) => {
            let n = x.nrows();
            let lx = x.clone().cholesky()?.unpack();
            let lz = z.clone().cholesky()?.unpack();
            let id = DMatrix::identity(n, n);
            let lx_inv = lx.solve_lower_triangular(&id)?;
            let lz_inv = lz.solve_lower_triangular(&id)?;
            let svd = (lz.transpose() * &lx).svd(false, true);
            let vt = svd.v_t?;
            let d = svd.singular_values;
            if d.iter().any(|s| !s.is_finite() || *s <= 0.0) {
                return None;
            }
            let g = &lx * vt.transpose() * DMatrix::from_diagonal(&d.map(|s| 1.0 / s.sqrt()));
            let g_inv = DMatrix::from_diagonal(&d.map(f64::sqrt)) * &vt * &lx_inv;
            let w = &g * g.transpose();
            Some(Scale::Dense {
                lx_inv,
                lz_inv,
                g,
                g_inv,
                w,
                d,
            })
        }
        (Block::Diag(x), Block::Diag(z)) => {
            if x.iter().chain(z.iter()).any(|v| v.is_nan() || *v <= 0.0) {
                return None;
            }
            let w = x.zip_map(z, |a, b| (a / b).sqrt());
            let g = w.map(f64::sqrt);
            let d = x.zip_map(z, |a, b| (a * b).sqrt());
            Some(Scale::Diag {
                x: x.clone(),
                z: z.clone(),
                w,
                g,
                d,
            })
        }
        _ => None,
    }
}

/// `W R W` blockwise.
fn w_sandwich(scales: &[Scale], r: &BlockMatrix) -> BlockMatrix {
    let blocks = scales
        .iter()
        .zip(&r.blocks)
        .map(|(s, rb)| match (s, rb) {
            (Scale::Dense { w, .. }, Block::Dense(m)) => Block::Dense(w * m * w),
            (Scale::Diag { w, .. }, Block::Diag(v)) => {
                Block::Diag(v.component_mul(&w.component_mul(w)))
            }
            _ => unreachable!("block layout mismatch"),
        })
        .collect();
    BlockMatrix { blocks }
}

/// Right-hand side `G S G^T` of `dX + W dZ W` for the centered,
/// second-order-corrected step.
fn corrector_rhs(scales: &[Scale], aff: &Direction, target: f64) -> BlockMatrix {
    let blocks = scales
        .iter()
        .zip(aff.dx.blocks.iter().zip(&aff.dz.blocks))
        .map(|(s, (dxb, dzb))| match (s, dxb, dzb) {
            (Scale::Dense { g, g_inv, d, .. }, Block::Dense(dx), Block::Dense(dz)) => {
                let n = d.len();
                let dxt = g_inv * dx * g_inv.transpose();
                let dzt = g.transpose() * dz * g;
                let prod = &dxt * &dzt;
                let mut sm = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut r = -0.5 * (prod[(i, j)] + prod[(j, i)]);
                        if i == j {
                            r += target - d[i] * d[i];
                        }
                        sm[(i, j)] = 2.0 * r / (d[i] + d[j]);
                    }
                }
                Block::Dense(g * sm * g.transpose())
            }
            (Scale::Diag { g, d, .. }, Block::Diag(dx), Block::Diag(dz)) => {
                let out = DVector::from_fn(d.len(), |i, _| {
                    let dxt = dx[i] / g[i];
                    let dzt = dz[i] * g[i];
                    let r = target - d[i] * d[i] - dxt * dzt;
                    g[i] * g[i] * r / d[i]
                });
                Block::Diag(out)
            }
            _ => unreachable!("block layout mismatch"),
        })
        .collect();
    BlockMatrix { blocks }
}

/// Largest `a` with `X + a dX` (or `Z + a dZ`) still PSD.
fn max_step(scales: &[Scale], dir: &BlockMatrix, primal: bool) -> f64 {
    let mut step = f64::INFINITY;
    for (s, db) in scales.iter().zip(&dir.blocks) {
        let lmin = match (s, db) {
            (Scale::Dense { lx_inv, lz_inv, .. }, Block::Dense(d)) => {
                let l = if primal { lx_inv } else { lz_inv };
                let t = l * d * l.transpose();
                let t = (&t + t.transpose()) * 0.5;
                t.symmetric_eigen().eigenvalues.min()
            }
            (Scale::Diag { x, z, .. }, Block::Diag(d)) => {
                let base = if primal { x } else { z };
                d.component_div(base).min()
            }
            _ => unreachable!("block layout mismatch"),
        };
        if lmin < 0.0 {
            step = step.min(-1.0 / lmin);
        }
    }
    step
}

fn axpy(y: &mut BlockMatrix, a: f64, x: &BlockMatrix) {
    for (yb, xb) in y.blocks.iter_mut().zip(&x.blocks) {
        match (yb, xb) {
            (Block::Dense(ym), Block::Dense(xm)) => ym.zip_apply(xm, |u, v| *u += a * v),
            (Block::Diag(yv), Block::Diag(xv)) => yv.axpy(a, xv, 1.0),
            _ => unreachable!("block layout mismatch"),
        }
    }
}

fn scale(y: &mut BlockMatrix, a: f64) {
    for yb in &mut y.blocks {
        match yb {
            Block::Dense(m) => *m *= a,
            Block::Diag(v) => *v *= a,
        }
    }
}

fn symmetrize(y: &mut BlockMatrix) {
    for yb in &mut y.blocks {
        if let Block::Dense(m) = yb {
            let t = m.transpose();
            *m += t;
            *m *= 0.5;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::SparseSym;
    use crate::solver::{kkt_residuals, solve};

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn one_by_one_toy() {
        let mut p = SdpProblem::new(vec![1]);
        p.c.add(0, 0, 0, 1.0);
        let mut a = SparseSym::new();
        a.add(0, 0, 0, 1.0);
        p.push_constraint(a, 1.0);
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_primal - 1.0).abs() < 1e-7);
    }

    #[test]
    fn min_eigenvalue_problem() {
        // min <C, X> s.t. tr X = 1 gives lambda_min(C)
        let mut p = SdpProblem::new(vec![3]);
        let cm = [[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        for (i, row) in cm.iter().enumerate() {
            for (j, v) in row.iter().enumerate().skip(i) {
                if *v != 0.0 {
                    p.c.add(0, i, j, *v);
                }
            }
        }
        let mut a = SparseSym::new();
        for i in 0..3 {
            a.add(0, i, i, 1.0);
        }
        p.push_constraint(a, 1.0);
        p.canonicalize();
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        let want = 2.0 - 2f64.sqrt();
        assert!((s.objective_primal - want).abs() < 1e-7);
        assert!((s.objective_dual - want).abs() < 1e-7);
        let r = kkt_residuals(&p, &s);
        assert!(r.max() < 1e-6, "{r:?}");
    }

    #[test]
    fn mixed_blocks_lp_and_sdp() {
        // min x1 + 2 x2 + X00 s.t. x1 + x2 = 1, X00 - x1 = 0 with x diagonal
        let mut p = SdpProblem::new(vec![1, -2]);
        p.c.add(1, 0, 0, 1.0);
        p.c.add(1, 1, 1, 2.0);
        p.c.add(0, 0, 0, 1.0);
        let mut a = SparseSym::new();
        a.add(1, 0, 0, 1.0);
        a.add(1, 1, 1, 1.0);
        p.push_constraint(a, 1.0);
        let mut a = SparseSym::new();
        a.add(0, 0, 0, 1.0);
        a.add(1, 0, 0, -1.0);
        p.push_constraint(a, 0.0);
        p.canonicalize();
        let s = solve(&p, &opts()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(
            (s.objective_primal - 2.0).abs() < 1e-7,
            "{}",
            s.objective_primal
        );
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // X00 = -1 with X PSD
        let mut p = SdpProblem::new(vec![1]);
        p.c.add(0, 0, 0, 1.0);
        let mut a = SparseSym::new();
        a.add(0, 0, 0, 1.0);
        p.push_constraint(a, -1.0);
        let s = solve(&p, &opts()).unwrap();
        assert_ne!(s.status, SolveStatus::Optimal);
    }

    #[test]
    fn deterministic() {
        let mut p = SdpProblem::new(vec![2]);
        p.c.add(0, 0, 1, 1.0);
        let mut a = SparseSym::new();
        a.add(0, 0, 0, 1.0);
        p.push_constraint(a, 1.0);
        let mut a = SparseSym::new();
        a.add(0, 1, 1, 1.0);
        p.push_constraint(a, 1.0);
        let s1 = solve(&p, &opts()).unwrap();
        let s2 = solve(&p, &opts()).unwrap();
        assert_eq!(s1.iterations, s2.iterations);
        assert_eq!(s1.objective_primal.to_bits(), s2.objective_primal.to_bits());
        assert!((s1.objective_primal + 2.0).abs() < 1e-7);
    }
}
