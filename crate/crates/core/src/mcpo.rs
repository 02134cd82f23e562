//! Monte Carlo point optimization: draw the noise, minimize `f(., w)` locally
//! by BFGS, and summarize the minimizers empirically.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsosError};
use crate::noise::NoiseDistribution;
use crate::poly::Polynomial;
use crate::sdp::HardConstraintSet;

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 500;
const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Largest tolerated fraction of divergent local solves.
const MAX_DIVERGENT_FRACTION: f64 = 0.2;

fn gradient(grad: &[Polynomial], x: &[f64], free: &[bool]) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(x.len());
    for (k, gk) in grad.iter().enumerate() {
        if free[k] {
            g[k] = gk.evaluate(x)?;
        }
    }
    Ok(g)
}

/// BFGS on `x -> f(x, omega)` from `x0`, starting from the identity inverse
/// Hessian with Armijo backtracking. Stops once `|grad|_inf <= 1e-8` or after
/// 500 iterations. Returns the final point and value.
pub fn local_minimize(f: &Polynomial, omega: &[f64], x0: &[f64]) -> Result<(Vec<f64>, f64)> {
    local_minimize_masked(f, omega, x0, &vec![false; x0.len()])
}

/// [`local_minimize`] with the coordinates flagged in `fixed` held at their
/// starting values.
pub fn local_minimize_masked(
    f: &Polynomial,
    omega: &[f64],
    x0: &[f64],
    fixed: &[bool],
) -> Result<(Vec<f64>, f64)> {
    if x0.len() != f.n_x() || fixed.len() != f.n_x() {
        return Err(SsosError::Dimension(format!(
            "start point of length {} for {} decision variables",
            x0.len(),
            f.n_x()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SsosError::Parameter("start point is not finite".into()));
    }
    let g_poly = f.fix_noise(omega)?;
    let grad = g_poly.gradient_x();
    let free: Vec<bool> = fixed.iter().map(|&b| !b).collect();
    let n = x0.len();

    let mut x = DVector::from_column_slice(x0);
    let mut fx = g_poly.evaluate(x.as_slice())?;
    if !fx.is_finite() {
        return Err(SsosError::Divergence(format!(
            "f is {fx} at the start point"
        )));
    }
    let mut g = gradient(&grad, x.as_slice(), &free)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_ITER {
        if g.amax() <= GRAD_TOL {
            break;
        }
        let mut p = -(&h * &g);
        let mut slope = g.dot(&p);
        if slope >= 0.0 {
            h.fill_with_identity();
            p = -g.clone();
            slope = g.dot(&p);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + step * &p;
            let ft = g_poly.evaluate(trial.as_slice())?;
            if ft.is_finite() && ft <= fx + ARMIJO_C1 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= BACKTRACK;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = gradient(&grad, x_new.as_slice(), &free)?;
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
            h -= rho * (&s * hy.transpose() + &hy * s.transpose());
            h += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    if !fx.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(SsosError::Divergence(
            "iterate left the finite range".into(),
        ));
    }
    Ok((x.as_slice().to_vec(), fx))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McpoSample {
    pub omega: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McpoResult {
    /// Mean of the recorded minimum values.
    pub integral: f64,
    pub samples: Vec<McpoSample>,
    pub mean: Vec<f64>,
    /// Unbiased empirical covariance of the minimizers.
    pub covariance: Vec<Vec<f64>>,
    /// Requested sample count, including divergent draws.
    pub n_samples: usize,
    pub n_diverged: usize,
}

impl McpoResult {
    pub fn variances(&self) -> Vec<f64> {
        (0..self.mean.len())
            .map(|i| self.covariance[i][i])
            .collect()
    }

    /// One row per sample: noise coordinates, minimizer, value.
    pub fn samples_csv(&self) -> String {
        let d = self.samples.first().map_or(0, |s| s.omega.len());
        let mut header: Vec<String> = (0..d).map(|k| format!("w{k}")).collect();
        header.extend((0..self.mean.len()).map(|k| format!("x{k}")));
        header.push("f".into());
        let mut out = header.join(",");
        out.push('\n');
        for s in &self.samples {
            let row: Vec<String> = s
                .omega
                .iter()
                .chain(&s.x)
                .chain(std::iter::once(&s.value))
                .map(|v| v.to_string())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// `t` independent draws with uniform `[-1, 1]` starts.
pub fn mcpo_run(
    f: &Polynomial,
    dist: &NoiseDistribution,
    t: usize,
    seed: u64,
) -> Result<McpoResult> {
    mcpo_run_fixed(f, dist, t, seed, &HardConstraintSet::new())
}

/// [`mcpo_run`] with pinned variables held at their values. Sample `k` uses
/// its own ChaCha stream, so results do not depend on thread scheduling.
pub fn mcpo_run_fixed(
    f: &Polynomial,
    dist: &NoiseDistribution,
    t: usize,
    seed: u64,
    pins: &HardConstraintSet,
) -> Result<McpoResult> {
    if t < 2 {
        return Err(SsosError::Parameter(format!(
            "need at least 2 samples, got {t}"
        )));
    }
    if dist.dim() != f.n_w() {
        return Err(SsosError::Dimension(format!(
            "noise of dimension {} for a polynomial with {} noise variables",
            dist.dim(),
            f.n_w()
        )));
    }
    let n = f.n_x();
    let mut fixed = vec![false; n];
    for &(v, _) in pins.pins() {
        if v >= n {
            return Err(SsosError::Dimension(format!(
                "pinned variable {v} out of range"
            )));
        }
        fixed[v] = true;
    }
    let draws: Vec<Result<McpoSample>> = (0..t)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let omega = dist.sample(&mut rng);
            let mut x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            for &(v, val) in pins.pins() {
                x0[v] = val;
            }
            let (x, value) = local_minimize_masked(f, &omega, &x0, &fixed)?;
            Ok(McpoSample { omega, x, value })
        })
        .collect();
    let mut samples = Vec::with_capacity(t);
    let mut n_diverged = 0;
    for d in draws {
        match d {
            Ok(s) => samples.push(s),
            Err(SsosError::Divergence(_)) => n_diverged += 1,
            Err(e) => return Err(e),
        }
    }
    if n_diverged as f64 > MAX_DIVERGENT_FRACTION * t as f64 || samples.len() < 2 {
        return Err(SsosError::Divergence(format!(
            "{n_diverged} of {t} local solves diverged"
        )));
    }
    let m = samples.len() as f64;
    let integral = samples.iter().map(|s| s.value).sum::<f64>() / m;
    let mean: Vec<f64> = (0..n)
        .map(|i| samples.iter().map(|s| s.x[i]).sum::<f64>() / m)
        .collect();
    let mut covariance = vec![vec![0.0; n]; n];
    for s in &samples {
        for i in 0..n {
            let di = s.x[i] - mean[i];
            for j in 0..n {
                covariance[i][j] += di * (s.x[j] - mean[j]);
            }
        }
    }
    for row in &mut covariance {
        for v in row.iter_mut() {
            *v /= m - 1.0;
        }
    }
    Ok(McpoResult {
        integral,
        samples,
        mean,
        covariance,
        n_samples: t,
        n_diverged,
    })
}
