//! Degree sweep for f(x, w) = (x - w)^2 + (w x)^2 with w ~ Uniform(-1, 1):
//! lower bounds approach E[w^4 / (1 + w^2)] = pi/4 - 2/3 as s grows.

use ssos::extract::{convergence_study, gaps_non_increasing};
use ssos::poly::simple_quadratic;
use ssos::{NoiseDistribution, SolverOptions};

fn main() -> ssos::Result<()> {
    let p_star = std::f64::consts::FRAC_PI_4 - 2.0 / 3.0;
    let rows = convergence_study(
        &simple_quadratic(),
        &NoiseDistribution::uniform(1),
        &[2, 3, 4, 5],
        p_star,
        &SolverOptions::default(),
    )?;
    println!("p* = {p_star:.10}");
    for r in &rows {
        println!(
            "s = {}: lower bound {:.10}, moment value {:.10}, gap {:.3e}",
            r.s, r.p_star_2s, r.dual_value, r.gap
        );
    }
    println!("gaps non-increasing: {}", gaps_non_increasing(&rows, 1e-7));
    let c = &rows.last().expect("at least one degree").lower_bound;
    for w in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let exact = f64::powi(w, 4) / (1.0 + w * w);
        println!("c(w = {w:+.1}) = {:+.6}  vs  {exact:.6}", c.evaluate(&[w])?);
    }
    Ok(())
}
