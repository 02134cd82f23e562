//! The degree sweep under Gaussian noise. The noise has unbounded support,
//! so the bounds are computed but carry no compact-domain guarantee.

use ssos::cli::simple_quadratic_reference;
use ssos::extract::convergence_study;
use ssos::poly::simple_quadratic;
use ssos::{NoiseDistribution, SolverOptions};

fn main() -> ssos::Result<()> {
    for sigma in [0.25, 0.5] {
        let dist = NoiseDistribution::gaussian(1, sigma);
        let p_star = simple_quadratic_reference(&dist)?;
        println!("sigma = {sigma}: E[min f] = {p_star:.8}");
        for r in convergence_study(
            &simple_quadratic(),
            &dist,
            &[2, 3, 4],
            p_star,
            &SolverOptions::default(),
        )? {
            println!(
                "  s = {}: lower bound {:.8}, gap {:.2e}",
                r.s, r.p_star_2s, r.gap
            );
        }
    }
    Ok(())
}
