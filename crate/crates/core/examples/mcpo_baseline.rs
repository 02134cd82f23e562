//! Monte Carlo point optimization on the simple quadratic: the sample mean
//! of the pointwise minima estimates E[min_x f(x, w)].

use ssos::mcpo::mcpo_run;
use ssos::poly::simple_quadratic;
use ssos::NoiseDistribution;

fn main() -> ssos::Result<()> {
    let p_star = std::f64::consts::FRAC_PI_4 - 2.0 / 3.0;
    for t in [10, 100, 1000, 10000] {
        let r = mcpo_run(&simple_quadratic(), &NoiseDistribution::uniform(1), t, 42)?;
        println!(
            "T = {t:5}: estimate {:.6} (error {:+.2e}), mean minimizer {:+.4}, variance {:.4}",
            r.integral,
            r.integral - p_star,
            r.mean[0],
            r.covariance[0][0]
        );
    }
    Ok(())
}
