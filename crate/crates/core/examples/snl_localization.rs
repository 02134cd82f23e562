//! Localizes noisy 1-D sensor networks with the moment relaxation and with
//! Monte Carlo point optimization, and compares their Mahalanobis errors.

use ssos::extract::median;
use ssos::mcpo::mcpo_run;
use ssos::snl::{
    build_potential, delta_m, generate_instance, solve_ssos, SnlBasis, SnlProblemType,
};
use ssos::{NoiseDistribution, SolverOptions};

fn main() -> ssos::Result<()> {
    let opts = SolverOptions::default();
    let (mut sos, mut mc) = (Vec::new(), Vec::new());
    for seed in 0..5 {
        let mut t = SnlProblemType::new(1, 5, 3.0, 0.1, seed);
        t.noise_dim = Some(2);
        let inst = generate_instance(&t)?;
        let est = solve_ssos(&inst, SnlBasis::Full, &opts)?;
        let f = build_potential(&inst, t.epsilon)?;
        let run = mcpo_run(&f, &NoiseDistribution::uniform(2), 50, seed)?;
        let dm = delta_m(&inst, &run.mean, &run.variances())?;
        println!(
            "instance {seed}: S-SOS {:.4} ({}), MCPO {dm:.4}",
            est.delta_m, est.status
        );
        sos.push(est.delta_m);
        mc.push(dm);
    }
    println!(
        "median S-SOS {:.4}, median MCPO {:.4}",
        median(&sos),
        median(&mc)
    );
    Ok(())
}
