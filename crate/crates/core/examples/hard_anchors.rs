//! Sensor localization with pinned sensors in place of anchors: the pinned
//! coordinates come back exactly with zero variance.

use ssos::snl::{generate_instance, solve_ssos, AnchorMode, SnlBasis, SnlProblemType};
use ssos::SolverOptions;

fn main() -> ssos::Result<()> {
    let mut t = SnlProblemType::new(1, 4, 3.0, 0.05, 21);
    t.anchor_mode = AnchorMode::Hard { n_hard: 2 };
    let inst = generate_instance(&t)?;
    let est = solve_ssos(&inst, SnlBasis::Full, &SolverOptions::default())?;
    println!("status {}, objective {:.6e}", est.status, est.objective);
    for (i, x) in inst.sensors.iter().enumerate() {
        let tag = if inst.hard_sensors.contains(&i) {
            "pinned"
        } else {
            "free  "
        };
        println!(
            "sensor {i} {tag}: truth {:+.6}, mean {:+.6}, variance {:.2e}",
            x[0], est.means[i], est.variances[i]
        );
    }
    println!("Mahalanobis error over free sensors: {:.4}", est.delta_m);
    Ok(())
}
