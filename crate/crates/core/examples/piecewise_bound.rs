//! Step-function lower bound: fix the noise on a grid, bound min_x f(x, w)
//! from below at each node, and compare with the exact minimum.

use ssos::extract::{piecewise_lower_bound, LowerBoundFn};
use ssos::poly::simple_quadratic;
use ssos::SolverOptions;

fn main() -> ssos::Result<()> {
    let f = simple_quadratic();
    let opts = SolverOptions::default();
    let LowerBoundFn::Piecewise { grid, values } =
        piecewise_lower_bound(&f, (-1.0, 1.0), 11, 4, &opts)?
    else {
        unreachable!("piecewise bounds are step functions")
    };
    for (w, v) in grid.iter().zip(&values) {
        let exact = w.powi(4) / (1.0 + w * w);
        println!(
            "w = {w:+.1}: bound {v:.8}, exact {exact:.8}, slack {:.1e}",
            exact - v
        );
    }
    let steps = values.len() - 1;
    let area: f64 = values[..steps]
        .iter()
        .map(|v| v * 2.0 / steps as f64)
        .sum::<f64>()
        / 2.0;
    println!("left-endpoint average of the steps: {area:.6}");
    Ok(())
}
