//! Basis sizes for the full degree-2 hierarchy and the cluster hierarchy on
//! k-means partitions of random sensor layouts.

use ssos::basis::{lasserre_basis, NoiseCoupling};
use ssos::snl::{generate_instance, snl_basis, SnlBasis, SnlProblemType};

fn main() -> ssos::Result<()> {
    for (dim, n, n_clusters) in [(1, 10, 1), (2, 9, 9), (2, 15, 9)] {
        let mut t = SnlProblemType::new(dim, n, 2.0 * (dim as f64).sqrt(), 0.1, 1);
        t.n_clusters = n_clusters;
        let inst = generate_instance(&t)?;
        let full = snl_basis(&inst, SnlBasis::Full)?;
        let cluster = snl_basis(&inst, SnlBasis::Cluster)?;
        println!(
            "dim {dim}, N = {n}, clusters = {n_clusters}, d = {}: full {}, cluster {} ({:.2}x)",
            inst.n_noise(),
            full.len(),
            cluster.len(),
            full.len() as f64 / cluster.len() as f64
        );
        let local = ssos::cluster_basis(
            inst.n_x(),
            inst.n_noise(),
            &inst.variable_structure(),
            ssos::ClusterLevel::new(2, 2)
                .with_total_degree(2)
                .with_coupling(NoiseCoupling::ClusterLocal),
        )?;
        println!("    with cluster-local noise: {}", local.len());
    }
    // the full basis only depends on the variable count
    assert_eq!(lasserre_basis(10, 1, 2).len(), 78);
    Ok(())
}
