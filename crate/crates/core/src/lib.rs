//! Stochastic sum-of-squares relaxations for parametric polynomial
//! optimization.
//!
//! Given `f(x, w)` with random parameters `w ~ nu`, the library builds the
//! degree-2s semidefinite programs that bound `E_nu[min_x f(x, w)]` from
//! below (Gram form) and recover a minimizing distribution over `x` (moment
//! form), solves them with a built-in interior-point method, and applies the
//! machinery to noisy sensor network localization.

pub mod basis;
pub mod cli;
pub mod error;
pub mod extract;
pub mod kmeans;
pub mod mcpo;
pub mod noise;
pub mod poly;
pub mod sdp;
pub mod snl;
pub mod solver;

pub use basis::{
    cluster_basis, lasserre_basis, product_index_table, ClusterLevel, ClusterStructure,
    MonomialBasis, NoiseCoupling,
};
pub use error::{Result, SsosError};
pub use noise::{gauss_legendre, NoiseDistribution};
pub use poly::{MultiIndex, Polynomial};
pub use sdp::{assemble_dual, assemble_primal, HardConstraintSet, SdpProblem};
pub use solver::{solve, SdpSolution, SolveStatus, SolverOptions};
