//! Deterministic bounds and estimates for the permanent of nonnegative
//! matrices: exact evaluation for small orders, Sinkhorn scaling with the
//! Bethe functional (a `2^n` approximation), Orlicz-norm upper bounds, and
//! monomer-dimer lower bounds on regular bipartite multigraphs.
//!
//! Logarithms are natural unless a field says `log2`.

pub mod assignment;
pub mod bethe;
pub mod bounds;
pub mod conjectures;
pub mod dimer;
pub mod ensemble;
pub mod error;
pub mod exact;
pub mod frank_wolfe;
pub mod matching;
pub mod matrix;
pub mod numeric;
pub mod orlicz;
pub mod psi;
pub mod scaling;

pub use bethe::{approximate_permanent, bethe_f, cw_functional, cw_gradient, maximize_bethe, BetheSolution, BoundReport};
pub use error::{Error, Result};
pub use exact::{permanent, permanent_bruteforce, permanent_ryser, per_m_direct, per_m_via_block, PermanentValue};
pub use matrix::{classify, Matrix, StochasticityReport};
pub use orlicz::{bethe_upper_bound, bregman_bound, min_constant_c, orlicz_norm, upper_bound_orlicz};
pub use psi::{solve_root_a, verify_psi_conditions, PsiConditionReport, PsiFunction, PsiKind};
pub use scaling::{sinkhorn_scale, ScalingResult};
