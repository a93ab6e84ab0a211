//! Exact engine: dense state vectors, structured Hamiltonian products,
//! Lanczos ground states and Krylov time evolution. Serves as the oracle for
//! the MPS engine's cross-checks.

pub mod engine;
pub mod hamiltonian;
pub mod krylov;
pub mod state;

pub use engine::{
    effective_local_objective, evolve_collect, evolve_krylov, expect_sz_total,
    ground_state_lanczos, h_system_c64, KrylovConfig, GROUND_RESIDUAL,
};
pub use hamiltonian::{assemble_hamiltonian, HamiltonianTerms, Part};
pub use state::{purity, state_dim, PureStateVector};
