//! MPS engine: matrix-product state/operator representation, two-site DMRG
//! ground-state search and TDVP time evolution for bath sizes beyond the
//! exact engine's reach.
//!
//! Site ordering is qubits-first, then modes in ascending frequency:
//! (qubit 1, qubit 2, mode 1, …, mode N) with local dimensions (2, 2, n, …, n).
//! This keeps the extraction gate on adjacent sites and the star-coupling
//! accumulator one-directional.

pub mod dmrg;
pub mod env;
pub mod mpo;
pub mod observables;
pub mod tdvp;
pub mod tensor;

pub use dmrg::{dmrg_ground_state, dmrg_sweeps, mps_ground_state, DmrgConfig, DmrgReport};
pub use env::{apply_mpo, expectation_mpo};
pub use mpo::{build_mpo, MatrixProductOperator, MpoSite};
pub use observables::{mps_local_objective, work_moments_mps};
pub use tdvp::{tdvp_collect, tdvp_evolve, TdvpConfig, TdvpReport};
pub use tensor::{MatrixProductState, SiteTensor, TruncationPolicy};
