//! States, operators and photon statistics over truncated Fock spaces,
//! optionally joined with an atom.

mod operators;
mod space;
mod sparse;
mod state;
mod stats;

pub use operators::{
    annihilation, bare_lower, bare_raise, creation, number, parity, vacuum_projectors,
    LinearOperator,
};
pub use space::{
    AtomLevelSet, Factor, FockTruncation, Space, LEVEL_E, LEVEL_G, LEVEL_GP, LEVEL_SINK,
    TAIL_LIMIT,
};
pub use sparse::SparseMatrix;
pub use state::{coherent_state, DensityOperator, PureState, State};
pub use stats::{fidelity, mode_state, number_distribution, photon_statistics, PhotonStatistics};
