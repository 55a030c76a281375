//! Counterdiabatic annealing of the p-spin model.
//!
//! The crate builds the annealing Hamiltonians in either the maximal-spin
//! subspace or the full `2^n` space, optimizes variational gauge potentials
//! (nested commutators, a fixed cyclic basis, or the exact adiabatic
//! potential), and integrates the driven Schrödinger equation.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod spin_algebra;
pub mod variational;

pub use dynamics::{
    ground_state_probability, minimal_gap, propagate, Ansatz, AnsatzSpec, GapKind, MinimalGap,
    PropagationOptions, QuantumState, RunRecord,
};
pub use error::{Error, Result};
pub use model::{AnnealingHamiltonian, ModelSpec, Schedule, Variant};
pub use spin_algebra::{collective_spin_ops, DickeEmbedding, Operator, RepKind, Representation, TraceWeight};
pub use variational::{ActionSolution, VariationalBasis};
