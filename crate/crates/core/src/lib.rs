//! Semiclassical spin-coherent-state propagator.

// `!(x > 0.0)` checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembler;
pub mod branch;
pub mod error;
pub mod exact;
pub mod hamiltonian;
pub mod ode;
pub mod pipeline;
pub mod spin;
pub mod trajectory;

pub use error::{Error, Result};
pub use hamiltonian::{Hamiltonian, HamiltonianKind, HamiltonianSpec, PolyTerm, SpinOp, SymbolJet};
pub use spin::{PhasePoint, ScaledTime, SpinContext, C64};
