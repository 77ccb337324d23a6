//! Parallel two-qubit entangling gates between two registers that share an
//! XX spin-chain data-bus.
//!
//! The crate builds the bus Hamiltonian in excitation-number sectors, evolves
//! register states through it (unitarily or under site-local dephasing),
//! reconstructs the effective two-qubit channel seen by every register pair,
//! scores it with the average gate fidelity, and searches the Hamiltonian
//! parameters that make all pairs perform their gate at the same time.
//!
//! Module map:
//!
//! * [`system`]: site layout, sector bases, sector-decomposed states, pair
//!   partial traces.
//! * [`hamiltonian`]: per-sector sparse Hamiltonian blocks.
//! * [`dynamics`]: spectral and Krylov propagators.
//! * [`gates`]: target gates, channel reconstruction, gate fidelities.
//! * [`optimize`]: grid search over the two tuning strategies.
//! * [`noise`]: Lindblad dephasing and fidelity-versus-rate curves.
//! * [`twoway`]: transmission and crosstalk of two-way state exchange.
//! * [`config`]: experiment files and the batch runner behind the CLI.
//!
//! All energies are in units of the chain coupling `J` and all times in
//! units of `1/J`.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod gates;
pub mod hamiltonian;
pub mod linalg;
pub mod noise;
pub mod optimize;
pub mod output;
pub mod system;
pub mod twoway;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

pub use dynamics::{prepare_propagator, Method, Propagator};
pub use gates::{
    average_gate_fidelity, calibrate_phases, ideal_phases, mean_fidelity,
    reconstruct_pair_channel, FidelityReport, GateTarget, PairChannel, SpectatorPolicy,
};
pub use hamiltonian::{build_hamiltonian, HamiltonianParams, SectorOperator};
pub use system::{
    build_layout, encode_product_state, partial_trace_pair, sector_basis, RegisterState,
    SectorBasis, SectorState, SystemLayout,
};
