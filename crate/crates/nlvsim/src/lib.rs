//! Simulation and verification of instantaneous measurements of nonlocal
//! quantum variables.
//!
//! A nonlocal variable lives on qubits held at separate sites. Its
//! eigenvalue can nevertheless be learned from operations performed in a
//! single instant — each party acts only on its own site, consuming
//! prearranged entanglement, and the classical records are combined later.
//! The price is that the measurement only *verifies*: it reliably reports
//! the eigenvalue of an eigenstate input without leaving the system in
//! that eigenstate, which is exactly what keeps it causal where an
//! instantaneous ideal von Neumann measurement would not be.
//!
//! The crate is organized as:
//!
//! - [`qsim`] — dense state-vector simulator of site-tagged qubits with
//!   locality enforcement;
//! - [`teleport`] — Bell measurements, teleportation channels, outcome
//!   indexing and Pauli-frame bookkeeping;
//! - [`variable`] — nonlocal variables (eigenbasis + eigenvalues) and
//!   their text serialization;
//! - [`protocols`] — the product-basis example, the universal two-party
//!   protocol, the three-party generalization, record merging, and the
//!   ideal projective measurement used as oracle and causality foil;
//! - [`analysis`] — Born-rule oracle, no-signaling audits, termination law
//!   and resource accounting;
//! - [`report`] / [`cli`] — the batch front end.

pub mod analysis;
pub mod cli;
pub mod linalg;
pub mod protocols;
pub mod qsim;
pub mod report;
pub mod teleport;
pub mod variable;

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
