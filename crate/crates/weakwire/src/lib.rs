//! Post-selected weak values on quantum circuit wires.
//!
//! This crate simulates small quantum circuits (dense state vectors, a
//! universal gate set of single-qubit rotations plus the continuous
//! exchange-interaction SWAP^α gate) and computes the complex weak-value
//! vector of every qubit at every cut of a circuit, conditioned on the
//! preparation and on one post-selected measurement outcome. On top of the
//! engine sit two further layers:
//!
//! * [`locality`]: a property-verification suite that numerically certifies
//!   the dynamic-locality behavior of the weak values: constancy on idle
//!   wires, rotation through single-qubit gates, the ±1 anchor at
//!   measurements, and the harmonic-oscillator law obeyed inside SWAP^α.
//! * [`hvmodel`]: an all-at-once hidden-variable model for a pair of qubits
//!   in an exchange interaction: complex 3-vectors solved under both past
//!   (preparation) and future (measurement) boundary constraints by
//!   multistart least squares, with solution counting and weak-value
//!   recovery by averaging.
//!
//! [`experiments`] packages the canned circuit instances and data products
//! that the `weakwire` CLI exposes.

pub mod circuit;
pub mod experiments;
pub mod hvmodel;
pub mod jsonfmt;
pub mod locality;
pub mod qstate;
pub mod random;
pub mod weakvalues;

pub use circuit::{
    born_probability, evolve_forward, evolve_retro, gate_unitary, transition_amplitude,
    CircuitSpec, Cut, GateId, GateOp, Meas, Prep,
};
pub use qstate::{BlochVector, CVec3, Operator, Sign, StateVector};
pub use weakvalues::{weak_value, weak_vector, SweepSeries, TwoBitOutcome, WeakVector};
