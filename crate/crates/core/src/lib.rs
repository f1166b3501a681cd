//! Distributed detection and accommodation of covert attacks on networks of
//! interconnected discrete-time LTI subsystems.
//!
//! Each subsystem is supervised by a local unit running a decentralized
//! unknown input observer and a distributed observer. Neighbours exchange
//! estimates and vector-valued alarms; a node whose monitors all raise an
//! alarm decides it is under attack, estimates the attacker's internal state
//! by least squares over the alarms, reconstructs the injected input and
//! compensates it in the control law.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] - pseudo-inverse, rank, kernel/projection, gain synthesis.
//! * [`model`] - plant, topology and covert attacker dynamics.
//! * [`observers`] - UIO and distributed observer design and stepping.
//! * [`detection`] - aggregate errors, alarms, unanimity decision, thresholds.
//! * [`accommodation`] - LS attacker-state estimate, input reconstruction,
//!   compensating control.
//! * [`scenario`] - JSON scenarios, the closed-loop runner and CSV traces.

pub mod accommodation;
pub mod detection;
pub mod error;
pub mod model;
pub mod numerics;
pub mod observers;
pub mod scenario;

pub use error::{Error, ErrorCategory, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
