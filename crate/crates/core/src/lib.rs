//! Desk-scale laboratory for transaction fee mechanisms under parallel
//! execution.
//!
//! The crate models transactions with declared read/write footprints,
//! schedules them on `n` cores under conflict constraints, assigns gas via
//! Shapley and time-proportional mechanisms, searches exhaustively for shill
//! attacks, divides contingency risk between users and schedulers, and
//! simulates object-weighted fee dynamics across blocks. Everything monetary
//! runs on exact rational arithmetic so worked examples check bit-for-bit.

// Error enums carry exact rationals for diagnostics; error paths are cold.
#![allow(clippy::result_large_err)]

pub mod execution;
pub mod fees;
pub mod gcm;
pub mod model;
#[cfg(feature = "testkit")]
pub mod oracles;
pub mod owtfm;
pub mod rational;
pub mod scheduling;

pub use model::{
    conflicts, validate_transaction, LimitMode, MachineConfig, ModelError, ObjectId,
    RetentionConfig, Transaction, TxId, TxViolation,
};
pub use rational::Rational;
pub use scheduling::{Policy, Schedule, ScheduleError, Slot};
