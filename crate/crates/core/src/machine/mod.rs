//! The steppable-enumerator abstraction every regularizer consumes.
//!
//! A [`Machine`] is a suspended enumeration computation advanced one cost
//! unit at a time. Implementations here: a small register-machine interpreter
//! ([`miniram::MiniRam`]) with pluggable storage strategies and lazy state
//! copies, and deterministic emission-schedule fixtures
//! ([`fixtures::FixtureMachine`]).

pub mod assembly;
pub mod fixtures;
pub mod miniram;
pub mod registers;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MachineError {
    #[error("machine stepped after completion (at step {steps})")]
    StepAfterDone { steps: u64 },
    #[error("machine does not support snapshots: {0}")]
    SnapshotUnsupported(&'static str),
    #[error("register address {index} out of range at step {step}")]
    AddressOutOfRange { index: u64, step: u64 },
    #[error("extension oracle inconsistent at depth {depth}: subtree promised a solution but both branches are empty")]
    OracleInconsistent { depth: usize },
    #[error("preprocessing budget of {budget} steps exhausted before the first solution was found")]
    PreprocessingBudgetExceeded { budget: u64 },
}

/// How a snapshot duplicates machine state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SnapshotMode {
    /// Copy the whole configuration up front.
    Eager,
    /// Copy nothing up front; materialize cells on demand and via a
    /// one-cell-per-step background sweep driven by the copy's own steps.
    Lazy,
}

/// A suspended enumeration computation, advanced one cost unit per `step`.
///
/// Machines terminate at the step emitting their last solution (fixtures
/// honor this exactly; interpreted programs are responsible for arranging
/// it). Stepping a finished machine is a contract violation.
pub trait Machine {
    type Solution: Clone;

    /// Advance exactly one cost unit. Returns the solution emitted by this
    /// step, if any.
    fn step(&mut self) -> Result<Option<Self::Solution>, MachineError>;

    fn is_done(&self) -> bool;

    /// Number of steps simulated so far.
    fn steps_taken(&self) -> u64;

    /// The solution emitted by the most recent step, or `None` if that step
    /// emitted nothing.
    fn last_solution(&self) -> Option<&Self::Solution>;

    /// Approximate register-cell footprint of the current configuration, for
    /// space accounting.
    fn state_cells(&self) -> u64;

    /// Whether a lazy copy involving this machine's state is still
    /// materializing. Reported by the copy side only.
    fn lazy_copy_active(&self) -> bool {
        false
    }
}

/// Optional capability: produce an independent machine in the identical
/// configuration.
pub trait SnapshotMachine: Machine + Sized {
    /// Returns the copy together with the number of cells duplicated
    /// eagerly (zero for a fully lazy copy).
    fn snapshot(&mut self, mode: SnapshotMode) -> Result<(Self, u64), MachineError>;
}
