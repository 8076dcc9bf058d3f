//! Delay regularization for enumeration algorithms.
//!
//! An enumerator with *incremental delay* `p` is only promised to produce at
//! least `t` solutions within `t * p` steps; its gaps between consecutive
//! outputs can still be wildly uneven. This crate wraps any such enumerator
//! behind a steppable-machine interface and re-emits its solutions with
//! guaranteed gap bounds, measured deterministically in move-units (one unit
//! per simulated machine step).
//!
//! The pieces:
//!
//! * [`gray_counter`] — unbounded counters with constant-time increment and
//!   constant-time most-significant-bit queries, used wherever step counts
//!   grow past what fits in a comparison.
//! * [`machine`] — the [`machine::Machine`] trait, a small register-machine
//!   interpreter with pluggable storage strategies and lazy state copies, and
//!   deterministic emission-schedule fixtures.
//! * [`amortizers`] — the regularization procedures: a buffering queue, an
//!   adaptive variant that needs no delay bound, geometric amortization with
//!   and without a known solution count, and the polynomial-budget variant
//!   for super-linear incremental time.
//! * [`flashlight`] — binary-partition search over set-valued solutions with
//!   an extension oracle, plus the queue hybrid that turns a traversal into a
//!   machine with incremental delay close to its average delay.
//! * [`dnf`] — DNF formulas, their extension oracle, and model enumeration
//!   through the flashlight/amortizer pipeline.
//! * [`metrics`] — the move-unit ledger and the delay/space profiles every
//!   run reports.

pub mod amortizers;
pub mod bitset;
pub mod dnf;
pub mod flashlight;
pub mod gray_counter;
pub mod machine;
pub mod metrics;

pub use gray_counter::GrayCounter;
pub use machine::{Machine, MachineError, SnapshotMachine, SnapshotMode};
pub use metrics::{DelayProfile, Ratio, SpaceProfile};
