//! The regularization procedures.
//!
//! Every regularizer consumes a [`Machine`] (or a factory producing fresh
//! simulations of the same computation), emits the same solution multiset,
//! and reports deterministic delay/space profiles in move-units:
//!
//! * [`queue_regularize`] — buffer solutions in a queue and pull one every
//!   `p` moves; same order, gap at most `p`, but the queue can hold a large
//!   fraction of all solutions.
//! * [`adaptive_regularize`] — no delay bound needed; the pull condition
//!   amplifies the locally observed incremental delay, giving gaps
//!   `O(p^(1+eps))` for the machine's true incremental delay `p`.
//! * [`geometric_regularize`] — run `ceil(log2 S) + 1` staggered simulations,
//!   each owning a geometrically growing zone of emission steps; gap at most
//!   `2p` moves per live simulation with only a logarithmic space factor.
//! * [`geometric_regularize_dynamic`] — the same without knowing `S`:
//!   simulations are spawned by snapshot exactly when the newest one is one
//!   step from entering its zone, and retiring finished simulations bounds
//!   the total work by twice the solo run.
//! * [`usualinc_regularize`] — budgets grow polynomially in the number of
//!   emitted solutions, regularizing machines whose incremental time is
//!   `t^(a+1) p`.

mod adaptive;
mod geometric;
mod queue;

pub use adaptive::{adaptive_regularize, c_epsilon};
pub use geometric::{geometric_regularize, geometric_regularize_dynamic, usualinc_regularize};
pub use queue::queue_regularize;

use thiserror::Error;

use crate::machine::{Machine, MachineError, SnapshotMode};
use crate::metrics::{DelayProfile, Ledger, MetricsError, Ratio, RunStats, SpaceProfile};

/// Arithmetic backing for the adaptive pull test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ArithmeticMode {
    /// Evaluate the pull threshold with exact integer arithmetic.
    Exact,
    /// Replace the threshold by the most-significant-bit inequality over
    /// Gray-code counters, trading a constant factor for O(1) comparisons.
    Mbit,
}

/// Knobs shared by the regularizers. Each procedure reads the fields it
/// needs and ignores the rest.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegularizerConfig {
    /// Incremental delay bound `p`, in move-units.
    pub incremental_delay: u64,
    /// Adaptive mode exponent `eps > 0`.
    pub epsilon: Ratio,
    pub arithmetic_mode: ArithmeticMode,
    /// Upper bound on the number of solutions, for the geometric variants
    /// that need one.
    pub solution_count_bound: Option<u64>,
    /// Exponent `a` of the polynomial-budget variant.
    pub exponent_a: u32,
    /// Remove simulations that have exhausted their zones.
    pub retire_machines: bool,
    /// How the dynamic variant duplicates simulations.
    pub snapshot_mode: SnapshotMode,
    /// Run the first simulation to its first emission before amortization
    /// starts and rebase every zone past that point; for machines with
    /// preprocessing longer than their incremental delay.
    pub preprocess_to_first: bool,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        RegularizerConfig {
            incremental_delay: 1,
            epsilon: Ratio::from_int(1),
            arithmetic_mode: ArithmeticMode::Exact,
            solution_count_bound: None,
            exponent_a: 0,
            retire_machines: false,
            snapshot_mode: SnapshotMode::Lazy,
            preprocess_to_first: false,
        }
    }
}

impl RegularizerConfig {
    pub fn with_p(p: u64) -> Self {
        RegularizerConfig {
            incremental_delay: p,
            ..Default::default()
        }
    }

    pub fn solution_bound(mut self, s: u64) -> Self {
        self.solution_count_bound = Some(s);
        self
    }

    pub fn epsilon(mut self, num: u64, den: u64) -> Self {
        self.epsilon = Ratio::new(num, den);
        self
    }

    pub fn mbit_arithmetic(mut self) -> Self {
        self.arithmetic_mode = ArithmeticMode::Mbit;
        self
    }

    pub fn exponent(mut self, a: u32) -> Self {
        self.exponent_a = a;
        self
    }

    pub fn retire(mut self, yes: bool) -> Self {
        self.retire_machines = yes;
        self
    }

    pub fn snapshot(mut self, mode: SnapshotMode) -> Self {
        self.snapshot_mode = mode;
        self
    }

    pub fn preprocess(mut self, yes: bool) -> Self {
        self.preprocess_to_first = yes;
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmortizeError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid regularizer configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("this regularizer requires a solution count bound")]
    MissingSolutionBound,
    #[error("incremental-delay bound violated: queue empty at the pull scheduled at move {step}")]
    DelayBoundViolated { step: u64 },
    #[error("internal invariant failure: adaptive queue empty at move {step}")]
    QueueInvariantBroken { step: u64 },
    #[error("machine emitted {seen} solutions, exceeding the declared bound {bound}")]
    SolutionBoundExceeded { bound: u64, seen: u64 },
    #[error("solution at step {step} lies past the covered horizon {horizon}")]
    CoverageMissed { step: u64, horizon: u64 },
    #[error("progress invariant broken: {detail}")]
    ProgressInvariantBroken { detail: String },
}

/// Everything a regularized run produces: the emitted solutions in order,
/// the two profiles, and run totals.
#[derive(Debug, Clone)]
pub struct RegularizedRun<S> {
    pub solutions: Vec<S>,
    pub delay: DelayProfile,
    pub space: SpaceProfile,
    pub stats: RunStats,
}

/// Drive a machine to completion with no regularization, recording its
/// native emission schedule; the baseline every regularizer is compared to.
pub fn run_solo<M: Machine>(mut machine: M) -> Result<RegularizedRun<M::Solution>, AmortizeError> {
    let mut ledger = Ledger::new();
    ledger.record_simulation_created();
    ledger.record_live_simulations(1);
    let mut solutions = Vec::new();
    while !machine.is_done() {
        let sol = machine.step()?;
        ledger.record_move();
        ledger.record_register_cells(machine.state_cells());
        if let Some(s) = sol {
            solutions.push(s);
            ledger.record_emit();
        }
    }
    ledger.set_final_simulations(1);
    ledger.mark_finished();
    let (delay, space, stats) = ledger.finalize()?;
    Ok(RegularizedRun {
        solutions,
        delay,
        space,
        stats,
    })
}
