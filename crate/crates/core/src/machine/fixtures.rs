//! Deterministic emission-schedule machines for exercising the amortizers.
//!
//! Four families:
//!
//! * `bursty(s, d)` — `s` solutions in the first `s` steps, then nothing for
//!   `d*s` steps, then the final solution; incremental delay at most `d + 1`.
//! * `adversary(s, t)` — `s` solutions in the first `s` steps, the last one
//!   at step `t`; the family whose delay no black-box regularizer can match
//!   without knowing the schedule.
//! * `uniform(s, p)` — one solution every `p` steps, `s` of them.
//! * `scripted(gaps)` — solution `i` arrives `gaps[i]` steps after the
//!   previous one; the script ends with an emission.
//!
//! Every fixture stops exactly at the step emitting its last solution, and
//! solutions are the 1-based emission index.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{Machine, MachineError, SnapshotMachine, SnapshotMode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureSpec {
    Bursty { solutions: u64, stretch: u64 },
    Adversary { solutions: u64, total: u64 },
    Uniform { solutions: u64, spacing: u64 },
    Scripted { gaps: Vec<u64> },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixtureError {
    #[error("fixture parameter {name} must be positive")]
    NonPositive { name: &'static str },
    #[error("adversary total time {total} must exceed its first burst of {solutions} solutions")]
    TotalTooSmall { solutions: u64, total: u64 },
    #[error("scripted fixture needs at least one gap")]
    EmptyScript,
    #[error("cannot parse fixture spec {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let positive = |v: u64, name: &'static str| {
            if v == 0 {
                Err(FixtureError::NonPositive { name })
            } else {
                Ok(())
            }
        };
        match self {
            FixtureSpec::Bursty { solutions, stretch } => {
                positive(*solutions, "s")?;
                positive(*stretch, "d")
            }
            FixtureSpec::Adversary { solutions, total } => {
                positive(*solutions, "s")?;
                positive(*total, "t")?;
                if *total <= *solutions {
                    return Err(FixtureError::TotalTooSmall {
                        solutions: *solutions,
                        total: *total,
                    });
                }
                Ok(())
            }
            FixtureSpec::Uniform { solutions, spacing } => {
                positive(*solutions, "s")?;
                positive(*spacing, "p")
            }
            FixtureSpec::Scripted { gaps } => {
                if gaps.is_empty() {
                    return Err(FixtureError::EmptyScript);
                }
                for g in gaps {
                    positive(*g, "gap")?;
                }
                Ok(())
            }
        }
    }

    /// Steps at which solutions are emitted, in order.
    pub fn emission_steps(&self) -> Vec<u64> {
        match self {
            FixtureSpec::Bursty { solutions, stretch } => {
                let mut steps: Vec<u64> = (1..=*solutions).collect();
                steps.push(solutions * (stretch + 1) + 1);
                steps
            }
            FixtureSpec::Adversary { solutions, total } => {
                let mut steps: Vec<u64> = (1..=*solutions).collect();
                steps.push(*total);
                steps
            }
            FixtureSpec::Uniform { solutions, spacing } => {
                (1..=*solutions).map(|i| i * spacing).collect()
            }
            FixtureSpec::Scripted { gaps } => {
                let mut at = 0;
                gaps.iter()
                    .map(|g| {
                        at += g;
                        at
                    })
                    .collect()
            }
        }
    }

    pub fn solution_count(&self) -> u64 {
        match self {
            FixtureSpec::Bursty { solutions, .. } | FixtureSpec::Adversary { solutions, .. } => {
                solutions + 1
            }
            FixtureSpec::Uniform { solutions, .. } => *solutions,
            FixtureSpec::Scripted { gaps } => gaps.len() as u64,
        }
    }

    /// Build the machine for this schedule.
    pub fn machine(&self) -> Result<FixtureMachine, FixtureError> {
        self.validate()?;
        Ok(FixtureMachine {
            schedule: self.emission_steps(),
            steps: 0,
            next: 0,
            done: false,
            last: None,
        })
    }
}

impl fmt::Display for FixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureSpec::Bursty { solutions, stretch } => write!(f, "bursty:{solutions},{stretch}"),
            FixtureSpec::Adversary { solutions, total } => {
                write!(f, "adversary:{solutions},{total}")
            }
            FixtureSpec::Uniform { solutions, spacing } => {
                write!(f, "uniform:{solutions},{spacing}")
            }
            FixtureSpec::Scripted { gaps } => {
                write!(f, "scripted:")?;
                for (i, g) in gaps.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{g}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for FixtureSpec {
    type Err = FixtureError;

    /// Strict `family:arg,arg` grammar, e.g. `bursty:8,3` or `scripted:1,1,5`.
    fn from_str(s: &str) -> Result<Self, FixtureError> {
        let parse_err = |reason: &str| FixtureError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let (family, args) = s
            .split_once(':')
            .ok_or_else(|| parse_err("expected family:args"))?;
        let nums: Result<Vec<u64>, _> = args.split(',').map(|a| a.trim().parse::<u64>()).collect();
        let nums = nums.map_err(|e| parse_err(&format!("bad number: {e}")))?;
        let spec = match (family, nums.len()) {
            ("bursty", 2) => FixtureSpec::Bursty {
                solutions: nums[0],
                stretch: nums[1],
            },
            ("adversary", 2) => FixtureSpec::Adversary {
                solutions: nums[0],
                total: nums[1],
            },
            ("uniform", 2) => FixtureSpec::Uniform {
                solutions: nums[0],
                spacing: nums[1],
            },
            ("scripted", n) if n >= 1 => FixtureSpec::Scripted { gaps: nums },
            ("bursty" | "adversary" | "uniform", _) => {
                return Err(parse_err("family takes exactly two arguments"))
            }
            _ => return Err(parse_err("unknown family")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A machine that replays a fixed emission schedule; solutions are the
/// 1-based emission index.
#[derive(Debug, Clone)]
pub struct FixtureMachine {
    schedule: Vec<u64>,
    steps: u64,
    next: usize,
    done: bool,
    last: Option<u64>,
}

impl FixtureMachine {
    pub fn total_steps(&self) -> u64 {
        *self.schedule.last().expect("validated non-empty schedule")
    }
}

impl Machine for FixtureMachine {
    type Solution = u64;

    fn step(&mut self) -> Result<Option<u64>, MachineError> {
        if self.done {
            return Err(MachineError::StepAfterDone { steps: self.steps });
        }
        self.steps += 1;
        self.last = None;
        if self.schedule[self.next] == self.steps {
            self.next += 1;
            self.last = Some(self.next as u64);
            if self.next == self.schedule.len() {
                self.done = true;
            }
            return Ok(Some(self.next as u64));
        }
        Ok(None)
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn last_solution(&self) -> Option<&u64> {
        self.last.as_ref()
    }

    fn state_cells(&self) -> u64 {
        // Schedule parameters and the two counters; nominal constant.
        4
    }
}

impl SnapshotMachine for FixtureMachine {
    fn snapshot(&mut self, mode: SnapshotMode) -> Result<(Self, u64), MachineError> {
        let copied = match mode {
            SnapshotMode::Eager => self.state_cells(),
            // Constant-size configuration; the clone itself is the O(1) copy.
            SnapshotMode::Lazy => 0,
        };
        Ok((self.clone(), copied))
    }
}
