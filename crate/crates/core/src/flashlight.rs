//! Binary-partition (flashlight) search over set-valued solutions.
//!
//! The traversal explores the tree of partial solutions `(a, b)` with
//! `a ⊆ b`: a node promises every solution `y` with `a ⊆ y ⊆ b`. At each
//! internal node an element `u` of `b \ a` is selected and the include
//! branch `(a ∪ {u}, b)` is explored before the exclude branch
//! `(a, b \ {u})`, each only after the extension oracle confirms the branch
//! contains a solution. Leaves have `a = b` and are exactly the solution
//! set, emitted without repetition.
//!
//! The traversal is itself a [`Machine`]: one step is one move-unit, namely
//! one oracle call, one node push (leaves emit at their push) or one node
//! pop. Root-to-leaf work is tracked as the running sum of the move-units
//! attributed to the frames on the current path, whose maximum is the
//! measured path time.
//!
//! [`HybridMachine`] converts a traversal into an enumerator whose
//! incremental delay tracks the traversal's average delay: the traversal
//! runs for a path-time budget of steps with every found solution buffered,
//! then each further step advances the traversal once and emits one buffered
//! solution, draining the queue one per step when the traversal ends.

use std::collections::VecDeque;

use crate::bitset::BitSet;
use crate::machine::{Machine, MachineError, SnapshotMachine, SnapshotMode};

/// The flashlight search node: everything in `fixed` is in, everything
/// outside `allowed` is out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSolution {
    pub fixed: BitSet,
    pub allowed: BitSet,
}

impl PartialSolution {
    pub fn root(universe: usize) -> Self {
        PartialSolution {
            fixed: BitSet::empty(universe),
            allowed: BitSet::full(universe),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.fixed == self.allowed
    }
}

/// A problem solvable by flashlight search: a universe, an extension oracle,
/// and (optionally) a branching-element selector.
pub trait FlashlightProblem {
    fn universe_size(&self) -> usize;

    /// `ext(a, b)`: does some solution `y` satisfy `a ⊆ y ⊆ b`?
    fn extends(&self, node: &PartialSolution) -> bool;

    /// Element of `allowed \ fixed` to branch on; lowest index by default.
    fn select_branch(&self, node: &PartialSolution) -> Option<usize> {
        node.allowed.first_not_in(&node.fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    NeedIncludeTest,
    AwaitIncludeChild,
    NeedExcludeTest,
    AwaitExcludeChild,
    NeedPop,
}

#[derive(Debug, Clone)]
struct Frame {
    node: PartialSolution,
    branch: usize,
    stage: Stage,
    /// Move-units attributed to this node: its push, its oracle calls, its
    /// pop.
    own_mu: u64,
    /// Whether some confirmed child subtree hangs below this node.
    found_child: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Cursor {
    TestRoot,
    Push(PartialSolution),
    Advance,
}

/// Steppable depth-first flashlight traversal.
#[derive(Debug, Clone)]
pub struct FlashlightMachine<P> {
    problem: P,
    stack: Vec<Frame>,
    cursor: Cursor,
    steps: u64,
    done: bool,
    last: Option<BitSet>,
    emitted: u64,
    path_mu: u64,
    max_path_mu: u64,
}

impl<P: FlashlightProblem> FlashlightMachine<P> {
    pub fn new(problem: P) -> Self {
        FlashlightMachine {
            problem,
            stack: Vec::new(),
            cursor: Cursor::TestRoot,
            steps: 0,
            done: false,
            last: None,
            emitted: 0,
            path_mu: 0,
            max_path_mu: 0,
        }
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Largest root-to-node work observed so far, in move-units.
    pub fn max_path_mu(&self) -> u64 {
        self.max_path_mu
    }

    /// At any pause point, every sibling subtree branched away from the
    /// current root-to-node path is either fully enumerated or untouched:
    /// each stacked frame below the path tip must be awaiting exactly one
    /// child. The tip is the top frame, or the not-yet-pushed node held by
    /// the cursor.
    pub fn pause_point_consistent(&self) -> bool {
        if self.stack.is_empty() {
            return true;
        }
        let awaiting = |f: &Frame| {
            matches!(f.stage, Stage::AwaitIncludeChild | Stage::AwaitExcludeChild)
        };
        let interior_ok = self.stack[..self.stack.len() - 1].iter().all(awaiting);
        let top_ok = if matches!(self.cursor, Cursor::Push(_)) {
            awaiting(self.stack.last().unwrap())
        } else {
            !awaiting(self.stack.last().unwrap())
        };
        interior_ok && top_ok
    }

    fn charge_top(&mut self) {
        if let Some(top) = self.stack.last_mut() {
            top.own_mu += 1;
        }
        self.path_mu += 1;
        if self.path_mu > self.max_path_mu {
            self.max_path_mu = self.path_mu;
        }
    }
}

impl<P: FlashlightProblem> Machine for FlashlightMachine<P> {
    type Solution = BitSet;

    fn step(&mut self) -> Result<Option<BitSet>, MachineError> {
        if self.done {
            return Err(MachineError::StepAfterDone { steps: self.steps });
        }
        self.steps += 1;
        self.last = None;
        match std::mem::replace(&mut self.cursor, Cursor::Advance) {
            Cursor::TestRoot => {
                let root = PartialSolution::root(self.problem.universe_size());
                self.path_mu += 1;
                if self.path_mu > self.max_path_mu {
                    self.max_path_mu = self.path_mu;
                }
                if self.problem.extends(&root) {
                    self.cursor = Cursor::Push(root);
                } else {
                    self.done = true;
                }
                Ok(None)
            }
            Cursor::Push(node) => {
                let leaf = node.is_leaf();
                let branch = if leaf {
                    0
                } else {
                    self.problem
                        .select_branch(&node)
                        .expect("non-leaf node has a branching element")
                };
                let emitted = if leaf { Some(node.fixed.clone()) } else { None };
                self.stack.push(Frame {
                    node,
                    branch,
                    stage: if leaf { Stage::NeedPop } else { Stage::NeedIncludeTest },
                    own_mu: 0,
                    found_child: false,
                });
                self.charge_top();
                if let Some(sol) = emitted {
                    self.emitted += 1;
                    self.last = Some(sol.clone());
                    return Ok(Some(sol));
                }
                Ok(None)
            }
            Cursor::Advance => {
                let depth = self.stack.len();
                let top = self.stack.last_mut().expect("advance with empty stack");
                match top.stage {
                    Stage::NeedIncludeTest => {
                        let child = PartialSolution {
                            fixed: top.node.fixed.with(top.branch),
                            allowed: top.node.allowed.clone(),
                        };
                        self.charge_top();
                        if self.problem.extends(&child) {
                            let top = self.stack.last_mut().unwrap();
                            top.stage = Stage::AwaitIncludeChild;
                            top.found_child = true;
                            self.cursor = Cursor::Push(child);
                        } else {
                            self.stack.last_mut().unwrap().stage = Stage::NeedExcludeTest;
                        }
                        Ok(None)
                    }
                    Stage::NeedExcludeTest => {
                        let child = PartialSolution {
                            fixed: top.node.fixed.clone(),
                            allowed: top.node.allowed.without(top.branch),
                        };
                        self.charge_top();
                        if self.problem.extends(&child) {
                            let top = self.stack.last_mut().unwrap();
                            top.stage = Stage::AwaitExcludeChild;
                            top.found_child = true;
                            self.cursor = Cursor::Push(child);
                        } else {
                            let top = self.stack.last_mut().unwrap();
                            if !top.found_child {
                                // ext promised a solution below this node but
                                // both branches came back empty.
                                return Err(MachineError::OracleInconsistent { depth });
                            }
                            top.stage = Stage::NeedPop;
                        }
                        Ok(None)
                    }
                    Stage::NeedPop => {
                        self.charge_top();
                        let frame = self.stack.pop().unwrap();
                        self.path_mu -= frame.own_mu;
                        match self.stack.last_mut() {
                            None => self.done = true,
                            Some(parent) => {
                                parent.stage = match parent.stage {
                                    Stage::AwaitIncludeChild => Stage::NeedExcludeTest,
                                    Stage::AwaitExcludeChild => Stage::NeedPop,
                                    other => other,
                                };
                            }
                        }
                        Ok(None)
                    }
                    Stage::AwaitIncludeChild | Stage::AwaitExcludeChild => {
                        unreachable!("awaiting frames always have a child on the stack")
                    }
                }
            }
        }
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn last_solution(&self) -> Option<&BitSet> {
        self.last.as_ref()
    }

    fn state_cells(&self) -> u64 {
        let per_frame = 2 * BitSet::empty(self.problem.universe_size()).word_count() as u64 + 3;
        self.stack.len() as u64 * per_frame + 4
    }
}

impl<P: FlashlightProblem + Clone> SnapshotMachine for FlashlightMachine<P> {
    fn snapshot(&mut self, _mode: SnapshotMode) -> Result<(Self, u64), MachineError> {
        // Traversal state has no register file; both modes clone it whole.
        Ok((self.clone(), self.state_cells()))
    }
}

/// Summary of a solo traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlashlightRun {
    pub solutions: Vec<BitSet>,
    /// Move-unit position of each emission.
    pub emission_mu: Vec<u64>,
    pub total_mu: u64,
    pub mu_at_last_emission: u64,
    pub max_path_mu: u64,
}

impl FlashlightRun {
    /// `ceil(sup_i T(i) / i)`: the traversal's incremental delay, rounded up
    /// to a whole move count.
    pub fn incremental_sup_ceil(&self) -> u64 {
        self.emission_mu
            .iter()
            .enumerate()
            .map(|(i, &t)| t.div_ceil(i as u64 + 1))
            .max()
            .unwrap_or(0)
    }
}

/// Run a flashlight search to completion.
pub fn flashlight_enumerate<P: FlashlightProblem>(
    problem: P,
) -> Result<FlashlightRun, MachineError> {
    let mut m = FlashlightMachine::new(problem);
    let mut solutions = Vec::new();
    let mut emission_mu = Vec::new();
    while !m.is_done() {
        if let Some(s) = m.step()? {
            solutions.push(s);
            emission_mu.push(m.steps_taken());
        }
    }
    Ok(FlashlightRun {
        mu_at_last_emission: emission_mu.last().copied().unwrap_or(0),
        solutions,
        emission_mu,
        total_mu: m.steps_taken(),
        max_path_mu: m.max_path_mu(),
    })
}

/// An enumerator built from a flashlight traversal whose incremental delay
/// follows the traversal's average delay instead of its worst gap.
#[derive(Debug, Clone)]
pub struct HybridMachine<P> {
    inner: FlashlightMachine<P>,
    queue: VecDeque<BitSet>,
    preprocessing_left: u64,
    budget: u64,
    steps: u64,
    done: bool,
    last: Option<BitSet>,
}

impl<P: FlashlightProblem> HybridMachine<P> {
    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }
}

/// Wrap a flashlight problem with a path-time budget `p`: the traversal runs
/// `p` steps of preprocessing with solutions buffered, then emits at most
/// one buffered solution per step.
pub fn hybridize<P: FlashlightProblem>(problem: P, path_time_bound: u64) -> HybridMachine<P> {
    HybridMachine {
        inner: FlashlightMachine::new(problem),
        queue: VecDeque::new(),
        preprocessing_left: path_time_bound,
        budget: path_time_bound,
        steps: 0,
        done: false,
        last: None,
    }
}

impl<P: FlashlightProblem> Machine for HybridMachine<P> {
    type Solution = BitSet;

    fn step(&mut self) -> Result<Option<BitSet>, MachineError> {
        if self.done {
            return Err(MachineError::StepAfterDone { steps: self.steps });
        }
        self.steps += 1;
        self.last = None;
        if self.preprocessing_left > 0 {
            if let Some(s) = self.inner.step()? {
                self.queue.push_back(s);
            }
            self.preprocessing_left -= 1;
            if self.inner.is_done() {
                self.preprocessing_left = 0;
            } else if self.preprocessing_left == 0 && self.queue.is_empty() {
                // A solution lies within path-time of the root; an empty
                // queue after the budget means the bound understated it.
                return Err(MachineError::PreprocessingBudgetExceeded { budget: self.budget });
            }
            return Ok(None);
        }
        if !self.inner.is_done() {
            if let Some(s) = self.inner.step()? {
                self.queue.push_back(s);
            }
        }
        match self.queue.pop_front() {
            Some(s) => {
                if self.queue.is_empty() && self.inner.is_done() {
                    self.done = true;
                }
                self.last = Some(s.clone());
                Ok(Some(s))
            }
            None => {
                if self.inner.is_done() {
                    self.done = true;
                }
                Ok(None)
            }
        }
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn last_solution(&self) -> Option<&BitSet> {
        self.last.as_ref()
    }

    fn state_cells(&self) -> u64 {
        let words = BitSet::empty(self.inner.problem.universe_size()).word_count() as u64;
        self.inner.state_cells() + self.queue.len() as u64 * words + 2
    }
}

impl<P: FlashlightProblem + Clone> SnapshotMachine for HybridMachine<P> {
    fn snapshot(&mut self, _mode: SnapshotMode) -> Result<(Self, u64), MachineError> {
        Ok((self.clone(), self.state_cells()))
    }
}
