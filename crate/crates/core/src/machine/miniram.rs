//! A small register-machine interpreter implementing [`Machine`].
//!
//! Eight instruction families: constant load, add, sub, mul,
//! compare-and-branch, indirect load/store, output-range and halt. All
//! arithmetic is wrapping on 64-bit words. The input word vector is placed in
//! registers `0..input.len()` at load time; every other register reads as
//! zero. Execution also terminates when the program counter falls off the end
//! of the instruction list, which lets a program stop on the very step that
//! emits its last solution.

use std::rc::Rc;

use thiserror::Error;

use super::registers::{RegisterFile, StorageStrategy};
use super::{Machine, MachineError, SnapshotMachine, SnapshotMode};

/// Ceiling on indirect register addresses; indirection through a larger
/// value is a runtime error rather than an allocation request.
pub const MAX_INDIRECT_ADDRESS: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    /// `dst <- value`
    LoadImm { dst: u32, value: u64 },
    /// `dst <- a + b` (wrapping)
    Add { dst: u32, a: u32, b: u32 },
    /// `dst <- a - b` (wrapping)
    Sub { dst: u32, a: u32, b: u32 },
    /// `dst <- a * b` (wrapping)
    Mul { dst: u32, a: u32, b: u32 },
    /// Jump to `target` when `R[a] <= R[b]`.
    BranchLe { a: u32, b: u32, target: u32 },
    /// `dst <- R[R[addr]]`
    LoadInd { dst: u32, addr: u32 },
    /// `R[R[addr]] <- R[src]`
    StoreInd { addr: u32, src: u32 },
    /// Emit the concatenation of registers `from..=to`.
    Output { from: u32, to: u32 },
    Halt,
}

/// Instruction list; pair it with an input vector at load time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniRamProgram {
    pub instrs: Vec<Instr>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LoadError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("instruction {index}: {reason}")]
    BadInstruction { index: usize, reason: String },
}

impl MiniRamProgram {
    pub fn new(instrs: Vec<Instr>) -> Result<Self, LoadError> {
        let p = MiniRamProgram { instrs };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), LoadError> {
        for (index, instr) in self.instrs.iter().enumerate() {
            match *instr {
                Instr::BranchLe { target, .. } => {
                    // Branching to one past the end is an explicit stop.
                    if target as usize > self.instrs.len() {
                        return Err(LoadError::BadInstruction {
                            index,
                            reason: format!("branch target {target} out of range"),
                        });
                    }
                }
                Instr::Output { from, to } if from > to => {
                    return Err(LoadError::BadInstruction {
                        index,
                        reason: format!("output range {from}..{to} is reversed"),
                    });
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A loaded program configuration: registers, program counter, step count.
#[derive(Debug)]
pub struct MiniRam {
    program: Rc<MiniRamProgram>,
    regs: RegisterFile,
    pc: usize,
    steps: u64,
    done: bool,
    last: Option<Vec<u64>>,
}

impl MiniRam {
    /// Load a program with its input word vector under the given storage
    /// strategy. The machine starts at step 0 with no solution emitted and
    /// the input occupying registers `0..input.len()`.
    pub fn load(
        program: &Rc<MiniRamProgram>,
        input: &[u64],
        storage: StorageStrategy,
    ) -> Result<MiniRam, LoadError> {
        program.validate()?;
        let mut regs = RegisterFile::new(storage);
        for (i, &w) in input.iter().enumerate() {
            regs.write(i as u64, w);
        }
        Ok(MiniRam {
            program: Rc::clone(program),
            regs,
            pc: 0,
            steps: 0,
            done: false,
            last: None,
        })
    }

    pub fn registers(&mut self) -> &mut RegisterFile {
        &mut self.regs
    }
}

impl Machine for MiniRam {
    type Solution = Vec<u64>;

    fn step(&mut self) -> Result<Option<Vec<u64>>, MachineError> {
        if self.done {
            return Err(MachineError::StepAfterDone { steps: self.steps });
        }
        self.last = None;
        let instr = self.program.instrs[self.pc];
        let mut next_pc = self.pc + 1;
        let mut emitted = None;
        match instr {
            Instr::LoadImm { dst, value } => self.regs.write(dst as u64, value),
            Instr::Add { dst, a, b } => {
                let v = self.regs.read(a as u64).wrapping_add(self.regs.read(b as u64));
                self.regs.write(dst as u64, v);
            }
            Instr::Sub { dst, a, b } => {
                let v = self.regs.read(a as u64).wrapping_sub(self.regs.read(b as u64));
                self.regs.write(dst as u64, v);
            }
            Instr::Mul { dst, a, b } => {
                let v = self.regs.read(a as u64).wrapping_mul(self.regs.read(b as u64));
                self.regs.write(dst as u64, v);
            }
            Instr::BranchLe { a, b, target } => {
                if self.regs.read(a as u64) <= self.regs.read(b as u64) {
                    next_pc = target as usize;
                }
            }
            Instr::LoadInd { dst, addr } => {
                let at = self.regs.read(addr as u64);
                if at > MAX_INDIRECT_ADDRESS {
                    return Err(MachineError::AddressOutOfRange {
                        index: at,
                        step: self.steps,
                    });
                }
                let v = self.regs.read(at);
                self.regs.write(dst as u64, v);
            }
            Instr::StoreInd { addr, src } => {
                let at = self.regs.read(addr as u64);
                if at > MAX_INDIRECT_ADDRESS {
                    return Err(MachineError::AddressOutOfRange {
                        index: at,
                        step: self.steps,
                    });
                }
                let v = self.regs.read(src as u64);
                self.regs.write(at, v);
            }
            Instr::Output { from, to } => {
                let sol: Vec<u64> = (from..=to).map(|r| self.regs.read(r as u64)).collect();
                self.last = Some(sol.clone());
                emitted = Some(sol);
            }
            Instr::Halt => {
                self.done = true;
            }
        }
        self.steps += 1;
        self.pc = next_pc;
        if self.pc >= self.program.instrs.len() {
            self.done = true;
        }
        // Drive the background sweep of an in-flight lazy copy.
        self.regs.sweep_step();
        Ok(emitted)
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn last_solution(&self) -> Option<&Vec<u64>> {
        self.last.as_ref()
    }

    fn state_cells(&self) -> u64 {
        // Registers plus program counter and step counter.
        self.regs.cells() + 2
    }

    fn lazy_copy_active(&self) -> bool {
        self.regs.lazy_active()
    }
}

impl SnapshotMachine for MiniRam {
    fn snapshot(&mut self, mode: SnapshotMode) -> Result<(Self, u64), MachineError> {
        let (regs, copied) = self.regs.snapshot(mode);
        Ok((
            MiniRam {
                program: Rc::clone(&self.program),
                regs,
                pc: self.pc,
                steps: self.steps,
                done: self.done,
                last: self.last.clone(),
            },
            copied,
        ))
    }
}
