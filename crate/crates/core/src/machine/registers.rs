//! Register storage strategies and lazy state copies.
//!
//! Three layouts back a [`RegisterFile`]:
//!
//! * `Flat` — one contiguous array, grown on access; the layout used when a
//!   space bound is known up front.
//! * `GeometricChunks(C)` — a list of arrays where chunk `k` holds `C^k`
//!   cells; resolving register `t` walks the list, time `O(log t / log C)`,
//!   total allocation at most `C` times the high-water mark.
//! * `ChunkDirectory` — an array of arrays where chunk `k` holds `2^k`
//!   cells and `k` is the most significant bit of `t + 1`, found by binary
//!   search in a precomputed powers table; constant-ish access time with no
//!   multiplicative space overhead.
//!
//! All strategies read unaccessed cells as zero and are semantically
//! interchangeable.
//!
//! A lazy copy links two register files through shared flags: reads of
//! uncopied destination cells and writes to source cells materialize the
//! destination cell first, and every destination step advances a sweep cursor
//! by one cell, so the copy finishes within `m` destination steps for an
//! `m`-cell source. Destination reads always observe exactly what an eager
//! copy at initiation time would have produced.

use std::cell::RefCell;
use std::rc::Rc;

use super::SnapshotMode;

/// Which layout a register file uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StorageStrategy {
    Flat,
    /// Chunk `k` holds `C^k` cells; the parameter is `C >= 2`.
    GeometricChunks(u32),
    ChunkDirectory,
}

const DIRECTORY_SIZE: usize = 64;

#[derive(Debug, Clone)]
enum Store {
    Flat(Vec<u64>),
    Chunks {
        base: u64,
        chunks: Vec<Vec<u64>>,
    },
    Directory {
        powers: [u64; DIRECTORY_SIZE],
        chunks: Vec<Option<Box<[u64]>>>,
    },
}

impl Store {
    fn new(strategy: StorageStrategy) -> Self {
        match strategy {
            StorageStrategy::Flat => Store::Flat(Vec::new()),
            StorageStrategy::GeometricChunks(c) => {
                assert!(c >= 2, "chunk base must be at least 2");
                Store::Chunks {
                    base: c as u64,
                    chunks: Vec::new(),
                }
            }
            StorageStrategy::ChunkDirectory => {
                let mut powers = [0u64; DIRECTORY_SIZE];
                for (k, p) in powers.iter_mut().enumerate() {
                    *p = 1u64 << k;
                }
                Store::Directory {
                    powers,
                    chunks: vec![None; DIRECTORY_SIZE],
                }
            }
        }
    }

    fn read(&self, index: u64) -> u64 {
        match self {
            Store::Flat(cells) => cells.get(index as usize).copied().unwrap_or(0),
            Store::Chunks { base, chunks } => {
                let (k, r) = resolve_chunk(*base, index);
                chunks
                    .get(k)
                    .and_then(|c| c.get(r as usize))
                    .copied()
                    .unwrap_or(0)
            }
            Store::Directory { powers, chunks } => {
                let (k, r) = resolve_directory(powers, index);
                chunks[k]
                    .as_ref()
                    .map(|c| c[r as usize])
                    .unwrap_or(0)
            }
        }
    }

    fn write(&mut self, index: u64, value: u64) {
        match self {
            Store::Flat(cells) => {
                if index as usize >= cells.len() {
                    cells.resize(index as usize + 1, 0);
                }
                cells[index as usize] = value;
            }
            Store::Chunks { base, chunks } => {
                let (k, r) = resolve_chunk(*base, index);
                while chunks.len() <= k {
                    let size = (*base as u128).pow(chunks.len() as u32);
                    chunks.push(vec![0; size as usize]);
                }
                chunks[k][r as usize] = value;
            }
            Store::Directory { powers, chunks } => {
                let (k, r) = resolve_directory(powers, index);
                let chunk = chunks[k].get_or_insert_with(|| {
                    vec![0u64; 1usize << k].into_boxed_slice()
                });
                chunk[r as usize] = value;
            }
        }
    }

    /// Cells currently allocated.
    fn cells(&self) -> u64 {
        match self {
            Store::Flat(cells) => cells.len() as u64,
            Store::Chunks { chunks, .. } => chunks.iter().map(|c| c.len() as u64).sum(),
            Store::Directory { chunks, .. } => chunks
                .iter()
                .map(|c| c.as_ref().map_or(0, |c| c.len() as u64))
                .sum(),
        }
    }
}

/// Chunk/offset for register `t` under geometric chunks: the unique `(k, r)`
/// with `t = r + sum_{i<k} C^i` and `r < C^k`, found by walking the list.
pub fn resolve_chunk(base: u64, t: u64) -> (usize, u64) {
    let mut k = 0usize;
    let mut below = 0u128;
    let mut size = 1u128;
    loop {
        if (t as u128) < below + size {
            return (k, t - below as u64);
        }
        below += size;
        size *= base as u128;
        k += 1;
    }
}

/// Chunk/offset under the directory layout, via a freshly built powers
/// table.
pub fn resolve_directory_chunk(t: u64) -> (usize, u64) {
    let mut powers = [0u64; DIRECTORY_SIZE];
    for (k, p) in powers.iter_mut().enumerate() {
        *p = 1u64 << k;
    }
    resolve_directory(&powers, t)
}

/// Chunk/offset under the directory layout: chunk `k` is the position of the
/// most significant bit of `t + 1`, located by dichotomy in the powers table.
pub(crate) fn resolve_directory(powers: &[u64; DIRECTORY_SIZE], t: u64) -> (usize, u64) {
    let v = t + 1;
    let mut lo = 0usize;
    let mut hi = DIRECTORY_SIZE - 1;
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if powers[mid] <= v {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    (lo, v - powers[lo])
}

/// Shared state of one in-flight lazy copy.
#[derive(Debug)]
struct LazyLink {
    src: Option<Store>,
    dst: Option<Store>,
    /// Materialization flags for cells `0..len`.
    copied: Vec<bool>,
    /// Sweep cursor; advanced one cell per destination step.
    cursor: u64,
    /// Cells not yet materialized.
    remaining: u64,
    len: u64,
    /// Flag reads/writes performed while the link is active, for the
    /// constant-overhead checks.
    flag_ops: u64,
}

impl LazyLink {
    fn materialize(&mut self, index: u64) {
        if index < self.len {
            self.flag_ops += 1;
            if !self.copied[index as usize] {
                let v = self.src.as_ref().expect("src present while linked").read(index);
                self.dst.as_mut().expect("dst present while linked").write(index, v);
                self.copied[index as usize] = true;
                self.remaining -= 1;
            }
        }
    }

    /// Mark a cell as materialized without copying (it is about to be
    /// overwritten by the destination).
    fn mark(&mut self, index: u64) {
        if index < self.len {
            self.flag_ops += 1;
            if !self.copied[index as usize] {
                self.copied[index as usize] = true;
                self.remaining -= 1;
            }
        }
    }

    fn finish(&mut self) -> u64 {
        let forced = self.remaining;
        while self.cursor < self.len {
            self.materialize(self.cursor);
            self.cursor += 1;
        }
        debug_assert_eq!(self.remaining, 0);
        forced
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Source,
    Copy,
}

#[derive(Debug)]
enum Slot {
    Owned(Store),
    Linked(Rc<RefCell<LazyLink>>, Role),
}

/// Register storage with a strategy tag, a high-water mark of accessed
/// indices, and optional participation in one lazy copy.
#[derive(Debug)]
pub struct RegisterFile {
    slot: Slot,
    strategy: StorageStrategy,
    high_water: u64,
}

impl RegisterFile {
    pub fn new(strategy: StorageStrategy) -> Self {
        RegisterFile {
            slot: Slot::Owned(Store::new(strategy)),
            strategy,
            high_water: 0,
        }
    }

    pub fn strategy(&self) -> StorageStrategy {
        self.strategy
    }

    /// Highest register index accessed plus one.
    pub fn high_water(&self) -> u64 {
        self.high_water
    }

    pub fn read(&mut self, index: u64) -> u64 {
        self.touch(index);
        self.reclaim_if_done();
        match &mut self.slot {
            Slot::Owned(store) => store.read(index),
            Slot::Linked(link, Role::Source) => {
                link.borrow().src.as_ref().expect("linked source").read(index)
            }
            Slot::Linked(link, Role::Copy) => {
                let mut link = link.borrow_mut();
                link.materialize(index);
                link.dst.as_ref().expect("linked copy").read(index)
            }
        }
    }

    pub fn write(&mut self, index: u64, value: u64) {
        self.touch(index);
        self.reclaim_if_done();
        match &mut self.slot {
            Slot::Owned(store) => store.write(index, value),
            Slot::Linked(link, Role::Source) => {
                let mut link = link.borrow_mut();
                // Preserve the snapshot value in the copy before clobbering.
                link.materialize(index);
                link.src.as_mut().expect("linked source").write(index, value);
            }
            Slot::Linked(link, Role::Copy) => {
                let mut link = link.borrow_mut();
                link.mark(index);
                link.dst.as_mut().expect("linked copy").write(index, value);
            }
        }
    }

    /// Advance the background sweep by one cell. Called once per step by
    /// machines that own a lazy copy; a no-op otherwise.
    pub fn sweep_step(&mut self) {
        if let Slot::Linked(link, Role::Copy) = &mut self.slot {
            let mut l = link.borrow_mut();
            if l.cursor < l.len {
                let at = l.cursor;
                l.materialize(at);
                l.cursor += 1;
            }
        }
        self.reclaim_if_done();
    }

    /// Whether this file is the copy side of a still-materializing link.
    pub fn lazy_active(&self) -> bool {
        match &self.slot {
            Slot::Linked(link, Role::Copy) => link.borrow().remaining > 0,
            _ => false,
        }
    }

    /// Flag operations performed by the link this file participates in.
    pub fn lazy_flag_ops(&self) -> u64 {
        match &self.slot {
            Slot::Linked(link, _) => link.borrow().flag_ops,
            _ => 0,
        }
    }

    /// Allocated cells attributable to this file.
    pub fn cells(&self) -> u64 {
        match &self.slot {
            Slot::Owned(store) => store.cells(),
            Slot::Linked(link, role) => {
                let l = link.borrow();
                let store = match role {
                    Role::Source => l.src.as_ref(),
                    Role::Copy => l.dst.as_ref(),
                };
                store.map_or(0, |s| s.cells())
            }
        }
    }

    /// Duplicate this file. Returns the copy and the number of cells copied
    /// eagerly. Any copy already in flight on this file is finished first
    /// (its forced cells are included in the count).
    pub fn snapshot(&mut self, mode: SnapshotMode) -> (RegisterFile, u64) {
        let mut forced = self.force_reclaim();
        match mode {
            SnapshotMode::Eager => {
                let store = match &self.slot {
                    Slot::Owned(store) => store.clone(),
                    Slot::Linked(..) => unreachable!("reclaimed above"),
                };
                forced += store.cells();
                (
                    RegisterFile {
                        slot: Slot::Owned(store),
                        strategy: self.strategy,
                        high_water: self.high_water,
                    },
                    forced,
                )
            }
            SnapshotMode::Lazy => {
                let len = self.high_water;
                if len == 0 {
                    return (RegisterFile::new(self.strategy), forced);
                }
                let src = match std::mem::replace(&mut self.slot, Slot::Owned(Store::new(self.strategy))) {
                    Slot::Owned(store) => store,
                    Slot::Linked(..) => unreachable!("reclaimed above"),
                };
                let link = Rc::new(RefCell::new(LazyLink {
                    src: Some(src),
                    dst: Some(Store::new(self.strategy)),
                    copied: vec![false; len as usize],
                    cursor: 0,
                    remaining: len,
                    len,
                    flag_ops: 0,
                }));
                self.slot = Slot::Linked(Rc::clone(&link), Role::Source);
                (
                    RegisterFile {
                        slot: Slot::Linked(link, Role::Copy),
                        strategy: self.strategy,
                        high_water: self.high_water,
                    },
                    forced,
                )
            }
        }
    }

    fn touch(&mut self, index: u64) {
        if index + 1 > self.high_water {
            self.high_water = index + 1;
        }
    }

    /// Take the store back out of a finished link.
    fn reclaim_if_done(&mut self) {
        if let Slot::Linked(link, role) = &self.slot {
            let done = link.borrow().remaining == 0;
            if done {
                let mut l = link.borrow_mut();
                let store = match role {
                    Role::Source => l.src.take(),
                    Role::Copy => l.dst.take(),
                };
                drop(l);
                self.slot = Slot::Owned(store.expect("store reclaimed twice"));
            }
        }
    }

    /// Finish any in-flight link this file participates in and reclaim.
    /// Returns the number of cells the finish forced.
    fn force_reclaim(&mut self) -> u64 {
        let forced = if let Slot::Linked(link, _) = &self.slot {
            link.borrow_mut().finish()
        } else {
            0
        };
        self.reclaim_if_done();
        forced
    }
}
