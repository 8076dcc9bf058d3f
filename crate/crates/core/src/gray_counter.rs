//! Unbounded counter with constant-time increment and constant-time
//! most-significant-bit queries.
//!
//! The counter stores the binary-reflected Gray code of its value, one digit
//! per cell, together with a stack of the positions of its 1-bits (smallest
//! position on top), the parity of the number of 1-bits, and the position of
//! the most significant 1-bit. Because consecutive Gray codes differ in one
//! bit, and because the bit to flip is either bit 0 or the successor of the
//! smallest set bit, every increment touches O(1) cells and at most two stack
//! slots. The most significant bit of a Gray code equals the most significant
//! bit of the value it encodes, so `mbit` is a single register read.
//!
//! When the bounded word saturates (value `2^k - 1`, whose Gray code has a
//! single 1-bit at position `k - 1`), a fresh word of `k + 1` digits is set up
//! by transferring that one bit and the one-element stack, still in constant
//! time.

/// Gray-code-backed counter supporting `inc` and `mbit` in constant time.
#[derive(Debug, Clone)]
pub struct GrayCounter {
    /// Gray code digits, least significant first; length is the capacity `k`.
    bits: Vec<u8>,
    /// Positions of 1-bits; top of the stack (end of the vec) is the
    /// smallest position, so pops yield strictly increasing positions.
    ones: Vec<u32>,
    /// Parity of the number of 1-bits (register `A`).
    parity: u8,
    /// Position of the most significant 1-bit (register `M`); only
    /// meaningful once at least one bit is set.
    msb: u32,
    /// Cumulative count of stack mutations, for the constant-work tests.
    stack_ops: u64,
    /// Total word cells ever allocated, including words retired by growth.
    cells_allocated: u64,
}

impl GrayCounter {
    /// Counter representing value 0, with an initial one-digit word.
    pub fn new() -> Self {
        GrayCounter {
            bits: vec![0],
            ones: Vec::new(),
            parity: 0,
            msb: 0,
            stack_ops: 0,
            cells_allocated: 1,
        }
    }

    /// Counter pre-seeded to represent the value `2^e`, as if `inc` had been
    /// called `2^e` times.
    ///
    /// The Gray code of `2^e` has 1-bits exactly at positions `e` and `e - 1`
    /// (only at 0 for `e = 0`), so seeding is a constant number of writes.
    pub fn with_power_of_two(e: u32) -> Self {
        if e == 0 {
            return GrayCounter {
                bits: vec![1],
                ones: vec![0],
                parity: 1,
                msb: 0,
                stack_ops: 1,
                cells_allocated: 1,
            };
        }
        let k = e as usize + 1;
        let mut bits = vec![0u8; k];
        bits[e as usize] = 1;
        bits[e as usize - 1] = 1;
        GrayCounter {
            bits,
            ones: vec![e, e - 1],
            parity: 0,
            msb: e,
            stack_ops: 2,
            cells_allocated: k as u64,
        }
    }

    /// Advance the counter by one.
    pub fn inc(&mut self) {
        if self.parity == 0 {
            // Flip bit 0.
            if self.bits[0] == 0 {
                self.bits[0] = 1;
                self.push(0);
            } else {
                self.bits[0] = 0;
                self.pop();
            }
        } else {
            // Flip the successor of the smallest set bit.
            let j = *self.ones.last().expect("odd parity implies a set bit");
            if j as usize + 1 == self.bits.len() {
                // Word saturated at 2^k - 1: transfer the single bit at k-1
                // into a (k+1)-digit word.
                debug_assert_eq!(self.ones.len(), 1);
                let k = self.bits.len();
                let mut fresh = vec![0u8; k + 1];
                fresh[k - 1] = 1;
                self.bits = fresh;
                self.cells_allocated += k as u64 + 1;
                self.ones.clear();
                self.push(k as u32 - 1);
            }
            let target = j as usize + 1;
            if self.bits[target] == 0 {
                self.bits[target] = 1;
                // Stack becomes [.., j+1, j]: j stays on top, j+1 just below.
                self.insert_second(j + 1);
                if j + 1 > self.msb {
                    self.msb = j + 1;
                }
            } else {
                self.bits[target] = 0;
                self.remove_second(j + 1);
            }
        }
        self.parity ^= 1;
    }

    /// Position of the most significant bit of the counter's value, i.e.
    /// `floor(log2 v)` after `v` increments. `None` while the value is 0.
    pub fn mbit(&self) -> Option<u32> {
        if self.ones.is_empty() {
            None
        } else {
            Some(self.msb)
        }
    }

    /// Width `k` of the current word.
    pub fn capacity(&self) -> usize {
        self.bits.len()
    }

    /// Decode the Gray word back to the value it represents.
    ///
    /// XOR-prefix decode from the most significant digit down; this walks the
    /// whole word and exists for checks and reporting, not for the hot path.
    pub fn decode(&self) -> u128 {
        let mut value = 0u128;
        let mut acc = 0u128;
        for i in (0..self.bits.len()).rev() {
            acc ^= self.bits[i] as u128;
            value |= acc << i;
        }
        value
    }

    /// Gray digits, least significant first.
    pub fn digits(&self) -> &[u8] {
        &self.bits
    }

    /// 1-bit positions in pop order (smallest first).
    pub fn ones_pop_order(&self) -> Vec<u32> {
        self.ones.iter().rev().copied().collect()
    }

    /// Parity of the number of 1-bits.
    pub fn parity(&self) -> u8 {
        self.parity
    }

    /// Cumulative number of stack mutations performed by `inc` calls.
    pub fn stack_ops(&self) -> u64 {
        self.stack_ops
    }

    /// Total word cells ever allocated (grows as O(log^2 v) over the
    /// counter's lifetime since retired words are accounted, not reclaimed).
    pub fn cells_allocated(&self) -> u64 {
        self.cells_allocated
    }

    fn push(&mut self, pos: u32) {
        debug_assert!(self.ones.last().is_none_or(|&t| pos < t));
        self.ones.push(pos);
        self.stack_ops += 1;
    }

    fn pop(&mut self) -> u32 {
        self.stack_ops += 1;
        self.ones.pop().expect("pop on empty ones stack")
    }

    /// Insert `pos` directly below the top of the stack.
    fn insert_second(&mut self, pos: u32) {
        let at = self.ones.len() - 1;
        self.ones.insert(at, pos);
        self.stack_ops += 1;
    }

    /// Remove the element directly below the top of the stack.
    fn remove_second(&mut self, expect: u32) {
        let at = self.ones.len() - 2;
        let removed = self.ones.remove(at);
        debug_assert_eq!(removed, expect);
        self.stack_ops += 1;
    }
}

impl Default for GrayCounter {
    fn default() -> Self {
        GrayCounter::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: binary-reflected Gray code of `v`.
    fn gray_of(v: u64) -> u64 {
        v ^ (v >> 1)
    }

    fn digits_as_value(c: &GrayCounter) -> u64 {
        c.digits()
            .iter()
            .enumerate()
            .map(|(i, &b)| (b as u64) << i)
            .sum()
    }

    #[test]
    fn fresh_counter_is_zero() {
        let c = GrayCounter::new();
        assert_eq!(c.decode(), 0);
        assert_eq!(c.mbit(), None);
        assert_eq!(c.parity(), 0);
        assert!(c.ones_pop_order().is_empty());
    }

    #[test]
    fn first_increment_sets_bit_zero() {
        let mut c = GrayCounter::new();
        c.inc();
        assert_eq!(c.digits(), &[1]);
        assert_eq!(c.mbit(), Some(0));
    }

    #[test]
    fn eight_increments_reach_word_1100() {
        let mut c = GrayCounter::new();
        for _ in 0..8 {
            c.inc();
        }
        // Oracle: standard reflected Gray sequence.
        assert_eq!(digits_as_value(&c), gray_of(8));
        assert_eq!(digits_as_value(&c), 0b1100);
        assert_eq!(c.mbit(), Some(3));
        assert_eq!(c.capacity(), 4);
    }

    /// The three-bit worked sequence: bits (LSB-first value) and pop-order
    /// stack after each increment.
    #[test]
    fn three_bit_worked_sequence() {
        let expected: [(u64, &[u32]); 8] = [
            (0b001, &[0]),
            (0b011, &[0, 1]),
            (0b010, &[1]),
            (0b110, &[1, 2]),
            (0b111, &[0, 1, 2]),
            (0b101, &[0, 2]),
            (0b100, &[2]),
            (0b1100, &[2, 3]),
        ];
        let mut c = GrayCounter::new();
        for (v, (bits, stack)) in expected.iter().enumerate() {
            c.inc();
            assert_eq!(digits_as_value(&c), *bits, "after {} incs", v + 1);
            assert_eq!(c.ones_pop_order(), *stack, "after {} incs", v + 1);
        }
    }

    #[test]
    fn increment_from_two_to_three() {
        let mut c = GrayCounter::new();
        c.inc();
        c.inc();
        assert_eq!(digits_as_value(&c), 0b011);
        assert_eq!(c.ones_pop_order(), vec![0, 1]);
        c.inc();
        assert_eq!(digits_as_value(&c), 0b010);
        assert_eq!(c.ones_pop_order(), vec![1]);
    }

    #[test]
    fn increment_from_five_to_six() {
        let mut c = GrayCounter::new();
        for _ in 0..5 {
            c.inc();
        }
        assert_eq!(digits_as_value(&c), 0b111);
        assert_eq!(c.ones_pop_order(), vec![0, 1, 2]);
        c.inc();
        assert_eq!(digits_as_value(&c), 0b101);
        assert_eq!(c.ones_pop_order(), vec![0, 2]);
    }

    #[test]
    fn growth_at_seven_transfers_single_bit() {
        let mut c = GrayCounter::new();
        for _ in 0..7 {
            c.inc();
        }
        assert_eq!(c.capacity(), 3);
        assert_eq!(digits_as_value(&c), 0b100);
        assert_eq!(c.ones_pop_order(), vec![2]);
        c.inc();
        assert_eq!(c.capacity(), 4);
        assert_eq!(digits_as_value(&c), 0b1100);
        assert_eq!(c.mbit(), Some(3));
        assert_eq!(c.decode(), 8);
    }

    #[test]
    fn mbit_matches_integer_log() {
        let mut c = GrayCounter::new();
        c.inc();
        assert_eq!(c.mbit(), Some(0)); // v = 1
        for _ in 1..6 {
            c.inc();
        }
        assert_eq!(c.mbit(), Some(2)); // 4 <= 6 < 8
        let mut c = GrayCounter::new();
        for _ in 0..1024 {
            c.inc();
        }
        assert_eq!(c.mbit(), Some(10));
    }

    #[test]
    fn mbit_tracks_log2_up_to_2_16() {
        let mut c = GrayCounter::new();
        for v in 1u64..=(1 << 16) {
            c.inc();
            assert_eq!(c.mbit(), Some(63 - v.leading_zeros()), "v = {v}");
        }
    }

    /// Full invariant re-scan after every single increment.
    #[test]
    fn invariants_hold_after_every_inc() {
        let mut c = GrayCounter::new();
        for v in 1u128..=4096 {
            c.inc();
            assert_eq!(c.decode(), v);
            let set: Vec<u32> = c
                .digits()
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == 1)
                .map(|(i, _)| i as u32)
                .collect();
            assert_eq!(c.ones_pop_order(), set, "stack vs bits at v = {v}");
            assert_eq!(c.parity() as usize, set.len() % 2);
            if let Some(&top) = set.last() {
                assert_eq!(c.mbit(), Some(top));
            }
        }
    }

    #[test]
    fn at_most_two_stack_ops_per_inc() {
        let mut c = GrayCounter::new();
        let mut before = c.stack_ops();
        for _ in 0..100_000 {
            c.inc();
            let after = c.stack_ops();
            assert!(after - before <= 2, "{} stack ops in one inc", after - before);
            before = after;
        }
    }

    #[test]
    fn seeded_power_of_two_counters() {
        for e in 0..20u32 {
            let c = GrayCounter::with_power_of_two(e);
            assert_eq!(c.decode(), 1 << e);
            assert_eq!(c.mbit(), Some(e));
            let mut oracle = GrayCounter::new();
            for _ in 0..(1u64 << e) {
                oracle.inc();
            }
            assert_eq!(c.digits(), oracle.digits());
            assert_eq!(c.ones_pop_order(), oracle.ones_pop_order());
            assert_eq!(c.parity(), oracle.parity());
        }
    }

    proptest! {
        /// A seeded counter advanced by `extra` increments decodes to
        /// `2^e + extra` and keeps mbit consistent with the host log.
        #[test]
        fn seeded_then_advanced(e in 0u32..16, extra in 0u64..4096) {
            let mut c = GrayCounter::with_power_of_two(e);
            for _ in 0..extra {
                c.inc();
            }
            let v = (1u128 << e) + extra as u128;
            prop_assert_eq!(c.decode(), v);
            prop_assert_eq!(c.mbit(), Some(127 - (v.leading_zeros())));
        }
    }
}
