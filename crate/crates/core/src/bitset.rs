//! Fixed-width bit sets over a small universe of elements.
//!
//! Used for flashlight partial solutions and DNF variable sets. Elements are
//! `0..width`. Ordering is lexicographic on the underlying words, which gives
//! a stable canonical order for collections of sets of equal width.

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitSet {
    width: usize,
    words: Vec<u64>,
}

impl BitSet {
    pub fn empty(width: usize) -> Self {
        BitSet {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn full(width: usize) -> Self {
        let mut s = BitSet::empty(width);
        for w in 0..s.words.len() {
            s.words[w] = u64::MAX;
        }
        s.trim();
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.width);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.width);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset_of(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    /// Smallest element of `self \ other`.
    pub fn first_not_in(&self, other: &BitSet) -> Option<usize> {
        for (k, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let diff = a & !b;
            if diff != 0 {
                return Some(k * 64 + diff.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn with(&self, i: usize) -> BitSet {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn without(&self, i: usize) -> BitSet {
        let mut s = self.clone();
        s.remove(i);
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(move |&i| self.contains(i))
    }

    /// Word count, for state-size accounting.
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// `0`/`1` characters, element 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.width)
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect()
    }

    /// Pack into bytes, element 0 in the least significant bit of byte 0.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.width.div_ceil(8)];
        for i in 0..self.width {
            if self.contains(i) {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    /// Interpret the low `width` bits of `v`.
    pub fn from_word(width: usize, v: u64) -> BitSet {
        assert!(width <= 64);
        let mut s = BitSet::empty(width);
        if width > 0 {
            s.words[0] = v & (u64::MAX >> (64 - width));
        }
        s
    }

    fn trim(&mut self) {
        let extra = self.words.len() * 64 - self.width;
        if extra > 0 && !self.words.is_empty() {
            let last = self.words.len() - 1;
            self.words[last] &= u64::MAX >> extra;
        }
    }
}

impl std::fmt::Debug for BitSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
