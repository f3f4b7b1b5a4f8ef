//! Fixed-width valuations used as global, local and abstract states.

use std::fmt;

/// A valuation of a fixed, ordered set of propositions packed into words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    width: u32,
    words: Box<[u64]>,
}

impl State {
    pub fn zeros(width: usize) -> Self {
        State {
            width: width as u32,
            words: vec![0; width.div_ceil(64)].into_boxed_slice(),
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = State::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Builds a state from the low `width` bits of `value`.
    pub fn from_u64(width: usize, value: u64) -> Self {
        let mut s = State::zeros(width);
        for i in 0..width.min(64) {
            s.set(i, value >> i & 1 == 1);
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.width());
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.width());
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Restriction to the given positions, in the given order.
    pub fn project(&self, positions: &[usize]) -> State {
        let mut out = State::zeros(positions.len());
        for (j, &i) in positions.iter().enumerate() {
            if self.get(i) {
                out.set(j, true);
            }
        }
        out
    }

    /// True iff the two states agree on every listed position.
    pub fn agrees_on(&self, other: &State, positions: &[usize]) -> bool {
        positions.iter().all(|&i| self.get(i) == other.get(i))
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width()).filter(move |&i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width()).map(|i| self.get(i)).collect()
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
