//! Real-arithmetic operation counters.
//!
//! Counters are plain values threaded through `*_counted` routines; nothing
//! here is global, so concurrent calls never share a tally.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub adds: u64,
    pub muls: u64,
}

impl OpCount {
    pub const ZERO: OpCount = OpCount { adds: 0, muls: 0 };

    pub fn new(adds: u64, muls: u64) -> Self {
        Self { adds, muls }
    }

    pub fn total(&self) -> u64 {
        self.adds + self.muls
    }

    /// `n` general complex multiplications (4 real muls, 2 real adds each).
    pub fn complex_muls(&mut self, n: usize) {
        self.muls += 4 * n as u64;
        self.adds += 2 * n as u64;
    }

    /// `n` complex additions or subtractions.
    pub fn complex_adds(&mut self, n: usize) {
        self.adds += 2 * n as u64;
    }

    /// `n` complex values scaled by a real constant.
    pub fn real_scales(&mut self, n: usize) {
        self.muls += 2 * n as u64;
    }

    /// A dense real `rows x cols` matrix applied to a vector.
    pub fn dense_matvec(rows: usize, cols: usize) -> Self {
        Self {
            adds: (rows * cols.saturating_sub(1)) as u64,
            muls: (rows * cols) as u64,
        }
    }

    pub fn scaled(self, k: u64) -> Self {
        Self {
            adds: self.adds * k,
            muls: self.muls * k,
        }
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(self, rhs: OpCount) -> OpCount {
        OpCount {
            adds: self.adds + rhs.adds,
            muls: self.muls + rhs.muls,
        }
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: OpCount) {
        self.adds += rhs.adds;
        self.muls += rhs.muls;
    }
}
