//! Program layouts of the three constructions: where each row's programs
//! live, and how a row of height `h` splits into block pairs.
//!
//! In the `<i, j>`-indexed layout the programs of row `(i, j)` are
//! `f_{i,j}(pos) = 2<i, j·2^{i+1} + pos>` for `pos < 2^{i+1}`; in the
//! `i`-indexed layout they are `f_i(pos) = 2(2^{i+1} + pos - 2)`. Both are
//! bijections onto the even numbers. A row of height `h` has `2^{i-h}` block
//! pairs; pair `k` covers positions `[k·2^{h+1}, (k+1)·2^{h+1})`, the first
//! half being `E` and the second `Ē`.

use std::collections::BTreeSet;

use crate::kernel::{checked_pair, pair, unpair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layout {
    /// Rows indexed by `(i, j)`.
    Paired,
    /// Rows indexed by `i` alone.
    Single,
}

/// A row: `j` is always 0 in the single layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Row {
    pub i: u64,
    pub j: u64,
}

impl Row {
    pub fn new(i: u64, j: u64) -> Self {
        Row { i, j }
    }

    /// Number of programs in the row, `2^{i+1}`; `None` when it does not fit.
    pub fn width(self) -> Option<u64> {
        1u64.checked_shl(self.i as u32 + 1).filter(|_| self.i < 63)
    }
}

impl Layout {
    /// The constant every program of the row computes on its domain.
    pub fn row_value(self, row: Row) -> u64 {
        match self {
            Layout::Paired => pair(row.i, row.j),
            Layout::Single => row.i,
        }
    }

    pub fn program(self, row: Row, pos: u64) -> Option<u64> {
        if self == Layout::Paired && row.i >= 63 {
            // The row is wider than any u64 position.
            return if row.j == 0 {
                checked_pair(row.i, pos)?.checked_mul(2)
            } else {
                None
            };
        }
        let width = row.width()?;
        if pos >= width {
            return None;
        }
        match self {
            Layout::Paired => {
                let y = row.j.checked_mul(width)?.checked_add(pos)?;
                checked_pair(row.i, y)?.checked_mul(2)
            }
            Layout::Single => {
                assert_eq!(row.j, 0, "single layout rows have j = 0");
                width.checked_add(pos)?.checked_sub(2)?.checked_mul(2)
            }
        }
    }

    /// Row and position of an even program.
    pub fn locate(self, p: u64) -> Option<(Row, u64)> {
        if !p.is_multiple_of(2) {
            return None;
        }
        match self {
            Layout::Paired => {
                let (i, y) = unpair(p / 2);
                if i >= 63 {
                    return Some((Row::new(i, 0), y));
                }
                let width = 1u64 << (i + 1);
                Some((Row::new(i, y / width), y % width))
            }
            Layout::Single => {
                let v = p / 2 + 2;
                let top = 63 - v.leading_zeros() as u64;
                let i = top - 1;
                Some((Row::new(i, 0), v - (1u64 << top)))
            }
        }
    }

    /// The `E` and `Ē` halves of block pair `k` at height `h`.
    pub fn block(self, row: Row, h: u32, k: u64) -> (Vec<u64>, Vec<u64>) {
        let half = 1u64 << h;
        let base = k * (half << 1);
        let e = (base..base + half)
            .map(|pos| self.program(row, pos).expect("block outside row"))
            .collect();
        let ebar = (base + half..base + 2 * half)
            .map(|pos| self.program(row, pos).expect("block outside row"))
            .collect();
        (e, ebar)
    }

    pub fn block_sets(self, row: Row, h: u32, k: u64) -> (BTreeSet<u64>, BTreeSet<u64>) {
        let (e, ebar) = self.block(row, h, k);
        (e.into_iter().collect(), ebar.into_iter().collect())
    }
}

/// Block pair index and side (`false` for `E`) of a position at height `h`.
pub fn block_of(pos: u64, h: u32) -> (u64, bool) {
    (pos >> (h + 1), (pos >> h) & 1 == 1)
}

/// `num = 2^{i-h}`.
pub fn num(i: u64, h: u32) -> Option<u64> {
    let e = i.checked_sub(h as u64)?;
    1u64.checked_shl(e as u32).filter(|_| e < 64)
}

/// `3<i, j>` and `3<i, j> + 1`, the program pair of the third construction.
pub fn triad(i: u64, j: u64) -> (u64, u64) {
    let base = 3 * pair(i, j);
    (base, base + 1)
}
