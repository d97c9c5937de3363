//! The dyadic interval ladder.
//!
//! Time is bucketed into blocks of `I₀` steps (block `b` covers steps `(b−1)I₀+1 ..= b·I₀`).
//! At level `j` the blocks are tiled by intervals `[k·2^j, (k+1)·2^j − 1]`, `k ≥ 1`, so the
//! first level-`j` interval starts at block `2^j` and has length `I₀·2^j` steps.

use serde::{Deserialize, Serialize};

/// An interval `[start, end]` (inclusive, 1-based steps) at dyadic level `level`.
///
/// Ordered by level first so that maps keyed by interval iterate shortest-scale first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub start: u64,
    pub end: u64,
}

impl DyadicInterval {
    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t <= self.end
    }

    /// The level-`level` interval containing step `t`, if that level has started by `t`.
    pub fn containing(t: u64, i0: u64, level: u32) -> Option<Self> {
        if t == 0 || i0 == 0 || level >= 63 {
            return None;
        }
        let block = (t - 1) / i0 + 1;
        let span = 1u64 << level;
        if block < span {
            return None;
        }
        let k = block >> level;
        let first_block = k * span;
        let last_block = first_block + span - 1;
        Some(Self {
            level,
            start: (first_block - 1) * i0 + 1,
            end: last_block.checked_mul(i0)?,
        })
    }
}

impl std::fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}[{},{}]", self.level, self.start, self.end)
    }
}

/// Intervals active at step `t`, one per started level `j ≤ max_level`, sorted by level.
pub fn active_intervals(t: u64, i0: u64, max_level: u32) -> Vec<DyadicInterval> {
    (0..=max_level.min(62))
        .map_while(|level| DyadicInterval::containing(t, i0, level))
        .collect()
}
