//! In-place binary-tree inclusive prefix sum, plus a simulated
//! block-parallel executor that counts synchronizations and node updates.
//!
//! The scan works directly on the target array with no scratch space:
//!
//! * Upward pass: with step `js` doubling from 2 while `js <= n`, each round
//!   folds `v[i - js/2]` into `v[i]` for `i = js-1, 2*js-1, ...`. This builds
//!   the sum tree in place; for eight ones the array evolves through
//!   `1.2.1.2.1.2.1.2`, `1.2.1.4.1.2.1.4`, `1.2.1.4.1.2.1.8`.
//! * Downward pass: `js` halves from half its final upward value down to 2,
//!   each round folding `v[i - js/2]` into `v[i]` for
//!   `i = js + js/2 - 1, ...`, filling in the remaining prefixes:
//!   `1.2.1.4.1.6.1.8`, then `1.2.3.4.5.6.7.8`.
//!
//! The downward pass must restart at half the final upward step (not a
//! quarter): with `m = floor(log2 n)`, any `n >= 3 * 2^(m-1)` has tail
//! nodes (the first at index `3 * 2^(m-1) - 1`) whose fix-up lives in the
//! `js = 2^m` round; restarting lower computes wrong sums. That round is
//! empty exactly when `n` is a power of two, in which case it moves no
//! data and exists only as a step of the sweep.
//!
//! Within a round, writes hit `i = base (mod js)` and reads hit
//! `i - js/2`, disjoint residues, so a round's updates are independent and
//! can be spread over any number of threads. Dependent rounds are separated
//! by one block-wide barrier; the barrier after the final round belongs to
//! whoever consumes the result and is not attributed to the scan. The sweep
//! runs `floor(log2 n)` rounds up and the same down, so the scan costs
//! exactly `2 * ceil(log2(n + 1)) - 3` barriers for every `n >= 2`, at any
//! thread count.

use std::ops::AddAssign;

/// Barrier and update counts from one simulated block scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanStats {
    /// Block-wide barriers separating consecutive rounds.
    pub sync_count: u64,
    /// Nodes updated during the upward pass.
    pub updates_up: u64,
    /// Nodes updated during the downward pass.
    pub updates_down: u64,
}

/// Height of the abstract binary tree covering `n` elements:
/// `ceil(log2(n + 1))`.
pub fn tree_height(n: usize) -> u32 {
    (n + 1).next_power_of_two().trailing_zeros()
}

/// Sequential in-place inclusive prefix sum. `n < 2` is a no-op.
pub fn scan_inplace<T: Copy + AddAssign>(values: &mut [T]) {
    let n = values.len();

    // Upward pass.
    let mut js = 2usize;
    while js <= n {
        let jsd2 = js / 2;
        let mut idx = js - 1;
        while idx < n {
            let add = values[idx - jsd2];
            values[idx] += add;
            idx += js;
        }
        js *= 2;
    }

    // Downward pass.
    js /= 2;
    while js > 1 {
        let jsd2 = js / 2;
        let mut idx = js + jsd2 - 1;
        while idx < n {
            let add = values[idx - jsd2];
            values[idx] += add;
            idx += js;
        }
        js = jsd2;
    }
}

/// One parallel round: every index `base, base + js, ... < n` gets
/// `v[i - js/2]` folded in. `base mod js` differs from `(base - js/2) mod js`,
/// so reads and writes never collide inside a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ScanRound {
    pub js: usize,
    pub base: usize,
    pub upward: bool,
}

impl ScanRound {
    #[cfg(test)]
    pub fn indices(&self, n: usize) -> impl Iterator<Item = usize> {
        (self.base..n).step_by(self.js.max(1))
    }
}

/// Rounds of the `n`-element sweep, in execution order. A round may be
/// empty (the power-of-two tail case); it still takes its place in the
/// sweep.
pub(crate) fn scan_rounds(n: usize) -> Vec<ScanRound> {
    let mut rounds = Vec::new();
    let mut js = 2usize;
    while js <= n {
        rounds.push(ScanRound {
            js,
            base: js - 1,
            upward: true,
        });
        js *= 2;
    }
    js /= 2;
    while js > 1 {
        let jsd2 = js / 2;
        rounds.push(ScanRound {
            js,
            base: js + jsd2 - 1,
            upward: false,
        });
        js = jsd2;
    }
    rounds
}

/// Block-parallel scan simulation.
///
/// Each round's index set is partitioned across `threads_per_block` lanes
/// (lane `t` starts at `t * js + base` and strides by `threads * js`), with
/// one barrier between consecutive rounds. The numerical result is
/// identical to [`scan_inplace`] for any thread count, and the barrier
/// count does not depend on the thread count.
pub fn scan_block_simulated<T: Copy + AddAssign>(
    values: &mut [T],
    threads_per_block: usize,
) -> ScanStats {
    assert!(threads_per_block >= 1, "need at least one thread");
    let n = values.len();
    let mut stats = ScanStats::default();

    let rounds = scan_rounds(n);
    stats.sync_count = rounds.len().saturating_sub(1) as u64;
    for round in rounds {
        // Lane-partitioned execution of the round. Updates are disjoint, so
        // lane order does not matter; we still walk lanes to mirror the
        // device schedule.
        for lane in 0..threads_per_block {
            let mut idx = lane * round.js + round.base;
            while idx < n {
                let add = values[idx - round.js / 2];
                values[idx] += add;
                if round.upward {
                    stats.updates_up += 1;
                } else {
                    stats.updates_down += 1;
                }
                idx += threads_per_block * round.js;
            }
        }
    }
    stats
}
