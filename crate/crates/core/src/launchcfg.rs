//! Launch-configuration arithmetic: sub-box dimensioning for the full-load
//! strategy, pencil length for the pencil strategy, thread caps, and the
//! block-count parallelism heuristic.

/// Geometry of a staged sub-box launch. `box_dims` includes the one-cell
/// ghost shell; `interior_dims` are the target cells per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubBoxConfig {
    pub box_dims: [usize; 3],
    pub interior_dims: [usize; 3],
    /// Shared-memory bytes reserved per cell: max-per-cell x record size.
    pub bytes_per_cell: usize,
    pub threads: usize,
    pub blocks: usize,
}

/// Geometry of an X-pencil launch. `total_len` counts the two ghost cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PencilConfig {
    pub total_len: usize,
    pub interior_len: usize,
    pub threads: usize,
    /// Finalized against the grid at strategy launch.
    pub blocks: usize,
}

/// Threads-per-block cap for the sub-box strategy; beyond it each thread
/// handles several target slots in a strided loop.
pub const SUBBOX_THREAD_CAP: usize = 512;

/// Threads-per-block cap for pencil strategies; a pencil whose particle
/// bound exceeds it cannot run (one target per thread is required).
pub const PENCIL_THREAD_CAP: usize = 1024;

/// Sub-box dimensions (ghosts included) fitting `shared_bytes`, or `None`
/// when fewer than 27 cells fit (one target cell plus its ghost shell).
///
/// `max_cells = shared_bytes / (m_c * bytes_per_particle)`; with `p3` the
/// largest integer whose cube fits, the result is the largest of
/// `p3^3`, `(p3+1)*p3^2`, `(p3+1)^2*p3`, `(p3+2)*p3^2` that still fits,
/// shaped with the longest extent on X (X-contiguous cells make the densest
/// global loads under X-fastest linearization).
pub fn subbox_dims(
    shared_bytes: usize,
    m_c: usize,
    bytes_per_particle: usize,
) -> Option<[usize; 3]> {
    assert!(m_c >= 1, "m_c must be at least 1");
    let max_cells = shared_bytes / (m_c * bytes_per_particle);
    let mut p3 = 0usize;
    while (p3 + 1).pow(3) <= max_cells {
        p3 += 1;
    }
    if p3 == 0 {
        return None;
    }
    let candidates = [
        [p3, p3, p3],
        [p3 + 1, p3, p3],
        [p3 + 1, p3 + 1, p3],
        [p3 + 2, p3, p3],
    ];
    let best = candidates
        .iter()
        .filter(|d| d[0] * d[1] * d[2] <= max_cells)
        .max_by_key(|d| d[0] * d[1] * d[2])
        .copied()?;
    if best[0] * best[1] * best[2] < 27 {
        return None;
    }
    Some(best)
}

/// Pencil length fitting shared memory, the grid, and the thread cap, or
/// `None` when fewer than 3 cells fit (interior plus two ghosts) or a single
/// cell's particles already exceed the thread cap.
pub fn pencil_len(
    shared_bytes: usize,
    m_c: usize,
    bytes_per_particle: usize,
    grid_nx: usize,
) -> Option<PencilConfig> {
    assert!(m_c >= 1, "m_c must be at least 1");
    if m_c > PENCIL_THREAD_CAP {
        return None;
    }
    let total_len = (shared_bytes / (m_c * bytes_per_particle))
        .min(grid_nx + 2)
        .min(PENCIL_THREAD_CAP / m_c);
    if total_len < 3 {
        return None;
    }
    Some(PencilConfig {
        total_len,
        interior_len: total_len - 2,
        threads: m_c * total_len,
        blocks: 0,
    })
}

/// Blocks needed to tile `grid_dims` with per-block interiors of
/// `interior_dims`.
pub fn block_count(interior_dims: [usize; 3], grid_dims: [usize; 3]) -> usize {
    (0..3)
        .map(|a| grid_dims[a].div_ceil(interior_dims[a]))
        .product()
}

/// Shrink interior dims until the block count reaches `num_sms` (or no dim
/// can shrink further). Each step drops the largest dim straight to 1, ties
/// broken Z first, then Y, then X. Never increases a dim.
pub fn ensure_parallelism(
    mut interior_dims: [usize; 3],
    grid_dims: [usize; 3],
    num_sms: usize,
) -> [usize; 3] {
    assert!(interior_dims.iter().all(|&d| d >= 1));
    while block_count(interior_dims, grid_dims) < num_sms
        && interior_dims.iter().any(|&d| d > 1)
    {
        let max = *interior_dims.iter().max().unwrap();
        // Z first, then Y, then X.
        let axis = [2usize, 1, 0]
            .into_iter()
            .find(|&a| interior_dims[a] == max)
            .unwrap();
        interior_dims[axis] = 1;
    }
    interior_dims
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subbox_96_cells() {
        // 48K shared, 16 particles per cell, 32 B records: 96 cells, shaped
        // 6x4x4 with a 4x2x2 interior (16 target cells).
        let dims = subbox_dims(49152, 16, 32).unwrap();
        assert_eq!(dims, [6, 4, 4]);
        assert_eq!(dims[0] * dims[1] * dims[2], 96);
        let interior = [dims[0] - 2, dims[1] - 2, dims[2] - 2];
        assert_eq!(interior.iter().product::<usize>(), 16);
    }

    #[test]
    fn subbox_minimum_and_below() {
        // Exactly 27 cells fit -> 3x3x3; 26 -> inapplicable.
        assert_eq!(subbox_dims(27 * 32, 1, 32), Some([3, 3, 3]));
        assert_eq!(subbox_dims(26 * 32, 1, 32), None);
    }

    #[test]
    fn subbox_zero_budget() {
        assert_eq!(subbox_dims(0, 1, 32), None);
        assert_eq!(subbox_dims(31, 1, 32), None);
    }

    proptest! {
        #[test]
        fn subbox_is_maximal_among_candidates(
            shared in 1usize..200_000,
            m_c in 1usize..64,
        ) {
            let max_cells = shared / (m_c * 32);
            match subbox_dims(shared, m_c, 32) {
                None => {
                    // Either nothing fits or the best candidate is < 27.
                    let mut p3 = 0usize;
                    while (p3 + 1).pow(3) <= max_cells { p3 += 1; }
                    let best = [
                        p3 * p3 * p3,
                        (p3 + 1) * p3 * p3,
                        (p3 + 1) * (p3 + 1) * p3,
                        (p3 + 2) * p3 * p3,
                    ]
                    .into_iter()
                    .filter(|&c| c <= max_cells)
                    .max()
                    .unwrap_or(0);
                    prop_assert!(best < 27);
                }
                Some(dims) => {
                    let count = dims[0] * dims[1] * dims[2];
                    prop_assert!(count <= max_cells);
                    prop_assert!(count >= 27);
                    let mut p3 = 0usize;
                    while (p3 + 1).pow(3) <= max_cells { p3 += 1; }
                    for d in dims {
                        prop_assert!(d >= p3 && d <= p3 + 2);
                    }
                    prop_assert!(dims[0] >= dims[1] && dims[1] >= dims[2]);
                    // No listed candidate that fits beats it.
                    for cand in [
                        p3 * p3 * p3,
                        (p3 + 1) * p3 * p3,
                        (p3 + 1) * (p3 + 1) * p3,
                        (p3 + 2) * p3 * p3,
                    ] {
                        if cand <= max_cells {
                            prop_assert!(cand <= count);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pencil_three_way_minimum() {
        // shared bound 96, grid bound 10, thread bound 64 -> 10 total, 8 interior.
        let cfg = pencil_len(49152, 16, 32, 8).unwrap();
        assert_eq!(cfg.total_len, 10);
        assert_eq!(cfg.interior_len, 8);
        assert_eq!(cfg.threads, 160);
    }

    #[test]
    fn pencil_inapplicable_when_cell_too_full() {
        // 3 cells of 512 particles would need 48K+; under that it cannot fit.
        assert_eq!(pencil_len(49151, 512, 32, 8), None);
        // A single cell beyond the thread cap can never run.
        assert_eq!(pencil_len(1 << 20, 1025, 32, 8), None);
    }

    #[test]
    fn pencil_threads_never_exceed_cap() {
        for m_c in 1..=1024usize {
            if let Some(cfg) = pencil_len(1 << 20, m_c, 32, 1000) {
                assert!(cfg.threads <= PENCIL_THREAD_CAP, "m_c={m_c}");
                assert!(cfg.total_len <= 1002);
                assert!(cfg.total_len * m_c * 32 <= 1 << 20);
            }
        }
    }

    #[test]
    fn parallelism_reduction_worked_case() {
        // 12 blocks on a 40-SM device: {2,2,2} -> {2,1,1}, 48 blocks.
        let grid = [4, 4, 6];
        assert_eq!(block_count([2, 2, 2], grid), 12);
        let reduced = ensure_parallelism([2, 2, 2], grid, 40);
        assert_eq!(reduced, [2, 1, 1]);
        assert_eq!(block_count(reduced, grid), 48);
    }

    #[test]
    fn parallelism_noop_when_enough_blocks() {
        let grid = [16, 16, 16];
        assert_eq!(ensure_parallelism([2, 2, 2], grid, 40), [2, 2, 2]);
    }

    #[test]
    fn pencil_halving_analog() {
        // Interior length 2 dropped to 1 doubles the pencil-block count.
        let grid = [4, 2, 3]; // 2 x 2 x 3 = 12 pencil blocks at interior 2
        assert_eq!(block_count([2, 1, 1], grid), 12);
        let reduced = ensure_parallelism([2, 1, 1], grid, 40);
        assert_eq!(reduced, [1, 1, 1]);
        assert_eq!(block_count(reduced, grid), 24);
    }

    proptest! {
        #[test]
        fn parallelism_never_decreases_blocks(
            ix in 1usize..8, iy in 1usize..8, iz in 1usize..8,
            gx in 1usize..32, gy in 1usize..32, gz in 1usize..32,
            sms in 1usize..128,
        ) {
            let before = [ix, iy, iz];
            let grid = [gx, gy, gz];
            let after = ensure_parallelism(before, grid, sms);
            for a in 0..3 {
                prop_assert!(after[a] <= before[a]);
            }
            prop_assert!(block_count(after, grid) >= block_count(before, grid));
        }
    }
}
