//! Full-load strategy: each block stages a whole sub-box of cells (targets
//! plus a one-cell ghost shell) into shared memory exactly once, computes
//! every interior target from shared data, and writes results back through
//! an index map.
//!
//! The shared buffer reserves `max_per_cell * record_size` bytes per cell,
//! so the sub-box shape is fixed at launch from the shared-memory budget
//! (see [`crate::launchcfg::subbox_dims`]); blocks whose region clips the
//! grid border simply stage fewer records. Where a cell sits inside a
//! block's interior it is staged once; where it lands in neighboring
//! blocks' ghost shells it is staged once per toucher.
//!
//! Each block needs per-cell placement metadata for its staged buffer. The
//! construction mirrors the device recipe: per X-pencil of the region,
//! the particle count is the prefix-offset difference between the pencil's
//! first cell and the cell after it (valid across Y/Z wraps thanks to
//! X-fastest linearization and the extra offsets slot); the gap array
//! seeded with the corner cell's offset is scanned in place, and each
//! cell's shared position is its global offset minus the scanned exclusion
//! for its pencil. The scan's barriers are counted in the block's
//! synchronizations.

use super::{assemble, empty_result, pair, validate_scene, Accum, BinnedScene, BlockResult};
use crate::binning::CellBinning;
use crate::error::{Error, Result};
use crate::gpumodel::{
    DeviceProfile, LaunchConfig, StrategyParams, TrafficCounters, TransactionCounter,
};
use crate::grid::{neighbor_cells, GridSpec};
use crate::kernels::KernelSpec;
use crate::launchcfg::{
    block_count, ensure_parallelism, subbox_dims, SubBoxConfig, SUBBOX_THREAD_CAP,
};
use crate::prefixsum::{scan_block_simulated, ScanStats};
use crate::strategies::StrategyResult;
use rayon::prelude::*;

/// A clamped axis-aligned cell region: the staged footprint of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedRegion {
    /// Half-open cell ranges per axis.
    pub x: std::ops::Range<usize>,
    pub y: std::ops::Range<usize>,
    pub z: std::ops::Range<usize>,
}

impl StagedRegion {
    /// Cells in staging order: X fastest, then Y, then Z.
    pub fn cells(&self, grid: &GridSpec) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cell_count());
        for z in self.z.clone() {
            for y in self.y.clone() {
                for x in self.x.clone() {
                    out.push(grid.linear(crate::grid::CellCoord { x, y, z }));
                }
            }
        }
        out
    }

    pub fn cell_count(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }

    pub fn contains(&self, c: crate::grid::CellCoord) -> bool {
        self.x.contains(&c.x) && self.y.contains(&c.y) && self.z.contains(&c.z)
    }
}

/// Shared-buffer placement metadata for one staged region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalOffsets {
    /// Global prefix offset of each region cell, staging order.
    pub global_offsets: Vec<usize>,
    /// Shared-buffer position of each region cell's segment, staging order.
    pub local_offsets: Vec<usize>,
    /// Staged slot -> global sorted index; injective and increasing.
    pub shared_to_global: Vec<usize>,
}

/// Build the placement metadata for `region`, scanning the pencil gap array
/// with the simulated block scan (`threads` lanes) so the barrier cost is
/// observable.
pub fn build_local_offsets(
    region: &StagedRegion,
    binning: &CellBinning,
    grid: &GridSpec,
    threads: usize,
) -> (LocalOffsets, ScanStats) {
    let nx = grid.dims[0];
    let flat = |x: usize, y: usize, z: usize| x + nx * (y + grid.dims[1] * z);

    // Pencils in staging order; per pencil the offset of its first cell and
    // of the cell after it (the latter may flatten into the next Y/Z row,
    // which is exactly why offsets carries the trailing slot).
    let mut pencil_bounds = Vec::with_capacity(region.y.len() * region.z.len());
    for z in region.z.clone() {
        for y in region.y.clone() {
            let first = binning.offsets[flat(region.x.start, y, z)];
            let after = binning.offsets[flat(region.x.end, y, z)];
            pencil_bounds.push((first, after));
        }
    }

    // Gap array: first slot is the corner cell's global offset, slot p the
    // particles between pencil p-1 and pencil p in the sorted array. Its
    // inclusive scan is the per-pencil exclusion count.
    let mut exclusions: Vec<usize> = Vec::with_capacity(pencil_bounds.len());
    for (p, &(first, _)) in pencil_bounds.iter().enumerate() {
        if p == 0 {
            exclusions.push(first);
        } else {
            exclusions.push(first - pencil_bounds[p - 1].1);
        }
    }
    let stats = scan_block_simulated(&mut exclusions, threads.max(1));

    let mut global_offsets = Vec::with_capacity(region.cell_count());
    let mut local_offsets = Vec::with_capacity(region.cell_count());
    let mut shared_to_global = Vec::new();
    for (p, z) in region.z.clone().enumerate() {
        for (q, y) in region.y.clone().enumerate() {
            let pencil = p * region.y.len() + q;
            for x in region.x.clone() {
                let lin = flat(x, y, z);
                let global = binning.offsets[lin];
                global_offsets.push(global);
                local_offsets.push(global - exclusions[pencil]);
                for k in 0..binning.counts[lin] {
                    shared_to_global.push(global + k);
                }
            }
        }
    }

    (
        LocalOffsets {
            global_offsets,
            local_offsets,
            shared_to_global,
        },
        stats,
    )
}

pub(super) fn run(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    validate_scene(scene, kernel)?;
    if scene.is_empty() {
        return Ok(empty_result(LaunchConfig::simple(0, 1)));
    }

    let m_c = scene.binning.max_per_cell;
    let grid = &scene.grid;
    let dims = subbox_dims(profile.shared_mem_per_block, m_c, profile.bytes_per_particle)
        .ok_or_else(|| Error::Inapplicable {
            strategy: "all-in-sm",
            reason: format!(
                "fewer than 27 cells of {} bytes fit in {} bytes of shared memory",
                m_c * profile.bytes_per_particle,
                profile.shared_mem_per_block
            ),
        })?;

    let mut interior = [dims[0] - 2, dims[1] - 2, dims[2] - 2];
    for a in 0..3 {
        interior[a] = interior[a].min(grid.dims[a]);
    }
    let interior = ensure_parallelism(interior, grid.dims, profile.num_sms);
    let box_dims = [interior[0] + 2, interior[1] + 2, interior[2] + 2];
    let box_cells = box_dims[0] * box_dims[1] * box_dims[2];
    let blocks = block_count(interior, grid.dims);
    let threads = SUBBOX_THREAD_CAP.min(m_c * box_cells).max(1);
    let config = SubBoxConfig {
        box_dims,
        interior_dims: interior,
        bytes_per_cell: m_c * profile.bytes_per_particle,
        threads,
        blocks,
    };
    let launch = LaunchConfig {
        blocks,
        threads_per_block: threads,
        dynamic_shared_bytes: box_cells * config.bytes_per_cell,
        strategy_params: StrategyParams::SubBox(config),
    };
    launch.validate(profile)?;

    let nbx = grid.dims[0].div_ceil(interior[0]);
    let nby = grid.dims[1].div_ceil(interior[1]);

    let block_results: Vec<BlockResult> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let bx = b % nbx;
            let by = (b / nbx) % nby;
            let bz = b / (nbx * nby);
            run_block(scene, kernel, profile, [bx, by, bz], interior, threads)
        })
        .collect();

    Ok(assemble(scene, launch, block_results))
}

/// Interior and staged (ghost-expanded) cell regions of the block at grid
/// coordinates `block` under a tiling with the given interior dims.
pub fn block_regions(
    grid: &GridSpec,
    block: [usize; 3],
    interior: [usize; 3],
) -> (StagedRegion, StagedRegion) {
    let lo = |b: usize, i: usize| b * i;
    let hi = |b: usize, i: usize, d: usize| ((b + 1) * i).min(d);
    let interior_region = StagedRegion {
        x: lo(block[0], interior[0])..hi(block[0], interior[0], grid.dims[0]),
        y: lo(block[1], interior[1])..hi(block[1], interior[1], grid.dims[1]),
        z: lo(block[2], interior[2])..hi(block[2], interior[2], grid.dims[2]),
    };
    let staged = StagedRegion {
        x: interior_region.x.start.saturating_sub(1)..(interior_region.x.end + 1).min(grid.dims[0]),
        y: interior_region.y.start.saturating_sub(1)..(interior_region.y.end + 1).min(grid.dims[1]),
        z: interior_region.z.start.saturating_sub(1)..(interior_region.z.end + 1).min(grid.dims[2]),
    };
    (interior_region, staged)
}

fn run_block(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    block: [usize; 3],
    interior: [usize; 3],
    threads: usize,
) -> BlockResult {
    let grid = &scene.grid;
    let binning = &scene.binning;
    let mut counters = TrafficCounters::default();
    let mut tx = TransactionCounter::new(profile);
    let mut writes = Vec::new();

    let (interior_region, staged) = block_regions(grid, block, interior);

    // Metadata staging and the in-shared-memory placement scan.
    let (local, scan_stats) = build_local_offsets(&staged, binning, grid, threads);
    counters.sync_count += 1 + scan_stats.sync_count;

    // Stage every particle of the region once: threads stride over staged
    // slots, warp accesses walk the (increasing) global indices.
    let staged_total = local.shared_to_global.len();
    counters.global_particle_loads += staged_total as u64;
    counters.shared_stores += staged_total as u64;
    for round_start in (0..staged_total).step_by(threads) {
        let round_len = threads.min(staged_total - round_start);
        for warp_start in (round_start..round_start + round_len).step_by(profile.warp_size) {
            let warp_len = profile.warp_size.min(round_start + round_len - warp_start);
            tx.warp_gather(&local.shared_to_global[warp_start..warp_start + warp_len]);
        }
    }
    counters.sync_count += 1;

    // Compute phase: threads stride over interior target slots
    // (cell-major, max_per_cell slots each); a lane whose slot holds no
    // particle idles under the block round.
    let m_c = binning.max_per_cell;
    let interior_cells = interior_region.cells(grid);
    let slot_space = interior_cells.len() * m_c;
    for round_start in (0..slot_space).step_by(threads) {
        let round_len = threads.min(slot_space - round_start);
        let mut round_trips: Vec<u64> = Vec::with_capacity(round_len);
        for lane in 0..round_len {
            let slot = round_start + lane;
            let lin = interior_cells[slot / m_c];
            let k = slot % m_c;
            if k >= binning.counts[lin] {
                round_trips.push(0);
                continue;
            }
            let target = binning.offsets[lin] + k;
            counters.shared_loads += 1; // target latch from the staged buffer
            let mut acc = Accum::default();
            let mut trips = 0u64;
            for nb in neighbor_cells(grid.coord(lin), grid) {
                let src = binning.cell_range(grid.linear(nb));
                debug_assert!(staged.contains(nb));
                trips += src.len() as u64;
                for s in src {
                    if s != target {
                        counters.shared_loads += 1;
                        counters.interactions += 1;
                        acc.add(pair(scene, kernel, target, s));
                    }
                }
            }
            round_trips.push(trips);
            writes.push((target, acc));
        }
        // Idle model: lockstep block round against the busiest lane.
        let envelope = round_trips.iter().copied().max().unwrap_or(0);
        if envelope > 0 {
            counters.idle_lane_iterations +=
                (threads - round_len) as u64 * envelope
                    + round_trips.iter().map(|&t| envelope - t).sum::<u64>();
        }
        // Write-back of the round's finished targets.
        let mut targets: Vec<usize> = Vec::with_capacity(round_len);
        for lane in 0..round_len {
            let slot = round_start + lane;
            let lin = interior_cells[slot / m_c];
            let k = slot % m_c;
            if k < binning.counts[lin] {
                targets.push(binning.offsets[lin] + k);
            }
        }
        counters.global_particle_stores += targets.len() as u64;
        for warp in targets.chunks(profile.warp_size) {
            tx.warp_gather(warp);
        }
    }

    counters.global_transactions = tx.total;
    BlockResult { writes, counters }
}
