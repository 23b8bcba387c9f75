//! Per-particle strategies: one thread per target, no shared memory.
//!
//! The no-loop variant launches exactly one thread per particle (128-thread
//! blocks); the loop variant walks targets with a grid stride so any
//! grid/block shape works. At the default launch both walk the identical
//! schedule and must produce identical outputs and counters.
//!
//! Counter model: one global target load per particle, one global source
//! load per candidate pair (the identity guard is an index test and skips
//! the self record without touching memory), one store per particle. Target
//! loads and stores are warp-contiguous over the sorted array; each lane
//! gathers its own source stream, so per-iteration warp accesses are
//! scattered. Idle lanes are counted per warp against the longest-running
//! lane.

use super::{assemble, empty_result, pair, validate_scene, Accum, BinnedScene, BlockResult};
use crate::error::Result;
use crate::gpumodel::{DeviceProfile, LaunchConfig, TrafficCounters, TransactionCounter};
use crate::grid::neighbor_cells;
use crate::kernels::KernelSpec;
use crate::strategies::StrategyResult;
use rayon::prelude::*;

pub const DEFAULT_THREADS: usize = 128;

pub(super) fn run(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    launch_override: Option<(usize, usize)>,
) -> Result<StrategyResult> {
    validate_scene(scene, kernel)?;
    let n = scene.len();
    let (blocks, threads) = match launch_override {
        Some((b, t)) => (b.max(1), t.max(1)),
        None => (n.div_ceil(DEFAULT_THREADS).max(1), DEFAULT_THREADS),
    };
    let launch = LaunchConfig::simple(blocks, threads);
    launch.validate(profile)?;
    if n == 0 {
        return Ok(empty_result(launch));
    }

    let total_threads = blocks * threads;
    let block_results: Vec<BlockResult> = (0..blocks)
        .into_par_iter()
        .map(|b| run_block(scene, kernel, profile, b, threads, total_threads))
        .collect();

    Ok(assemble(scene, launch, block_results))
}

fn run_block(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    block: usize,
    threads: usize,
    total_threads: usize,
) -> BlockResult {
    let n = scene.len();
    let ws = profile.warp_size;
    let mut counters = TrafficCounters::default();
    let mut tx = TransactionCounter::new(profile);
    let mut writes = Vec::new();
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); ws];
    let mut gather_scratch: Vec<usize> = Vec::with_capacity(ws);

    // Grid-stride rounds; at the default launch every thread sees exactly
    // one round.
    let mut round = 0usize;
    loop {
        let base = block * threads + round * total_threads;
        if base >= n {
            break;
        }
        for warp_start in (0..threads).step_by(ws) {
            let first = base + warp_start;
            if first >= n {
                break;
            }
            let warp_lanes = ws.min(threads - warp_start);
            let lanes = warp_lanes.min(n - first);
            // Coalesced target loads: consecutive sorted slots.
            counters.global_particle_loads += lanes as u64;
            tx.contiguous(first, lanes);

            // Build each lane's candidate stream in canonical order.
            for lane in 0..ws {
                candidates[lane].clear();
                if lane >= lanes {
                    continue;
                }
                let target = first + lane;
                for cell in neighbor_cells(scene.coord_of(target), &scene.grid) {
                    let lin = scene.grid.linear(cell);
                    for s in scene.binning.cell_range(lin) {
                        if s != target {
                            candidates[lane].push(s);
                        }
                    }
                }
            }

            // Math: per-lane canonical accumulation.
            for lane in 0..lanes {
                let target = first + lane;
                let mut acc = Accum::default();
                for &s in &candidates[lane] {
                    acc.add(pair(scene, kernel, target, s));
                }
                counters.interactions += candidates[lane].len() as u64;
                counters.global_particle_loads += candidates[lane].len() as u64;
                writes.push((target, acc));
            }

            // Lockstep source gathers: iteration k loads each active lane's
            // k-th candidate; lanes past their stream idle under the warp.
            let max_len = candidates.iter().map(Vec::len).max().unwrap_or(0);
            for k in 0..max_len {
                gather_scratch.clear();
                for lane_cand in candidates.iter() {
                    if let Some(&s) = lane_cand.get(k) {
                        gather_scratch.push(s);
                    }
                }
                tx.warp_gather(&gather_scratch);
            }
            for lane_cand in candidates.iter().take(warp_lanes) {
                counters.idle_lane_iterations += (max_len - lane_cand.len()) as u64;
            }

            // Coalesced result stores.
            counters.global_particle_stores += lanes as u64;
            tx.contiguous(first, lanes);
        }
        round += 1;
    }

    counters.global_transactions = tx.total;
    BlockResult { writes, counters }
}
