//! Cell-parallel strategies: one thread-block per cell, one thread per
//! target particle of the cell, chunked when a cell exceeds the block.
//!
//! Plain variant (Par-Cell): every thread of the block walks the same
//! source stream, so the block's source loads factorize to one broadcast
//! per source record per target chunk. Lanes without a target particle idle
//! for the whole chunk's source sweep.
//!
//! Shared-memory variant (Par-Cell-SM): sources are staged cell by cell in
//! block-sized pieces (two barriers around each staged piece), read from
//! shared memory per interaction. The shared buffer is a fixed 512 records.

use super::{assemble, empty_result, pair, validate_scene, Accum, BinnedScene, BlockResult};
use crate::error::Result;
use crate::gpumodel::{
    DeviceProfile, LaunchConfig, StrategyParams, TrafficCounters, TransactionCounter,
};
use crate::grid::neighbor_cells;
use crate::kernels::KernelSpec;
use crate::strategies::StrategyResult;
use rayon::prelude::*;

const THREADS: usize = 128;
/// Shared buffer capacity of the SM variant, in particle records.
const SM_BUFFER_RECORDS: usize = 512;

pub(super) fn run(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    staged_shared: bool,
) -> Result<StrategyResult> {
    validate_scene(scene, kernel)?;
    let cells = scene.grid.cell_count();
    let launch = LaunchConfig {
        blocks: cells,
        threads_per_block: THREADS,
        dynamic_shared_bytes: if staged_shared {
            SM_BUFFER_RECORDS * profile.bytes_per_particle
        } else {
            0
        },
        strategy_params: StrategyParams::None,
    };
    launch.validate(profile)?;
    if scene.is_empty() {
        return Ok(empty_result(launch));
    }

    let block_results: Vec<BlockResult> = (0..cells)
        .into_par_iter()
        .map(|lin| run_cell_block(scene, kernel, profile, lin, staged_shared))
        .collect();

    Ok(assemble(scene, launch, block_results))
}

fn run_cell_block(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    lin: usize,
    staged_shared: bool,
) -> BlockResult {
    let mut counters = TrafficCounters::default();
    let mut tx = TransactionCounter::new(profile);
    let mut writes = Vec::new();

    let range = scene.binning.cell_range(lin);
    let size = range.len();
    // An empty cell performs no loads at all.
    if size == 0 {
        return BlockResult { writes, counters };
    }

    let neighbors = neighbor_cells(scene.grid.coord(lin), &scene.grid);

    // Target chunks of the block-wide strided loop.
    for chunk_start in (0..size).step_by(THREADS) {
        let chunk_len = THREADS.min(size - chunk_start);
        let first = range.start + chunk_start;

        // Coalesced target loads for the chunk.
        counters.global_particle_loads += chunk_len as u64;
        tx.contiguous(first, chunk_len);

        let mut accs = vec![Accum::default(); chunk_len];
        let mut chunk_source_trips = 0u64;

        for nb in &neighbors {
            let src_range = scene.binning.cell_range(scene.grid.linear(*nb));
            if staged_shared {
                // Stage the source cell in block-sized pieces; every staged
                // record is one global load plus one shared store, each
                // interaction one shared load.
                for stage_start in (0..src_range.len()).step_by(THREADS) {
                    let stage_len = THREADS.min(src_range.len() - stage_start);
                    let stage_first = src_range.start + stage_start;
                    counters.global_particle_loads += stage_len as u64;
                    counters.shared_stores += stage_len as u64;
                    tx.contiguous(stage_first, stage_len);
                    counters.sync_count += 2;
                    for (k, acc) in accs.iter_mut().enumerate() {
                        let target = first + k;
                        for s in stage_first..stage_first + stage_len {
                            if s != target {
                                counters.shared_loads += 1;
                                counters.interactions += 1;
                                acc.add(pair(scene, kernel, target, s));
                            }
                        }
                    }
                    chunk_source_trips += stage_len as u64;
                }
            } else {
                // Every thread walks the same stream: the block's access
                // factorizes to one broadcast per source record.
                for s in src_range.clone() {
                    counters.global_particle_loads += 1;
                    tx.broadcast();
                    for (k, acc) in accs.iter_mut().enumerate() {
                        let target = first + k;
                        if s != target {
                            counters.interactions += 1;
                            acc.add(pair(scene, kernel, target, s));
                        }
                    }
                }
                chunk_source_trips += src_range.len() as u64;
            }
        }

        // Lanes with no target idle for the chunk's whole source sweep.
        counters.idle_lane_iterations += (THREADS - chunk_len) as u64 * chunk_source_trips;

        for (k, acc) in accs.into_iter().enumerate() {
            writes.push((first + k, acc));
        }
        counters.global_particle_stores += chunk_len as u64;
        tx.contiguous(first, chunk_len);
    }

    counters.global_transactions = tx.total;
    BlockResult { writes, counters }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpumodel::DeviceProfile;
    use crate::grid::GridSpec;
    use crate::kernels::{KernelKind, KernelSpec};
    use crate::particles::ParticleSet;
    use crate::scenario::uniform_scene;
    use crate::strategies::{run_par_cell, run_par_cell_sm, run_par_part_noloop};

    fn lj() -> KernelSpec {
        KernelSpec::new(KernelKind::LennardJones, 1.0)
    }

    /// One particle in each cell of a sub-region, none elsewhere (M_C = 1).
    fn sparse_scene(d: usize, filled: usize) -> (ParticleSet, GridSpec) {
        let grid = GridSpec::cube(d, 1.0);
        let mut parts = ParticleSet::default();
        for z in 0..filled {
            for y in 0..filled {
                for x in 0..filled {
                    parts.push([x as f32 + 0.5, y as f32 + 0.5, z as f32 + 0.5], 1.0);
                }
            }
        }
        (parts, grid)
    }

    #[test]
    fn outputs_match_par_part_bitwise() {
        let profile = DeviceProfile::t600();
        let (parts, grid) = uniform_scene(4, 10, 7);
        let scene = BinnedScene::build(&parts, &grid);
        let kernel = lj();
        let reference = run_par_part_noloop(&scene, &kernel, &profile).unwrap();
        for result in [
            run_par_cell(&scene, &kernel, &profile).unwrap(),
            run_par_cell_sm(&scene, &kernel, &profile).unwrap(),
        ] {
            assert_eq!(result.outputs, reference.outputs);
            assert_eq!(result.counters.interactions, reference.counters.interactions);
        }
    }

    #[test]
    fn empty_cells_perform_no_loads() {
        let (parts, grid) = sparse_scene(4, 2);
        let scene = BinnedScene::build(&parts, &grid);
        let profile = DeviceProfile::t600();
        let result = run_par_cell(&scene, &lj(), &profile).unwrap();
        // Blocks of empty cells contribute all-zero counters.
        for (lin, block) in result.per_block.iter().enumerate() {
            if scene.binning.counts[lin] == 0 {
                assert_eq!(*block, TrafficCounters::default());
            }
        }
    }

    #[test]
    fn idle_lanes_on_single_particle_cells() {
        // M_C = 1: one computing lane per block, the other 127 idle for the
        // cell's entire source sweep.
        let (parts, grid) = sparse_scene(3, 3);
        let scene = BinnedScene::build(&parts, &grid);
        assert_eq!(scene.binning.max_per_cell, 1);
        let profile = DeviceProfile::t600();
        let result = run_par_cell(&scene, &lj(), &profile).unwrap();
        let mut expected_idle = 0u64;
        for lin in 0..grid.cell_count() {
            if scene.binning.counts[lin] == 0 {
                continue;
            }
            let trips: u64 = neighbor_cells(grid.coord(lin), &grid)
                .iter()
                .map(|&nb| scene.binning.counts[grid.linear(nb)] as u64)
                .sum();
            expected_idle += (THREADS as u64 - 1) * trips;
        }
        assert_eq!(result.counters.idle_lane_iterations, expected_idle);
    }

    #[test]
    fn sm_variant_counter_identities() {
        let profile = DeviceProfile::t600();
        let (parts, grid) = uniform_scene(4, 10, 13);
        let scene = BinnedScene::build(&parts, &grid);
        assert!(scene.binning.max_per_cell <= THREADS, "single-chunk scene");
        let result = run_par_cell_sm(&scene, &lj(), &profile).unwrap();
        // Single chunk per cell: per-block global loads are the cell's
        // targets plus the neighbor populations, staged once.
        for lin in 0..grid.cell_count() {
            let size = scene.binning.counts[lin] as u64;
            if size == 0 {
                continue;
            }
            let nb_sum: u64 = neighbor_cells(grid.coord(lin), &grid)
                .iter()
                .map(|&nb| scene.binning.counts[grid.linear(nb)] as u64)
                .sum();
            assert_eq!(
                result.per_block[lin].global_particle_loads,
                size + nb_sum,
                "cell {lin}"
            );
            assert_eq!(result.per_block[lin].shared_stores, nb_sum);
        }
        assert_eq!(result.counters.shared_loads, result.counters.interactions);
    }

    #[test]
    fn multi_chunk_cells_restage_sources() {
        // Cram 300 particles into one cell: 3 chunks of a 128-thread block,
        // neighbors staged once per chunk.
        let grid = GridSpec::cube(2, 1.0);
        let mut parts = ParticleSet::default();
        for i in 0..300 {
            let t = i as f32 / 300.0;
            parts.push([0.1 + 0.8 * t, 0.3, 0.4], 1.0);
        }
        let scene = BinnedScene::build(&parts, &grid);
        let profile = DeviceProfile::t600();
        let result = run_par_cell_sm(&scene, &lj(), &profile).unwrap();
        let lin = scene.cell_of(0);
        let chunks = 300usize.div_ceil(THREADS) as u64;
        assert_eq!(
            result.per_block[lin].global_particle_loads,
            300 + chunks * 300
        );
    }
}
