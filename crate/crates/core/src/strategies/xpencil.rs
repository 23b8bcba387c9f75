//! Pencil strategies: shared memory holds one X-run of cells at a time.
//!
//! Classic pencil: a block owns an X-run of target cells (plus two ghost
//! cells); it stages its own pencil, latches one target per thread into
//! registers, computes against the staged pencil, then sweeps the up-to-8
//! neighboring (Y, Z) pencils, restaging and recomputing each. Staging a
//! pencil is one contiguous slice of the sorted array, which is the whole
//! point: loads coalesce. Two barriers bracket every staged pencil's
//! compute.
//!
//! Register variant: targets form a sub-box rather than a pencil, latched
//! into registers (register traffic is free and uncounted). Source pencils
//! are staged one at a time across the sub-box's Y/Z extent, in ascending
//! order including the target rows; records already held in registers are
//! copied register-to-shared without touching global memory. Targets whose
//! cell row is not adjacent to the staged pencil idle through that pencil's
//! compute.

use super::{assemble, empty_result, pair, validate_scene, Accum, BinnedScene, BlockResult};
use crate::error::{Error, Result};
use crate::gpumodel::{
    DeviceProfile, LaunchConfig, StrategyParams, TrafficCounters, TransactionCounter,
};
use crate::kernels::KernelSpec;
use crate::launchcfg::{block_count, ensure_parallelism, pencil_len, PencilConfig, PENCIL_THREAD_CAP};
use crate::strategies::StrategyResult;
use rayon::prelude::*;

pub(super) fn run_pencil(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    validate_scene(scene, kernel)?;
    if scene.is_empty() {
        return Ok(empty_result(LaunchConfig::simple(0, 1)));
    }
    let grid = &scene.grid;
    let m_c = scene.binning.max_per_cell;
    let base = pencil_len(
        profile.shared_mem_per_block,
        m_c,
        profile.bytes_per_particle,
        grid.dims[0],
    )
    .ok_or_else(|| Error::Inapplicable {
        strategy: "x-pencil",
        reason: format!(
            "a 3-cell pencil of {} particles per cell does not fit shared memory or the thread cap",
            m_c
        ),
    })?;

    let interior =
        ensure_parallelism([base.interior_len, 1, 1], grid.dims, profile.num_sms)[0];
    let total_len = interior + 2;
    let threads = m_c * total_len;
    let blocks = block_count([interior, 1, 1], grid.dims);
    let config = PencilConfig {
        total_len,
        interior_len: interior,
        threads,
        blocks,
    };
    let launch = LaunchConfig {
        blocks,
        threads_per_block: threads,
        dynamic_shared_bytes: m_c * total_len * profile.bytes_per_particle,
        strategy_params: StrategyParams::Pencil(config),
    };
    launch.validate(profile)?;

    let nbx = grid.dims[0].div_ceil(interior);
    let block_results: Vec<BlockResult> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let bx = b % nbx;
            let y = (b / nbx) % grid.dims[1];
            let z = b / (nbx * grid.dims[1]);
            run_pencil_block(scene, kernel, profile, [bx, y, z], interior, threads)
        })
        .collect();

    Ok(assemble(scene, launch, block_results))
}

/// Sorted-array range of the cells `x0..x1` at row `(y, z)`.
fn pencil_range(
    scene: &BinnedScene,
    x0: usize,
    x1: usize,
    y: usize,
    z: usize,
) -> std::ops::Range<usize> {
    let nx = scene.grid.dims[0];
    let flat = |x: usize| x + nx * (y + scene.grid.dims[1] * z);
    scene.binning.offsets[flat(x0)]..scene.binning.offsets[flat(x1)]
}

fn run_pencil_block(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    block: [usize; 3],
    interior_len: usize,
    threads: usize,
) -> BlockResult {
    let grid = &scene.grid;
    let (y, z) = (block[1], block[2]);
    let x0 = block[0] * interior_len;
    let x1 = ((block[0] + 1) * interior_len).min(grid.dims[0]);
    let sx0 = x0.saturating_sub(1);
    let sx1 = (x1 + 1).min(grid.dims[0]);

    let mut counters = TrafficCounters::default();
    let mut tx = TransactionCounter::new(profile);
    let mut writes = Vec::new();

    // Targets: the interior cells' particles, one per thread, latched into
    // registers out of the staged home pencil.
    let target_range = pencil_range(scene, x0, x1, y, z);
    let targets: Vec<usize> = target_range.clone().collect();
    let mut accs = vec![Accum::default(); targets.len()];

    let stage_and_compute = |py: usize,
                                 pz: usize,
                                 counters: &mut TrafficCounters,
                                 tx: &mut TransactionCounter,
                                 accs: &mut Vec<Accum>| {
        let staged = pencil_range(scene, sx0, sx1, py, pz);
        counters.global_particle_loads += staged.len() as u64;
        counters.shared_stores += staged.len() as u64;
        tx.contiguous(staged.start, staged.len());
        counters.sync_count += 1;
        let mut trips: Vec<u64> = Vec::with_capacity(targets.len());
        for (t_idx, &target) in targets.iter().enumerate() {
            let cx = scene.coord_of(target).x;
            let src = pencil_range(
                scene,
                cx.saturating_sub(1).max(sx0),
                (cx + 2).min(sx1),
                py,
                pz,
            );
            trips.push(src.len() as u64);
            for s in src {
                if s != target {
                    counters.shared_loads += 1;
                    counters.interactions += 1;
                    accs[t_idx].add(pair(scene, kernel, target, s));
                }
            }
        }
        counters.sync_count += 1;
        // Lockstep idle against the busiest lane; threads beyond the target
        // count idle the whole compute.
        let envelope = trips.iter().copied().max().unwrap_or(0);
        if envelope > 0 {
            counters.idle_lane_iterations += (threads - targets.len()) as u64 * envelope
                + trips.iter().map(|&t| envelope - t).sum::<u64>();
        }
    };

    // Home pencil first: stage, latch targets, compute.
    stage_and_compute(y, z, &mut counters, &mut tx, &mut accs);
    counters.shared_loads += targets.len() as u64; // register latch from shared

    // Then the neighboring pencils, Z-major ascending, skipping home.
    for pz in z.saturating_sub(1)..(z + 2).min(grid.dims[2]) {
        for py in y.saturating_sub(1)..(y + 2).min(grid.dims[1]) {
            if py == y && pz == z {
                continue;
            }
            stage_and_compute(py, pz, &mut counters, &mut tx, &mut accs);
        }
    }

    // Coalesced write-back: targets are one contiguous slice.
    counters.global_particle_stores += targets.len() as u64;
    tx.contiguous(target_range.start, targets.len());
    for (t_idx, &target) in targets.iter().enumerate() {
        writes.push((target, accs[t_idx]));
    }

    counters.global_transactions = tx.total;
    BlockResult { writes, counters }
}

pub(super) fn run_reg(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    target_dims_override: Option<[usize; 3]>,
) -> Result<StrategyResult> {
    validate_scene(scene, kernel)?;
    if scene.is_empty() {
        return Ok(empty_result(LaunchConfig::simple(0, 1)));
    }
    let grid = &scene.grid;
    let m_c = scene.binning.max_per_cell;
    let cap = PENCIL_THREAD_CAP.min(profile.max_threads_per_block);

    let target_dims = match target_dims_override {
        Some(dims) => {
            if dims.iter().any(|&d| d == 0) {
                return Err(Error::ConfigInvalid(
                    "target sub-box dims must be positive".into(),
                ));
            }
            dims
        }
        None => {
            let base = pencil_len(
                profile.shared_mem_per_block,
                m_c,
                profile.bytes_per_particle,
                grid.dims[0],
            )
            .ok_or_else(|| Error::Inapplicable {
                strategy: "x-pencil-reg",
                reason: format!(
                    "a 3-cell pencil of {} particles per cell does not fit shared memory or the thread cap",
                    m_c
                ),
            })?;
            // Grow the Y/Z extent of the target sub-box while one thread per
            // target still fits the cap, then shrink for parallelism.
            let tx_len = base.interior_len;
            let mut t = 1usize;
            while m_c * tx_len * (t + 1) * (t + 1) <= cap
                && t < grid.dims[1].max(grid.dims[2])
            {
                t += 1;
            }
            let dims = [
                tx_len,
                t.min(grid.dims[1]),
                t.min(grid.dims[2]),
            ];
            ensure_parallelism(dims, grid.dims, profile.num_sms)
        }
    };

    let target_cells: usize = target_dims.iter().product();
    let particle_bound = m_c * target_cells;
    if particle_bound > cap {
        return Err(Error::Inapplicable {
            strategy: "x-pencil-reg",
            reason: format!(
                "target sub-box holds up to {particle_bound} particles, beyond the {cap}-thread cap"
            ),
        });
    }
    let pencil_total = (target_dims[0] + 2).min(grid.dims[0] + 2);
    let shared_bytes = m_c * pencil_total * profile.bytes_per_particle;
    if shared_bytes > profile.shared_mem_per_block {
        return Err(Error::Inapplicable {
            strategy: "x-pencil-reg",
            reason: format!(
                "a {pencil_total}-cell source pencil needs {shared_bytes} shared bytes, over the {} limit",
                profile.shared_mem_per_block
            ),
        });
    }
    let threads = particle_bound.max(1);
    let blocks = block_count(target_dims, grid.dims);
    let config = PencilConfig {
        total_len: pencil_total,
        interior_len: target_dims[0],
        threads,
        blocks,
    };
    let launch = LaunchConfig {
        blocks,
        threads_per_block: threads,
        dynamic_shared_bytes: shared_bytes,
        strategy_params: StrategyParams::Pencil(config),
    };
    launch.validate(profile)?;

    let nbx = grid.dims[0].div_ceil(target_dims[0]);
    let nby = grid.dims[1].div_ceil(target_dims[1]);
    let block_results: Vec<BlockResult> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let coords = [b % nbx, (b / nbx) % nby, b / (nbx * nby)];
            run_reg_block(scene, kernel, profile, coords, target_dims, threads)
        })
        .collect();

    Ok(assemble(scene, launch, block_results))
}

fn run_reg_block(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    block: [usize; 3],
    target_dims: [usize; 3],
    threads: usize,
) -> BlockResult {
    let grid = &scene.grid;
    let x0 = block[0] * target_dims[0];
    let x1 = ((block[0] + 1) * target_dims[0]).min(grid.dims[0]);
    let y0 = block[1] * target_dims[1];
    let y1 = ((block[1] + 1) * target_dims[1]).min(grid.dims[1]);
    let z0 = block[2] * target_dims[2];
    let z1 = ((block[2] + 1) * target_dims[2]).min(grid.dims[2]);
    let sx0 = x0.saturating_sub(1);
    let sx1 = (x1 + 1).min(grid.dims[0]);

    let mut counters = TrafficCounters::default();
    let mut tx = TransactionCounter::new(profile);

    // Latch targets into registers, row by row. Register traffic is free.
    let mut targets: Vec<usize> = Vec::new();
    for tz in z0..z1 {
        for ty in y0..y1 {
            targets.extend(pencil_range(scene, x0, x1, ty, tz));
        }
    }
    let mut accs = vec![Accum::default(); targets.len()];

    // Source pencils in ascending (Z, Y) order across the expanded extent,
    // target rows included.
    for pz in z0.saturating_sub(1)..(z1 + 1).min(grid.dims[2]) {
        for py in y0.saturating_sub(1)..(y1 + 1).min(grid.dims[1]) {
            let staged = pencil_range(scene, sx0, sx1, py, pz);
            counters.shared_stores += staged.len() as u64;
            let overlaps_targets = (y0..y1).contains(&py) && (z0..z1).contains(&pz);
            if overlaps_targets {
                // The target run of this row comes from registers; only the
                // X-ghost cells hit global memory.
                let left = pencil_range(scene, sx0, x0, py, pz);
                let right = pencil_range(scene, x1, sx1, py, pz);
                counters.global_particle_loads += (left.len() + right.len()) as u64;
                if !left.is_empty() {
                    tx.contiguous(left.start, left.len());
                }
                if !right.is_empty() {
                    tx.contiguous(right.start, right.len());
                }
            } else {
                counters.global_particle_loads += staged.len() as u64;
                tx.contiguous(staged.start, staged.len());
            }
            counters.sync_count += 1;

            // Compute: only targets in rows adjacent to the staged pencil
            // participate; the rest idle.
            let mut trips: Vec<u64> = Vec::with_capacity(targets.len());
            for (t_idx, &target) in targets.iter().enumerate() {
                let c = scene.coord_of(target);
                let active = c.y.abs_diff(py) <= 1 && c.z.abs_diff(pz) <= 1;
                if !active {
                    trips.push(0);
                    continue;
                }
                let src = pencil_range(
                    scene,
                    c.x.saturating_sub(1).max(sx0),
                    (c.x + 2).min(sx1),
                    py,
                    pz,
                );
                trips.push(src.len() as u64);
                for s in src {
                    if s != target {
                        counters.shared_loads += 1;
                        counters.interactions += 1;
                        accs[t_idx].add(pair(scene, kernel, target, s));
                    }
                }
            }
            counters.sync_count += 1;
            let envelope = trips.iter().copied().max().unwrap_or(0);
            if envelope > 0 {
                counters.idle_lane_iterations += (threads - targets.len()) as u64 * envelope
                    + trips.iter().map(|&t| envelope - t).sum::<u64>();
            }
        }
    }

    // Write-back, one contiguous run per target row.
    counters.global_particle_stores += targets.len() as u64;
    for tz in z0..z1 {
        for ty in y0..y1 {
            let row = pencil_range(scene, x0, x1, ty, tz);
            if !row.is_empty() {
                tx.contiguous(row.start, row.len());
            }
        }
    }

    counters.global_transactions = tx.total;
    let writes = targets
        .into_iter()
        .zip(accs)
        .collect();
    BlockResult { writes, counters }
}

/// Register variant with an explicit target sub-box shape (cells per axis).
pub fn run_xpencil_reg_with(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    target_dims: [usize; 3],
) -> Result<StrategyResult> {
    run_reg(scene, kernel, profile, Some(target_dims))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpumodel::DeviceProfile;
    use crate::grid::GridSpec;
    use crate::kernels::{KernelKind, KernelSpec};
    use crate::particles::ParticleSet;
    use crate::scenario::uniform_scene;
    use crate::strategies::{
        run_par_part_noloop, run_xpencil, run_xpencil_reg, run_xpencil_reg_with,
    };

    fn lj() -> KernelSpec {
        KernelSpec::new(KernelKind::LennardJones, 1.0)
    }

    #[test]
    fn single_cell_grid_minimal_sync() {
        let grid = GridSpec::cube(1, 1.0);
        let mut parts = ParticleSet::default();
        parts.push([0.2, 0.5, 0.5], 1.0);
        parts.push([0.7, 0.5, 0.5], 1.0);
        let scene = BinnedScene::build(&parts, &grid);
        let result = run_xpencil(&scene, &lj(), &DeviceProfile::t600()).unwrap();
        // One pencil, no neighbor iterations: two barriers total.
        assert_eq!(result.launch.blocks, 1);
        assert_eq!(result.counters.sync_count, 2);
        assert_eq!(result.counters.interactions, 2);
    }

    #[test]
    fn interior_pencil_stages_nine_rows(){
        let (parts, grid) = uniform_scene(4, 10, 31);
        let scene = BinnedScene::build(&parts, &grid);
        let profile = DeviceProfile {
            num_sms: 8,
            ..DeviceProfile::t600()
        };
        let result = run_xpencil(&scene, &lj(), &profile).unwrap();
        // Interior blocks: 9 pencils staged = 18 barriers; border blocks
        // fewer. Check an interior block by its (y, z) row.
        let crate::gpumodel::StrategyParams::Pencil(cfg) = result.launch.strategy_params
        else {
            panic!("expected pencil params")
        };
        let nbx = grid.dims[0].div_ceil(cfg.interior_len);
        for b in 0..result.launch.blocks {
            let y = (b / nbx) % grid.dims[1];
            let z = b / (nbx * grid.dims[1]);
            if (1..grid.dims[1] - 1).contains(&y) && (1..grid.dims[2] - 1).contains(&z) {
                assert_eq!(result.per_block[b].sync_count, 18, "block {b}");
            }
        }
    }

    #[test]
    fn per_block_loads_equal_pencil_population_sums() {
        let (parts, grid) = uniform_scene(4, 10, 17);
        let scene = BinnedScene::build(&parts, &grid);
        let profile = DeviceProfile::t600();
        let result = run_xpencil(&scene, &lj(), &profile).unwrap();
        let crate::gpumodel::StrategyParams::Pencil(cfg) = result.launch.strategy_params
        else {
            panic!("expected pencil params")
        };
        let nbx = grid.dims[0].div_ceil(cfg.interior_len);
        for b in 0..result.launch.blocks {
            let bx = b % nbx;
            let y = (b / nbx) % grid.dims[1];
            let z = b / (nbx * grid.dims[1]);
            let x0 = bx * cfg.interior_len;
            let x1 = ((bx + 1) * cfg.interior_len).min(grid.dims[0]);
            let sx0 = x0.saturating_sub(1);
            let sx1 = (x1 + 1).min(grid.dims[0]);
            let mut expected = 0u64;
            for pz in z.saturating_sub(1)..(z + 2).min(grid.dims[2]) {
                for py in y.saturating_sub(1)..(y + 2).min(grid.dims[1]) {
                    expected += pencil_range(&scene, sx0, sx1, py, pz).len() as u64;
                }
            }
            assert_eq!(result.per_block[b].global_particle_loads, expected, "block {b}");
        }
    }

    #[test]
    fn outputs_match_par_part() {
        let profile = DeviceProfile::t600();
        let (parts, grid) = uniform_scene(4, 10, 3);
        let scene = BinnedScene::build(&parts, &grid);
        let kernel = lj();
        let reference = run_par_part_noloop(&scene, &kernel, &profile).unwrap();
        // Classic pencil reassociates sums (home pencil first); compare with
        // tolerance.
        let pencil = run_xpencil(&scene, &kernel, &profile).unwrap();
        assert_eq!(pencil.counters.interactions, reference.counters.interactions);
        for i in 0..parts.len() {
            let err = (pencil.outputs.pot[i] as f64 - reference.outputs.pot[i] as f64).abs();
            assert!(
                err <= 1e-4 * (reference.outputs.pot[i].abs() as f64).max(1e-2),
                "i={i}"
            );
        }
        // The register variant accumulates in canonical order: bitwise.
        let reg = run_xpencil_reg(&scene, &kernel, &profile).unwrap();
        assert_eq!(reg.outputs, reference.outputs);
        assert_eq!(reg.counters.interactions, reference.counters.interactions);
    }

    #[test]
    fn reg_single_pencil_loads_drop_by_target_count() {
        let (parts, grid) = uniform_scene(4, 10, 23);
        let scene = BinnedScene::build(&parts, &grid);
        let profile = DeviceProfile::t600();
        let kernel = lj();
        let pencil = run_xpencil(&scene, &kernel, &profile).unwrap();
        let crate::gpumodel::StrategyParams::Pencil(cfg) = pencil.launch.strategy_params
        else {
            panic!("expected pencil params")
        };
        // Same geometry, targets in registers: every block saves exactly its
        // own targets' restage.
        let reg =
            run_xpencil_reg_with(&scene, &kernel, &profile, [cfg.interior_len, 1, 1]).unwrap();
        assert_eq!(reg.launch.blocks, pencil.launch.blocks);
        assert_eq!(
            reg.counters.global_particle_loads,
            pencil.counters.global_particle_loads - parts.len() as u64
        );
        for b in 0..reg.launch.blocks {
            assert_eq!(
                reg.per_block[b].global_particle_loads,
                pencil.per_block[b].global_particle_loads
                    - pencil.per_block[b].global_particle_stores,
                "block {b}"
            );
        }
        assert_eq!(reg.outputs.pot.len(), parts.len());
    }

    #[test]
    fn reg_never_loads_targets_from_global() {
        // In any geometry, global loads count only non-target records:
        // total loads + N equals the full pencil staging volume.
        let (parts, grid) = uniform_scene(4, 10, 29);
        let scene = BinnedScene::build(&parts, &grid);
        let profile = DeviceProfile::t600();
        let reg = run_xpencil_reg(&scene, &lj(), &profile).unwrap();
        assert_eq!(
            reg.counters.global_particle_loads + parts.len() as u64,
            reg.counters.shared_stores
        );
    }

    #[test]
    fn reg_rejects_oversized_target_box() {
        let (parts, grid) = uniform_scene(4, 10, 29);
        let scene = BinnedScene::build(&parts, &grid);
        let profile = DeviceProfile::t600();
        let err = run_xpencil_reg_with(&scene, &lj(), &profile, [4, 4, 4]).unwrap_err();
        assert!(matches!(err, Error::Inapplicable { .. }));
    }

    #[test]
    fn pencil_inapplicable_when_cell_too_full() {
        let grid = GridSpec::cube(2, 1.0);
        let mut parts = ParticleSet::default();
        for i in 0..2000 {
            parts.push([0.0004 * i as f32 + 0.05, 0.5, 0.5], 1.0);
        }
        let scene = BinnedScene::build(&parts, &grid);
        let err = run_xpencil(&scene, &lj(), &DeviceProfile::t600()).unwrap_err();
        assert!(matches!(err, Error::Inapplicable { .. }));
    }
}
