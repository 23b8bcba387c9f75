//! The seven interaction strategies, executed against the device model.
//!
//! Every strategy receives the same binned scene (cell-sorted particles,
//! counts, offsets) and produces per-particle force/potential outputs plus
//! the traffic its block schedule generated. Blocks execute round-based:
//! stage, barrier, compute. Counters are bumped at the exact points the
//! corresponding device code would touch memory; register traffic is free.
//!
//! Determinism: every strategy owns a disjoint slice of the outputs per
//! block and accumulates each target's contributions in a fixed source
//! order, so results are independent of block scheduling. All strategies
//! except the classic X-pencil visit sources in canonical neighbor-cell
//! order (Z, then Y, then X ascending; sorted order within a cell) and
//! produce bit-identical outputs; the X-pencil computes its home pencil
//! before the neighbor sweep, which only reassociates the double-precision
//! sums.
//!
//! Block ids grow X-fastest over the block grid, mirroring cell
//! linearization; per-block counters are reported in that order.

mod all_in_sm;
mod par_cell;
mod par_part;
mod xpencil;

pub use all_in_sm::{block_regions, build_local_offsets, LocalOffsets, StagedRegion};
pub use xpencil::run_xpencil_reg_with;

use crate::binning::{bin_particles, scatter, CellBinning};
use crate::error::{Error, Result};
use crate::gpumodel::{DeviceProfile, LaunchConfig, TrafficCounters};
use crate::grid::{CellCoord, GridSpec};
use crate::kernels::{pair_contribution, KernelSpec};
use crate::particles::ParticleSet;
use serde::{Deserialize, Serialize};

/// A scene prepared for strategy execution: grid, cell-sorted particles,
/// and the binning metadata.
#[derive(Debug, Clone)]
pub struct BinnedScene {
    pub grid: GridSpec,
    pub sorted: ParticleSet,
    pub binning: CellBinning,
    /// Linear cell of each sorted slot.
    cell_of_slot: Vec<usize>,
}

impl BinnedScene {
    pub fn build(parts: &ParticleSet, grid: &GridSpec) -> Self {
        parts.assert_consistent();
        let (binning, sorted) = bin_particles(parts, grid);
        let mut cell_of_slot = vec![0usize; sorted.len()];
        for lin in 0..grid.cell_count() {
            for s in binning.cell_range(lin) {
                cell_of_slot[s] = lin;
            }
        }
        Self {
            grid: grid.clone(),
            sorted,
            binning,
            cell_of_slot,
        }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    #[inline]
    pub fn cell_of(&self, slot: usize) -> usize {
        self.cell_of_slot[slot]
    }

    #[inline]
    pub fn coord_of(&self, slot: usize) -> CellCoord {
        self.grid.coord(self.cell_of_slot[slot])
    }

    /// Position and param widened to f64 for kernel evaluation.
    #[inline]
    pub fn record(&self, slot: usize) -> ([f64; 3], f64) {
        (
            [
                self.sorted.pos_x[slot] as f64,
                self.sorted.pos_y[slot] as f64,
                self.sorted.pos_z[slot] as f64,
            ],
            self.sorted.param[slot] as f64,
        )
    }
}

/// Force and potential outputs aligned with the original particle order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrategyOutputs {
    pub fx: Vec<f32>,
    pub fy: Vec<f32>,
    pub fz: Vec<f32>,
    pub pot: Vec<f32>,
}

/// One strategy execution: outputs, aggregated counters, per-block counters
/// (in block-id order), and the launch actually used.
#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub outputs: StrategyOutputs,
    pub counters: TrafficCounters,
    pub per_block: Vec<TrafficCounters>,
    pub launch: LaunchConfig,
}

/// Per-target double-precision accumulator. Contributions are summed in
/// f64 and rounded to f32 once at the write-back, pinning float association
/// to the traversal order instead of the device schedule.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accum {
    pub f: [f64; 3],
    pub pot: f64,
}

impl Accum {
    #[inline]
    pub fn add(&mut self, contribution: ([f64; 3], f64)) {
        self.f[0] += contribution.0[0];
        self.f[1] += contribution.0[1];
        self.f[2] += contribution.0[2];
        self.pot += contribution.1;
    }
}

/// Evaluate the pair kernel between two sorted slots.
#[inline]
pub(crate) fn pair(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    target: usize,
    source: usize,
) -> ([f64; 3], f64) {
    pair_contribution(scene.record(target), scene.record(source), kernel)
}

/// Per-block partial result: (sorted slot, accumulated outputs) plus the
/// block's private counters.
pub(crate) struct BlockResult {
    pub writes: Vec<(usize, Accum)>,
    pub counters: TrafficCounters,
}

/// Merge per-block results into final outputs (sorted space, then scattered
/// back to the original order through the permutation).
pub(crate) fn assemble(
    scene: &BinnedScene,
    launch: LaunchConfig,
    blocks: Vec<BlockResult>,
) -> StrategyResult {
    let n = scene.len();
    let mut sorted_out = ParticleSet::with_capacity(n);
    for s in 0..n {
        sorted_out.push(scene.sorted.position(s), scene.sorted.param[s]);
    }
    let mut total = TrafficCounters::default();
    let mut per_block = Vec::with_capacity(blocks.len());
    for block in blocks {
        for (slot, acc) in block.writes {
            sorted_out.out_fx[slot] = acc.f[0] as f32;
            sorted_out.out_fy[slot] = acc.f[1] as f32;
            sorted_out.out_fz[slot] = acc.f[2] as f32;
            sorted_out.out_pot[slot] = acc.pot as f32;
        }
        total += block.counters;
        per_block.push(block.counters);
    }
    let original = scatter(&sorted_out, &scene.binning.perm);
    StrategyResult {
        outputs: StrategyOutputs {
            fx: original.out_fx,
            fy: original.out_fy,
            fz: original.out_fz,
            pot: original.out_pot,
        },
        counters: total,
        per_block,
        launch,
    }
}

pub(crate) fn empty_result(launch: LaunchConfig) -> StrategyResult {
    StrategyResult {
        outputs: StrategyOutputs::default(),
        counters: TrafficCounters::default(),
        per_block: Vec::new(),
        launch,
    }
}

/// Launch-time check shared by all strategies: the grid must be usable with
/// this kernel's cutoff.
pub(crate) fn validate_scene(scene: &BinnedScene, kernel: &KernelSpec) -> Result<()> {
    if kernel.cutoff > scene.grid.cell_width as f64 {
        return Err(Error::ConfigInvalid(format!(
            "kernel cutoff {} exceeds cell width {}",
            kernel.cutoff, scene.grid.cell_width
        )));
    }
    Ok(())
}

/// The seven execution strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ParPartNoLoop,
    ParPartLoop,
    ParCell,
    ParCellSm,
    AllInSm,
    XPencil,
    XPencilReg,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::ParPartNoLoop,
        Strategy::ParPartLoop,
        Strategy::ParCell,
        Strategy::ParCellSm,
        Strategy::AllInSm,
        Strategy::XPencil,
        Strategy::XPencilReg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ParPartNoLoop => "par-part-noloop",
            Strategy::ParPartLoop => "par-part-loop",
            Strategy::ParCell => "par-cell",
            Strategy::ParCellSm => "par-cell-sm",
            Strategy::AllInSm => "all-in-sm",
            Strategy::XPencil => "x-pencil",
            Strategy::XPencilReg => "x-pencil-reg",
        }
    }

    pub fn parse(name: &str) -> Option<Strategy> {
        Strategy::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn run(
        self,
        scene: &BinnedScene,
        kernel: &KernelSpec,
        profile: &DeviceProfile,
    ) -> Result<StrategyResult> {
        match self {
            Strategy::ParPartNoLoop => run_par_part_noloop(scene, kernel, profile),
            Strategy::ParPartLoop => run_par_part_loop(scene, kernel, profile),
            Strategy::ParCell => run_par_cell(scene, kernel, profile),
            Strategy::ParCellSm => run_par_cell_sm(scene, kernel, profile),
            Strategy::AllInSm => run_all_in_sm(scene, kernel, profile),
            Strategy::XPencil => run_xpencil(scene, kernel, profile),
            Strategy::XPencilReg => run_xpencil_reg(scene, kernel, profile),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn run_par_part_noloop(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    par_part::run(scene, kernel, profile, None)
}

pub fn run_par_part_loop(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    par_part::run(scene, kernel, profile, None)
}

/// Par-Part-Loop with an explicit grid/block shape; the grid-stride loop
/// covers all particles for any positive pair.
pub fn run_par_part_loop_with(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
    blocks: usize,
    threads_per_block: usize,
) -> Result<StrategyResult> {
    par_part::run(scene, kernel, profile, Some((blocks, threads_per_block)))
}

pub fn run_par_cell(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    par_cell::run(scene, kernel, profile, false)
}

pub fn run_par_cell_sm(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    par_cell::run(scene, kernel, profile, true)
}

pub fn run_all_in_sm(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    all_in_sm::run(scene, kernel, profile)
}

pub fn run_xpencil(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    xpencil::run_pencil(scene, kernel, profile)
}

pub fn run_xpencil_reg(
    scene: &BinnedScene,
    kernel: &KernelSpec,
    profile: &DeviceProfile,
) -> Result<StrategyResult> {
    xpencil::run_reg(scene, kernel, profile, None)
}
