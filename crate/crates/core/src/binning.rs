//! Sorted-by-cell particle layout: per-cell counts, exclusive prefix
//! offsets, the sort permutation, and the maximum cell population.
//!
//! Placement is a stable counting sort rather than the atomic slot grab a
//! GPU would use: within each cell, original indices stay in ascending
//! order, which makes every downstream counter and output deterministic.

use crate::grid::{cell_index, GridSpec};
use crate::particles::ParticleSet;

/// Cell population bookkeeping for one binned scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellBinning {
    /// Particles per cell, `cell_count` entries.
    pub counts: Vec<usize>,
    /// Exclusive prefix of `counts` with the total appended:
    /// `offsets[k + 1] - offsets[k] == counts[k]` and `offsets[nc] == n`.
    /// The extra slot lets pencil arithmetic read "offset of the cell after"
    /// without special-casing the end of the grid.
    pub offsets: Vec<usize>,
    /// Sorted-order -> original-order index map (a permutation of `0..n`).
    pub perm: Vec<usize>,
    /// Maximum particles in any single cell; sizes shared-memory staging.
    pub max_per_cell: usize,
}

impl CellBinning {
    /// Sorted-array range holding the particles of linear cell `lin`.
    #[inline]
    pub fn cell_range(&self, lin: usize) -> std::ops::Range<usize> {
        self.offsets[lin]..self.offsets[lin + 1]
    }
}

/// Exclusive prefix sum with the total appended (`counts.len() + 1` entries).
pub fn global_prefix(counts: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    let mut running = 0usize;
    offsets.push(0);
    for &c in counts {
        running += c;
        offsets.push(running);
    }
    offsets
}

/// Bin particles into cells and produce the cell-sorted companion set.
///
/// The reorder is out-of-place: the returned [`ParticleSet`] is a gather of
/// `parts` through the permutation, `parts` itself is untouched.
pub fn bin_particles(parts: &ParticleSet, grid: &GridSpec) -> (CellBinning, ParticleSet) {
    let n = parts.len();
    let nc = grid.cell_count();

    let cell_of: Vec<usize> = (0..n)
        .map(|i| grid.linear(cell_index(parts.position(i), grid)))
        .collect();

    let mut counts = vec![0usize; nc];
    for &c in &cell_of {
        counts[c] += 1;
    }
    let offsets = global_prefix(&counts);
    let max_per_cell = counts.iter().copied().max().unwrap_or(0);

    // Stable placement: ascending original index within each cell.
    let mut cursor = offsets[..nc].to_vec();
    let mut perm = vec![0usize; n];
    for (i, &c) in cell_of.iter().enumerate() {
        perm[cursor[c]] = i;
        cursor[c] += 1;
    }

    let binning = CellBinning {
        counts,
        offsets,
        perm,
        max_per_cell,
    };
    let sorted = gather(parts, &binning.perm);
    (binning, sorted)
}

/// Gather `parts` into sorted order: `out[s] = parts[perm[s]]`.
pub fn gather(parts: &ParticleSet, perm: &[usize]) -> ParticleSet {
    let mut out = ParticleSet::with_capacity(perm.len());
    for &i in perm {
        out.push(parts.position(i), parts.param[i]);
        let s = out.len() - 1;
        out.out_fx[s] = parts.out_fx[i];
        out.out_fy[s] = parts.out_fy[i];
        out.out_fz[s] = parts.out_fz[i];
        out.out_pot[s] = parts.out_pot[i];
    }
    out
}

/// Scatter a sorted set back to original order: `out[perm[s]] = sorted[s]`.
pub fn scatter(sorted: &ParticleSet, perm: &[usize]) -> ParticleSet {
    let n = sorted.len();
    let mut out = ParticleSet::with_capacity(n);
    for _ in 0..n {
        out.push([0.0; 3], 0.0);
    }
    for (s, &i) in perm.iter().enumerate() {
        out.pos_x[i] = sorted.pos_x[s];
        out.pos_y[i] = sorted.pos_y[s];
        out.pos_z[i] = sorted.pos_z[s];
        out.param[i] = sorted.param[s];
        out.out_fx[i] = sorted.out_fx[s];
        out.out_fy[i] = sorted.out_fy[s];
        out.out_fz[i] = sorted.out_fz[s];
        out.out_pot[i] = sorted.out_pot[s];
    }
    out
}
