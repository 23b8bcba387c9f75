//! Uniform grid geometry: cell indexing and neighbor enumeration.
//!
//! The grid is an axis-aligned box divided into `dims` cells of edge
//! `cell_width`. Cells are linearized X-fastest:
//! `linear(x, y, z) = x + nx * (y + ny * z)`, so a run of cells along X is
//! contiguous in any per-cell array. The pencil and sub-box staging schemes
//! depend on this layout and it must not change.
//!
//! Boundaries are open (non-periodic). Positions exactly on the upper face
//! are clamped into the last cell, giving half-open cell semantics.

use serde::{Deserialize, Serialize};

/// Geometry of the simulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lower corner of the domain.
    pub origin: [f32; 3],
    /// Cell edge length. Must be >= the cutoff of any kernel run on this grid.
    pub cell_width: f32,
    /// Cell counts per axis, each >= 1.
    pub dims: [usize; 3],
}

/// Integer cell coordinate, component-wise inside the grid dims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl GridSpec {
    pub fn new(origin: [f32; 3], cell_width: f32, dims: [usize; 3]) -> Self {
        assert!(cell_width > 0.0, "cell_width must be positive");
        assert!(
            dims.iter().all(|&d| d >= 1),
            "grid dims must all be >= 1, got {dims:?}"
        );
        Self {
            origin,
            cell_width,
            dims,
        }
    }

    /// Cube grid of `d` cells per axis with unit origin at zero.
    pub fn cube(d: usize, cell_width: f32) -> Self {
        Self::new([0.0; 3], cell_width, [d, d, d])
    }

    /// Total cell count `nx * ny * nz`.
    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// X-fastest linear index of a cell.
    #[inline]
    pub fn linear(&self, c: CellCoord) -> usize {
        c.x + self.dims[0] * (c.y + self.dims[1] * c.z)
    }

    /// Inverse of [`GridSpec::linear`].
    pub fn coord(&self, linear: usize) -> CellCoord {
        let x = linear % self.dims[0];
        let rest = linear / self.dims[0];
        CellCoord {
            x,
            y: rest % self.dims[1],
            z: rest / self.dims[1],
        }
    }

    /// Domain extent along each axis.
    pub fn extent(&self) -> [f32; 3] {
        [
            self.dims[0] as f32 * self.cell_width,
            self.dims[1] as f32 * self.cell_width,
            self.dims[2] as f32 * self.cell_width,
        ]
    }
}

/// Cell containing `pos`, clamped component-wise into the grid.
///
/// Positions on the upper domain face land in the last cell; positions
/// slightly outside (a scenario-generation bug elsewhere) are absorbed the
/// same way rather than rejected here.
pub fn cell_index(pos: [f32; 3], grid: &GridSpec) -> CellCoord {
    let mut c = [0usize; 3];
    for axis in 0..3 {
        let rel = (pos[axis] - grid.origin[axis]) / grid.cell_width;
        let idx = rel.floor() as i64;
        c[axis] = idx.clamp(0, grid.dims[axis] as i64 - 1) as usize;
    }
    CellCoord {
        x: c[0],
        y: c[1],
        z: c[2],
    }
}

/// All cells within Chebyshev distance 1 of `c`, clamped to the grid
/// (no periodic images), including `c` itself.
///
/// Order is deterministic: Z outer, Y middle, X inner, each ascending. Every
/// strategy accumulates per-target contributions in this cell order so that
/// results are comparable across strategies.
pub fn neighbor_cells(c: CellCoord, grid: &GridSpec) -> Vec<CellCoord> {
    let lo = |v: usize| v.saturating_sub(1);
    let hi = |v: usize, dim: usize| (v + 1).min(dim - 1);
    let mut out = Vec::with_capacity(27);
    for z in lo(c.z)..=hi(c.z, grid.dims[2]) {
        for y in lo(c.y)..=hi(c.y, grid.dims[1]) {
            for x in lo(c.x)..=hi(c.x, grid.dims[0]) {
                out.push(CellCoord { x, y, z });
            }
        }
    }
    out
}
