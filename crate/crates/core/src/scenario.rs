//! Deterministic scene generation for the experiment matrix.
//!
//! Scenes are `d x d x d` unit-width cells with `avg_per_cell * d^3`
//! particles placed uniformly from a counter-based stream cipher keyed by
//! (seed, d, avg). The same configuration produces bit-identical scenes on
//! every platform.

use crate::error::Result;
use crate::grid::GridSpec;
use crate::particles::ParticleSet;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream key for a scenario: the user seed mixed with the scenario
/// coordinates.
fn scenario_key(seed: u64, divisions: usize, avg_per_cell: usize) -> [u8; 32] {
    let mut state = seed
        ^ (divisions as u64).wrapping_mul(0xd6e8_feb8_6659_fd93)
        ^ (avg_per_cell as u64).rotate_left(32);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Uniform coordinate in `[0, extent)`: 24 random mantissa bits scaled, so
/// the result is exact in f32 and never reaches the upper bound.
fn uniform_coord(rng: &mut ChaCha8Rng, extent: f32) -> f32 {
    (rng.next_u32() >> 8) as f32 * (1.0 / 16_777_216.0) * extent
}

/// Generate the scene for one (divisions, avg_per_cell, seed) cell of the
/// experiment matrix: `avg_per_cell * d^3` particles, params all 1.
pub fn uniform_scene(divisions: usize, avg_per_cell: usize, seed: u64) -> (ParticleSet, GridSpec) {
    assert!(divisions >= 2, "need at least 2 divisions per axis");
    assert!(avg_per_cell >= 1, "need at least 1 particle per cell");
    let grid = GridSpec::cube(divisions, 1.0);
    let n = avg_per_cell * grid.cell_count();
    let extent = grid.extent();
    let mut rng = ChaCha8Rng::from_seed(scenario_key(seed, divisions, avg_per_cell));
    let mut parts = ParticleSet::with_capacity(n);
    for _ in 0..n {
        let x = uniform_coord(&mut rng, extent[0]);
        let y = uniform_coord(&mut rng, extent[1]);
        let z = uniform_coord(&mut rng, extent[2]);
        parts.push([x, y, z], 1.0);
    }
    (parts, grid)
}

/// On-disk scene produced by the `gen` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub grid: GridSpec,
    pub pos_x: Vec<f32>,
    pub pos_y: Vec<f32>,
    pub pos_z: Vec<f32>,
    pub param: Vec<f32>,
}

impl SceneFile {
    pub fn from_scene(parts: &ParticleSet, grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            pos_x: parts.pos_x.clone(),
            pos_y: parts.pos_y.clone(),
            pos_z: parts.pos_z.clone(),
            param: parts.param.clone(),
        }
    }

    pub fn into_scene(self) -> (ParticleSet, GridSpec) {
        let n = self.pos_x.len();
        let mut parts = ParticleSet::with_capacity(n);
        for i in 0..n {
            parts.push([self.pos_x[i], self.pos_y[i], self.pos_z[i]], self.param[i]);
        }
        (parts, self.grid)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
