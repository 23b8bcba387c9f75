//! Structure-of-arrays particle storage.
//!
//! Eight single-precision values per particle: three position components,
//! one kernel parameter, three force outputs, and a potential output. All
//! device-model byte accounting assumes this 32-byte record.

/// SoA particle container. All arrays have identical length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    pub pos_x: Vec<f32>,
    pub pos_y: Vec<f32>,
    pub pos_z: Vec<f32>,
    /// Per-particle kernel parameter (scales the pair energy).
    pub param: Vec<f32>,
    pub out_fx: Vec<f32>,
    pub out_fy: Vec<f32>,
    pub out_fz: Vec<f32>,
    pub out_pot: Vec<f32>,
}

/// Values per particle record (positions, param, force, potential).
pub const VALUES_PER_PARTICLE: usize = 8;

impl ParticleSet {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            pos_x: Vec::with_capacity(n),
            pos_y: Vec::with_capacity(n),
            pos_z: Vec::with_capacity(n),
            param: Vec::with_capacity(n),
            out_fx: Vec::with_capacity(n),
            out_fy: Vec::with_capacity(n),
            out_fz: Vec::with_capacity(n),
            out_pot: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.pos_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos_x.is_empty()
    }

    pub fn push(&mut self, pos: [f32; 3], param: f32) {
        self.pos_x.push(pos[0]);
        self.pos_y.push(pos[1]);
        self.pos_z.push(pos[2]);
        self.param.push(param);
        self.out_fx.push(0.0);
        self.out_fy.push(0.0);
        self.out_fz.push(0.0);
        self.out_pot.push(0.0);
    }

    pub fn position(&self, i: usize) -> [f32; 3] {
        [self.pos_x[i], self.pos_y[i], self.pos_z[i]]
    }

    /// Panics if any array length disagrees; used by tests and debug checks.
    pub fn assert_consistent(&self) {
        let n = self.len();
        assert!(
            [
                self.pos_y.len(),
                self.pos_z.len(),
                self.param.len(),
                self.out_fx.len(),
                self.out_fy.len(),
                self.out_fz.len(),
                self.out_pot.len(),
            ]
            .iter()
            .all(|&l| l == n),
            "SoA arrays out of sync"
        );
    }
}
