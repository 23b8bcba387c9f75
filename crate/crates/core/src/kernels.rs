//! Pairwise interaction kernels and their FLOP-cost metadata.
//!
//! Three kinds: a softened Lennard-Jones potential, a 5-FLOP synthetic
//! kernel (position sums), and a high-FLOP variant (Lennard-Jones plus a
//! fixed 150-FLOP arithmetic chain folded into the potential). The FLOP
//! numbers are reporting metadata only; they never influence results.
//!
//! The Lennard-Jones energy is `4 * E0 * (u^12 - u^6)` with
//! `u = d_soft / ref_length` by default, where
//! `d_soft = sqrt(d^2 + softening^2)`. The `inverted_ratio` switch selects
//! the conventional `u = ref_length / d_soft` form instead. The cutoff gate
//! always tests the plain geometric distance, not the softened one: the
//! cutoff defines neighbor-list semantics, the softening only regularizes
//! the value. The potential is truncated, not shifted, so it is
//! intentionally discontinuous at the cutoff.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    LennardJones,
    LowFlop,
    HighFlop,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::LennardJones => "lennard_jones",
            KernelKind::LowFlop => "low_flop",
            KernelKind::HighFlop => "high_flop",
        }
    }

    /// FLOP per pair interaction (metadata; square root counted as 1).
    pub fn flop_per_interaction(self) -> u32 {
        match self {
            KernelKind::LennardJones => 21,
            KernelKind::LowFlop => 5,
            KernelKind::HighFlop => 168,
        }
    }
}

/// A pair kernel with its geometric and energetic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Cutoff radius; pairs at geometric distance >= this contribute zero.
    pub cutoff: f64,
    /// Softening length added in quadrature to the pair distance.
    pub softening: f64,
    /// Energy scale, further multiplied by both particles' `param` values.
    pub e0: f64,
    /// Reference length in the energy ratio.
    pub ref_length: f64,
    /// Use the conventional `ref_length / d` ratio instead of the default
    /// `d / ref_length`.
    pub inverted_ratio: bool,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, cutoff: f64) -> Self {
        assert!(cutoff > 0.0, "cutoff must be positive");
        Self {
            kind,
            cutoff,
            softening: 0.05 * cutoff,
            e0: 1.0,
            ref_length: cutoff,
            inverted_ratio: false,
        }
    }

    pub fn flop_per_interaction(&self) -> u32 {
        self.kind.flop_per_interaction()
    }
}

/// Extra multiply-add steps of the high-FLOP chain (2 FLOP each).
const HIGH_FLOP_CHAIN_STEPS: usize = 75;
const HIGH_FLOP_MUL: f64 = 1.000_000_1;
const HIGH_FLOP_ADD: f64 = 1.0e-9;

/// Force on the target and pair potential contribution.
///
/// `target` and `source` are `(position, param)` pairs; callers enforce the
/// identity guard (a particle never interacts with itself). Returns exact
/// zeros for pairs at or beyond the cutoff and for coincident positions with
/// zero softening.
pub fn pair_contribution(
    target: ([f64; 3], f64),
    source: ([f64; 3], f64),
    kernel: &KernelSpec,
) -> ([f64; 3], f64) {
    let (tp, t_param) = target;
    let (sp, s_param) = source;
    let delta = [tp[0] - sp[0], tp[1] - sp[1], tp[2] - sp[2]];
    let d2 = delta[0] * delta[0] + delta[1] * delta[1] + delta[2] * delta[2];
    if d2 >= kernel.cutoff * kernel.cutoff {
        return ([0.0; 3], 0.0);
    }

    match kernel.kind {
        KernelKind::LowFlop => {
            // 3 force adds + 2 potential adds = 5 FLOP.
            (
                [tp[0] + sp[0], tp[1] + sp[1], tp[2] + sp[2]],
                sp[0] + sp[1] + sp[2],
            )
        }
        KernelKind::LennardJones => lennard_jones(delta, d2, t_param * s_param, kernel),
        KernelKind::HighFlop => {
            let (force, pot) = lennard_jones(delta, d2, t_param * s_param, kernel);
            let mut x = pot;
            for _ in 0..HIGH_FLOP_CHAIN_STEPS {
                x = x * HIGH_FLOP_MUL + HIGH_FLOP_ADD;
            }
            (force, x)
        }
    }
}

fn lennard_jones(
    delta: [f64; 3],
    d2: f64,
    param_product: f64,
    kernel: &KernelSpec,
) -> ([f64; 3], f64) {
    let d_soft = (d2 + kernel.softening * kernel.softening).sqrt();
    if d_soft == 0.0 {
        return ([0.0; 3], 0.0);
    }
    let scale = 4.0 * kernel.e0 * param_product;
    let (u, du_dd) = if kernel.inverted_ratio {
        let u = kernel.ref_length / d_soft;
        (u, -kernel.ref_length / (d_soft * d_soft))
    } else {
        let u = d_soft / kernel.ref_length;
        (u, 1.0 / kernel.ref_length)
    };
    let u2 = u * u;
    let u6 = u2 * u2 * u2;
    let u5 = u6 / u;
    let u11 = u6 * u5;
    let pot = scale * (u6 * u6 - u6);
    // force = -dK/dd_soft * delta / d_soft
    let dk_dd = scale * (12.0 * u11 - 6.0 * u5) * du_dd;
    let f = -dk_dd / d_soft;
    ([f * delta[0], f * delta[1], f * delta[2]], pot)
}
