//! O(N^2) reference: every pair at geometric distance below the cutoff,
//! accumulated per target in double precision with ascending source order.
//! Desk-scale only; strategies are checked against this, never the reverse.

use crate::kernels::{pair_contribution, KernelSpec};
use crate::particles::ParticleSet;
use rayon::prelude::*;

/// Per-particle force and potential sums in double precision, aligned with
/// the input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleOutputs {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    pub pot: Vec<f64>,
}

pub fn brute_force(parts: &ParticleSet, kernel: &KernelSpec) -> OracleOutputs {
    let n = parts.len();
    let cutoff_sq = kernel.cutoff * kernel.cutoff;
    let pos: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            [
                parts.pos_x[i] as f64,
                parts.pos_y[i] as f64,
                parts.pos_z[i] as f64,
            ]
        })
        .collect();
    let param: Vec<f64> = parts.param.iter().map(|&p| p as f64).collect();

    let rows: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = [0.0f64; 4];
            let ti = (pos[i], param[i]);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                let dz = pos[i][2] - pos[j][2];
                if dx * dx + dy * dy + dz * dz >= cutoff_sq {
                    continue;
                }
                let (f, p) = pair_contribution(ti, (pos[j], param[j]), kernel);
                acc[0] += f[0];
                acc[1] += f[1];
                acc[2] += f[2];
                acc[3] += p;
            }
            acc
        })
        .collect();

    let mut out = OracleOutputs {
        fx: Vec::with_capacity(n),
        fy: Vec::with_capacity(n),
        fz: Vec::with_capacity(n),
        pot: Vec::with_capacity(n),
    };
    for r in rows {
        out.fx.push(r[0]);
        out.fy.push(r[1]);
        out.fz.push(r[2]);
        out.pot.push(r[3]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;
    use rand::{Rng, SeedableRng};

    fn lj() -> KernelSpec {
        KernelSpec::new(KernelKind::LennardJones, 1.0)
    }

    fn random_parts(n: usize, extent: f32, seed: u64) -> ParticleSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut parts = ParticleSet::with_capacity(n);
        for _ in 0..n {
            parts.push(
                [
                    rng.gen::<f32>() * extent,
                    rng.gen::<f32>() * extent,
                    rng.gen::<f32>() * extent,
                ],
                1.0,
            );
        }
        parts
    }

    #[test]
    fn single_particle_all_zero() {
        let mut parts = ParticleSet::default();
        parts.push([0.5; 3], 1.0);
        let out = brute_force(&parts, &lj());
        assert_eq!(out.fx, vec![0.0]);
        assert_eq!(out.pot, vec![0.0]);
    }

    #[test]
    fn two_particles_antisymmetric() {
        let mut parts = ParticleSet::default();
        parts.push([0.2, 0.2, 0.2], 1.0);
        parts.push([0.6, 0.2, 0.2], 1.0);
        let out = brute_force(&parts, &lj());
        assert!(out.fx[0] != 0.0);
        assert_eq!(out.fx[0], -out.fx[1]);
        assert_eq!(out.pot[0], out.pot[1]);
    }

    #[test]
    fn translation_invariance() {
        // Quantize positions so the f32 shift is exact and the invariant is
        // about the kernel, not about float rounding of the inputs.
        let mut parts = random_parts(200, 3.0, 17);
        for i in 0..parts.len() {
            parts.pos_x[i] = (parts.pos_x[i] * 1024.0).round() / 1024.0;
            parts.pos_y[i] = (parts.pos_y[i] * 1024.0).round() / 1024.0;
            parts.pos_z[i] = (parts.pos_z[i] * 1024.0).round() / 1024.0;
        }
        let mut shifted = parts.clone();
        for i in 0..shifted.len() {
            shifted.pos_x[i] += 5.0;
            shifted.pos_y[i] -= 2.0;
            shifted.pos_z[i] += 1.0;
        }
        let a = brute_force(&parts, &lj());
        let b = brute_force(&shifted, &lj());
        for i in 0..parts.len() {
            for (x, y) in [(a.fx[i], b.fx[i]), (a.fy[i], b.fy[i]), (a.fz[i], b.fz[i]), (a.pot[i], b.pot[i])] {
                let denom = x.abs().max(1.0);
                assert!(
                    ((x - y) / denom).abs() < 1e-12,
                    "component drifted: {x} vs {y}"
                );
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let parts = random_parts(100, 2.0, 23);
        let n = parts.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let permuted = crate::binning::gather(&parts, &perm);
        let a = brute_force(&parts, &lj());
        let b = brute_force(&permuted, &lj());
        for (s, &orig) in perm.iter().enumerate() {
            assert!((a.pot[orig] - b.pot[s]).abs() < 1e-12);
            assert!((a.fx[orig] - b.fx[s]).abs() < 1e-12);
        }
    }
}
