//! Seeded generators of smooth band-limited fields and circle diffeomorphisms.
//!
//! Amplitudes decay geometrically in the mode index so that nonlinear
//! operations (composition, Schwarzian, inversion) stay far below the
//! truncation tolerance at the default bandlimit.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circlefield::{CircleDiffeo, CircleField};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random field with modes `1..=kmax` of size `amp · 2^{-k}` plus a mean.
pub fn random_field(rng: &mut TestRng, kmax: usize, amp: f64, bandlimit: usize) -> CircleField {
    let mut modes = vec![Complex64::new(0.0, 0.0); bandlimit.max(kmax) + 1];
    modes[0] = Complex64::new(amp * rng.gen_range(-1.0..1.0), 0.0);
    for (k, m) in modes.iter_mut().enumerate().take(kmax + 1).skip(1) {
        let s = amp * 0.5f64.powi(k as i32);
        *m = Complex64::new(s * rng.gen_range(-1.0..1.0), s * rng.gen_range(-1.0..1.0));
    }
    CircleField::from_modes(modes)
}

/// Random zero-mean field (a vector field or coadjoint perturbation).
pub fn random_zero_mean(rng: &mut TestRng, kmax: usize, amp: f64, bandlimit: usize) -> CircleField {
    let f = random_field(rng, kmax, amp, bandlimit);
    f.add_constant(-f.mean())
}

/// Random diffeo with `max |h'| ≤ slope < 1`.
pub fn random_diffeo(rng: &mut TestRng, kmax: usize, slope: f64, bandlimit: usize) -> CircleDiffeo {
    let h = random_field(rng, kmax, 1.0, bandlimit);
    let bound: f64 = h.modes().iter().enumerate().map(|(k, c)| 2.0 * k as f64 * c.norm()).sum();
    let h = if bound > 0.0 { h.scale(slope / bound) } else { h };
    CircleDiffeo::new(h.add_constant(rng.gen_range(-0.5..0.5)))
}

/// `(1 - cos θ)²`, which vanishes to fourth order at `θ = 0`.
pub fn quartic_bump(bandlimit: usize) -> CircleField {
    let one_minus_cos = CircleField::cos(1, bandlimit).scale(-1.0).add_constant(1.0);
    one_minus_cos.mul(&one_minus_cos).with_bandlimit(bandlimit.max(2))
}

/// Random diffeo whose 4-jet at 0 is the identity jet (Diff₀ with `f''' (0) = 0`).
pub fn random_diff0(rng: &mut TestRng, kmax: usize, slope: f64, bandlimit: usize) -> CircleDiffeo {
    let g = random_field(rng, kmax, 1.0, bandlimit).add_constant(1.5);
    let h = quartic_bump(bandlimit).mul(&g);
    let bound: f64 = h.modes().iter().enumerate().map(|(k, c)| 2.0 * k as f64 * c.norm()).sum();
    let h = h.scale(slope / bound);
    CircleDiffeo::new(h.with_bandlimit(bandlimit.max(h.bandlimit())))
}

/// Diffeo with `f(0) = 0`, `f'(0) = 1` but `f''(0) = eps`.
pub fn second_jet_violator(eps: f64, bandlimit: usize) -> CircleDiffeo {
    // h = eps (1 - cos θ): h(0) = h'(0) = 0, h''(0) = eps.
    CircleDiffeo::new(CircleField::cos(1, bandlimit).scale(-eps).add_constant(eps))
}
