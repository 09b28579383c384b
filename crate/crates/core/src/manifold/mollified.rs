//! Brute-force Monte Carlo oracles for the resonant delta measure.
//!
//! `δ(G)` is replaced by a normalized Gaussian `δ_η` of width `η` and the
//! resulting volume integral is sampled directly, with no knowledge of the
//! manifold geometry. These estimates are independent of the slice rules in
//! the parent module and serve as test oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dispersion::{DispersionRelation, Vec3};
use crate::manifold::{phase_value, PhasePair};

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifiedEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_mc: usize,
}

#[inline]
fn gaussian_delta(x: f64, eta: f64) -> f64 {
    (-(x * x) / (2.0 * eta * eta)).exp() / (eta * (2.0 * std::f64::consts::PI).sqrt())
}

/// Half-width of a cube containing `{z : G(z) ≤ 6η}`.
fn bounding_radius(rel: &DispersionRelation, energy: f64, eta: f64) -> f64 {
    let omega0 = rel.omega_u(0.0);
    rel.inverse_radial(energy - omega0 + 6.0 * eta).unwrap_or(0.0) * (1.0 + 1e-9)
}

struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Self { n: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn finish(self) -> MollifiedEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        MollifiedEstimate { value: self.mean, std_error: (var / self.n as f64).sqrt(), n_mc: self.n }
    }
}

/// `∫ δ_η(G(z)) F(z) dz`, sampled uniformly over a cube that contains the
/// support of `δ_η(G)` up to a `6η` Gaussian tail.
pub fn mollified_delta_integral(
    rel: &DispersionRelation,
    pair: &PhasePair,
    integrand: impl Fn(&Vec3) -> f64,
    eta: f64,
    n_mc: usize,
    seed: u64,
) -> MollifiedEstimate {
    let r = bounding_radius(rel, pair.energy(rel), eta);
    let vol = (2.0 * r).powi(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Welford::new();
    for _ in 0..n_mc.max(1) {
        let z = Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r));
        let f = integrand(&z);
        let v = if f == 0.0 { 0.0 } else { vol * gaussian_delta(phase_value(rel, pair, &z), eta) * f };
        acc.push(v);
    }
    acc.finish()
}

/// Six-dimensional oracle for the collision kernels at a fixed `ξ`:
/// `∫dξ₁ pre(ξ₁) ∫dz δ_η(G_{ξ,ξ₁}(z)) node(z) mirror(ξ + ξ₁ − z)`.
///
/// `ξ₁` is drawn from an isotropic Gaussian of width `sampling_sigma`; `z`
/// uniformly from the bounding cube of the corresponding manifold.
#[allow(clippy::too_many_arguments)]
pub fn mollified_kernel_integral(
    rel: &DispersionRelation,
    xi: &Vec3,
    pre: impl Fn(&Vec3) -> f64,
    node: impl Fn(&Vec3) -> f64,
    mirror: impl Fn(&Vec3) -> f64,
    sampling_sigma: f64,
    eta: f64,
    n_mc: usize,
    seed: u64,
) -> MollifiedEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = (2.0 * std::f64::consts::PI * sampling_sigma * sampling_sigma).powf(1.5);
    let mut acc = Welford::new();
    for _ in 0..n_mc.max(1) {
        let g = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let xi1 = g * sampling_sigma;
        let density = (-0.5 * g.norm_squared()).exp() / norm;
        let pair = PhasePair::new(*xi, xi1);
        let p = pre(&xi1);
        if p == 0.0 {
            acc.push(0.0);
            continue;
        }
        let r = bounding_radius(rel, pair.energy(rel), eta);
        let z = Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r));
        let vol = (2.0 * r).powi(3);
        let v = p * vol * gaussian_delta(phase_value(rel, &pair, &z), eta) * node(&z) * mirror(&(pair.rho - z));
        acc.push(v / density);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_integrand_is_exactly_zero() {
        let rel = DispersionRelation::schrodinger();
        let pair = PhasePair::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let est = mollified_delta_integral(&rel, &pair, |_| 0.0, 0.02, 1000, 1);
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn schrodinger_sphere_within_three_sigma() {
        let rel = DispersionRelation::schrodinger();
        let pair = PhasePair::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let est = mollified_delta_integral(&rel, &pair, |_| 1.0, 0.02, 400_000, 7);
        let z = (est.value - std::f64::consts::PI).abs() / est.std_error;
        assert!(z < 3.0, "estimate {est:?}");
    }
}
