//! Single-mode collision operators.
//!
//! With `ξ₂ = z` on the resonant manifold and `ξ₃ = ξ + ξ₁ − z`:
//!
//! * `C₁[f,g,h](ξ) = ∫dξ₁ f(ξ₁) ∫_S g(ξ₂) h(ξ₃)`
//! * `C₂[f,g,h](ξ) = f(ξ) Q[g,h](ξ)`, `Q[g,h] = ∫dξ₁ ∫_S g(ξ₂) h(ξ₃)`
//! * `C₃[f,g,h](ξ) = f(ξ) ∫dξ₁ g(ξ₁) ∫_S h(ξ₂)`
//! * `C₄[f,g,h](ξ) = f(ξ) ∫dξ₁ g(ξ₁) ∫_S h(ξ₃)`
//!
//! and `C[f] = C₁ + C₂ − C₃ − C₄` evaluated at `f = g = h`.

pub mod constants;
pub mod engine;

use crate::dispersion::{DispersionRelation, Vec3};
use crate::error::Result;
use crate::grid::GridField;

pub use constants::{estimate_bound_constant, operator_norm_check, BoundEstimate, BoundKind, BoundSearch, NormCheckReport};
pub use engine::{Kernel, KernelEngine, QuadConfig, Source, Symmetry};

/// `C₁[f,g,h](ξ)`.
pub fn c1_apply(
    rel: &DispersionRelation,
    f: &GridField,
    g: &GridField,
    h: &GridField,
    xi: &Vec3,
    cfg: &QuadConfig,
) -> Result<f64> {
    let eng = KernelEngine::new(rel, f.spec, cfg)?;
    Ok(eng.eval_point(&[Kernel::c1(f, g, h)], xi)?[0])
}

/// `Q[g,h](ξ)`; `C₂[f,g,h] = f·Q[g,h]`.
pub fn q2_apply(rel: &DispersionRelation, g: &GridField, h: &GridField, xi: &Vec3, cfg: &QuadConfig) -> Result<f64> {
    let eng = KernelEngine::new(rel, g.spec, cfg)?;
    Ok(eng.eval_point(&[Kernel::q(g, h)], xi)?[0])
}

/// `Q'[g,h](ξ) = ∫dξ₁ g(ξ₁) ∫_S h(z)`; `C₃[f,g,h] = f·Q'[g,h]`.
pub fn q3_apply(rel: &DispersionRelation, g: &GridField, h: &GridField, xi: &Vec3, cfg: &QuadConfig) -> Result<f64> {
    let eng = KernelEngine::new(rel, g.spec, cfg)?;
    Ok(eng.eval_point(&[Kernel::q_node(g, h)], xi)?[0])
}

/// The `C₄` analogue of [`q3_apply`], with `h` evaluated at `ξ + ξ₁ − z`.
pub fn q4_apply(rel: &DispersionRelation, g: &GridField, h: &GridField, xi: &Vec3, cfg: &QuadConfig) -> Result<f64> {
    let eng = KernelEngine::new(rel, g.spec, cfg)?;
    Ok(eng.eval_point(&[Kernel::q_mirror(g, h)], xi)?[0])
}

/// The four terms of `C[f]` on the grid.
#[derive(Clone, Debug)]
pub struct CollisionParts {
    pub c1: GridField,
    pub c2: GridField,
    pub c3: GridField,
    pub c4: GridField,
}

impl CollisionParts {
    pub fn total(&self) -> GridField {
        let values = (0..self.c1.values.len())
            .map(|i| self.c1.values[i] + self.c2.values[i] - self.c3.values[i] - self.c4.values[i])
            .collect();
        GridField { spec: self.c1.spec, values }
    }

    /// `C₁ + C₂`.
    pub fn gain(&self) -> GridField {
        let values = self.c1.values.iter().zip(&self.c2.values).map(|(a, b)| a + b).collect();
        GridField { spec: self.c1.spec, values }
    }

    /// `C₃ + C₄`.
    pub fn loss(&self) -> GridField {
        let values = self.c3.values.iter().zip(&self.c4.values).map(|(a, b)| a + b).collect();
        GridField { spec: self.c1.spec, values }
    }
}

/// The four terms of the trilinear form `C[f,g,h]` on the grid.
pub fn trilinear_parts(
    eng: &KernelEngine,
    f: &GridField,
    g: &GridField,
    h: &GridField,
) -> Result<CollisionParts> {
    let k = eng.eval_grid(&[Kernel::c1(f, g, h), Kernel::q(g, h), Kernel::q_node(g, h), Kernel::q_mirror(g, h)])?;
    let [c1, q, q3, q4]: [GridField; 4] = k.try_into().expect("four kernels");
    Ok(CollisionParts { c1, c2: f.mul(&q)?, c3: f.mul(&q3)?, c4: f.mul(&q4)? })
}

/// `C₁..C₄` at `f = g = h`.
pub fn collision_parts_with(eng: &KernelEngine, f: &GridField) -> Result<CollisionParts> {
    trilinear_parts(eng, f, f, f)
}

pub fn collision_parts(rel: &DispersionRelation, f: &GridField, cfg: &QuadConfig) -> Result<CollisionParts> {
    collision_parts_with(&KernelEngine::new(rel, f.spec, cfg)?, f)
}

/// `C[f]` at every grid point.
pub fn collision_apply(rel: &DispersionRelation, f: &GridField, cfg: &QuadConfig) -> Result<GridField> {
    Ok(collision_parts(rel, f, cfg)?.total())
}

pub fn collision_apply_with(eng: &KernelEngine, f: &GridField) -> Result<GridField> {
    Ok(collision_parts_with(eng, f)?.total())
}

/// Mass and energy rates of a collision output together with the same
/// integrals of its gain term.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CollisionDiagnostics {
    pub mass_rate: f64,
    pub energy_rate: f64,
    pub gain_mass: f64,
    pub gain_energy: f64,
    pub sup_total: f64,
    pub sup_gain: f64,
}

pub fn diagnostics(rel: &DispersionRelation, parts: &CollisionParts) -> CollisionDiagnostics {
    let total = parts.total();
    let gain = parts.gain();
    CollisionDiagnostics {
        mass_rate: total.integral(),
        energy_rate: total.weighted_integral(|x| rel.omega(x)),
        gain_mass: gain.integral(),
        gain_energy: gain.weighted_integral(|x| rel.omega(x)),
        sup_total: total.sup_abs(),
        sup_gain: gain.sup_abs(),
    }
}
