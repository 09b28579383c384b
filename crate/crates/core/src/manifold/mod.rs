//! The resonant manifold `S = {z : G(z) = 0}` with phase
//! `G(z) = ω(ρ − z) + ω(z) − ω(ξ) − ω(ξ₁)`, `ρ = ξ + ξ₁`, and quadrature rules
//! for `∫_S F dμ/|∇G|`.
//!
//! The surface is sliced perpendicular to `ρ`. Writing `z = a·ρ̂ + q` with
//! `q ⟂ ρ̂` and `u = |q|²`, the restricted phase
//! `G̃(a, u) = Ω_u((P − a)² + u) + Ω_u(a² + u) − E` is strictly increasing in
//! `u`, so each slice meets `S` in one circle. In these coordinates
//! `dz = da · dφ · du/2` and `δ(G) dz = da dφ / (2 ∂G̃/∂u)`, which gives the
//! node measure without ever dividing by a surface gradient.

pub mod mollified;

use std::f64::consts::PI;

use crate::dispersion::{DispersionRelation, Vec3};
use crate::error::{Error, Result};

pub use mollified::{mollified_delta_integral, MollifiedEstimate};

/// Absolute tolerance on `|G|` at accepted nodes.
pub const PHASE_TOLERANCE: f64 = 1e-10;
/// Half-extents below this make the manifold degenerate.
pub const DEGENERATE_EXTENT: f64 = 1e-8;

/// An interacting pair `(ξ, ξ₁)` with its total momentum `ρ = ξ + ξ₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePair {
    pub xi: Vec3,
    pub xi1: Vec3,
    pub rho: Vec3,
}

impl PhasePair {
    pub fn new(xi: Vec3, xi1: Vec3) -> Self {
        Self { xi, xi1, rho: xi + xi1 }
    }

    /// `E = ω(ξ) + ω(ξ₁)`.
    pub fn energy(&self, rel: &DispersionRelation) -> f64 {
        rel.omega(&self.xi) + rel.omega(&self.xi1)
    }
}

/// `G_{ξ,ξ₁}(z)`.
pub fn phase_value(rel: &DispersionRelation, pair: &PhasePair, z: &Vec3) -> f64 {
    rel.omega(&(pair.rho - z)) + rel.omega(z) - rel.omega(&pair.xi) - rel.omega(&pair.xi1)
}

/// `∇G(z) = (z − ρ)/|z − ρ|·Ω'(|ρ − z|) + z/|z|·Ω'(|z|)`.
///
/// At `z = 0` or `z = ρ` the undefined unit vector is the radial limit along
/// the segment from `0` to `ρ`; when `ρ = 0` as well both unit vectors are
/// taken as `e_x`.
pub fn phase_gradient(rel: &DispersionRelation, pair: &PhasePair, z: &Vec3) -> Vec3 {
    let p = pair.rho.norm();
    let axis = if p > 0.0 { pair.rho / p } else { Vec3::x() };
    let d = z - pair.rho;
    let dn = d.norm();
    let zn = z.norm();
    let ud = if dn > 0.0 { d / dn } else { -axis };
    let uz = if zn > 0.0 { z / zn } else if p > 0.0 { axis } else { Vec3::x() };
    let ud = if dn == 0.0 && p == 0.0 { Vec3::x() } else { ud };
    ud * rel.omega_prime(dn) + uz * rel.omega_prime(zn)
}

pub fn phase_gradient_norm(rel: &DispersionRelation, pair: &PhasePair, z: &Vec3) -> f64 {
    phase_gradient(rel, pair, z).norm()
}

/// Resolution of the manifold rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldConfig {
    /// Axial stations (Chebyshev points of the first kind).
    pub n_slices: usize,
    /// Equispaced nodes per circle; must be even so that `z ↦ ρ − z` maps
    /// nodes onto nodes.
    pub n_angular: usize,
    /// Resonance radii beyond this are reported as `RootNotBracketed`.
    pub search_radius: f64,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self { n_slices: 24, n_angular: 24, search_radius: 1e6 }
    }
}

impl ManifoldConfig {
    pub fn new(n_slices: usize, n_angular: usize) -> Self {
        Self { n_slices, n_angular, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slices == 0 || self.n_angular < 2 || !self.n_angular.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "manifold rule needs n_slices ≥ 1 and an even n_angular ≥ 2, got {}×{}",
                self.n_slices, self.n_angular
            )));
        }
        if !(self.search_radius > 0.0) {
            return Err(Error::InvalidConfig("search radius must be positive".into()));
        }
        Ok(())
    }
}

/// Precomputed one-dimensional rules for a [`ManifoldConfig`].
#[derive(Clone, Debug)]
pub struct ManifoldRule {
    pub cfg: ManifoldConfig,
    /// Fejér first-rule nodes on `[−1, 1]`, first half positive, mirrored
    /// exactly: `x[n−1−k] = −x[k]`.
    x: Vec<f64>,
    w: Vec<f64>,
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
}

impl ManifoldRule {
    pub fn new(cfg: ManifoldConfig) -> Result<Self> {
        cfg.validate()?;
        let (x, w) = fejer1(cfg.n_slices);
        let na = cfg.n_angular;
        let mut cos_phi = vec![0.0; na];
        let mut sin_phi = vec![0.0; na];
        for l in 0..na / 2 {
            let phi = 2.0 * PI * (l as f64 + 0.5) / na as f64;
            cos_phi[l] = phi.cos();
            sin_phi[l] = phi.sin();
            cos_phi[l + na / 2] = -cos_phi[l];
            sin_phi[l + na / 2] = -sin_phi[l];
        }
        Ok(Self { cfg, x, w, cos_phi, sin_phi })
    }

    pub fn nodes_per_manifold(&self) -> usize {
        self.cfg.n_slices * self.cfg.n_angular
    }
}

/// Fejér's first rule on `[−1, 1]`, nodes in decreasing order.
pub fn fejer1(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n {
        let theta = (2 * k + 1) as f64 * PI / (2 * n) as f64;
        let mut s = 0.0;
        for j in 1..=n / 2 {
            s += (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
        }
        x[k] = theta.cos();
        w[k] = 2.0 / n as f64 * (1.0 - 2.0 * s);
    }
    for k in 0..n / 2 {
        let avg = 0.5 * (w[k] + w[n - 1 - k]);
        w[k] = avg;
        w[n - 1 - k] = avg;
        x[n - 1 - k] = -x[k];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Node set of one manifold in the layout used by the collision kernels.
///
/// `measure[q]` is the weight of `δ(G) dz` at `nodes[q]`, i.e. surface weight
/// over `|∇G|`. `mirror[q]` is the node at `ρ − nodes[q]`.
#[derive(Clone, Debug, Default)]
pub struct NodeSet {
    pub nodes: Vec<Vec3>,
    pub measure: Vec<f64>,
    pub mirror: Vec<usize>,
    pub degenerate: bool,
}

impl NodeSet {
    fn clear(&mut self) {
        self.nodes.clear();
        self.measure.clear();
        self.mirror.clear();
        self.degenerate = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_q measure_q · f(z_q)` in node order.
    pub fn integrate(&self, f: impl Fn(&Vec3) -> f64) -> f64 {
        self.nodes.iter().zip(&self.measure).map(|(z, m)| m * f(z)).sum()
    }
}

/// Safeguarded Newton iteration for an increasing function `g` on `[lo, hi]`
/// with `g(lo) ≤ 0 ≤ g(hi)`.
fn increasing_root(
    g: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
) -> f64 {
    let mut x = if start > lo && start < hi { start } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (v, d) = g(x);
        if v.abs() <= tol {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            return x;
        }
        let newton = x - v / d;
        x = if d > 0.0 && d.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// Orthonormal pair spanning the plane perpendicular to the unit vector `e`.
fn perpendicular_basis(e: &Vec3) -> (Vec3, Vec3) {
    let a = if e[0].abs() <= e[1].abs() && e[0].abs() <= e[2].abs() {
        Vec3::x()
    } else if e[1].abs() <= e[2].abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = e.cross(&a).normalize();
    let e2 = e.cross(&e1);
    (e1, e2)
}

/// Builds the node set of `S_{ξ,ξ₁}` into `out`, reusing its storage.
pub fn build_nodes(
    rel: &DispersionRelation,
    pair: &PhasePair,
    rule: &ManifoldRule,
    out: &mut NodeSet,
) -> Result<()> {
    out.clear();
    let energy = pair.energy(rel);
    let p = pair.rho.norm();
    let scale = 1.0 + pair.xi.norm().max(pair.xi1.norm());
    if p <= 1e-12 * scale {
        return build_sphere(rel, energy, rule, out);
    }

    let omega0 = rel.omega_u(0.0);
    let half = 0.5 * p;
    // Half-extent L of the axial interval [P/2 − L, P/2 + L].
    let h = |t: f64| {
        let a = half - t;
        let b = half + t;
        let v = rel.omega_u(a * a) + rel.omega_u(b * b) - energy;
        let d = -2.0 * a * rel.domega_du(a * a) + 2.0 * b * rel.domega_du(b * b);
        (v, d)
    };
    if h(0.0).0 >= -PHASE_TOLERANCE {
        out.degenerate = true;
        return Ok(());
    }
    let r_cap = match rel.inverse_radial(energy - omega0) {
        Some(r) => r,
        None => return Err(Error::RootNotBracketed { search_radius: rule.cfg.search_radius }),
    };
    if r_cap > rule.cfg.search_radius {
        return Err(Error::RootNotBracketed { search_radius: rule.cfg.search_radius });
    }
    let mut t_hi = (r_cap - half).max(0.0) * (1.0 + 1e-12) + 1e-300;
    while h(t_hi).0 < 0.0 {
        t_hi *= 2.0;
        if t_hi > rule.cfg.search_radius {
            return Err(Error::RootNotBracketed { search_radius: rule.cfg.search_radius });
        }
    }
    let ext = increasing_root(h, 0.0, t_hi, 0.5 * t_hi, PHASE_TOLERANCE);
    if ext < DEGENERATE_EXTENT {
        out.degenerate = true;
        return Ok(());
    }

    let e = pair.rho / p;
    let (e1, e2) = perpendicular_basis(&e);
    let ns = rule.cfg.n_slices;
    let na = rule.cfg.n_angular;
    let dphi = 2.0 * PI / na as f64;
    let n_half = ns.div_ceil(2);
    out.nodes.resize(ns * na, Vec3::zeros());
    out.measure.resize(ns * na, 0.0);
    out.mirror.resize(ns * na, 0);

    let mut warm = f64::NAN;
    for k in 0..n_half {
        let a = half + ext * rule.x[k];
        let a2 = a * a;
        let b2 = (p - a) * (p - a);
        let g = |u: f64| {
            let v = rel.omega_u(b2 + u) + rel.omega_u(a2 + u) - energy;
            (v, rel.domega_du(b2 + u) + rel.domega_du(a2 + u))
        };
        let u_hi = match rel.inverse_u(energy - omega0) {
            Some(uc) => (uc - a2.max(b2)).max(0.0) * (1.0 + 1e-12) + 1e-300,
            None => return Err(Error::RootNotBracketed { search_radius: rule.cfg.search_radius }),
        };
        let u = if g(0.0).0 >= 0.0 {
            0.0
        } else {
            let mut hi = u_hi;
            while g(hi).0 < 0.0 {
                hi *= 2.0;
            }
            increasing_root(g, 0.0, hi, warm, PHASE_TOLERANCE)
        };
        warm = u;
        let r = u.sqrt();
        if (a2 + u).sqrt() > rule.cfg.search_radius {
            return Err(Error::RootNotBracketed { search_radius: rule.cfg.search_radius });
        }
        // δ(G) dz = W·L·dφ / (2 ∂G̃/∂u); the mirror slice shares the value.
        let dg = rel.domega_du(b2 + u) + rel.domega_du(a2 + u);
        let m = rule.w[k] * ext * dphi / (2.0 * dg);
        let center = e * a;
        let km = ns - 1 - k;
        if km != k {
            for l in 0..na {
                let q = k * na + l;
                let lm = (l + na / 2) % na;
                let qm = km * na + lm;
                let z = center + (e1 * rule.cos_phi[l] + e2 * rule.sin_phi[l]) * r;
                out.nodes[q] = z;
                out.nodes[qm] = pair.rho - z;
                out.measure[q] = m;
                out.measure[qm] = m;
                out.mirror[q] = qm;
                out.mirror[qm] = q;
            }
        } else {
            for l in 0..na / 2 {
                let q = k * na + l;
                let qm = q + na / 2;
                let z = center + (e1 * rule.cos_phi[l] + e2 * rule.sin_phi[l]) * r;
                out.nodes[q] = z;
                out.nodes[qm] = pair.rho - z;
                out.measure[q] = m;
                out.measure[qm] = m;
                out.mirror[q] = qm;
                out.mirror[qm] = q;
            }
        }
    }
    Ok(())
}

/// `ρ = 0`: the manifold is the sphere `2Ω(|z|) = E`.
fn build_sphere(rel: &DispersionRelation, energy: f64, rule: &ManifoldRule, out: &mut NodeSet) -> Result<()> {
    let rstar = match rel.inverse_radial(0.5 * energy) {
        Some(r) => r,
        None => {
            out.degenerate = true;
            return Ok(());
        }
    };
    if rstar < DEGENERATE_EXTENT {
        out.degenerate = true;
        return Ok(());
    }
    if rstar > rule.cfg.search_radius {
        return Err(Error::RootNotBracketed { search_radius: rule.cfg.search_radius });
    }
    let ns = rule.cfg.n_slices;
    let na = rule.cfg.n_angular;
    let dphi = 2.0 * PI / na as f64;
    let base = rstar * rstar * dphi / (2.0 * rel.omega_prime(rstar));
    out.nodes.resize(ns * na, Vec3::zeros());
    out.measure.resize(ns * na, 0.0);
    out.mirror.resize(ns * na, 0);
    for k in 0..ns {
        let c = rule.x[k];
        let s = (1.0 - c * c).max(0.0).sqrt();
        let km = ns - 1 - k;
        for l in 0..na {
            let q = k * na + l;
            let qm = km * na + (l + na / 2) % na;
            out.nodes[q] = Vec3::new(s * rule.cos_phi[l], s * rule.sin_phi[l], c) * rstar;
            out.measure[q] = base * rule.w[k];
            out.mirror[q] = qm;
        }
    }
    Ok(())
}

/// Public quadrature record with explicit surface weights and gradient norms.
#[derive(Clone, Debug)]
pub struct ResonantQuadrature {
    pub nodes: Vec<Vec3>,
    /// Surface-measure weights `w_q`.
    pub weights: Vec<f64>,
    /// `|∇G(z_q)|`.
    pub grad_norms: Vec<f64>,
    /// Index of the node at `ρ − z_q`.
    pub mirror: Vec<usize>,
    pub degenerate: bool,
}

impl ResonantQuadrature {
    /// `Σ_q w_q / |∇G|_q`, the total `dμ/|∇G|` measure.
    pub fn weighted_measure(&self) -> f64 {
        manifold_integrate(self, |_| 1.0)
    }

    pub fn max_phase_residual(&self, rel: &DispersionRelation, pair: &PhasePair) -> f64 {
        self.nodes.iter().map(|z| phase_value(rel, pair, z).abs()).fold(0.0, f64::max)
    }
}

/// Builds the manifold rule for a pair. Requires a certified relation.
pub fn build_manifold_quadrature(
    rel: &DispersionRelation,
    pair: &PhasePair,
    n_slices: usize,
    n_angular: usize,
) -> Result<ResonantQuadrature> {
    build_manifold_quadrature_with(rel, pair, &ManifoldRule::new(ManifoldConfig::new(n_slices, n_angular))?)
}

pub fn build_manifold_quadrature_with(
    rel: &DispersionRelation,
    pair: &PhasePair,
    rule: &ManifoldRule,
) -> Result<ResonantQuadrature> {
    rel.require_verified()?;
    let mut set = NodeSet::default();
    build_nodes(rel, pair, rule, &mut set)?;
    let grad_norms: Vec<f64> = set.nodes.iter().map(|z| phase_gradient_norm(rel, pair, z)).collect();
    let weights = set.measure.iter().zip(&grad_norms).map(|(m, g)| m * g).collect();
    Ok(ResonantQuadrature {
        nodes: set.nodes,
        weights,
        grad_norms,
        mirror: set.mirror,
        degenerate: set.degenerate,
    })
}

/// `Σ_q w_q · F(z_q) / |∇G|_q` in node order. Empty rules give zero.
pub fn manifold_integrate(quad: &ResonantQuadrature, integrand: impl Fn(&Vec3) -> f64) -> f64 {
    quad.nodes
        .iter()
        .zip(quad.weights.iter().zip(&quad.grad_norms))
        .map(|(z, (w, g))| w * integrand(z) / g)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schrodinger() -> DispersionRelation {
        DispersionRelation::schrodinger().certify(20.0, 200).unwrap().0
    }

    #[test]
    fn phase_examples() {
        let rel = schrodinger();
        let pair = PhasePair::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(phase_value(&rel, &pair, &pair.xi), 0.0);
        assert_eq!(phase_value(&rel, &pair, &pair.xi1), 0.0);
        assert!((phase_value(&rel, &pair, &Vec3::new(0.0, 0.0, 2.0)) - 6.0).abs() < 1e-14);
        assert!((phase_gradient_norm(&rel, &pair, &Vec3::new(0.0, 1.0, 0.0)) - 4.0).abs() < 1e-14);
        let p2 = PhasePair::new(Vec3::new(1.0, 0.5, 0.0), Vec3::new(0.2, -0.3, 0.7));
        assert!(phase_gradient_norm(&rel, &p2, &(p2.rho * 0.5)) < 1e-14);
    }

    #[test]
    fn fejer_integrates_polynomials() {
        for n in [1usize, 4, 7, 24] {
            let (x, w) = fejer1(n);
            for deg in 0..n {
                let num: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn schrodinger_sphere_measure() {
        let rel = schrodinger();
        let pair = PhasePair::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        let q = build_manifold_quadrature(&rel, &pair, 24, 24).unwrap();
        assert!((q.weighted_measure() - PI).abs() < 1e-12);
        let pair = PhasePair::new(Vec3::new(1.0, 0.2, -0.4), Vec3::new(0.3, -1.1, 0.5));
        let q = build_manifold_quadrature(&rel, &pair, 24, 24).unwrap();
        let expect = PI * (pair.xi - pair.xi1).norm() / 2.0;
        assert!((q.weighted_measure() / expect - 1.0).abs() < 1e-10);
        assert!(q.max_phase_residual(&rel, &pair) <= PHASE_TOLERANCE);
        for (g, z) in q.grad_norms.iter().zip(&q.nodes) {
            assert!((g - 2.0 * (pair.xi - pair.xi1).norm()).abs() < 1e-8, "{z:?}");
        }
    }

    #[test]
    fn coincident_pair_is_degenerate() {
        let rel = schrodinger();
        let pair = PhasePair::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let q = build_manifold_quadrature(&rel, &pair, 8, 8).unwrap();
        assert!(q.degenerate);
        assert_eq!(q.weighted_measure(), 0.0);
    }

    #[test]
    fn mirror_nodes_reflect() {
        let rel = DispersionRelation::bogoliubov(1.0, 1.0).unwrap().certify(20.0, 200).unwrap().0;
        let pair = PhasePair::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        let q = build_manifold_quadrature(&rel, &pair, 9, 10).unwrap();
        for (i, z) in q.nodes.iter().enumerate() {
            let m = q.mirror[i];
            assert!((q.nodes[m] - (pair.rho - z)).norm() < 1e-12);
            assert!((q.grad_norms[m] - q.grad_norms[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn unverified_and_odd_angular_rejected() {
        let rel = DispersionRelation::schrodinger();
        let pair = PhasePair::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0));
        assert!(matches!(build_manifold_quadrature(&rel, &pair, 4, 4), Err(Error::UnverifiedDispersion)));
        assert!(build_manifold_quadrature(&schrodinger(), &pair, 4, 5).is_err());
    }

    #[test]
    fn small_search_radius_reports_bracketing() {
        let rel = schrodinger();
        let pair = PhasePair::new(Vec3::new(3.0, 0.0, 0.0), Vec3::new(-2.0, 1.0, 0.0));
        let rule = ManifoldRule::new(ManifoldConfig { search_radius: 0.5, ..ManifoldConfig::new(6, 6) }).unwrap();
        assert!(matches!(
            build_manifold_quadrature_with(&rel, &pair, &rule),
            Err(Error::RootNotBracketed { .. })
        ));
    }
}
