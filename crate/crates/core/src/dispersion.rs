//! Spherically symmetric dispersion laws `ω(k) = Ω(|k|)` and sampled
//! certification of the growth assumptions used by the collision bounds.
//!
//! Every supported law is a function of `u = |k|²`, so the implementation
//! works in `u` internally. This keeps `ω` exactly rotation invariant for the
//! Schrödinger law and gives closed-form radial inverses for all kinds.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionKind {
    /// `Ω(r) = r²`
    Schrodinger,
    /// `Ω(r) = sqrt(θ₁r² + θ₂r⁴)`
    Bogoliubov,
    /// `Ω(r) = sqrt(θ₀ + θ₁r² + θ₂r⁴)`
    BohmPines,
    /// `Ω(r) = λ₀ + λ₁r² + λ₂r⁴`
    LowTempPoly,
}

impl DispersionKind {
    pub fn name(self) -> &'static str {
        match self {
            DispersionKind::Schrodinger => "schrodinger",
            DispersionKind::Bogoliubov => "bogoliubov",
            DispersionKind::BohmPines => "bohm_pines",
            DispersionKind::LowTempPoly => "low_temp_poly",
        }
    }
}

/// A dispersion law together with the assumption constants certified for it.
///
/// `c1` and `c2` are `None` until [`DispersionRelation::certify`] succeeds;
/// operators that depend on the collision bounds refuse uncertified laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionRelation {
    pub kind: DispersionKind,
    /// `(θ₀, θ₁, θ₂)` or `(λ₀, λ₁, λ₂)`; unused slots are zero.
    pub params: [f64; 3],
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// Radius on which `c1`/`c2` were certified.
    pub certified_radius: Option<f64>,
}

/// Outcome of [`verify_assumptions`]. Index 0, 1, 2 refer to assumptions
/// (i) regularity and positivity, (ii) `Ω'(x) ≥ c₁x`, (iii) doubling
/// `Ω(x) ≤ Ω(c₂x)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub kind: DispersionKind,
    pub holds: [bool; 3],
    pub best_c1: f64,
    pub best_c2: f64,
    /// Radius where the margin of each assumption was smallest.
    pub worst_point: [f64; 3],
    pub r_max: f64,
    pub n_samples: usize,
    /// Assumption (iii) is tested on `Ω − Ω(0)`; the constant offset drops
    /// out of every resonance condition.
    pub doubling_on_shifted_law: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }
}

fn check_params(params: &[f64]) -> Result<()> {
    for &p in params {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDispersion(format!(
                "parameters must be finite and nonnegative, got {params:?}"
            )));
        }
    }
    Ok(())
}

impl DispersionRelation {
    pub fn schrodinger() -> Self {
        Self::raw(DispersionKind::Schrodinger, [0.0; 3])
    }

    pub fn bogoliubov(theta1: f64, theta2: f64) -> Result<Self> {
        check_params(&[theta1, theta2])?;
        Ok(Self::raw(DispersionKind::Bogoliubov, [0.0, theta1, theta2]))
    }

    pub fn bohm_pines(theta0: f64, theta1: f64, theta2: f64) -> Result<Self> {
        check_params(&[theta0, theta1, theta2])?;
        Ok(Self::raw(DispersionKind::BohmPines, [theta0, theta1, theta2]))
    }

    pub fn low_temp_poly(lambda0: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        check_params(&[lambda0, lambda1, lambda2])?;
        Ok(Self::raw(DispersionKind::LowTempPoly, [lambda0, lambda1, lambda2]))
    }

    /// Builds a relation from a kind and a parameter triple, validating signs.
    pub fn new(kind: DispersionKind, params: [f64; 3]) -> Result<Self> {
        check_params(&params)?;
        let mut p = params;
        match kind {
            DispersionKind::Schrodinger => p = [0.0; 3],
            DispersionKind::Bogoliubov => p[0] = 0.0,
            _ => {}
        }
        Ok(Self::raw(kind, p))
    }

    fn raw(kind: DispersionKind, params: [f64; 3]) -> Self {
        Self { kind, params, c1: None, c2: None, certified_radius: None }
    }

    /// `Ω` as a function of `u = r²`.
    #[inline]
    pub fn omega_u(&self, u: f64) -> f64 {
        let [p0, p1, p2] = self.params;
        match self.kind {
            DispersionKind::Schrodinger => u,
            DispersionKind::Bogoliubov => (p1 * u + p2 * u * u).sqrt(),
            DispersionKind::BohmPines => (p0 + p1 * u + p2 * u * u).sqrt(),
            DispersionKind::LowTempPoly => p0 + p1 * u + p2 * u * u,
        }
    }

    /// `dΩ/du` at `u = r²`. Equals `Ω'(r) / (2r)`; may be `+∞` at `u = 0`
    /// for the Bogoliubov law with `θ₁ > 0`.
    #[inline]
    pub fn domega_du(&self, u: f64) -> f64 {
        let [p0, p1, p2] = self.params;
        match self.kind {
            DispersionKind::Schrodinger => 1.0,
            DispersionKind::Bogoliubov => {
                if p1 == 0.0 {
                    p2.sqrt()
                } else {
                    (p1 + 2.0 * p2 * u) / (2.0 * (p1 * u + p2 * u * u).sqrt())
                }
            }
            DispersionKind::BohmPines => {
                let w = (p0 + p1 * u + p2 * u * u).sqrt();
                if w == 0.0 {
                    // θ₀ = 0 reduces to the Bogoliubov form.
                    if p1 == 0.0 {
                        p2.sqrt()
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (p1 + 2.0 * p2 * u) / (2.0 * w)
                }
            }
            DispersionKind::LowTempPoly => p1 + 2.0 * p2 * u,
        }
    }

    /// `Ω(r)` for a radius `r ≥ 0`.
    #[inline]
    pub fn omega_radial(&self, r: f64) -> f64 {
        self.omega_u(r * r)
    }

    /// `ω(ξ) = Ω(|ξ|)`.
    #[inline]
    pub fn omega(&self, xi: &Vec3) -> f64 {
        self.omega_u(xi.norm_squared())
    }

    /// Radial derivative `Ω'(r)`.
    pub fn omega_prime(&self, r: f64) -> f64 {
        let u = r * r;
        let [p0, p1, p2] = self.params;
        match self.kind {
            DispersionKind::Schrodinger => 2.0 * r,
            DispersionKind::Bogoliubov => {
                let s = (p1 + p2 * u).sqrt();
                if s == 0.0 {
                    0.0
                } else {
                    (p1 + 2.0 * p2 * u) / s
                }
            }
            DispersionKind::BohmPines => {
                let w = (p0 + p1 * u + p2 * u * u).sqrt();
                if w == 0.0 {
                    p1.sqrt()
                } else {
                    r * (p1 + 2.0 * p2 * u) / w
                }
            }
            DispersionKind::LowTempPoly => 2.0 * r * (p1 + 2.0 * p2 * u),
        }
    }

    /// Smallest `u ≥ 0` with `Ω_u(u) = value`, or `None` when `value` lies
    /// outside the range of the law.
    pub fn inverse_u(&self, value: f64) -> Option<f64> {
        let [p0, p1, p2] = self.params;
        // Every law reduces to a u² + b u + c = 0 on u ≥ 0.
        let (a, b, c) = match self.kind {
            DispersionKind::Schrodinger => return (value >= 0.0).then_some(value),
            DispersionKind::Bogoliubov => {
                if value < 0.0 {
                    return None;
                }
                (p2, p1, -value * value)
            }
            DispersionKind::BohmPines => {
                if value < 0.0 {
                    return None;
                }
                (p2, p1, p0 - value * value)
            }
            DispersionKind::LowTempPoly => (p2, p1, p0 - value),
        };
        if c > 0.0 {
            return None;
        }
        if c == 0.0 {
            return Some(0.0);
        }
        if a == 0.0 {
            return (b > 0.0).then(|| -c / b);
        }
        // Stable positive root of a u² + b u + c with a > 0, c < 0.
        let disc = (b * b - 4.0 * a * c).sqrt();
        Some(-2.0 * c / (b + disc))
    }

    /// Radial inverse `Ω⁻¹(value)`.
    pub fn inverse_radial(&self, value: f64) -> Option<f64> {
        self.inverse_u(value).map(f64::sqrt)
    }

    pub fn is_verified(&self) -> bool {
        self.c1.is_some() && self.c2.is_some()
    }

    pub fn require_verified(&self) -> Result<()> {
        if self.is_verified() {
            Ok(())
        } else {
            Err(Error::UnverifiedDispersion)
        }
    }

    /// Runs [`verify_assumptions`] and stores the certified constants.
    pub fn certify(mut self, r_max: f64, n_samples: usize) -> Result<(Self, AssumptionReport)> {
        let report = verify_assumptions(&self, r_max, n_samples);
        if !report.all_hold() {
            return Err(Error::AssumptionViolated(format!(
                "{} law fails assumptions {:?}",
                self.kind.name(),
                report.holds
            )));
        }
        self.c1 = Some(report.best_c1);
        self.c2 = Some(report.best_c2);
        self.certified_radius = Some(r_max);
        Ok((self, report))
    }
}

/// Sample radii on `(0, r_max]`: half geometric from `1e-6·r_max`, half uniform.
fn sample_radii(r_max: f64, n: usize) -> Vec<f64> {
    let n_geo = n / 2;
    let n_uni = n - n_geo;
    let mut out = Vec::with_capacity(n);
    let lo = (r_max * 1e-6).ln();
    let hi = r_max.ln();
    for i in 0..n_geo {
        let t = if n_geo > 1 { i as f64 / (n_geo - 1) as f64 } else { 0.0 };
        out.push((lo + t * (hi - lo)).exp());
    }
    for i in 1..=n_uni {
        out.push(r_max * i as f64 / n_uni as f64);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Sampled check of assumptions (i)-(iii) on `(0, r_max]`.
pub fn verify_assumptions(rel: &DispersionRelation, r_max: f64, n_samples: usize) -> AssumptionReport {
    let n = n_samples.max(2);
    let radii = sample_radii(r_max, n);
    let omega0 = rel.omega_radial(0.0);

    // (i): finite, nonnegative, nondecreasing, finite derivative away from 0.
    let mut ok_i = omega0.is_finite() && omega0 >= 0.0;
    let mut worst_i = 0.0;
    let mut min_margin_i = f64::INFINITY;
    let mut prev = omega0;
    for &r in &radii {
        let w = rel.omega_radial(r);
        let d = rel.omega_prime(r);
        if !(w.is_finite() && d.is_finite() && w >= 0.0 && w >= prev) {
            ok_i = false;
            worst_i = r;
        }
        if w - prev < min_margin_i && ok_i {
            min_margin_i = w - prev;
            worst_i = r;
        }
        prev = w;
    }

    // (ii): c₁ = min Ω'(x)/x.
    let mut best_c1 = f64::INFINITY;
    let mut worst_ii = radii[0];
    for &r in &radii {
        let ratio = rel.omega_prime(r) / r;
        if !(ratio >= best_c1) {
            best_c1 = ratio;
            worst_ii = r;
        }
    }
    let ok_ii = best_c1.is_finite() && best_c1 > 0.0;

    // (iii): c₂ = max Ω̃⁻¹(2Ω̃(x))/x on the shifted law Ω̃ = Ω − Ω(0).
    let mut best_c2: f64 = 0.0;
    let mut worst_iii = radii[0];
    let mut ok_iii = true;
    for &r in &radii {
        let shifted = rel.omega_radial(r) - omega0;
        if !(shifted > 0.0) {
            ok_iii = false;
            worst_iii = r;
            continue;
        }
        match rel.inverse_radial(2.0 * shifted + omega0) {
            Some(y) if y.is_finite() => {
                let c = y / r;
                if c > best_c2 {
                    best_c2 = c;
                    worst_iii = r;
                }
            }
            _ => {
                ok_iii = false;
                worst_iii = r;
            }
        }
    }
    ok_iii = ok_iii && best_c2.is_finite() && best_c2 > 0.0;
    if !ok_iii {
        best_c2 = f64::INFINITY;
    }

    AssumptionReport {
        kind: rel.kind,
        holds: [ok_i, ok_ii, ok_iii],
        best_c1: if ok_ii { best_c1 } else { best_c1.max(0.0) },
        best_c2,
        worst_point: [worst_i, worst_ii, worst_iii],
        r_max,
        n_samples: n,
        doubling_on_shifted_law: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        let s = DispersionRelation::schrodinger();
        assert_eq!(s.omega(&Vec3::new(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(s.omega_prime(2.0), 4.0);
        let b = DispersionRelation::bogoliubov(1.0, 1.0).unwrap();
        assert_relative_eq!(b.omega(&Vec3::new(1.0, 0.0, 0.0)), 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(b.omega_prime(1.0), 6.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-14);
        let c = DispersionRelation::low_temp_poly(1.0, 0.0, 0.0).unwrap();
        assert_eq!(c.omega_prime(3.7), 0.0);
        for rel in [s, b, DispersionRelation::bohm_pines(0.0, 1.0, 1.0).unwrap()] {
            assert_eq!(rel.omega(&Vec3::zeros()), 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let rels = [
            DispersionRelation::schrodinger(),
            DispersionRelation::bogoliubov(1.0, 1.0).unwrap(),
            DispersionRelation::bohm_pines(0.5, 1.0, 0.3).unwrap(),
            DispersionRelation::low_temp_poly(0.2, 1.0, 0.1).unwrap(),
        ];
        for rel in &rels {
            for &r in &[0.3, 1.0, 2.5] {
                let h = 1e-5;
                let fd = (rel.omega_radial(r + h) - rel.omega_radial(r - h)) / (2.0 * h);
                assert_relative_eq!(rel.omega_prime(r), fd, max_relative = 1e-8);
                assert_relative_eq!(2.0 * r * rel.domega_du(r * r), rel.omega_prime(r), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let rels = [
            DispersionRelation::schrodinger(),
            DispersionRelation::bogoliubov(1.0, 0.5).unwrap(),
            DispersionRelation::bohm_pines(0.5, 1.0, 0.3).unwrap(),
            DispersionRelation::low_temp_poly(0.2, 1.0, 0.1).unwrap(),
        ];
        for rel in &rels {
            for &r in &[0.0, 0.1, 1.3, 7.0] {
                let w = rel.omega_radial(r);
                let back = rel.inverse_radial(w).unwrap();
                assert_relative_eq!(rel.omega_radial(back), w, max_relative = 1e-13);
                if r > 0.0 {
                    assert_relative_eq!(back, r, max_relative = 1e-9);
                }
            }
        }
        assert!(DispersionRelation::low_temp_poly(1.0, 1.0, 0.0).unwrap().inverse_u(0.5).is_none());
    }

    #[test]
    fn schrodinger_report() {
        let rep = verify_assumptions(&DispersionRelation::schrodinger(), 10.0, 1000);
        assert!(rep.all_hold());
        assert!((rep.best_c1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_law_fails_growth() {
        let rel = DispersionRelation::low_temp_poly(1.0, 0.0, 0.0).unwrap();
        let rep = verify_assumptions(&rel, 10.0, 200);
        assert!(!rep.holds[1]);
        assert!(rel.certify(10.0, 200).is_err());
    }

    #[test]
    fn bogoliubov_certifies() {
        let rel = DispersionRelation::bogoliubov(1.0, 1.0).unwrap();
        let (rel, rep) = rel.certify(12.0, 500).unwrap();
        assert!(rep.best_c1 > 0.0);
        assert!(rel.is_verified());
        assert!(rep.best_c2 >= 2f64.sqrt() - 1e-12);
    }

    #[test]
    fn negative_params_rejected() {
        assert!(DispersionRelation::bogoliubov(-1.0, 1.0).is_err());
        assert!(DispersionRelation::low_temp_poly(0.0, f64::NAN, 1.0).is_err());
    }
}
