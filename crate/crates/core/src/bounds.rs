//! Factorial bounds, the losing-estimate factor, balance constraints and the
//! series/truncation bounds of the Duhamel expansion.
//!
//! Products and factorials are carried in log space throughout.

use serde::{Deserialize, Serialize};

use crate::collision::BoundEstimate;
use crate::error::{Error, Result};

/// Robbins' two-sided bound on `j!`.
pub fn robbins_bounds(j: u32) -> Result<(f64, f64)> {
    if j == 0 {
        return Err(Error::ParameterOutOfRange("Robbins bounds need j ≥ 1".into()));
    }
    let jf = j as f64;
    let ln_stirling = 0.5 * (2.0 * std::f64::consts::PI).ln() + (jf + 0.5) * jf.ln() - jf;
    let lower = (ln_stirling + 1.0 / (12.0 * jf + 1.0)).exp();
    let upper = (ln_stirling + 1.0 / (12.0 * jf)).exp();
    Ok((lower, upper))
}

/// `ln j!` by direct summation.
pub fn ln_factorial(j: u32) -> f64 {
    (2..=j).map(|k| (k as f64).ln()).sum()
}

/// `∏_{r=1}^k (m + 2r − 2)` as an exact integer, `None` on overflow.
pub fn growth_product_exact(m: u32, k: u32) -> Option<u128> {
    (1..=k).try_fold(1u128, |acc, r| acc.checked_mul((m + 2 * r - 2) as u128))
}

/// `ln ∏_{r=1}^k (m + 2r − 2)`.
pub fn ln_growth_product(m: u32, k: u32) -> f64 {
    (1..=k).map(|r| ((m + 2 * r - 2) as f64).ln()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthProduct {
    pub value: f64,
    pub ln_value: f64,
    /// `(3m)^k`, valid for `k ≤ m`.
    pub bound_small_k: f64,
    /// `(3k)^k`, valid for `k > m`.
    pub bound_large_k: f64,
}

impl GrowthProduct {
    /// The bound that applies in the regime of `(m, k)`.
    pub fn regime_bound(&self, m: u32, k: u32) -> f64 {
        if k <= m {
            self.bound_small_k
        } else {
            self.bound_large_k
        }
    }
}

pub fn growth_product(m: u32, k: u32) -> Result<GrowthProduct> {
    if m == 0 {
        return Err(Error::ParameterOutOfRange("growth product needs m ≥ 1".into()));
    }
    let ln_value = ln_growth_product(m, k);
    let kf = k as f64;
    Ok(GrowthProduct {
        value: ln_value.exp(),
        ln_value,
        bound_small_k: (3.0 * m as f64).powf(kf),
        bound_large_k: (3.0 * kf).powf(kf),
    })
}

/// `sup_{m ≥ 1} m·(ε'/ε)^m`.
pub fn loss_factor(eps_prime: f64, eps: f64) -> Result<f64> {
    if !(eps_prime > 0.0 && eps_prime < eps && eps < 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "loss factor needs 0 < ε' < ε < 1, got ε' = {eps_prime}, ε = {eps}"
        )));
    }
    let q = eps_prime / eps;
    let lq = q.ln();
    // m·q^m is unimodal with its real maximum at −1/ln q.
    let m_star = (-1.0 / lq).floor().max(1.0);
    let value = |m: f64| (m.ln() + m * lq).exp();
    Ok([m_star - 1.0, m_star, m_star + 1.0]
        .into_iter()
        .filter(|&m| m >= 1.0)
        .map(value)
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams {
    pub s: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub t: f64,
    pub c_s: f64,
    pub norm_f0: f64,
}

impl SeriesParams {
    /// `C_s·T·ε₁^{−2}`.
    pub fn time_ratio(&self) -> f64 {
        self.c_s * self.t / (self.eps1 * self.eps1)
    }

    /// `ε₂·e^{C_s·T·ε₁^{−2}}/ε₁`.
    pub fn growth_ratio(&self) -> f64 {
        self.eps2 * self.time_ratio().exp() / self.eps1
    }

    /// The sufficient choice: `T` with `C_s·T·ε₁^{−2} = 1/2` and
    /// `ε₂ = 0.99·ε₁·e^{−1/2}`.
    pub fn recipe(s: f64, eps1: f64, c_s: f64, norm_f0: f64) -> Self {
        Self {
            s,
            eps1,
            eps2: 0.99 * eps1 * (-0.5f64).exp(),
            t: 0.5 * eps1 * eps1 / c_s,
            c_s,
            norm_f0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub holds: bool,
    /// `1 − ε₂e^{C_sTε₁^{−2}}/ε₁`.
    pub growth_margin: f64,
    /// `1 − C_sTε₁^{−2}`.
    pub time_margin: f64,
}

pub fn check_balance(p: &SeriesParams) -> BalanceReport {
    let growth_margin = 1.0 - p.growth_ratio();
    let time_margin = 1.0 - p.time_ratio();
    BalanceReport { holds: growth_margin > 0.0 && time_margin > 0.0, growth_margin, time_margin }
}

/// Bound on the norm of the Duhamel series from both regimes of the
/// `(m, k)` double sum.
pub fn series_tail_bound(p: &SeriesParams) -> Result<f64> {
    let bal = check_balance(p);
    if !bal.holds {
        return Err(Error::BalanceViolated(format!(
            "growth margin {:.3e}, time margin {:.3e}",
            bal.growth_margin, bal.time_margin
        )));
    }
    let a = p.growth_ratio();
    let b = p.time_ratio();
    Ok((a / (1.0 - a) + b * b / (1.0 - b)) * p.norm_f0)
}

/// `C_s^{j+1}T^{j+1}∏_{r=1}^{j+1}(m+2r−2) / ((j+1)!·ε^{m+2j+2}) · ‖F‖`.
pub fn truncation_error_bound(eps: f64, c_s: f64, t: f64, j: u32, m: u32, norm_f: f64) -> f64 {
    if norm_f == 0.0 {
        return 0.0;
    }
    let n = j + 1;
    let nf = n as f64;
    let ln = nf * (c_s * t).ln() + ln_growth_product(m, n) - ln_factorial(n) - (m + 2 * n) as f64 * eps.ln();
    ln.exp() * norm_f
}

/// The single collision constant used by the series bounds: four times the
/// largest lemma constant, one per term of `𝔠_{j;m}`.
pub fn aggregate_collision_constant(estimates: &[BoundEstimate]) -> f64 {
    4.0 * estimates.iter().map(|e| e.m_est).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn factorial(j: u32) -> u128 {
        (1..=j as u128).product()
    }

    #[test]
    fn robbins_small_values() {
        let (lo, hi) = robbins_bounds(1).unwrap();
        assert_relative_eq!(lo, 0.995_87, epsilon = 1e-5);
        assert_relative_eq!(hi, 1.002_27, epsilon = 1e-5);
        let (lo, hi) = robbins_bounds(5).unwrap();
        assert!(lo <= 120.0 && 120.0 <= hi);
        assert!(robbins_bounds(0).is_err());
    }

    #[test]
    fn robbins_brackets_factorials() {
        for j in 1..=20 {
            let (lo, hi) = robbins_bounds(j).unwrap();
            let exact = factorial(j) as f64;
            assert!(lo <= exact && exact <= hi, "j = {j}");
        }
    }

    #[test]
    fn growth_product_values() {
        assert_eq!(growth_product_exact(1, 3), Some(15));
        assert_eq!(growth_product_exact(4, 2), Some(24));
        assert_eq!(growth_product_exact(7, 0), Some(1));
        let g = growth_product(1, 3).unwrap();
        assert_relative_eq!(g.value, 15.0, max_relative = 1e-14);
        assert_eq!(g.regime_bound(1, 3), 729.0);
        assert_eq!(growth_product(4, 2).unwrap().regime_bound(4, 2), 144.0);
        for m in 1..=12 {
            for k in 0..=12 {
                let g = growth_product(m, k).unwrap();
                assert!(g.value <= g.regime_bound(m, k) * (1.0 + 1e-12), "m={m} k={k}");
            }
        }
    }

    #[test]
    fn loss_factor_values() {
        assert_relative_eq!(loss_factor(0.25, 0.5).unwrap(), 0.5, max_relative = 1e-14);
        let e = (-1.0f64).exp();
        assert_relative_eq!(loss_factor(0.5 * e, 0.5).unwrap(), e, max_relative = 1e-14);
        assert!(loss_factor(0.5, 0.5).is_err());
        // Brute-force oracle over a long range of m.
        for q in [0.3f64, 0.7, 0.9, 0.97, 0.995] {
            let brute = (1..20_000).map(|m| m as f64 * q.powi(m)).fold(0.0, f64::max);
            assert_relative_eq!(loss_factor(q * 0.5, 0.5).unwrap(), brute, max_relative = 1e-10);
        }
        let ladder: Vec<f64> = [0.5, 0.8, 0.9, 0.99, 0.999].iter().map(|&q| loss_factor(q * 0.9, 0.9).unwrap()).collect();
        assert!(ladder.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn balance_example() {
        let p = SeriesParams { s: 3.0, eps1: 0.5, eps2: 0.3, t: 0.125, c_s: 1.0, norm_f0: 1.0 };
        let b = check_balance(&p);
        assert!(b.holds);
        assert_relative_eq!(p.growth_ratio(), 0.6 * 0.5f64.exp(), max_relative = 1e-15);
        assert_relative_eq!(b.time_margin, 0.5, max_relative = 1e-15);
        let equal = SeriesParams { eps2: 0.5, ..p };
        assert!(!check_balance(&equal).holds);
        assert!(series_tail_bound(&equal).is_err());
    }

    #[test]
    fn series_tail_example() {
        let p = SeriesParams { s: 3.0, eps1: 0.5, eps2: 0.3, t: 0.125, c_s: 1.0, norm_f0: 1.0 };
        // Two-precision oracle: the f64 formula against an f32 evaluation.
        let a32 = 0.3f32 * 0.5f32.exp() / 0.5;
        let oracle32 = a32 / (1.0 - a32) + 0.25 / 0.5;
        let a = 0.6 * 0.5f64.exp();
        let oracle = a / (1.0 - a) + 0.5;
        let got = series_tail_bound(&p).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-14);
        assert_relative_eq!(got, oracle32 as f64, max_relative = 1e-3);
        assert_eq!(series_tail_bound(&SeriesParams { norm_f0: 0.0, ..p }).unwrap(), 0.0);
        let ts: Vec<f64> = [0.05, 0.08, 0.1, 0.12].iter().map(|&t| series_tail_bound(&SeriesParams { t, ..p }).unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        let es: Vec<f64> = [0.1, 0.2, 0.25, 0.3].iter().map(|&eps2| series_tail_bound(&SeriesParams { eps2, ..p }).unwrap()).collect();
        assert!(es.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn truncation_bound_matches_direct_product() {
        let (eps, c_s, t): (f64, f64, f64) = (0.6, 0.9, 0.5 * 0.36 / 0.9);
        for j in 0..12 {
            for m in 1..4 {
                let n = j + 1;
                let direct = (c_s * t).powi(n as i32) * growth_product_exact(m, n).unwrap() as f64
                    / factorial(n) as f64
                    / eps.powi((m + 2 * n) as i32);
                assert_relative_eq!(truncation_error_bound(eps, c_s, t, j, m, 1.0), direct, max_relative = 1e-12);
            }
        }
        assert_eq!(truncation_error_bound(eps, c_s, t, 3, 1, 0.0), 0.0);
    }

    #[test]
    fn truncation_bound_at_ratio_half() {
        // With C_sTε⁻² = 1/2 and m = 1 the bound behaves like (πn)^{−1/2}ε⁻¹.
        let eps = 0.5;
        let t = 0.5 * eps * eps;
        let b: Vec<f64> = [4, 9, 19, 39].iter().map(|&j| truncation_error_bound(eps, 1.0, t, j, 1, 1.0)).collect();
        assert!(b.windows(2).all(|w| w[1] < w[0]));
        let ratio = b[1] / b[0];
        assert_relative_eq!(ratio, (654_729_075.0 / 3_628_800.0 / 1024.0) / (945.0 / 120.0 / 32.0), max_relative = 1e-12);
    }

    #[test]
    fn recipe_passes_balance() {
        let p = SeriesParams::recipe(3.0, 0.4, 2.5, 1.0);
        assert_relative_eq!(p.time_ratio(), 0.5, max_relative = 1e-14);
        assert!(check_balance(&p).holds);
    }
}
