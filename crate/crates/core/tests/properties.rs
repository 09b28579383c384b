use std::sync::Arc;

use proptest::prelude::*;
use wavehier::bounds::{
    check_balance, growth_product, growth_product_exact, ln_factorial, loss_factor, robbins_bounds,
    truncation_error_bound, SeriesParams,
};
use wavehier::dispersion::{DispersionKind, DispersionRelation, Vec3};
use wavehier::grid::{GridField, GridSpec};
use wavehier::hierarchy::{
    component_norm, enumerate_tuples, HierarchyComponent, NormMode, TensorProductTerm,
};
use wavehier::manifold::{build_manifold_quadrature, manifold_integrate, PhasePair};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn relation() -> impl Strategy<Value = DispersionRelation> {
    prop_oneof![
        Just(DispersionRelation::schrodinger()),
        (0.1f64..2.0, 0.1f64..2.0).prop_map(|(a, b)| DispersionRelation::bogoliubov(a, b).unwrap()),
        (0.0f64..1.0, 0.1f64..2.0, 0.1f64..2.0)
            .prop_map(|(a, b, c)| DispersionRelation::new(DispersionKind::BohmPines, [a, b, c]).unwrap()),
        (0.0f64..1.0, 0.1f64..2.0, 0.1f64..2.0)
            .prop_map(|(a, b, c)| DispersionRelation::low_temp_poly(a, b, c).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispersion_is_increasing_and_invertible(rel in relation(), r in 0.05f64..8.0, dr in 0.01f64..1.0) {
        prop_assert!(rel.omega_radial(r + dr) > rel.omega_radial(r));
        prop_assert!(rel.omega_prime(r) > 0.0);
        let w = rel.omega_radial(r);
        let back = rel.inverse_radial(w).unwrap();
        prop_assert!((rel.omega_radial(back) - w).abs() <= 1e-10 * w.max(1.0));
    }

    #[test]
    fn tuple_counts_match_products(m in 1usize..6, k in 0usize..5) {
        let t = enumerate_tuples(m, k);
        prop_assert_eq!(t.iter().count() as u128, t.count());
        prop_assert_eq!(Some(t.count()), growth_product_exact(m as u32, k as u32));
    }

    #[test]
    fn growth_product_regime_bounds_dominate(m in 1u32..200, k in 1u32..200) {
        let g = growth_product(m, k).unwrap();
        prop_assert!(g.ln_value <= g.regime_bound(m, k).ln() + 1e-9);
    }

    #[test]
    fn robbins_brackets_log_factorial(j in 1u32..=170) {
        let (lo, hi) = robbins_bounds(j).unwrap();
        let lf = ln_factorial(j);
        prop_assert!(lo.is_finite() && hi.is_finite());
        let tol = 1e-13 * lf.max(1.0);
        prop_assert!(lo.ln() <= lf + tol && lf <= hi.ln() + tol);
    }

    #[test]
    fn loss_factor_dominates_every_level(eps in 0.05f64..0.95, frac in 0.05f64..0.99, m in 0u32..400) {
        let eps_prime = eps * frac;
        let q = eps_prime / eps;
        let lf = loss_factor(eps_prime, eps).unwrap();
        prop_assert!(m as f64 * q.powi(m as i32) <= lf * (1.0 + 1e-12));
    }

    #[test]
    fn recipe_satisfies_balance(eps1 in 0.01f64..0.99, c_s in 1e-3f64..1e3) {
        let p = SeriesParams::recipe(3.0, eps1, c_s, 1.0);
        let b = check_balance(&p);
        prop_assert!(b.holds, "{:?}", b);
    }

    #[test]
    fn truncation_bound_shrinks_for_small_ratio(x in 0.01f64..0.45, eps in 0.2f64..0.9, m in 1u32..4) {
        let c_s = 1.0;
        let t = x * eps * eps / c_s;
        let b: Vec<f64> = [5u32, 10, 20, 40].iter().map(|&j| truncation_error_bound(eps, c_s, t, j, m, 1.0)).collect();
        prop_assert!(b.windows(2).all(|w| w[1] < w[0]), "{:?}", b);
    }

    #[test]
    fn field_files_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 27), k in 0.5f64..10.0) {
        let sp = GridSpec::new(3, k).unwrap();
        let f = GridField::from_values(sp, vals).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let g = GridField::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(g.values, f.values);
        prop_assert_eq!(g.spec.k, k);
    }

    #[test]
    fn rank_one_norm_is_product_of_factor_norms(a in 0.3f64..2.0, b in 0.3f64..2.0, w in 0.1f64..3.0, s in 2.1f64..5.0) {
        let sp = GridSpec::new(9, 3.0).unwrap();
        let f = Arc::new(GridField::gaussian(sp, a, 1.0));
        let g = Arc::new(GridField::gaussian(sp, b, 2.0));
        let comp = HierarchyComponent::new(2, vec![TensorProductTerm::new(w, vec![f.clone(), g.clone()])]).unwrap();
        let n = component_norm(&comp, s, NormMode::Rank1Exact);
        let expect = w * f.weighted_norm(s) * g.weighted_norm(s);
        prop_assert!((n - expect).abs() <= 1e-12 * expect);
        let sampled = component_norm(&comp, s, NormMode::SampledSup { n: 500, seed: 3 });
        prop_assert!(sampled <= n * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn manifold_nodes_are_resonant(rel in relation(), xi in vec3(3.0), xi1 in vec3(3.0)) {
        let rel = rel.certify(40.0, 200).unwrap().0;
        let pair = PhasePair::new(xi, xi1);
        let q = build_manifold_quadrature(&rel, &pair, 12, 12).unwrap();
        let scale = pair.energy(&rel).max(1.0);
        prop_assert!(q.max_phase_residual(&rel, &pair) <= 1e-9 * scale);
        for (i, &m) in q.mirror.iter().enumerate() {
            prop_assert_eq!(q.mirror[m], i);
            prop_assert!((q.nodes[m] - (pair.rho - q.nodes[i])).norm() <= 1e-9 * (1.0 + pair.rho.norm()));
        }
    }

    #[test]
    fn schrodinger_measure_is_exact(xi in vec3(2.0), xi1 in vec3(2.0)) {
        let d = (xi - xi1).norm();
        prop_assume!(d >= 0.2);
        let rel = DispersionRelation::schrodinger().certify(20.0, 200).unwrap().0;
        let q = build_manifold_quadrature(&rel, &PhasePair::new(xi, xi1), 24, 24).unwrap();
        let m = manifold_integrate(&q, |_| 1.0);
        let exact = std::f64::consts::PI * d / 2.0;
        prop_assert!((m - exact).abs() <= 5e-3 * exact, "{m} vs {exact}");
    }
}
