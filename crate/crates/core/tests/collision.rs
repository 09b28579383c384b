use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wavehier::collision::{collision_apply_with, collision_parts_with, Kernel, KernelEngine, QuadConfig, Symmetry};
use wavehier::dispersion::{DispersionRelation, Vec3};
use wavehier::grid::{GridField, GridSpec};
use wavehier::manifold::mollified::mollified_kernel_integral;
use wavehier::par::Exec;

fn schrodinger() -> DispersionRelation {
    DispersionRelation::schrodinger().certify(20.0, 200).unwrap().0
}

fn gaussian(sigma: f64, amp: f64) -> impl Fn(&Vec3) -> f64 {
    move |x: &Vec3| amp * (-x.norm_squared() / (2.0 * sigma * sigma)).exp()
}

fn probes() -> Vec<Vec3> {
    vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.5, 0.25, 0.0), Vec3::new(0.3, -0.6, 0.9), Vec3::new(1.2, 0.0, 0.4)]
}

#[test]
fn kernels_are_linear_in_each_slot() {
    let rel = schrodinger();
    let sp = GridSpec::new(9, 3.0).unwrap();
    let eng = KernelEngine::new(&rel, sp, &QuadConfig::new(12, 12)).unwrap();
    let f = GridField::gaussian(sp, 0.8, 1.0);
    let g = GridField::gaussian(sp, 0.6, 1.5);
    let h = GridField::from_fn(sp, |x| (-(x - Vec3::new(0.3, 0.0, 0.0)).norm_squared()).exp());
    let gh = g.scaled(2.0).axpy(-0.5, &h).unwrap();
    let xi = Vec3::new(0.4, -0.2, 0.1);
    let v = eng
        .eval_point(&[Kernel::c1(&f, &gh, &h), Kernel::c1(&f, &g, &h), Kernel::c1(&f, &h, &h)], &xi)
        .unwrap();
    approx::assert_relative_eq!(v[0], 2.0 * v[1] - 0.5 * v[2], max_relative = 1e-12);
    let v = eng.eval_point(&[Kernel::q(&f, &gh), Kernel::q(&f, &g), Kernel::q(&f, &h)], &xi).unwrap();
    approx::assert_relative_eq!(v[0], 2.0 * v[1] - 0.5 * v[2], max_relative = 1e-12);
}

#[test]
fn exchange_symmetries_hold_to_quadrature_tolerance() {
    let rel = schrodinger();
    let sp = GridSpec::new(17, 4.0).unwrap();
    let eng = KernelEngine::new(&rel, sp, &QuadConfig::new(24, 24)).unwrap();
    let f = GridField::gaussian(sp, 1.0, 1.0);
    let g = GridField::gaussian(sp, 0.7, 1.0);
    let h = GridField::from_fn(sp, |x| (-(x - Vec3::new(0.5, 0.2, 0.0)).norm_squared()).exp());
    let ks = [Kernel::c1(&f, &g, &h), Kernel::c1(&f, &h, &g), Kernel::q_node(&g, &h), Kernel::q_mirror(&g, &h)];
    for xi in probes() {
        let v = eng.eval_point(&ks, &xi).unwrap();
        assert!((v[0] - v[1]).abs() <= 1e-3 * v[0].abs(), "C1 exchange at {xi:?}: {v:?}");
        assert!((v[2] - v[3]).abs() <= 1e-3 * v[2].abs(), "C3 vs C4 at {xi:?}: {v:?}");
    }
}

#[test]
fn collision_is_cubic_and_exec_independent() {
    let rel = schrodinger();
    let sp = GridSpec::new(7, 2.5).unwrap();
    let cfg = QuadConfig::new(8, 8);
    let f = GridField::gaussian(sp, 0.9, 1.0);
    let par = KernelEngine::new(&rel, sp, &cfg.with_exec(Exec::Parallel)).unwrap();
    let seq = KernelEngine::new(&rel, sp, &cfg.with_exec(Exec::Sequential)).unwrap();
    let c = collision_apply_with(&par, &f).unwrap();
    assert_eq!(c.values, collision_apply_with(&seq, &f).unwrap().values);
    let c3 = collision_apply_with(&par, &f.scaled(-3.0)).unwrap();
    for (a, b) in c3.values.iter().zip(&c.values) {
        approx::assert_relative_eq!(*a, -27.0 * b, max_relative = 1e-12, epsilon = 1e-300);
    }
    let nosym = KernelEngine::new(&rel, sp, &cfg.with_symmetry(Symmetry::Off)).unwrap();
    let d = collision_apply_with(&nosym, &f).unwrap().max_abs_diff(&c).unwrap();
    assert!(d <= 1e-12 * c.sup_abs(), "orbit symmetry changed the result by {d}");
}

#[test]
fn parts_combine_into_total() {
    let rel = schrodinger();
    let sp = GridSpec::new(7, 2.5).unwrap();
    let eng = KernelEngine::new(&rel, sp, &QuadConfig::new(8, 8)).unwrap();
    let f = GridField::gaussian(sp, 0.9, 1.0);
    let p = collision_parts_with(&eng, &f).unwrap();
    let total = p.gain().axpy(-1.0, &p.loss()).unwrap();
    assert!(total.max_abs_diff(&p.total()).unwrap() <= 1e-14 * p.gain().sup_abs());
}

#[derive(Debug, Serialize, Deserialize)]
struct Golden {
    n: usize,
    k: f64,
    sigma: f64,
    quad: usize,
    points: Vec<[f64; 3]>,
    /// `[C1, Q, Q', Q'']` per point.
    values: Vec<[f64; 4]>,
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden").join(name)
}

/// Engine values for a Gaussian checked against the mollified six-dimensional
/// Monte Carlo oracle, then compared with the frozen copy.
#[test]
fn gaussian_kernels_match_mc_oracle_and_golden() {
    let rel = schrodinger();
    let (n, k, sigma, quad) = (33, 4.0, 0.7, 24);
    let sp = GridSpec::new(n, k).unwrap();
    let eng = KernelEngine::new(&rel, sp, &QuadConfig::new(quad, quad)).unwrap();
    let f = GridField::gaussian(sp, sigma, 1.0);
    let g = gaussian(sigma, 1.0);
    let one = |_: &Vec3| 1.0;
    let ks = [Kernel::c1(&f, &f, &f), Kernel::q(&f, &f), Kernel::q_node(&f, &f), Kernel::q_mirror(&f, &f)];
    let pts = probes();
    let mut values = Vec::new();
    for (pi, xi) in pts.iter().enumerate() {
        let v = eng.eval_point(&ks, xi).unwrap();
        let seed = 100 + pi as u64;
        let mc = [
            mollified_kernel_integral(&rel, xi, &g, &g, &g, 1.0, 0.03, 1_500_000, seed),
            mollified_kernel_integral(&rel, xi, one, &g, &g, 1.6, 0.03, 1_500_000, seed),
            mollified_kernel_integral(&rel, xi, &g, &g, one, 1.0, 0.03, 1_500_000, seed),
        ];
        for (val, est) in [(v[0], mc[0]), (v[1], mc[1]), (v[2], mc[2]), (v[3], mc[2])] {
            let tol = 4.0 * est.std_error + 0.02 * est.value.abs();
            assert!((val - est.value).abs() <= tol, "at {xi:?}: engine {val}, oracle {est:?}");
        }
        values.push([v[0], v[1], v[2], v[3]]);
    }
    let golden = Golden { n, k, sigma, quad, points: pts.iter().map(|p| [p.x, p.y, p.z]).collect(), values };
    let path = golden_path("gaussian_kernels.json");
    if std::env::var_os("WAVEHIER_BLESS").is_some() || !path.exists() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&golden).unwrap()).unwrap();
    }
    let stored: Golden = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((stored.n, stored.quad), (n, quad));
    for (a, b) in stored.values.iter().flatten().zip(golden.values.iter().flatten()) {
        approx::assert_relative_eq!(*a, *b, max_relative = 1e-12);
    }
}
