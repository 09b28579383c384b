use wavehier::collision::{collision_apply_with, KernelEngine, QuadConfig};
use wavehier::dispersion::{DispersionRelation, Vec3};
use wavehier::error::Error;
use wavehier::grid::{GridField, GridSpec};
use wavehier::hierarchy::{
    apply_c_term, duhamel_iterate, hierarchy_collision, load_state, make_factorized, make_mixture, save_state,
    CollisionPowers, DeltaConvention, DuhamelOptions, HierarchyContext,
};
use wavehier::wke::picard_iterate;

fn setup() -> (KernelEngine, GridField) {
    let rel = DispersionRelation::schrodinger().certify(20.0, 200).unwrap().0;
    let sp = GridSpec::new(7, 2.5).unwrap();
    let eng = KernelEngine::new(&rel, sp, &QuadConfig::new(8, 8)).unwrap();
    let f = GridField::gaussian(sp, 0.9, 1.0);
    (eng, f)
}

fn rel_diff(a: &GridField, b: &GridField) -> f64 {
    a.max_abs_diff(b).unwrap() / b.sup_abs()
}

#[test]
fn level_one_reduces_to_collision_operator() {
    let (eng, f) = setup();
    let st = make_factorized(&f, 3).unwrap();
    for conv in [DeltaConvention::ModeJ, DeltaConvention::LiteralXi1] {
        let ctx = HierarchyContext::new(&eng).with_convention(conv);
        let c = hierarchy_collision(&st, 1, &ctx).unwrap();
        assert_eq!(c.rank(), 4);
        let cf = collision_apply_with(&eng, &f).unwrap();
        assert!(rel_diff(&c.to_field(*eng.spec()).unwrap(), &cf) < 1e-12);
    }
}

#[test]
fn second_power_is_the_linearized_operator() {
    let (eng, f) = setup();
    let ctx = HierarchyContext::new(&eng);
    let st = make_factorized(&f, 5).unwrap();
    let p = CollisionPowers::compute(&st, 2, &ctx, &DuhamelOptions::default()).unwrap();
    let c2 = p.powers[2][&1].to_field(*eng.spec()).unwrap();
    // C is cubic: DC[f][g] = (C[f+g] − C[f−g])/2 − C[g] exactly.
    let g = collision_apply_with(&eng, &f).unwrap();
    let plus = collision_apply_with(&eng, &f.axpy(1.0, &g).unwrap()).unwrap();
    let minus = collision_apply_with(&eng, &f.axpy(-1.0, &g).unwrap()).unwrap();
    let dc = plus.axpy(-1.0, &minus).unwrap().scaled(0.5).axpy(-1.0, &collision_apply_with(&eng, &g).unwrap()).unwrap();
    assert!(rel_diff(&c2, &dc) < 1e-10, "{}", rel_diff(&c2, &dc));
}

#[test]
fn first_iterate_matches_picard_and_forward_euler() {
    let (eng, f) = setup();
    let ctx = HierarchyContext::new(&eng);
    let st = make_factorized(&f, 3).unwrap();
    let t = 0.01;
    let du = duhamel_iterate(&st, t, 1, &ctx, &DuhamelOptions::default()).unwrap();
    let du1 = du.component(1).unwrap().to_field(*eng.spec()).unwrap();
    let euler = f.axpy(t, &collision_apply_with(&eng, &f).unwrap()).unwrap();
    assert!(rel_diff(&du1, &euler) < 1e-13);
    assert!(rel_diff(&picard_iterate(&eng, &f, t, 1).unwrap(), &euler) < 1e-13);
    let du0 = duhamel_iterate(&st, 0.0, 1, &ctx, &DuhamelOptions::default()).unwrap();
    assert_eq!(du0.component(1).unwrap().to_field(*eng.spec()).unwrap().values, f.values);
}

#[test]
fn third_level_of_first_iterate_keeps_structure() {
    let (eng, f) = setup();
    let ctx = HierarchyContext::new(&eng);
    let st = make_factorized(&f, 5).unwrap();
    let c = hierarchy_collision(&st, 3, &ctx).unwrap();
    assert_eq!(c.rank(), 12);
    assert!(c.symmetric);
    // Single-mode product rule: at level 3 the ξ_j convention gives
    // Σⱼ f ⊗ … ⊗ C[f] ⊗ … ⊗ f.
    let cf = collision_apply_with(&eng, &f).unwrap();
    let sp = *eng.spec();
    for idx in [[0usize, 5, 100], [171, 171, 3], [40, 200, 300]] {
        let pts: Vec<Vec3> = idx.iter().map(|&i| sp.point(i)).collect();
        let expect = cf.values[idx[0]] * f.values[idx[1]] * f.values[idx[2]]
            + f.values[idx[0]] * cf.values[idx[1]] * f.values[idx[2]]
            + f.values[idx[0]] * f.values[idx[1]] * cf.values[idx[2]];
        approx::assert_relative_eq!(c.eval(&pts), expect, max_relative = 1e-11, epsilon = 1e-15);
    }
    let lit = hierarchy_collision(&st, 3, &HierarchyContext::new(&eng).with_convention(DeltaConvention::LiteralXi1)).unwrap();
    assert!(!lit.symmetric);
}

#[test]
fn term_application_checks_indices() {
    let (eng, f) = setup();
    let ctx = HierarchyContext::new(&eng);
    let st = make_factorized(&f, 3).unwrap();
    let comp = st.component(3).unwrap();
    assert!(apply_c_term(5, 1, 1, comp, &ctx).is_err());
    assert!(apply_c_term(1, 2, 1, comp, &ctx).is_err());
    assert_eq!(apply_c_term(2, 1, 1, comp, &ctx).unwrap().rank(), 1);
}

#[test]
fn missing_level_is_reported() {
    let (eng, f) = setup();
    let ctx = HierarchyContext::new(&eng);
    let st = make_factorized(&f, 4).unwrap();
    match CollisionPowers::compute(&st, 2, &ctx, &DuhamelOptions::default()) {
        Err(Error::MissingLevel { level, available }) => assert_eq!((level, available), (5, 4)),
        other => panic!("expected MissingLevel, got {other:?}"),
    }
}

#[test]
fn mixture_iterates_are_linear_and_round_trip() {
    let (eng, f) = setup();
    let g = GridField::gaussian(*eng.spec(), 0.6, 1.5);
    let ctx = HierarchyContext::new(&eng);
    let opts = DuhamelOptions { prune: false, ..DuhamelOptions::default() };
    let mix = make_mixture(&[(0.3, f.clone()), (0.7, g.clone())], 3).unwrap();
    let t = 0.02;
    let dm = duhamel_iterate(&mix, t, 1, &ctx, &opts).unwrap();
    let df = duhamel_iterate(&make_factorized(&f, 3).unwrap(), t, 1, &ctx, &opts).unwrap();
    let dg = duhamel_iterate(&make_factorized(&g, 3).unwrap(), t, 1, &ctx, &opts).unwrap();
    let sp = *eng.spec();
    let a = dm.component(1).unwrap().to_field(sp).unwrap();
    let b = df.component(1).unwrap().to_field(sp).unwrap().scaled(0.3).axpy(0.7, &dg.component(1).unwrap().to_field(sp).unwrap()).unwrap();
    assert!(rel_diff(&a, &b) < 1e-12);
    let dir = tempfile::tempdir().unwrap();
    save_state(&dm, dir.path()).unwrap();
    let back = load_state(dir.path()).unwrap();
    assert_eq!(back.component(1).unwrap().to_field(sp).unwrap().values, a.values);
}
