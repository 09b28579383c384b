//! Hierarchy collision operators `𝔠_{i,j;m}` on rank-1 terms and the
//! Duhamel iterates built from them.
//!
//! For a term `w·g₁⊗…⊗g_{m+2}` and the resonance taken at `ξⱼ` (primed
//! variables `ξ'₂` outer, `ξ'₃` on the manifold, `ξ'₄ = ξⱼ + ξ'₂ − ξ'₃`):
//!
//! * `i = 1`: slot `j` becomes `∫ g_m(ξ'₂) g_{m+1}(ξ'₃) g_{m+2}(ξ'₄)`, the old
//!   `gⱼ` is dropped and later slots shift down by one;
//! * `i = 2`: `gⱼ` is multiplied by `Q[g_{m+1}, g_{m+2}]`;
//! * `i = 3`: `gⱼ` is multiplied by `∫ g_{m+1}(ξ'₂) g_{m+2}(ξ'₄)`;
//! * `i = 4`: `gⱼ` is multiplied by `∫ g_{m+1}(ξ'₂) g_{m+2}(ξ'₃)`.
//!
//! Kernel evaluations are interned by the identity of their input fields and
//! evaluated together in one engine pass.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{HierarchyComponent, HierarchyState, Provenance, TensorProductTerm};
use crate::collision::{Kernel, KernelEngine};
use crate::error::{Error, Result};
use crate::grid::GridField;

/// Which mode carries the resonance constraint in `𝔠_{j;m}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConvention {
    /// Resonance at `ξⱼ`; factorized data then evolve by the kinetic equation.
    #[default]
    ModeJ,
    /// Resonance at `ξ₁` for every `j`, as the hierarchy is displayed
    /// literally. For `i = 1, j ≥ 2` slot `j` becomes the box indicator.
    LiteralXi1,
}

#[derive(Clone, Copy)]
pub struct HierarchyContext<'a> {
    pub engine: &'a KernelEngine,
    pub convention: DeltaConvention,
}

impl<'a> HierarchyContext<'a> {
    pub fn new(engine: &'a KernelEngine) -> Self {
        Self { engine, convention: DeltaConvention::ModeJ }
    }

    pub fn with_convention(mut self, convention: DeltaConvention) -> Self {
        self.convention = convention;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum KernelKind {
    C1,
    Q,
    QNode,
    QMirror,
}

fn ptr(f: &Arc<GridField>) -> usize {
    Arc::as_ptr(f) as usize
}

enum Slot {
    Keep(Arc<GridField>),
    Kernel(usize),
    Times(Arc<GridField>, usize),
    Ones,
}

struct Pending {
    weight: f64,
    slots: Vec<Slot>,
}

#[derive(Default)]
struct Batch {
    index: HashMap<(KernelKind, [usize; 3]), usize>,
    args: Vec<(KernelKind, Vec<Arc<GridField>>)>,
}

impl Batch {
    fn kernel(&mut self, kind: KernelKind, args: &[&Arc<GridField>]) -> usize {
        let mut key = [0usize; 3];
        for (k, a) in key.iter_mut().zip(args) {
            *k = ptr(a);
        }
        *self.index.entry((kind, key)).or_insert_with(|| {
            self.args.push((kind, args.iter().map(|a| (*a).clone()).collect()));
            self.args.len() - 1
        })
    }

    fn eval(&self, eng: &KernelEngine) -> Result<Vec<Arc<GridField>>> {
        let kernels: Vec<Kernel> = self
            .args
            .iter()
            .map(|(kind, a)| match kind {
                KernelKind::C1 => Kernel::c1(&a[0], &a[1], &a[2]),
                KernelKind::Q => Kernel::q(&a[0], &a[1]),
                KernelKind::QNode => Kernel::q_node(&a[0], &a[1]),
                KernelKind::QMirror => Kernel::q_mirror(&a[0], &a[1]),
            })
            .collect();
        if kernels.is_empty() {
            return Ok(Vec::new());
        }
        Ok(eng.eval_grid(&kernels)?.into_iter().map(Arc::new).collect())
    }
}

/// Queues `𝔠_{i,j;m}` applied to one term.
fn plan_term(
    batch: &mut Batch,
    term: &TensorProductTerm,
    i: usize,
    j: usize,
    m: usize,
    sign: f64,
    conv: DeltaConvention,
) -> Pending {
    let g = &term.factors;
    let (a, b, c) = (&g[m - 1], &g[m], &g[m + 1]);
    // Slot receiving the resonant kernel.
    let target = match conv {
        DeltaConvention::ModeJ => j,
        DeltaConvention::LiteralXi1 => 1,
    };
    let weight = sign * term.weight;
    if i == 1 {
        let k = batch.kernel(KernelKind::C1, &[a, b, c]);
        let mut slots: Vec<Slot> = Vec::with_capacity(m);
        for r in 1..=m {
            let keep = match r.cmp(&j) {
                std::cmp::Ordering::Less => Some(&g[r - 1]),
                std::cmp::Ordering::Greater => Some(&g[r - 2]),
                std::cmp::Ordering::Equal => None,
            };
            slots.push(match keep {
                Some(f) if r == target => Slot::Times(f.clone(), k),
                Some(f) => Slot::Keep(f.clone()),
                None if r == target => Slot::Kernel(k),
                None => Slot::Ones,
            });
        }
        return Pending { weight, slots };
    }
    let kind = match i {
        2 => KernelKind::Q,
        3 => KernelKind::QMirror,
        _ => KernelKind::QNode,
    };
    let k = batch.kernel(kind, &[b, c]);
    let slots = (1..=m)
        .map(|r| if r == target { Slot::Times(g[r - 1].clone(), k) } else { Slot::Keep(g[r - 1].clone()) })
        .collect();
    Pending { weight, slots }
}

fn materialize(pending: Vec<Pending>, kernels: &[Arc<GridField>], level: usize) -> Result<Vec<TensorProductTerm>> {
    let mut products: HashMap<(usize, usize), Arc<GridField>> = HashMap::new();
    let mut ones: Option<Arc<GridField>> = None;
    let mut out = Vec::with_capacity(pending.len());
    for p in pending {
        let mut factors = Vec::with_capacity(level);
        for s in p.slots {
            factors.push(match s {
                Slot::Keep(f) => f,
                Slot::Kernel(k) => kernels[k].clone(),
                Slot::Times(f, k) => match products.get(&(ptr(&f), k)) {
                    Some(x) => x.clone(),
                    None => {
                        let x = Arc::new(f.mul(&kernels[k])?);
                        products.insert((ptr(&f), k), x.clone());
                        x
                    }
                },
                Slot::Ones => ones
                    .get_or_insert_with(|| {
                        let spec = kernels[0].spec;
                        Arc::new(GridField { spec, values: vec![1.0; spec.len()] })
                    })
                    .clone(),
            });
        }
        out.push(TensorProductTerm::new(p.weight, factors));
    }
    Ok(out)
}

fn check_level(comp: &HierarchyComponent, m: usize) -> Result<()> {
    if m == 0 || comp.level != m + 2 {
        return Err(Error::LevelMismatch { expected: m + 2, found: comp.level });
    }
    Ok(())
}

/// Applies `ops = [(i, j, sign)]` to every term of each `(component, m)`
/// request, sharing one kernel batch.
fn apply_ops(
    requests: &[(&HierarchyComponent, usize)],
    ops: &dyn Fn(usize) -> Vec<(usize, usize, f64)>,
    ctx: &HierarchyContext,
) -> Result<Vec<HierarchyComponent>> {
    let mut batch = Batch::default();
    let mut pendings = Vec::with_capacity(requests.len());
    for &(comp, m) in requests {
        check_level(comp, m)?;
        let list = ops(m);
        let mut pending = Vec::with_capacity(comp.terms.len() * list.len());
        for term in &comp.terms {
            for &(i, j, sign) in &list {
                pending.push(plan_term(&mut batch, term, i, j, m, sign, ctx.convention));
            }
        }
        pendings.push(pending);
    }
    let kernels = batch.eval(ctx.engine)?;
    requests
        .iter()
        .zip(pendings)
        .map(|(&(comp, m), pending)| {
            let terms = materialize(pending, &kernels, m)?;
            let symmetric = comp.symmetric && ctx.convention == DeltaConvention::ModeJ;
            Ok(HierarchyComponent { level: m, terms, symmetric })
        })
        .collect()
}

/// `𝔠_{i,j;m}` applied to a level `m + 2` component, term by term.
pub fn apply_c_term(i: usize, j: usize, m: usize, comp: &HierarchyComponent, ctx: &HierarchyContext) -> Result<HierarchyComponent> {
    if !(1..=4).contains(&i) {
        return Err(Error::ParameterOutOfRange(format!("term index i must be 1..4, got {i}")));
    }
    if !(1..=m).contains(&j) {
        return Err(Error::ParameterOutOfRange(format!("slot j must be 1..{m}, got {j}")));
    }
    Ok(apply_ops(&[(comp, m)], &|_| vec![(i, j, 1.0)], ctx)?.remove(0))
}

fn all_ops(m: usize) -> Vec<(usize, usize, f64)> {
    (1..=m).flat_map(|j| [(1, j, 1.0), (2, j, 1.0), (3, j, -1.0), (4, j, -1.0)]).collect()
}

/// `𝔠[F]⁽ᵐ⁾ = Σⱼ (𝔠_{1,j;m} + 𝔠_{2,j;m} − 𝔠_{3,j;m} − 𝔠_{4,j;m})[f⁽ᵐ⁺²⁾]`.
/// The output holds `4·m` terms per input term.
pub fn hierarchy_collision(state: &HierarchyState, m: usize, ctx: &HierarchyContext) -> Result<HierarchyComponent> {
    let comp = state.component(m + 2)?;
    Ok(apply_ops(&[(comp, m)], &all_ops, ctx)?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelOptions {
    /// Merge terms with identical factor lists after each application.
    pub compress: bool,
    /// Drop negligible terms (relative to the component's term-norm sum).
    pub prune: bool,
    /// Weight exponent of the norm used for pruning.
    pub s: f64,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self { compress: false, prune: true, s: 3.0 }
    }
}

/// `𝔠ᵏ[F₀]⁽ᵐ⁾` for `k = 0..=j` and every level reachable from the data.
#[derive(Clone, Debug)]
pub struct CollisionPowers {
    pub powers: Vec<BTreeMap<usize, HierarchyComponent>>,
}

impl CollisionPowers {
    pub fn compute(f0: &HierarchyState, j: usize, ctx: &HierarchyContext, opts: &DuhamelOptions) -> Result<Self> {
        let top = f0.max_level();
        if top < 1 + 2 * j {
            return Err(Error::MissingLevel { level: 1 + 2 * j, available: top });
        }
        let mut powers = vec![f0.components.clone()];
        for _ in 0..j {
            let prev = powers.last().expect("non-empty");
            let requests: Vec<(&HierarchyComponent, usize)> =
                prev.iter().filter(|(&l, _)| l >= 3).map(|(&l, c)| (c, l - 2)).collect();
            let out = apply_ops(&requests, &all_ops, ctx)?;
            let mut next = BTreeMap::new();
            for mut c in out {
                if opts.compress {
                    c.compress();
                }
                if opts.prune {
                    c.prune(opts.s);
                }
                next.insert(c.level, c);
            }
            powers.push(next);
        }
        Ok(Self { powers })
    }

    pub fn depth(&self) -> usize {
        self.powers.len() - 1
    }

    /// `Du_j(F₀, t)` on the levels where every power up to `j` is available.
    pub fn iterate(&self, t: f64, j: usize) -> Result<HierarchyState> {
        if j > self.depth() {
            return Err(Error::ParameterOutOfRange(format!("only {} powers were computed, asked for {j}", self.depth())));
        }
        let mut components = BTreeMap::new();
        for (&m, top) in &self.powers[j] {
            let mut comp = self.powers[0][&m].clone();
            let mut coef = 1.0;
            for k in 1..=j {
                coef *= t / k as f64;
                let ck = if k == j { top } else { &self.powers[k][&m] };
                comp = comp.add_scaled(coef, ck)?;
            }
            comp.symmetric = self.powers[0][&m].symmetric && top.symmetric;
            components.insert(m, comp);
        }
        Ok(HierarchyState { components, provenance: Provenance::General })
    }
}

/// `Du_j(F₀, t)⁽ᵐ⁾ = Σ_{k ≤ j} (tᵏ/k!) 𝔠ᵏ[F₀]⁽ᵐ⁾` for every `m` with
/// `m + 2j ≤ M_max`.
pub fn duhamel_iterate(
    f0: &HierarchyState,
    t: f64,
    j: usize,
    ctx: &HierarchyContext,
    opts: &DuhamelOptions,
) -> Result<HierarchyState> {
    CollisionPowers::compute(f0, j, ctx, opts)?.iterate(t, j)
}
