//! Batched evaluation of resonant kernels
//!
//! `K(ξ) = Σ_{ξ₁ ∈ grid} w(ξ₁) · pre(ξ₁) · Σ_q ν_q · node(z_q) · mirror(ρ − z_q)`
//!
//! where `ν_q` is the `δ(G)dz` measure of the manifold rule and any of the
//! three slots may be absent (treated as one). All kernels of a batch share
//! one manifold build and one interpolation pass per distinct field for each
//! `(ξ, ξ₁)` pair.

use crate::dispersion::{DispersionRelation, Vec3};
use crate::error::{Error, Result};
use crate::grid::{bracket, GridField, GridSpec, Stencil};
use crate::manifold::{build_nodes, ManifoldConfig, ManifoldRule, NodeSet, PhasePair};
use crate::par::{self, Exec};

/// Cube-symmetry reduction policy for full-grid evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// Evaluate only orbit representatives when every input field is
    /// invariant under the 48 cube symmetries (to 1e-12 relative).
    Auto,
    Off,
}

/// Tolerance used by [`Symmetry::Auto`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub manifold: ManifoldConfig,
    pub symmetry: Symmetry,
    pub exec: Exec,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { manifold: ManifoldConfig::default(), symmetry: Symmetry::Auto, exec: Exec::default() }
    }
}

impl QuadConfig {
    pub fn new(n_slices: usize, n_angular: usize) -> Self {
        Self { manifold: ManifoldConfig::new(n_slices, n_angular), ..Self::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    /// Same rule with node spacing halved in both directions.
    pub fn refined(mut self) -> Self {
        self.manifold.n_slices *= 2;
        self.manifold.n_angular *= 2;
        self
    }
}

/// A function that can appear in a kernel slot.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    /// Grid field, trilinear off-grid and zero outside the box.
    Grid(&'a GridField),
    /// The weight `⟨x⟩^p`, evaluated analytically everywhere.
    Bracket(f64),
}

impl Source<'_> {
    #[inline]
    fn eval(&self, x: &Vec3) -> f64 {
        match self {
            Source::Grid(f) => f.eval(x),
            Source::Bracket(p) => bracket(x).powf(*p),
        }
    }

    #[inline]
    fn grid_value(&self, spec: &GridSpec, idx: usize) -> f64 {
        match self {
            Source::Grid(f) => f.values[idx],
            Source::Bracket(p) => bracket(&spec.point(idx)).powf(*p),
        }
    }

    fn same(&self, other: &Source) -> bool {
        match (self, other) {
            (Source::Grid(a), Source::Grid(b)) => std::ptr::eq(*a, *b),
            (Source::Bracket(a), Source::Bracket(b)) => a == b,
            _ => false,
        }
    }

    fn cube_symmetric(&self) -> bool {
        match self {
            Source::Grid(f) => f.cube_asymmetry() <= SYMMETRY_TOL,
            Source::Bracket(_) => true,
        }
    }
}

/// One requested kernel.
#[derive(Clone, Copy, Debug)]
pub struct Kernel<'a> {
    pub pre: Option<Source<'a>>,
    pub node: Option<Source<'a>>,
    pub mirror: Option<Source<'a>>,
}

impl<'a> Kernel<'a> {
    /// `∫dξ₁ f(ξ₁) ∫_S g(z) h(ρ−z)`, the kernel of `C₁`.
    pub fn c1(f: &'a GridField, g: &'a GridField, h: &'a GridField) -> Self {
        Self { pre: Some(Source::Grid(f)), node: Some(Source::Grid(g)), mirror: Some(Source::Grid(h)) }
    }

    /// `Q[g,h] = ∫dξ₁ ∫_S g(z) h(ρ−z)`.
    pub fn q(g: &'a GridField, h: &'a GridField) -> Self {
        Self { pre: None, node: Some(Source::Grid(g)), mirror: Some(Source::Grid(h)) }
    }

    /// `Q'[g,h] = ∫dξ₁ g(ξ₁) ∫_S h(z)`, the kernel of `C₃`.
    pub fn q_node(g: &'a GridField, h: &'a GridField) -> Self {
        Self { pre: Some(Source::Grid(g)), node: Some(Source::Grid(h)), mirror: None }
    }

    /// `∫dξ₁ g(ξ₁) ∫_S h(ρ−z)`, the kernel of `C₄`.
    pub fn q_mirror(g: &'a GridField, h: &'a GridField) -> Self {
        Self { pre: Some(Source::Grid(g)), node: None, mirror: Some(Source::Grid(h)) }
    }
}

/// Kernels with their sources deduplicated into slots.
struct Plan<'a> {
    sources: Vec<Source<'a>>,
    /// For each slot: whether it is evaluated at manifold nodes.
    on_nodes: Vec<bool>,
    /// Distinct `(node slot, mirror slot)` inner sums.
    inner: Vec<(Option<usize>, Option<usize>)>,
    /// Per kernel: `(pre slot, inner index)`.
    kernels: Vec<(Option<usize>, usize)>,
    /// Every kernel has a `pre` factor, so `ξ₁` with all-zero `pre` can be skipped.
    all_pre: bool,
    any_grid_on_nodes: bool,
}

impl<'a> Plan<'a> {
    fn new(kernels: &[Kernel<'a>]) -> Self {
        let mut sources: Vec<Source<'a>> = Vec::new();
        let mut on_nodes = Vec::new();
        let mut slot = |s: Option<Source<'a>>, node: bool, sources: &mut Vec<Source<'a>>| {
            s.map(|s| {
                let i = match sources.iter().position(|t| t.same(&s)) {
                    Some(i) => i,
                    None => {
                        sources.push(s);
                        on_nodes.push(false);
                        sources.len() - 1
                    }
                };
                if node {
                    on_nodes[i] = true;
                }
                i
            })
        };
        let mut inner = Vec::new();
        let mut out = Vec::new();
        for k in kernels {
            let p = slot(k.pre, false, &mut sources);
            let n = slot(k.node, true, &mut sources);
            let m = slot(k.mirror, true, &mut sources);
            let key = (n, m);
            let ii = match inner.iter().position(|&x| x == key) {
                Some(i) => i,
                None => {
                    inner.push(key);
                    inner.len() - 1
                }
            };
            out.push((p, ii));
        }
        let all_pre = out.iter().all(|(p, _)| p.is_some());
        let any_grid_on_nodes =
            sources.iter().zip(&on_nodes).any(|(s, &n)| n && matches!(s, Source::Grid(_)));
        Self { sources, on_nodes, inner, kernels: out, all_pre, any_grid_on_nodes }
    }
}

/// Per-worker buffers.
#[derive(Default)]
pub struct Scratch {
    set: NodeSet,
    stencils: Vec<Option<Stencil>>,
    node_vals: Vec<Vec<f64>>,
    pre_vals: Vec<f64>,
    inner_vals: Vec<f64>,
}

/// Evaluates resonant kernels for one dispersion law, grid and rule.
pub struct KernelEngine {
    rel: DispersionRelation,
    spec: GridSpec,
    rule: ManifoldRule,
    points: Vec<Vec3>,
    weights: Vec<f64>,
    cfg: QuadConfig,
}

impl KernelEngine {
    pub fn new(rel: &DispersionRelation, spec: GridSpec, cfg: &QuadConfig) -> Result<Self> {
        rel.require_verified()?;
        let mut mcfg = cfg.manifold;
        // Any resonance circle beyond a few box diagonals signals a bad box.
        mcfg.search_radius = mcfg.search_radius.min(64.0 * spec.k * 3f64.sqrt());
        let rule = ManifoldRule::new(mcfg)?;
        let points = (0..spec.len()).map(|i| spec.point(i)).collect();
        let weights = spec.trap_weights();
        Ok(Self { rel: rel.clone(), spec, rule, points, weights, cfg: *cfg })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn relation(&self) -> &DispersionRelation {
        &self.rel
    }

    pub fn config(&self) -> &QuadConfig {
        &self.cfg
    }

    fn check_sources(&self, kernels: &[Kernel]) -> Result<()> {
        for k in kernels {
            for s in [k.pre, k.node, k.mirror].into_iter().flatten() {
                if let Source::Grid(f) = s {
                    if !f.spec.same_as(&self.spec) {
                        return Err(Error::GridMismatch(format!(
                            "field on {:?} used with engine on {:?}",
                            f.spec, self.spec
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn eval_with(&self, plan: &Plan, xi: &Vec3, s: &mut Scratch) -> Result<Vec<f64>> {
        let ns = plan.sources.len();
        s.node_vals.resize_with(ns, Vec::new);
        s.pre_vals.resize(ns, 0.0);
        s.inner_vals.resize(plan.inner.len(), 0.0);
        let mut acc = vec![0.0; plan.kernels.len()];
        for (idx1, xi1) in self.points.iter().enumerate() {
            for (slot, src) in plan.sources.iter().enumerate() {
                s.pre_vals[slot] = src.grid_value(&self.spec, idx1);
            }
            if plan.all_pre && plan.kernels.iter().all(|(p, _)| s.pre_vals[p.unwrap_or(0)] == 0.0) {
                continue;
            }
            let pair = PhasePair::new(*xi, *xi1);
            build_nodes(&self.rel, &pair, &self.rule, &mut s.set)?;
            if s.set.is_empty() {
                continue;
            }
            let nq = s.set.len();
            if plan.any_grid_on_nodes {
                s.stencils.clear();
                s.stencils.extend(s.set.nodes.iter().map(|z| self.spec.stencil(z)));
            }
            for (slot, src) in plan.sources.iter().enumerate() {
                if plan.on_nodes[slot] {
                    let buf = &mut s.node_vals[slot];
                    buf.clear();
                    match src {
                        Source::Grid(f) => buf.extend(s.stencils.iter().map(|st| match st {
                            Some(st) => f.eval_stencil(st),
                            None => 0.0,
                        })),
                        Source::Bracket(_) => buf.extend(s.set.nodes.iter().map(|z| src.eval(z))),
                    }
                }
            }
            for (ii, &(n, m)) in plan.inner.iter().enumerate() {
                let meas = &s.set.measure;
                let mir = &s.set.mirror;
                let v = match (n, m) {
                    (Some(a), Some(b)) => {
                        let (va, vb) = (&s.node_vals[a], &s.node_vals[b]);
                        (0..nq).map(|q| meas[q] * va[q] * vb[mir[q]]).sum()
                    }
                    (Some(a), None) => {
                        let va = &s.node_vals[a];
                        (0..nq).map(|q| meas[q] * va[q]).sum()
                    }
                    (None, Some(b)) => {
                        let vb = &s.node_vals[b];
                        (0..nq).map(|q| meas[q] * vb[mir[q]]).sum()
                    }
                    (None, None) => meas.iter().sum(),
                };
                s.inner_vals[ii] = v;
            }
            let w1 = self.weights[idx1];
            for (r, &(p, ii)) in plan.kernels.iter().enumerate() {
                let pre = p.map_or(1.0, |p| s.pre_vals[p]);
                acc[r] += w1 * pre * s.inner_vals[ii];
            }
        }
        Ok(acc)
    }

    /// Kernel values at an arbitrary point `ξ`.
    pub fn eval_point(&self, kernels: &[Kernel], xi: &Vec3) -> Result<Vec<f64>> {
        self.check_sources(kernels)?;
        let plan = Plan::new(kernels);
        self.eval_with(&plan, xi, &mut Scratch::default())
    }

    /// Kernel values at a list of points, in parallel over points.
    pub fn eval_points(&self, kernels: &[Kernel], xis: &[Vec3]) -> Result<Vec<Vec<f64>>> {
        self.check_sources(kernels)?;
        let plan = Plan::new(kernels);
        par::map_init(self.cfg.exec, xis.len(), Scratch::default, |s, i| self.eval_with(&plan, &xis[i], s))
            .into_iter()
            .collect()
    }

    /// Whether a full-grid evaluation of these kernels may use the orbit
    /// reduction.
    pub fn uses_symmetry(&self, kernels: &[Kernel]) -> bool {
        self.cfg.symmetry == Symmetry::Auto
            && kernels
                .iter()
                .flat_map(|k| [k.pre, k.node, k.mirror])
                .flatten()
                .all(|s| s.cube_symmetric())
    }

    /// Kernel values at every grid point, one field per kernel.
    pub fn eval_grid(&self, kernels: &[Kernel]) -> Result<Vec<GridField>> {
        self.check_sources(kernels)?;
        let plan = Plan::new(kernels);
        let n = self.spec.len();
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; n]; kernels.len()];
        if self.uses_symmetry(kernels) {
            let (reps, owner) = self.spec.orbits();
            let vals = par::map_init(self.cfg.exec, reps.len(), Scratch::default, |s, i| {
                self.eval_with(&plan, &self.points[reps[i]], s)
            });
            let vals: Vec<Vec<f64>> = vals.into_iter().collect::<Result<_>>()?;
            for (idx, &o) in owner.iter().enumerate() {
                for (r, field) in out.iter_mut().enumerate() {
                    field[idx] = vals[o][r];
                }
            }
        } else {
            let vals = par::map_init(self.cfg.exec, n, Scratch::default, |s, i| {
                self.eval_with(&plan, &self.points[i], s)
            });
            for (idx, v) in vals.into_iter().enumerate() {
                let v = v?;
                for (r, field) in out.iter_mut().enumerate() {
                    field[idx] = v[r];
                }
            }
        }
        Ok(out.into_iter().map(|values| GridField { spec: self.spec, values }).collect())
    }
}
