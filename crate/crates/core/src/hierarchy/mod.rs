//! Hierarchies `F = (f⁽ᵐ⁾)ₘ` held as finite sums of tensor products of grid
//! fields, their collision operators and Duhamel iterates, and the weighted
//! norms and residual diagnostics used to compare them with single-mode
//! solutions.

mod collide;
mod io;
mod tuples;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dispersion::Vec3;
use crate::error::{Error, Result};
use crate::grid::{bracket, GridField, GridSpec};

pub use collide::{
    apply_c_term, duhamel_iterate, hierarchy_collision, CollisionPowers, DeltaConvention, DuhamelOptions,
    HierarchyContext,
};
pub use io::{load_state, save_state, Manifest};
pub use tuples::{enumerate_tuples, TupleSet};

/// Relative threshold below which terms are dropped by [`HierarchyComponent::prune`].
pub const PRUNE_TOLERANCE: f64 = 1e-14;

/// `w · g₁ ⊗ … ⊗ gₘ`. Factors are shared, so identical fields are stored once.
#[derive(Clone, Debug)]
pub struct TensorProductTerm {
    pub weight: f64,
    pub factors: Vec<Arc<GridField>>,
}

impl TensorProductTerm {
    pub fn new(weight: f64, factors: Vec<Arc<GridField>>) -> Self {
        Self { weight, factors }
    }

    /// Value at grid indices, one per slot.
    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.factors.iter().zip(idx).fold(self.weight, |acc, (g, &i)| acc * g.values[i])
    }

    pub fn eval(&self, points: &[Vec3]) -> f64 {
        self.factors.iter().zip(points).fold(self.weight, |acc, (g, x)| acc * g.eval(x))
    }

    /// `|w|·∏ ‖gⱼ‖_{L_s^∞}`.
    pub fn norm_bound(&self, s: f64) -> f64 {
        self.factors.iter().fold(self.weight.abs(), |acc, g| acc * g.weighted_norm(s))
    }

    fn same_factors(&self, other: &TensorProductTerm) -> bool {
        self.factors.len() == other.factors.len()
            && self.factors.iter().zip(&other.factors).all(|(a, b)| Arc::ptr_eq(a, b))
    }
}

/// `f⁽ᵐ⁾ = Σᵢ wᵢ ⊗ⱼ g_{i,j}`.
#[derive(Clone, Debug)]
pub struct HierarchyComponent {
    pub level: usize,
    pub terms: Vec<TensorProductTerm>,
    /// Set when the component is known to be symmetric under relabelling.
    pub symmetric: bool,
}

impl HierarchyComponent {
    pub fn new(level: usize, terms: Vec<TensorProductTerm>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.factors.len() != level) {
            return Err(Error::LevelMismatch { expected: level, found: t.factors.len() });
        }
        Ok(Self { level, terms, symmetric: false })
    }

    pub fn empty(level: usize) -> Self {
        Self { level, terms: Vec::new(), symmetric: true }
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn spec(&self) -> Option<GridSpec> {
        self.terms.first().and_then(|t| t.factors.first()).map(|g| g.spec)
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.terms.iter().map(|t| t.value_at(idx)).sum()
    }

    /// `Σᵢ wᵢ ∏ⱼ g_{i,j}(ξⱼ)` with trilinear factor evaluation.
    pub fn eval(&self, points: &[Vec3]) -> f64 {
        self.terms.iter().map(|t| t.eval(points)).sum()
    }

    /// A level-1 component as a single field.
    pub fn to_field(&self, spec: GridSpec) -> Result<GridField> {
        if self.level != 1 {
            return Err(Error::LevelMismatch { expected: 1, found: self.level });
        }
        let mut values = vec![0.0; spec.len()];
        for t in &self.terms {
            let g = &t.factors[0];
            if !g.spec.same_as(&spec) {
                return Err(Error::GridMismatch(format!("{:?} vs {:?}", g.spec, spec)));
            }
            for (v, x) in values.iter_mut().zip(&g.values) {
                *v += t.weight * x;
            }
        }
        Ok(GridField { spec, values })
    }

    pub fn scaled(&self, c: f64) -> Self {
        let terms = self.terms.iter().map(|t| TensorProductTerm::new(c * t.weight, t.factors.clone())).collect();
        Self { level: self.level, terms, symmetric: self.symmetric }
    }

    /// Concatenation of the terms of `self` and `c·other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        if other.level != self.level {
            return Err(Error::LevelMismatch { expected: self.level, found: other.level });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| TensorProductTerm::new(c * t.weight, t.factors.clone())));
        Ok(Self { level: self.level, terms, symmetric: self.symmetric && other.symmetric })
    }

    /// Merges terms with identical (shared) factor lists.
    pub fn compress(&mut self) {
        let mut out: Vec<TensorProductTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match out.iter_mut().find(|o| o.same_factors(&t)) {
                Some(o) => o.weight += t.weight,
                None => out.push(t),
            }
        }
        self.terms = out;
    }

    /// Drops terms whose norm bound is below `PRUNE_TOLERANCE` times the sum
    /// of all term bounds.
    pub fn prune(&mut self, s: f64) {
        let bounds: Vec<f64> = self.terms.iter().map(|t| t.norm_bound(s)).collect();
        let total: f64 = bounds.iter().sum();
        let cut = PRUNE_TOLERANCE * total;
        let mut k = 0;
        self.terms.retain(|_| {
            k += 1;
            bounds[k - 1] > cut
        });
    }

    /// Explicit symmetrization over all slot permutations.
    pub fn symmetrized(&self) -> Self {
        let perms = permutations(self.level);
        let c = 1.0 / perms.len() as f64;
        let terms = self
            .terms
            .iter()
            .flat_map(|t| {
                perms.iter().map(move |p| {
                    TensorProductTerm::new(c * t.weight, p.iter().map(|&i| t.factors[i].clone()).collect())
                })
            })
            .collect();
        Self { level: self.level, terms, symmetric: true }
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for k in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=k).map(move |pos| {
                    let mut q = p.clone();
                    q.insert(pos, k);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Debug)]
pub enum Provenance {
    Factorized { seed: Arc<GridField> },
    Mixture { seeds: Vec<(f64, Arc<GridField>)> },
    General,
}

/// Components `m = 1..M_max` of a hierarchy (a subset may be present).
#[derive(Clone, Debug)]
pub struct HierarchyState {
    pub components: BTreeMap<usize, HierarchyComponent>,
    pub provenance: Provenance,
}

impl HierarchyState {
    pub fn max_level(&self) -> usize {
        self.components.keys().next_back().copied().unwrap_or(0)
    }

    pub fn component(&self, m: usize) -> Result<&HierarchyComponent> {
        self.components.get(&m).ok_or(Error::MissingLevel { level: m, available: self.max_level() })
    }

    /// `self − other` levelwise, on the levels both hold.
    pub fn sub(&self, other: &HierarchyState) -> Result<HierarchyState> {
        let mut components = BTreeMap::new();
        for (&m, c) in &self.components {
            if let Some(d) = other.components.get(&m) {
                components.insert(m, c.add_scaled(-1.0, d)?);
            }
        }
        Ok(HierarchyState { components, provenance: Provenance::General })
    }
}

/// Component `m` is the single term `1·f₀^{⊗m}`.
pub fn make_factorized(f0: &GridField, m_max: usize) -> Result<HierarchyState> {
    if m_max == 0 {
        return Err(Error::ParameterOutOfRange("M_max must be at least 1".into()));
    }
    let seed = Arc::new(f0.clone());
    let components = (1..=m_max)
        .map(|m| {
            let term = TensorProductTerm::new(1.0, vec![seed.clone(); m]);
            (m, HierarchyComponent { level: m, terms: vec![term], symmetric: true })
        })
        .collect();
    Ok(HierarchyState { components, provenance: Provenance::Factorized { seed } })
}

/// Component `m` is `Σᵢ wᵢ f₀ᵢ^{⊗m}`.
pub fn make_mixture(seeds: &[(f64, GridField)], m_max: usize) -> Result<HierarchyState> {
    if m_max == 0 {
        return Err(Error::ParameterOutOfRange("M_max must be at least 1".into()));
    }
    let sum: f64 = seeds.iter().map(|(w, _)| w).sum();
    if seeds.is_empty() || seeds.iter().any(|(w, _)| !(*w > 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::UnnormalizedWeights { sum });
    }
    let seeds: Vec<(f64, Arc<GridField>)> = seeds.iter().map(|(w, f)| (*w, Arc::new(f.clone()))).collect();
    let components = (1..=m_max)
        .map(|m| {
            let terms = seeds.iter().map(|(w, f)| TensorProductTerm::new(*w, vec![f.clone(); m])).collect();
            (m, HierarchyComponent { level: m, terms, symmetric: true })
        })
        .collect();
    Ok(HierarchyState { components, provenance: Provenance::Mixture { seeds } })
}

/// Grid-index tuples for sampled suprema: all of them when there are at most
/// `n`, otherwise `n` uniform draws.
fn sample_tuples(spec: GridSpec, m: usize, n: usize, seed: u64) -> Vec<Vec<usize>> {
    let len = spec.len();
    let total = (len as f64).powi(m as i32);
    if total <= n as f64 {
        let mut out = vec![Vec::new()];
        for _ in 0..m {
            out = out.into_iter().flat_map(|t| (0..len).map(move |i| [t.clone(), vec![i]].concat())).collect();
        }
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..m).map(|_| rng.gen_range(0..len)).collect()).collect()
}

fn bracket_powers(spec: GridSpec, s: f64) -> Vec<f64> {
    (0..spec.len()).map(|i| bracket(&spec.point(i)).powf(s)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum NormMode {
    /// `∏ⱼ ‖gⱼ‖` for a single sign-definite term, sampled otherwise.
    Rank1Exact,
    /// `Σᵢ |wᵢ| ∏ⱼ ‖g_{i,j}‖`, an upper bound.
    TriangleBound,
    /// Largest weighted value over `n` grid tuples, a lower bound.
    SampledSup { n: usize, seed: u64 },
}

/// Sample count used when `Rank1Exact` has to fall back to sampling.
pub const FALLBACK_SAMPLES: usize = 4096;

/// `‖f⁽ᵐ⁾‖_{L_{s,m}^∞}` with weight `∏ⱼ ⟨ξⱼ⟩^s`.
pub fn component_norm(comp: &HierarchyComponent, s: f64, mode: NormMode) -> f64 {
    if comp.terms.is_empty() {
        return 0.0;
    }
    match mode {
        NormMode::TriangleBound => comp.terms.iter().map(|t| t.norm_bound(s)).sum(),
        NormMode::Rank1Exact => match comp.terms.as_slice() {
            [t] if t.factors.iter().all(|g| g.is_sign_definite()) => t.norm_bound(s),
            _ => sampled_norm(comp, s, FALLBACK_SAMPLES, 0),
        },
        NormMode::SampledSup { n, seed } => sampled_norm(comp, s, n, seed),
    }
}

fn sampled_norm(comp: &HierarchyComponent, s: f64, n: usize, seed: u64) -> f64 {
    let Some(spec) = comp.spec() else { return 0.0 };
    let w = bracket_powers(spec, s);
    sample_tuples(spec, comp.level, n, seed)
        .iter()
        .map(|idx| idx.iter().fold(comp.value_at(idx).abs(), |acc, &i| acc * w[i]))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyNorm {
    /// `Σ_{m ≤ M_max} εᵐ‖f⁽ᵐ⁾‖`.
    pub value: f64,
    /// For factorized provenance with factor norm `B`:
    /// `ε^{M+1}B^{M+1}/(1 − εB)` (infinite when `εB ≥ 1`).
    pub tail_bound: Option<f64>,
}

pub fn hierarchy_norm(state: &HierarchyState, s: f64, eps: f64, mode: NormMode) -> Result<HierarchyNorm> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("need 0 < ε < 1, got {eps}")));
    }
    let value = state.components.iter().map(|(&m, c)| eps.powi(m as i32) * component_norm(c, s, mode)).sum();
    let tail_bound = match &state.provenance {
        Provenance::Factorized { seed } => {
            let q = eps * seed.weighted_norm(s);
            let m1 = (state.max_level() + 1) as i32;
            Some(if q < 1.0 { q.powi(m1) / (1.0 - q) } else { f64::INFINITY })
        }
        _ => None,
    };
    Ok(HierarchyNorm { value, tail_bound })
}

/// Largest `|f(ξ_σ) − f(ξ)|` over random grid tuples and permutations,
/// relative to the largest sampled `|f|`.
pub fn check_symmetry(comp: &HierarchyComponent, n_samples: usize, seed: u64) -> f64 {
    let Some(spec) = comp.spec() else { return 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for _ in 0..n_samples {
        let idx: Vec<usize> = (0..comp.level).map(|_| rng.gen_range(0..spec.len())).collect();
        let mut perm = idx.clone();
        perm.shuffle(&mut rng);
        let (a, b) = (comp.value_at(&idx), comp.value_at(&perm));
        worst = worst.max((a - b).abs());
        scale = scale.max(a.abs()).max(b.abs());
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// `sup |∫ f⁽ᵐ⁺¹⁾(·, ξₘ₊₁) dξₘ₊₁ − mass·f⁽ᵐ⁾|` over sampled grid tuples; the
/// integral is taken factorwise on each rank-1 term.
pub fn admissibility_residual(state: &HierarchyState, m: usize, mass: f64, n_samples: usize, seed: u64) -> Result<f64> {
    let lower = state.component(m)?;
    let upper = state.component(m + 1)?;
    let reduced = HierarchyComponent {
        level: m,
        terms: upper
            .terms
            .iter()
            .map(|t| TensorProductTerm::new(t.weight * t.factors[m].integral(), t.factors[..m].to_vec()))
            .collect(),
        symmetric: false,
    };
    let diff = reduced.add_scaled(-mass, lower)?;
    let Some(spec) = diff.spec() else { return Ok(0.0) };
    Ok(sample_tuples(spec, m, n_samples, seed).iter().map(|idx| diff.value_at(idx).abs()).fold(0.0, f64::max))
}

/// Sampled weighted sup of `|f⁽ᵐ⁾ − f^{⊗m}|`.
pub fn factorization_residual(
    state: &HierarchyState,
    f: &GridField,
    m: usize,
    s: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let comp = state.component(m)?;
    let tensor = TensorProductTerm::new(1.0, std::iter::repeat_n(Arc::new(f.clone()), m).collect());
    let diff = HierarchyComponent { level: m, terms: vec![tensor], symmetric: true }.add_scaled(-1.0, comp)?;
    let w = bracket_powers(f.spec, s);
    Ok(sample_tuples(f.spec, m, n_samples, seed)
        .iter()
        .map(|idx| idx.iter().fold(diff.value_at(idx).abs(), |acc, &i| acc * w[i]))
        .fold(0.0, f64::max))
}
