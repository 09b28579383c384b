//! Sampled suprema of the weighted resonant integrals that bound `C₁..C₄`,
//! and a posteriori checks of the resulting operator bounds.

use serde::{Deserialize, Serialize};

use crate::collision::engine::{Kernel, KernelEngine, QuadConfig, Source};
use crate::dispersion::{DispersionRelation, Vec3};
use crate::error::{Error, Result};
use crate::grid::{bracket, GridField, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `⟨ξ⟩^γ ∫dξ₁ ∫_S ⟨ξ₁⟩^{−s}⟨z⟩^{−s}`
    LemmaC1,
    /// `⟨ξ⟩^γ ∫dξ₁ ∫_S ⟨z⟩^{−s}⟨ξ+ξ₁−z⟩^{−s}`
    LemmaC2,
    /// `⟨ξ⟩^γ ∫dξ₁ ∫_S ⟨z⟩^{−s}⟨ξ₁⟩^{−s}`
    LemmaC3,
}

impl BoundKind {
    pub const ALL: [BoundKind; 3] = [BoundKind::LemmaC1, BoundKind::LemmaC2, BoundKind::LemmaC3];

    pub fn validate(self, s: f64, gamma: f64) -> Result<()> {
        if !(s > 2.0) {
            return Err(Error::ParameterOutOfRange(format!("need s > 2, got s = {s}")));
        }
        if !(gamma >= 0.0 && gamma < s - 2.0) {
            return Err(Error::ParameterOutOfRange(format!("need 0 ≤ γ < s − 2, got γ = {gamma}, s = {s}")));
        }
        if self == BoundKind::LemmaC1 && !(gamma < 1.0) {
            return Err(Error::ParameterOutOfRange(format!("the C₁ bound needs γ < 1, got γ = {gamma}")));
        }
        Ok(())
    }

    fn kernel<'a>(self, s: f64) -> Kernel<'a> {
        let w = Some(Source::Bracket(-s));
        match self {
            BoundKind::LemmaC1 | BoundKind::LemmaC3 => Kernel { pre: w, node: w, mirror: None },
            BoundKind::LemmaC2 => Kernel { pre: None, node: w, mirror: w },
        }
    }
}

/// Probe set and resolution for the supremum search.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundSearch {
    /// Grid for the outer `ξ₁` integral.
    pub grid: GridSpec,
    pub quad: QuadConfig,
    /// Points `ξ` at which the weighted integral is evaluated.
    pub probes: Vec<Vec3>,
}

impl BoundSearch {
    /// Probes on three rays (axis, face diagonal, body diagonal) at radii
    /// from 0 up to twice the box half-width.
    pub fn default_for(grid: GridSpec, quad: QuadConfig) -> Self {
        let dirs = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0).normalize(),
            Vec3::new(1.0, 1.0, 1.0).normalize(),
        ];
        let fracs = [0.0, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0];
        let mut probes = vec![Vec3::zeros()];
        for d in dirs {
            for &t in &fracs[1..] {
                probes.push(d * (t * grid.k));
            }
        }
        Self { grid, quad, probes }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub kind: BoundKind,
    pub s: f64,
    pub gamma: f64,
    pub m_est: f64,
    pub argmax_xi: [f64; 3],
    /// `(|ξ|, value)` for every probe, in probe order.
    pub probe_values: Vec<(f64, f64)>,
    /// Whether the values along each probe ray decrease beyond the box edge.
    pub tail_decreasing: bool,
}

/// Evaluates the weighted integral of `kind` at every probe and returns the
/// largest value.
pub fn estimate_bound_constant(
    rel: &DispersionRelation,
    s: f64,
    gamma: f64,
    kind: BoundKind,
    search: &BoundSearch,
) -> Result<BoundEstimate> {
    kind.validate(s, gamma)?;
    let eng = KernelEngine::new(rel, search.grid, &search.quad)?;
    let vals = eng.eval_points(&[kind.kernel(s)], &search.probes)?;
    let mut probe_values = Vec::with_capacity(vals.len());
    let mut best = (f64::NEG_INFINITY, Vec3::zeros());
    for (xi, v) in search.probes.iter().zip(&vals) {
        let m = bracket(xi).powf(gamma) * v[0];
        probe_values.push((xi.norm(), m));
        if m > best.0 {
            best = (m, *xi);
        }
    }
    // Each ray occupies a contiguous block after the origin probe; look at
    // probes beyond the box half-width.
    let mut tail_decreasing = true;
    let mut prev: Option<(f64, f64)> = None;
    for &(r, m) in probe_values.iter().skip(1) {
        if let Some((pr, pm)) = prev {
            if r > pr && pr >= search.grid.k && m > pm {
                tail_decreasing = false;
            }
        }
        prev = Some((r, m));
    }
    Ok(BoundEstimate {
        kind,
        s,
        gamma,
        m_est: best.0,
        argmax_xi: [best.1[0], best.1[1], best.1[2]],
        probe_values,
        tail_decreasing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormCheckReport {
    pub kind: BoundKind,
    /// `‖⟨ξ⟩^γ Cᵢ[f,g,h]‖_{L_s^∞} / (M·‖f‖‖g‖‖h‖)` per trial.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// `Cᵢ[f,g,h]` on the grid for the operator that `kind` controls
/// (`LemmaC3` checks `C₃`).
pub fn operator_field(
    eng: &KernelEngine,
    kind: BoundKind,
    f: &GridField,
    g: &GridField,
    h: &GridField,
) -> Result<GridField> {
    let kernel = match kind {
        BoundKind::LemmaC1 => Kernel::c1(f, g, h),
        BoundKind::LemmaC2 => Kernel::q(g, h),
        BoundKind::LemmaC3 => Kernel::q_node(g, h),
    };
    let k = eng.eval_grid(&[kernel])?.remove(0);
    match kind {
        BoundKind::LemmaC1 => Ok(k),
        _ => f.mul(&k),
    }
}

/// Checks `‖⟨ξ⟩^γ Cᵢ[f,g,h]‖_{L_s^∞} ≤ M·‖f‖‖g‖‖h‖` for each trial triple.
pub fn operator_norm_check(
    rel: &DispersionRelation,
    est: &BoundEstimate,
    trials: &[(GridField, GridField, GridField)],
    cfg: &QuadConfig,
) -> Result<NormCheckReport> {
    let mut ratios = Vec::with_capacity(trials.len());
    for (f, g, h) in trials {
        let denom = est.m_est * f.weighted_norm(est.s) * g.weighted_norm(est.s) * h.weighted_norm(est.s);
        if denom == 0.0 {
            ratios.push(0.0);
            continue;
        }
        let eng = KernelEngine::new(rel, f.spec, cfg)?;
        let out = operator_field(&eng, est.kind, f, g, h)?;
        ratios.push(out.weighted_norm(est.s + est.gamma) / denom);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(NormCheckReport { kind: est.kind, ratios, max_ratio })
}
