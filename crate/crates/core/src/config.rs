//! JSON run configuration shared by the CLI subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collision::{QuadConfig, Symmetry};
use crate::dispersion::{AssumptionReport, DispersionKind, DispersionRelation};
use crate::error::{Error, Result};
use crate::grid::{GridField, GridSpec};
use crate::hierarchy::DeltaConvention;
use crate::manifold::ManifoldConfig;
use crate::wke::Method;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionSpec {
    pub kind: DispersionKind,
    /// `(θ₀, θ₁, θ₂)` or `(λ₀, λ₁, λ₂)`; ignored for Schrödinger.
    #[serde(default)]
    pub params: [f64; 3],
    /// Certification radius; defaults to `4√3·K`.
    #[serde(default)]
    pub certify_radius: Option<f64>,
    #[serde(default = "default_certify_samples")]
    pub certify_samples: usize,
}

fn default_certify_samples() -> usize {
    400
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    pub k: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 33, k: 6.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub n_slices: usize,
    pub n_angular: usize,
    #[serde(default = "default_true")]
    pub symmetry: bool,
}

fn default_true() -> bool {
    true
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { n_slices: 24, n_angular: 24, symmetry: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConfig {
    pub s: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_eps1")]
    pub eps1: f64,
    #[serde(default)]
    pub eps2: Option<f64>,
}

fn default_eps1() -> f64 {
    0.5
}

impl Default for NormConfig {
    fn default() -> Self {
        Self { s: 3.0, gamma: 0.0, eps1: 0.5, eps2: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Defaults to rk4 with the Lipschitz step rule.
    #[serde(default)]
    pub method: Option<Method>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub m_max: usize,
    pub j: usize,
    /// Times at which `Du_j` is evaluated.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub convention: DeltaConvention,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

fn default_samples() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SeedSpec {
    /// `A·exp(−|ξ|²/(2σ²))`.
    Gaussian {
        sigma: f64,
        amplitude: f64,
        #[serde(default = "one")]
        weight: f64,
    },
    /// `1/(a + b·ω)`.
    RayleighJeans {
        a: f64,
        b: f64,
        #[serde(default = "one")]
        weight: f64,
    },
    File {
        path: PathBuf,
        #[serde(default = "one")]
        weight: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl SeedSpec {
    pub fn weight(&self) -> f64 {
        match self {
            SeedSpec::Gaussian { weight, .. } | SeedSpec::RayleighJeans { weight, .. } | SeedSpec::File { weight, .. } => {
                *weight
            }
        }
    }

    /// Samples the seed; relative file paths resolve against `base`.
    pub fn build(&self, spec: GridSpec, rel: &DispersionRelation, base: &Path) -> Result<GridField> {
        match self {
            SeedSpec::Gaussian { sigma, amplitude, .. } => Ok(GridField::gaussian(spec, *sigma, *amplitude)),
            SeedSpec::RayleighJeans { a, b, .. } => Ok(GridField::rayleigh_jeans(spec, rel, *a, *b)),
            SeedSpec::File { path, .. } => {
                let f = GridField::load(base.join(path))?;
                if !f.spec.same_as(&spec) {
                    return Err(Error::GridMismatch(format!("seed file on {:?}, config grid {:?}", f.spec, spec)));
                }
                Ok(f)
            }
        }
    }
}

/// The full experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dispersion: DispersionSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub hierarchy: Option<HierarchyConfig>,
    #[serde(default)]
    pub seeds: Vec<SeedSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Pass threshold for the collision detailed-balance residual.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.01
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every downstream constraint before any computation.
    pub fn validate(&self) -> Result<()> {
        DispersionRelation::new(self.dispersion.kind, self.dispersion.params)?;
        GridSpec::new(self.grid.n, self.grid.k)?;
        self.manifold_config().validate()?;
        let n = &self.norm;
        if !(n.s > 2.0) {
            return Err(Error::ParameterOutOfRange(format!("need s > 2, got {}", n.s)));
        }
        if !(n.eps1 > 0.0 && n.eps1 < 1.0) {
            return Err(Error::ParameterOutOfRange(format!("need 0 < ε₁ < 1, got {}", n.eps1)));
        }
        if let Some(e2) = n.eps2 {
            if !(e2 > 0.0 && e2 < 1.0) {
                return Err(Error::ParameterOutOfRange(format!("need 0 < ε₂ < 1, got {e2}")));
            }
        }
        if let Some(t) = &self.time {
            if !(t.t_end > 0.0 && t.t_end.is_finite()) {
                return Err(Error::ParameterOutOfRange(format!("t_end must be positive, got {}", t.t_end)));
            }
            if let Some(Method::Rk4 { dt }) = t.method {
                if !(dt > 0.0) {
                    return Err(Error::ParameterOutOfRange(format!("dt must be positive, got {dt}")));
                }
            }
        }
        if let Some(h) = &self.hierarchy {
            if h.m_max == 0 {
                return Err(Error::ParameterOutOfRange("M_max must be at least 1".into()));
            }
            if h.times.iter().any(|t| !t.is_finite()) {
                return Err(Error::ParameterOutOfRange("hierarchy times must be finite".into()));
            }
        }
        for s in &self.seeds {
            if !(s.weight() > 0.0) {
                return Err(Error::UnnormalizedWeights { sum: self.seeds.iter().map(SeedSpec::weight).sum() });
            }
            if let SeedSpec::Gaussian { sigma, .. } = s {
                if !(*sigma > 0.0) {
                    return Err(Error::ParameterOutOfRange(format!("Gaussian σ must be positive, got {sigma}")));
                }
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.k)
    }

    pub fn manifold_config(&self) -> ManifoldConfig {
        ManifoldConfig {
            n_slices: self.quadrature.n_slices,
            n_angular: self.quadrature.n_angular,
            ..ManifoldConfig::default()
        }
    }

    pub fn quad_config(&self) -> QuadConfig {
        let symmetry = if self.quadrature.symmetry { Symmetry::Auto } else { Symmetry::Off };
        QuadConfig::new(self.quadrature.n_slices, self.quadrature.n_angular).with_symmetry(symmetry)
    }

    pub fn certify_radius(&self) -> f64 {
        self.dispersion.certify_radius.unwrap_or(4.0 * 3f64.sqrt() * self.grid.k)
    }

    pub fn relation(&self) -> Result<DispersionRelation> {
        DispersionRelation::new(self.dispersion.kind, self.dispersion.params)
    }

    /// The relation with certified constants, or the failing report.
    pub fn certified_relation(&self) -> Result<(DispersionRelation, AssumptionReport)> {
        self.relation()?.certify(self.certify_radius(), self.dispersion.certify_samples)
    }
}
