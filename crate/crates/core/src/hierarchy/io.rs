use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{HierarchyComponent, HierarchyState, Provenance, TensorProductTerm};
use crate::error::{Error, Result};
use crate::grid::GridField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestTerm {
    pub weight: f64,
    /// Indices into [`Manifest::fields`].
    pub factors: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestLevel {
    pub level: usize,
    pub symmetric: bool,
    pub terms: Vec<ManifestTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ManifestProvenance {
    Factorized { seed: usize },
    Mixture { seeds: Vec<(f64, usize)> },
    General,
}

/// JSON description of a hierarchy state; factor fields are stored next to
/// it as `WKF1` files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fields: Vec<String>,
    pub levels: Vec<ManifestLevel>,
    pub provenance: ManifestProvenance,
}

#[derive(Default)]
struct FieldTable {
    index: HashMap<usize, usize>,
    fields: Vec<Arc<GridField>>,
}

impl FieldTable {
    fn id(&mut self, f: &Arc<GridField>) -> usize {
        let key = Arc::as_ptr(f) as usize;
        *self.index.entry(key).or_insert_with(|| {
            self.fields.push(f.clone());
            self.fields.len() - 1
        })
    }
}

/// Writes `manifest.json` and one `field_NNNNN.wkf` per distinct factor.
pub fn save_state(state: &HierarchyState, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut table = FieldTable::default();
    let levels = state
        .components
        .values()
        .map(|c| ManifestLevel {
            level: c.level,
            symmetric: c.symmetric,
            terms: c
                .terms
                .iter()
                .map(|t| ManifestTerm { weight: t.weight, factors: t.factors.iter().map(|f| table.id(f)).collect() })
                .collect(),
        })
        .collect();
    let provenance = match &state.provenance {
        Provenance::Factorized { seed } => ManifestProvenance::Factorized { seed: table.id(seed) },
        Provenance::Mixture { seeds } => {
            ManifestProvenance::Mixture { seeds: seeds.iter().map(|(w, f)| (*w, table.id(f))).collect() }
        }
        Provenance::General => ManifestProvenance::General,
    };
    let mut names = Vec::with_capacity(table.fields.len());
    for (i, f) in table.fields.iter().enumerate() {
        let name = format!("field_{i:05}.wkf");
        f.save(dir.join(&name))?;
        names.push(name);
    }
    let manifest = Manifest { fields: names, levels, provenance };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_state(dir: impl AsRef<Path>) -> Result<HierarchyState> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let fields: Vec<Arc<GridField>> =
        manifest.fields.iter().map(|n| GridField::load(dir.join(n)).map(Arc::new)).collect::<Result<_>>()?;
    let get = |i: usize| {
        fields.get(i).cloned().ok_or_else(|| Error::InvalidConfig(format!("manifest references missing field {i}")))
    };
    let mut components = BTreeMap::new();
    for l in &manifest.levels {
        let terms = l
            .terms
            .iter()
            .map(|t| Ok(TensorProductTerm::new(t.weight, t.factors.iter().map(|&i| get(i)).collect::<Result<_>>()?)))
            .collect::<Result<Vec<_>>>()?;
        let mut c = HierarchyComponent::new(l.level, terms)?;
        c.symmetric = l.symmetric;
        components.insert(l.level, c);
    }
    let provenance = match &manifest.provenance {
        ManifestProvenance::Factorized { seed } => Provenance::Factorized { seed: get(*seed)? },
        ManifestProvenance::Mixture { seeds } => Provenance::Mixture {
            seeds: seeds.iter().map(|&(w, i)| Ok((w, get(i)?))).collect::<Result<_>>()?,
        },
        ManifestProvenance::General => Provenance::General,
    };
    Ok(HierarchyState { components, provenance })
}
