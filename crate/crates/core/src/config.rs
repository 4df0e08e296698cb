//! Pipeline configuration: one JSON document, paths relative to the document.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::annotation::LayerManifest;
use crate::balance::BalanceConfig;
use crate::error::{Error, Result};
use crate::json::Provenance;
use crate::projection::{Projection, ProjectionSpec};
use crate::question::{QuestionConfig, TemplateBank};
use crate::raster::{
    CachedElevation, ConstantElevation, ElevationProvider, GeolocationGrid, GridElevation, HttpElevation, Modality,
    RasterRef,
};
use crate::sar::{DeburstConfig, StatsConfig};

/// Full-scale answer caps for the department and region sub-types.
pub const FULL_DEPARTMENT_CAP: usize = 2473;
pub const FULL_REGION_CAP: usize = 16274;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileInput {
    pub path: PathBuf,
    pub department: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarInput {
    /// Raw raster with `VV` and `VH` amplitude bands.
    pub raster: PathBuf,
    pub grid: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ElevationConfig {
    Constant {
        value: f64,
    },
    Grid {
        path: PathBuf,
    },
    Http {
        base_url: String,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
        /// Persistent lookup cache.
        #[serde(default)]
        cache: Option<PathBuf>,
    },
}

fn default_timeout() -> f64 {
    10.0
}

impl Default for ElevationConfig {
    fn default() -> Self {
        ElevationConfig::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SarConfig {
    pub deburst: DeburstConfig,
    pub stats: StatsConfig,
    /// Amplitude floor before the dB conversion; defaults to the smallest positive stored value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Separate clip statistics for each department instead of one global set.
    pub per_department: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub profile: Profile,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub projection: ProjectionSpec,
    pub manifest: PathBuf,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    pub tiles: Vec<TileInput>,
    /// Department name -> region name.
    pub departments: BTreeMap<String, String>,
    #[serde(default)]
    pub ms_scenes: Vec<PathBuf>,
    #[serde(default)]
    pub sar_scenes: Vec<SarInput>,
    #[serde(default)]
    pub elevation: ElevationConfig,
    #[serde(default = "default_l_ms")]
    pub l_ms: usize,
    #[serde(default = "default_l_sar")]
    pub l_sar: usize,
    #[serde(default = "default_cloud")]
    pub max_cloud: f64,
    #[serde(default)]
    pub questions: QuestionConfig,
    #[serde(default)]
    pub balance: BalanceConfig,
    #[serde(default)]
    pub sar: SarConfig,
    #[serde(default = "default_ratios")]
    pub split_ratios: [f64; 3],
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_l_ms() -> usize {
    100
}
fn default_l_sar() -> usize {
    200
}
fn default_cloud() -> f64 {
    0.03
}
fn default_ratios() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}
fn default_vocab() -> usize {
    1000
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::from_str_in(&text, base)
    }

    /// Parses a config document; the profile fills in caps the document leaves out.
    pub fn from_str_in(text: &str, base_dir: &Path) -> Result<Self> {
        let mut raw: Value = serde_json::from_str(text).map_err(|e| Error::json("config", e))?;
        apply_profile(&mut raw)?;
        let mut cfg: PipelineConfig = serde_json::from_value(raw).map_err(|e| Error::json("config", e))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// sha256 of the canonical config document without its output directory, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self).map_err(|e| Error::json("config", e))?;
        v.as_object_mut().expect("config is an object").remove("output_dir");
        let text = crate::json::to_canonical_string(&v, false)?;
        Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn provenance(&self) -> Result<Provenance> {
        Ok(Provenance { config_hash: self.hash()?, seed: self.seed })
    }

    pub fn region_of(&self, department: &str) -> Result<&str> {
        self.departments
            .get(department)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("department '{department}' has no region")))
    }

    pub fn n_regions(&self) -> usize {
        self.departments.values().collect::<BTreeSet<_>>().len()
    }

    /// Parameter ranges only; `validate` also opens every input.
    pub fn check_parameters(&self) -> Result<()> {
        if self.l_ms == 0 || self.l_sar == 0 {
            return Err(Error::Config("context window sizes must be positive".into()));
        }
        if !(self.max_cloud > 0.0 && self.max_cloud <= 1.0) {
            return Err(Error::Config(format!("cloud threshold {} outside (0, 1]", self.max_cloud)));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocabulary size must be at least 1".into()));
        }
        crate::dataset::split_sizes(0, self.split_ratios)?;
        self.questions.validate()?;
        self.balance.validate()?;
        if !(self.sar.deburst.black_factor > 0.0) || !(self.sar.deburst.dup_tolerance >= 0.0) {
            return Err(Error::Config("deburst factor must be positive and tolerance non-negative".into()));
        }
        let (p_lo, p_hi) = self.sar.stats.percentiles;
        if !(0.0 <= p_lo && p_lo < p_hi && p_hi <= 1.0) {
            return Err(Error::Config(format!("bad SAR percentile pair ({p_lo}, {p_hi})")));
        }
        if let Some(eps) = self.sar.epsilon {
            if !(eps > 0.0) {
                return Err(Error::Config("SAR epsilon must be positive".into()));
            }
        }
        if self.tiles.is_empty() {
            return Err(Error::Config("no VHR tiles configured".into()));
        }
        for t in &self.tiles {
            if !self.departments.contains_key(&t.department) {
                return Err(Error::Config(format!("tile {} names unknown department '{}'", t.path.display(), t.department)));
            }
        }
        Projection::from_spec(&self.projection)?;
        Ok(())
    }

    /// Checks parameters and that every referenced input exists and parses.
    pub fn validate(&self) -> Result<()> {
        self.check_parameters()?;
        let must_exist = |p: &Path| -> Result<PathBuf> {
            let r = self.resolve(p);
            if r.exists() {
                Ok(r)
            } else {
                Err(Error::Validation(format!("input {} does not exist", r.display())))
            }
        };
        // Layer paths come back already resolved against the manifest directory.
        for layer in LayerManifest::from_file(&must_exist(&self.manifest)?)?.layers {
            if !layer.path.exists() {
                return Err(Error::Validation(format!("input {} does not exist", layer.path.display())));
            }
        }
        if let Some(t) = &self.templates {
            TemplateBank::from_file(&must_exist(t)?)?;
        }
        let mut ids = BTreeSet::new();
        for t in &self.tiles {
            let tile = RasterRef::open(&must_exist(&t.path)?, Modality::Vhr)?;
            if !ids.insert(tile.id.clone()) {
                return Err(Error::Validation(format!("duplicate tile id '{}'", tile.id)));
            }
        }
        for s in &self.ms_scenes {
            RasterRef::open(&must_exist(s)?, Modality::Ms)?;
        }
        for s in &self.sar_scenes {
            let r = RasterRef::open(&must_exist(&s.raster)?, Modality::Sar)?;
            for band in ["VV", "VH"] {
                if !r.header.band_names.iter().any(|b| b.eq_ignore_ascii_case(band)) {
                    return Err(Error::Validation(format!("SAR scene {} lacks band {band}", r.id)));
                }
            }
            GeolocationGrid::open(&must_exist(&s.grid)?)?;
        }
        if let ElevationConfig::Grid { path } = &self.elevation {
            GridElevation::open(&must_exist(path)?)?;
        }
        Ok(())
    }

    pub fn elevation_provider(&self) -> Result<Box<dyn ElevationProvider>> {
        Ok(match &self.elevation {
            ElevationConfig::Constant { value } => Box::new(ConstantElevation(*value)),
            ElevationConfig::Grid { path } => Box::new(CachedElevation::new(GridElevation::open(&self.resolve(path))?)),
            ElevationConfig::Http { base_url, timeout_s, cache } => {
                let http = HttpElevation::new(base_url, Duration::from_secs_f64(*timeout_s));
                match cache {
                    Some(p) => Box::new(CachedElevation::persistent(http, &self.resolve(p))?),
                    None => Box::new(CachedElevation::new(http)),
                }
            }
        })
    }
}

fn apply_profile(raw: &mut Value) -> Result<()> {
    let obj = raw.as_object_mut().ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    let full = obj.get("profile").and_then(Value::as_str) == Some("full");
    if !full {
        return Ok(());
    }
    let balance = obj.entry("balance").or_insert_with(|| json!({}));
    let balance = balance.as_object_mut().ok_or_else(|| Error::Config("balance must be an object".into()))?;
    let caps = balance.entry("special_caps").or_insert_with(|| json!({}));
    let caps = caps.as_object_mut().ok_or_else(|| Error::Config("special_caps must be an object".into()))?;
    caps.entry("department").or_insert_with(|| json!({ "default": FULL_DEPARTMENT_CAP }));
    caps.entry("region").or_insert_with(|| json!({ "default": FULL_REGION_CAP }));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::Subtype;

    const MINIMAL: &str = r#"{"seed": 3, "manifest": "m.json", "tiles": [{"path": "t.json", "department": "Ain"}],
        "departments": {"Ain": "Auvergne-Rhône-Alpes"}}"#;

    #[test]
    fn defaults() {
        let c = PipelineConfig::from_str_in(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!((c.l_ms, c.l_sar, c.max_cloud, c.vocab_size), (100, 200, 0.03, 1000));
        assert_eq!(c.split_ratios, [0.6, 0.2, 0.2]);
        assert_eq!(c.profile, Profile::Desk);
        assert!(c.balance.special_caps.is_empty());
        assert_eq!(c.resolve(Path::new("x")), PathBuf::from("/base/x"));
        c.check_parameters().unwrap();
    }

    #[test]
    fn full_profile_caps() {
        let text = MINIMAL.replacen('{', r#"{"profile": "full", "#, 1);
        let c = PipelineConfig::from_str_in(&text, Path::new(".")).unwrap();
        assert_eq!(c.balance.special_caps[&Subtype::Department].cap("ain"), Some(FULL_DEPARTMENT_CAP));
        assert_eq!(c.balance.special_caps[&Subtype::Region].cap("x"), Some(FULL_REGION_CAP));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = PipelineConfig::from_str_in(MINIMAL, Path::new(".")).unwrap();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 4;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |patch: &str| {
            let text = MINIMAL.replacen('{', &format!("{{{patch}, "), 1);
            PipelineConfig::from_str_in(&text, Path::new(".")).and_then(|c| c.check_parameters())
        };
        assert!(bad(r#""max_cloud": 0"#).is_err());
        assert!(bad(r#""split_ratios": [0.5, 0.5, 0.5]"#).is_err());
        assert!(bad(r#""vocab_size": 0"#).is_err());
        assert!(bad(r#""unknown": 1"#).is_err());
        let mut c = PipelineConfig::from_str_in(MINIMAL, Path::new(".")).unwrap();
        c.departments.clear();
        assert!(c.check_parameters().is_err());
    }
}
