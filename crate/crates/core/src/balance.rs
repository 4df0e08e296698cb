//! Greedy selection of a balanced subset of question candidates under per-answer, per-patch,
//! per-type and absolute caps.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationStore, SourceKind, FLOOD_TYPES};
use crate::error::{Error, Result};
use crate::geo::GeometryKind;
use crate::question::{QAPair, Subtype};

/// Absolute dataset-level caps for the answers of one sub-type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecialCap {
    /// Cap applied to every answer not listed in `answers`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default: Option<usize>,
    pub answers: BTreeMap<String, usize>,
}

impl SpecialCap {
    pub fn cap(&self, answer: &str) -> Option<usize> {
        self.answers.get(answer).copied().or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalanceConfig {
    pub per_patch_cap: usize,
    /// Answer cardinalities are clamped to this value in the fixed-answer cap.
    pub max_answer_divisor: usize,
    pub numeric_offset: f64,
    /// Base of the logarithm in the numeric cap.
    pub log_base: f64,
    pub special_caps: BTreeMap<Subtype, SpecialCap>,
    /// Multiplier on the even per-type share of the per-department budget.
    pub type_tolerance: f64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            per_patch_cap: 50,
            max_answer_divisor: 10,
            numeric_offset: 3.0,
            log_base: std::f64::consts::E,
            special_caps: BTreeMap::new(),
            type_tolerance: 1.0,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_patch_cap == 0 || self.max_answer_divisor == 0 {
            return Err(Error::Config("balance caps must be positive".into()));
        }
        if !(self.numeric_offset > 1.0) {
            return Err(Error::Config("numeric offset must exceed 1".into()));
        }
        if !(self.log_base > 1.0 && self.log_base.is_finite()) {
            return Err(Error::Config("logarithm base must exceed 1".into()));
        }
        if !(self.type_tolerance >= 1.0 && self.type_tolerance.is_finite()) {
            return Err(Error::Config("type tolerance must be at least 1".into()));
        }
        let zero = self
            .special_caps
            .values()
            .any(|s| s.default == Some(0) || s.answers.values().any(|&c| c == 0));
        if zero {
            return Err(Error::Config("special caps must be positive".into()));
        }
        Ok(())
    }
}

/// `floor(n_patches / min(n_answers, max_divisor))`, raised to 1.
pub fn target_per_answer(n_patches: usize, n_answers: usize, max_divisor: usize) -> usize {
    let d = n_answers.clamp(1, max_divisor.max(1));
    (n_patches / d).max(1)
}

/// `floor(n_patches / log_base(x + offset))`, raised to 1.
pub fn numeric_cap(x: f64, n_patches: usize, offset: f64, log_base: f64) -> usize {
    let denom = (x.max(0.0) + offset).ln() / log_base.ln();
    ((n_patches as f64 / denom).floor() as usize).max(1)
}

/// Number of possible answers for each fixed-answer sub-type.
pub fn answer_cardinalities(store: &AnnotationStore, n_departments: usize, n_regions: usize) -> BTreeMap<Subtype, usize> {
    let manifest = store.manifest();
    let polygons = |kind: SourceKind, category: Option<&str>| -> usize {
        let Some(layer) = manifest.layer_of_kind(kind) else { return 1 };
        let n = layer
            .classes
            .iter()
            .filter(|c| c.geometry == GeometryKind::Polygon)
            .filter(|c| category.map_or(true, |cat| layer.categories.get(cat).is_some_and(|m| m.contains(&c.name))))
            .count();
        n.max(1)
    };
    let mountain_names: BTreeSet<String> = store
        .objects()
        .iter()
        .filter(|o| o.source_kind == SourceKind::Mountain)
        .filter_map(|o| o.attr("name").map(crate::question::canonical_text))
        .collect();
    let urban = manifest.layer_of_kind(SourceKind::Urban).map_or(0, |l| l.classes.len()) + 1;
    let mut out = BTreeMap::new();
    for s in Subtype::ALL {
        let n = match s {
            Subtype::Presence | Subtype::MountainPresence | Subtype::FloodPresence | Subtype::Comparison => 2,
            Subtype::AbsoluteLocation | Subtype::Nearest => 9,
            Subtype::RelativeLocation => 8,
            Subtype::FloodLevel => 3,
            Subtype::FloodType => (1usize << FLOOD_TYPES.len()) - 1,
            Subtype::Water => polygons(SourceKind::Topo, Some("water")),
            Subtype::Vegetation => polygons(SourceKind::Topo, Some("vegetation")),
            Subtype::LandCover => polygons(SourceKind::Landcover, None),
            Subtype::Urban => urban,
            Subtype::MountainName => mountain_names.len().max(1),
            Subtype::Department => n_departments.max(1),
            Subtype::Region => n_regions.max(1),
            Subtype::Count | Subtype::Density | Subtype::Area | Subtype::Percentage | Subtype::Distance => continue,
        };
        out.insert(s, n);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    PatchCap,
    TypeQuota,
    SpecialCap,
    AnswerCap,
}

impl Rejection {
    pub fn name(self) -> &'static str {
        match self {
            Rejection::PatchCap => "patch-cap",
            Rejection::TypeQuota => "type-quota",
            Rejection::SpecialCap => "special-cap",
            Rejection::AnswerCap => "answer-cap",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub policy: String,
    pub candidates: usize,
    pub selected: usize,
    pub per_subtype: BTreeMap<Subtype, usize>,
    pub per_department: BTreeMap<String, usize>,
    pub per_answer: BTreeMap<Subtype, BTreeMap<String, usize>>,
    pub rejections: BTreeMap<Rejection, usize>,
    pub warnings: Vec<String>,
}

/// Accepted counts; every counter stays within its cap.
#[derive(Debug, Default)]
pub struct SelectionState {
    pub per_answer: HashMap<(String, Subtype, String), usize>,
    pub per_patch: HashMap<String, usize>,
    pub per_type: HashMap<(String, Subtype), usize>,
    pub special: HashMap<(Subtype, String), usize>,
}

/// Per-type budget of a department: an even share of its patch budget.
pub fn type_quota(n_patches: usize, cfg: &BalanceConfig) -> usize {
    let share = cfg.type_tolerance * (n_patches * cfg.per_patch_cap) as f64 / Subtype::ALL.len() as f64;
    (share.floor() as usize).max(1)
}

/// Cap on one (department, sub-type, answer) key.
pub fn answer_cap(
    q: &QAPair,
    n_patches: usize,
    cardinality: &BTreeMap<Subtype, usize>,
    cfg: &BalanceConfig,
) -> Result<usize> {
    if q.subtype.is_numeric() {
        let x = q
            .answer
            .numeric()
            .ok_or_else(|| Error::Validation(format!("{}: numeric sub-type with non-numeric answer", q.id)))?;
        Ok(numeric_cap(x, n_patches, cfg.numeric_offset, cfg.log_base))
    } else {
        let n = cardinality
            .get(&q.subtype)
            .ok_or_else(|| Error::Validation(format!("no answer cardinality for '{}'", q.subtype)))?;
        Ok(target_per_answer(n_patches, *n, cfg.max_answer_divisor))
    }
}

/// Greedy single pass over a seeded shuffle of patches, round-robin over sub-types inside a
/// patch with a start offset rotating from patch to patch. A candidate is accepted iff no cap
/// would be exceeded. The result is independent of the input order.
pub fn balance(
    mut candidates: Vec<QAPair>,
    patches_per_department: &BTreeMap<String, usize>,
    cardinality: &BTreeMap<Subtype, usize>,
    cfg: &BalanceConfig,
    seed: u64,
) -> Result<(Vec<QAPair>, BalanceReport)> {
    cfg.validate()?;
    for q in &candidates {
        match patches_per_department.get(&q.department) {
            Some(&n) if n > 0 => {}
            _ => {
                return Err(Error::Validation(format!(
                    "candidate {} belongs to department '{}' without patches",
                    q.id, q.department
                )))
            }
        }
    }
    candidates.par_sort_unstable_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = candidates.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Validation(format!("duplicate candidate id '{}'", w[0].id)));
    }

    let mut report = BalanceReport {
        policy: "greedy single pass; seeded patch order; rotating round-robin over sub-types; \
                 caps: per-patch, per-type quota, special, per-answer"
            .into(),
        candidates: candidates.len(),
        ..Default::default()
    };
    let present: BTreeSet<Subtype> = candidates.iter().map(|q| q.subtype).collect();
    for s in Subtype::ALL {
        if !present.contains(&s) {
            report.warnings.push(format!("no candidates for sub-type '{s}'"));
        }
    }

    // patch id -> sub-type -> candidates in id order.
    let mut by_patch: BTreeMap<String, BTreeMap<Subtype, VecDeque<QAPair>>> = BTreeMap::new();
    for q in candidates {
        by_patch.entry(q.patch_id.clone()).or_default().entry(q.subtype).or_default().push_back(q);
    }
    let mut order: Vec<String> = by_patch.keys().cloned().collect();
    order.shuffle(&mut crate::seed::stream(seed, &["balance"]));

    let mut state = SelectionState::default();
    let mut selected = Vec::new();
    let n_types = Subtype::ALL.len();
    for (i, patch) in order.iter().enumerate() {
        let mut queues = by_patch.remove(patch).expect("patch from keys");
        let rotation: Vec<Subtype> = (0..n_types).map(|k| Subtype::ALL[(i + k) % n_types]).collect();
        loop {
            let mut progressed = false;
            for s in &rotation {
                let Some(queue) = queues.get_mut(s) else { continue };
                while let Some(q) = queue.pop_front() {
                    progressed = true;
                    match try_accept(&q, &mut state, patches_per_department, cardinality, cfg)? {
                        None => {
                            selected.push(q);
                            break;
                        }
                        Some(reason) => *report.rejections.entry(reason).or_default() += 1,
                    }
                }
            }
            if !progressed {
                break;
            }
        }
    }

    selected.sort_by(|a, b| a.id.cmp(&b.id));
    for q in &selected {
        *report.per_subtype.entry(q.subtype).or_default() += 1;
        *report.per_department.entry(q.department.clone()).or_default() += 1;
        *report.per_answer.entry(q.subtype).or_default().entry(q.canonical.clone()).or_default() += 1;
    }
    report.selected = selected.len();
    Ok((selected, report))
}

fn try_accept(
    q: &QAPair,
    state: &mut SelectionState,
    patches_per_department: &BTreeMap<String, usize>,
    cardinality: &BTreeMap<Subtype, usize>,
    cfg: &BalanceConfig,
) -> Result<Option<Rejection>> {
    let n_patches = patches_per_department[&q.department];
    let patch_count = state.per_patch.get(&q.patch_id).copied().unwrap_or(0);
    if patch_count >= cfg.per_patch_cap {
        return Ok(Some(Rejection::PatchCap));
    }
    let type_key = (q.department.clone(), q.subtype);
    if state.per_type.get(&type_key).copied().unwrap_or(0) >= type_quota(n_patches, cfg) {
        return Ok(Some(Rejection::TypeQuota));
    }
    let special_key = (q.subtype, q.canonical.clone());
    if let Some(cap) = cfg.special_caps.get(&q.subtype).and_then(|s| s.cap(&q.canonical)) {
        if state.special.get(&special_key).copied().unwrap_or(0) >= cap {
            return Ok(Some(Rejection::SpecialCap));
        }
    }
    let answer_key = (q.department.clone(), q.subtype, q.canonical.clone());
    if state.per_answer.get(&answer_key).copied().unwrap_or(0) >= answer_cap(q, n_patches, cardinality, cfg)? {
        return Ok(Some(Rejection::AnswerCap));
    }
    *state.per_patch.entry(q.patch_id.clone()).or_default() += 1;
    *state.per_type.entry(type_key).or_default() += 1;
    *state.special.entry(special_key).or_default() += 1;
    *state.per_answer.entry(answer_key).or_default() += 1;
    Ok(None)
}
