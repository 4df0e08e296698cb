//! Template question/answer generation over the annotation layers visible in a patch.

mod answer;
mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use answer::{
    answer_comparison, answer_count, answer_cover_percent, answer_distance, answer_extreme_class,
    answer_flood_level, answer_flood_types, answer_location, answer_mountain, answer_presence, answer_relative,
    answer_urban, canonical_text, nearest, referent, Extreme, PatchObject, PatchView, OUTSIDE_URBAN_UNIT,
};
pub use template::{slot_names, TemplateBank};

use crate::annotation::{AnnotationStore, ClassSpec, LayerManifest, SourceKind};
use crate::error::{Error, Result};
use crate::geo::{Extent, GeometryKind, GridCell, OctagonSector};
use crate::json::round6;
use crate::raster::PATCH_PIXELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Presence,
    Quantity,
    Location,
    Classification,
    Relational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subtype {
    Presence,
    MountainPresence,
    FloodPresence,
    Count,
    Density,
    Area,
    Percentage,
    AbsoluteLocation,
    Water,
    Vegetation,
    MountainName,
    FloodLevel,
    FloodType,
    LandCover,
    Urban,
    Department,
    Region,
    Distance,
    Comparison,
    RelativeLocation,
    Nearest,
}

impl Subtype {
    pub const ALL: [Subtype; 21] = [
        Subtype::Presence,
        Subtype::MountainPresence,
        Subtype::FloodPresence,
        Subtype::Count,
        Subtype::Density,
        Subtype::Area,
        Subtype::Percentage,
        Subtype::AbsoluteLocation,
        Subtype::Water,
        Subtype::Vegetation,
        Subtype::MountainName,
        Subtype::FloodLevel,
        Subtype::FloodType,
        Subtype::LandCover,
        Subtype::Urban,
        Subtype::Department,
        Subtype::Region,
        Subtype::Distance,
        Subtype::Comparison,
        Subtype::RelativeLocation,
        Subtype::Nearest,
    ];

    pub fn category(self) -> Category {
        use Subtype::*;
        match self {
            Presence | MountainPresence | FloodPresence => Category::Presence,
            Count | Density | Area | Percentage => Category::Quantity,
            AbsoluteLocation => Category::Location,
            Water | Vegetation | MountainName | FloodLevel | FloodType | LandCover | Urban | Department | Region => {
                Category::Classification
            }
            Distance | Comparison | RelativeLocation | Nearest => Category::Relational,
        }
    }

    pub fn name(self) -> &'static str {
        use Subtype::*;
        match self {
            Presence => "presence",
            MountainPresence => "mountain-presence",
            FloodPresence => "flood-presence",
            Count => "count",
            Density => "density",
            Area => "area",
            Percentage => "percentage",
            AbsoluteLocation => "absolute-location",
            Water => "water",
            Vegetation => "vegetation",
            MountainName => "mountain-name",
            FloodLevel => "flood-level",
            FloodType => "flood-type",
            LandCover => "land-cover",
            Urban => "urban",
            Department => "department",
            Region => "region",
            Distance => "distance",
            Comparison => "comparison",
            RelativeLocation => "relative-location",
            Nearest => "nearest",
        }
    }

    /// Sub-types whose answer is a free number.
    pub fn is_numeric(self) -> bool {
        matches!(self, Subtype::Count | Subtype::Density | Subtype::Area | Subtype::Percentage | Subtype::Distance)
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subtype::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown question sub-type '{s}'")))
    }
}

/// Answer of a question, already quantized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum AnswerValue {
    YesNo(bool),
    Count(u64),
    /// Square meters.
    Area(f64),
    Percentage(f64),
    /// Meters.
    Distance(f64),
    Cell(GridCell),
    Sector(OctagonSector),
    Label(String),
    Name(String),
    FloodLevel(String),
    FloodTypes(Vec<String>),
}

impl AnswerValue {
    /// Classification label: lowercase, numbers without trailing zeros.
    pub fn canonical(&self) -> String {
        match self {
            AnswerValue::YesNo(true) => "yes".into(),
            AnswerValue::YesNo(false) => "no".into(),
            AnswerValue::Count(n) => n.to_string(),
            AnswerValue::Area(v) | AnswerValue::Percentage(v) | AnswerValue::Distance(v) => format_number(*v),
            AnswerValue::Cell(c) => c.label().into(),
            AnswerValue::Sector(s) => s.label().into(),
            AnswerValue::Label(s) | AnswerValue::Name(s) | AnswerValue::FloodLevel(s) => canonical_text(s),
            AnswerValue::FloodTypes(types) => types.join(", "),
        }
    }

    pub fn numeric(&self) -> Option<f64> {
        match self {
            AnswerValue::Count(n) => Some(*n as f64),
            AnswerValue::Area(v) | AnswerValue::Percentage(v) | AnswerValue::Distance(v) => Some(*v),
            _ => None,
        }
    }
}

/// Shortest decimal rendering of an already quantized number (at most 6 decimals).
pub fn format_number(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Rounds to a multiple of `step`.
pub fn quantize(v: f64, step: f64) -> f64 {
    let inv = 1.0 / step;
    let q = (v * inv).round() / inv;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Quantization {
    pub percentage: f64,
    pub density: f64,
    pub area: f64,
    pub distance: f64,
}

impl Default for Quantization {
    fn default() -> Self {
        Self { percentage: 0.1, density: 0.1, area: 1.0, distance: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuestionConfig {
    /// Upper bound on candidates per sub-type and patch.
    pub per_subtype: usize,
    /// Polygon pieces smaller than this (m²) are ignored.
    pub min_area: f64,
    pub quantization: Quantization,
}

impl Default for QuestionConfig {
    fn default() -> Self {
        Self { per_subtype: 10, min_area: 0.04, quantization: Quantization::default() }
    }
}

impl QuestionConfig {
    pub fn validate(&self) -> Result<()> {
        let q = &self.quantization;
        for (name, step) in [("percentage", q.percentage), ("density", q.density), ("area", q.area), ("distance", q.distance)] {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::Config(format!("quantization step for {name} must be positive")));
            }
        }
        if self.per_subtype == 0 || !(self.min_area >= 0.0) {
            return Err(Error::Config("per-subtype count must be positive and min_area non-negative".into()));
        }
        Ok(())
    }
}

/// Classes, objects and positions a question refers to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Slots {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<String>,
    /// Patch pixel `(col, row)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extreme: Option<Extreme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub patch_id: String,
    pub department: String,
    pub category: Category,
    pub subtype: Subtype,
    pub slots: Slots,
    pub template: usize,
    pub text: String,
    pub answer: AnswerValue,
    pub canonical: String,
    /// Exact values behind the answer: unquantized numbers, coordinates.
    pub aux: BTreeMap<String, f64>,
    pub seed: u64,
}

/// Where a patch sits administratively.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchContext<'a> {
    pub patch_id: &'a str,
    pub extent: Extent,
    pub department: &'a str,
    pub region: &'a str,
}

/// Plural of a class name, from the taxonomy or regular English rules.
pub fn plural(spec: &ClassSpec) -> String {
    if let Some(p) = &spec.plural {
        return p.clone();
    }
    let n = &spec.name;
    let vowel_before_y = n.len() >= 2 && "aeiou".contains(&n[n.len() - 2..n.len() - 1]);
    if n.ends_with('y') && !vowel_before_y {
        format!("{}ies", &n[..n.len() - 1])
    } else if ["s", "x", "z", "ch", "sh"].iter().any(|e| n.ends_with(e)) {
        format!("{n}es")
    } else {
        format!("{n}s")
    }
}

fn with_article(word: &str) -> String {
    let first = word.chars().next().map(|c| c.to_ascii_lowercase());
    if matches!(first, Some('a' | 'e' | 'i' | 'o' | 'u')) {
        format!("an {word}")
    } else {
        format!("a {word}")
    }
}

fn fmt_pos((c, r): (u32, u32)) -> String {
    format!("({c}, {r})")
}

/// One question before text rendering.
struct Draft {
    slots: Slots,
    text_slots: Vec<(&'static str, String)>,
    answer: AnswerValue,
    aux: BTreeMap<String, f64>,
}

impl Draft {
    fn new(answer: AnswerValue) -> Self {
        Self { slots: Slots::default(), text_slots: Vec::new(), answer, aux: BTreeMap::new() }
    }

    fn slot(mut self, name: &'static str, value: String) -> Self {
        self.text_slots.push((name, value));
        self
    }

    fn aux(mut self, name: &str, v: f64) -> Self {
        self.aux.insert(name.to_string(), round6(v));
        self
    }
}

struct Generator<'v, 'a> {
    view: &'v PatchView<'a>,
    manifest: &'a LayerManifest,
    ctx: &'v PatchContext<'v>,
    cfg: &'v QuestionConfig,
}

impl<'v, 'a> Generator<'v, 'a> {
    fn taxonomy(&self, kind: SourceKind) -> &'a [ClassSpec] {
        self.manifest.layer_of_kind(kind).map_or(&[], |l| l.classes.as_slice())
    }

    fn spec(&self, kind: SourceKind, class: &str) -> &'a ClassSpec {
        self.taxonomy(kind).iter().find(|c| c.name == class).expect("class from taxonomy")
    }

    fn has_layer(&self, kind: SourceKind) -> bool {
        self.manifest.layer_of_kind(kind).is_some()
    }

    fn class_slots(&self, kind: SourceKind, class: &str) -> Vec<(&'static str, String)> {
        vec![("class", class.to_string()), ("classes", plural(self.spec(kind, class)))]
    }

    /// "the <class>" or "the largest/longest <class>".
    fn referent_phrase(&self, obj: &PatchObject, qualified: bool) -> String {
        let class = &obj.object.class;
        match (qualified, obj.kind()) {
            (false, _) => format!("the {class}"),
            (true, GeometryKind::Line) => format!("the longest {class}"),
            (true, _) => format!("the largest {class}"),
        }
    }

    /// Topographic classes that designate exactly one object in the patch.
    fn referable(&self) -> Vec<&'a str> {
        self.taxonomy(SourceKind::Topo)
            .iter()
            .map(|c| c.name.as_str())
            .filter(|c| referent(self.view, SourceKind::Topo, c).is_some())
            .collect()
    }

    fn random_pos(&self, rng: &mut impl Rng) -> (u32, u32) {
        let n = PATCH_PIXELS as u32;
        (rng.gen_range(0..n), rng.gen_range(0..n))
    }

    fn drafts(&self, subtype: Subtype, rng: &mut impl Rng) -> Result<Vec<Draft>> {
        let k = self.cfg.per_subtype;
        let q = &self.cfg.quantization;
        let view = self.view;
        let topo = SourceKind::Topo;
        let sample = |rng: &mut dyn rand::RngCore, items: Vec<&'a str>| -> Vec<&'a str> {
            let mut chosen: Vec<&str> = items.choose_multiple(rng, k.min(items.len())).copied().collect();
            chosen.shuffle(rng);
            chosen
        };
        let names = |kind: SourceKind, polygons_only: bool| -> Vec<&'a str> {
            self.taxonomy(kind)
                .iter()
                .filter(|c| !polygons_only || c.geometry == GeometryKind::Polygon)
                .map(|c| c.name.as_str())
                .collect()
        };
        let mut out = Vec::new();
        match subtype {
            Subtype::Presence => {
                for c in sample(rng, names(topo, false)) {
                    let yes = answer_presence(view, topo, Some(c))?;
                    let mut d = Draft::new(AnswerValue::YesNo(yes)).slot("a_class", with_article(c));
                    d.text_slots.extend(self.class_slots(topo, c));
                    d.slots.classes = vec![c.to_string()];
                    out.push(d);
                }
            }
            Subtype::MountainPresence | Subtype::FloodPresence => {
                let kind = if subtype == Subtype::MountainPresence { SourceKind::Mountain } else { SourceKind::Flood };
                if self.has_layer(kind) {
                    out.push(Draft::new(AnswerValue::YesNo(answer_presence(view, kind, None)?)));
                }
            }
            Subtype::Count => {
                for c in sample(rng, names(topo, false)) {
                    let n = answer_count(view, topo, c)?;
                    let mut d = Draft::new(AnswerValue::Count(n as u64));
                    d.text_slots = self.class_slots(topo, c);
                    d.slots.classes = vec![c.to_string()];
                    out.push(d);
                }
            }
            Subtype::Density | Subtype::Percentage => {
                let (kind, step) = if subtype == Subtype::Density {
                    (topo, q.density)
                } else {
                    (SourceKind::Landcover, q.percentage)
                };
                for c in sample(rng, names(kind, true)) {
                    let raw = answer_cover_percent(view, kind, c)?;
                    let mut d = Draft::new(AnswerValue::Percentage(quantize(raw, step))).aux("value", raw);
                    d.text_slots = self.class_slots(kind, c);
                    d.slots.classes = vec![c.to_string()];
                    out.push(d);
                }
            }
            Subtype::Area | Subtype::AbsoluteLocation => {
                let pool: Vec<&str> = self
                    .referable()
                    .into_iter()
                    .filter(|c| subtype == Subtype::AbsoluteLocation || self.spec(topo, c).geometry == GeometryKind::Polygon)
                    .collect();
                for c in sample(rng, pool) {
                    let (obj, qualified) = referent(view, topo, c).expect("referable class");
                    let mut d = if subtype == Subtype::Area {
                        Draft::new(AnswerValue::Area(quantize(obj.measure, q.area))).aux("value", obj.measure)
                    } else {
                        let (col, row) = view.world_to_px(&obj.centroid);
                        Draft::new(AnswerValue::Cell(answer_location(view, &obj.centroid)?))
                            .aux("x", obj.centroid.x)
                            .aux("y", obj.centroid.y)
                            .aux("col", col)
                            .aux("row", row)
                    };
                    d.text_slots = self.class_slots(topo, c);
                    d.text_slots.push(("referent", self.referent_phrase(obj, qualified)));
                    d.slots.classes = vec![c.to_string()];
                    d.slots.objects = vec![obj.object.id.clone()];
                    out.push(d);
                }
            }
            Subtype::Water | Subtype::Vegetation | Subtype::LandCover => {
                let (kind, members): (SourceKind, Vec<&str>) = match subtype {
                    Subtype::LandCover => (SourceKind::Landcover, names(SourceKind::Landcover, true)),
                    _ => {
                        let cat = if subtype == Subtype::Water { "water" } else { "vegetation" };
                        let members = self
                            .manifest
                            .layer_of_kind(topo)
                            .and_then(|l| l.categories.get(cat))
                            .map(|m| {
                                m.iter()
                                    .map(String::as_str)
                                    .filter(|c| self.spec(topo, c).geometry == GeometryKind::Polygon)
                                    .collect()
                            })
                            .unwrap_or_default();
                        (topo, members)
                    }
                };
                let mut extremes = vec![Extreme::Largest, Extreme::Smallest];
                extremes.shuffle(rng);
                for extreme in extremes.into_iter().take(k) {
                    if let Some(c) = answer_extreme_class(view, kind, members.iter().copied(), extreme) {
                        let mut d = Draft::new(AnswerValue::Label(canonical_text(c))).slot("extreme", extreme.word().into());
                        d.slots.extreme = Some(extreme);
                        out.push(d);
                    }
                }
            }
            Subtype::MountainName => {
                if let Some(m) = answer_mountain(view) {
                    let name = m.object.attr("name").unwrap_or_default();
                    let mut d = Draft::new(AnswerValue::Name(canonical_text(name)));
                    d.slots.objects = vec![m.object.id.clone()];
                    out.push(d);
                }
            }
            Subtype::FloodLevel => {
                if let Some(level) = answer_flood_level(view) {
                    out.push(Draft::new(AnswerValue::FloodLevel(level.to_string())));
                }
            }
            Subtype::FloodType => {
                let types = answer_flood_types(view);
                if !types.is_empty() {
                    out.push(Draft::new(AnswerValue::FloodTypes(types)));
                }
            }
            Subtype::Urban => {
                if self.has_layer(SourceKind::Urban) {
                    let label = answer_urban(view).map_or(OUTSIDE_URBAN_UNIT.to_string(), canonical_text);
                    out.push(Draft::new(AnswerValue::Label(label)));
                }
            }
            Subtype::Department => out.push(Draft::new(AnswerValue::Name(canonical_text(self.ctx.department)))),
            Subtype::Region => out.push(Draft::new(AnswerValue::Name(canonical_text(self.ctx.region)))),
            Subtype::Distance => {
                let refs = self.referable();
                let mut pairs: Vec<(Option<&str>, &str)> = Vec::new();
                for (i, a) in refs.iter().enumerate() {
                    for b in &refs[i + 1..] {
                        pairs.push((Some(a), b));
                    }
                }
                let mut chosen: Vec<_> = pairs.choose_multiple(rng, k.min(pairs.len())).copied().collect();
                chosen.shuffle(rng);
                let spare = k - chosen.len();
                let singles: Vec<&str> = refs.choose_multiple(rng, spare.min(refs.len())).copied().collect();
                chosen.extend(singles.into_iter().map(|b| (None, b)));
                for (a, b) in chosen {
                    let (ob, qb) = referent(view, topo, b).expect("referable class");
                    let mut slots = Slots::default();
                    let (first_phrase, first_point) = match a {
                        Some(a) => {
                            let (oa, qa) = referent(view, topo, a).expect("referable class");
                            slots.classes.push(a.to_string());
                            slots.objects.push(oa.object.id.clone());
                            (self.referent_phrase(oa, qa), oa.centroid)
                        }
                        None => {
                            let pos = self.random_pos(rng);
                            slots.pos = Some(pos);
                            (fmt_pos(pos), view.px_to_world(pos.0 as f64, pos.1 as f64))
                        }
                    };
                    slots.classes.push(b.to_string());
                    slots.objects.push(ob.object.id.clone());
                    let raw = answer_distance(&first_point, &ob.centroid);
                    let mut d = Draft::new(AnswerValue::Distance(quantize(raw, q.distance)))
                        .slot("first", first_phrase)
                        .slot("second", self.referent_phrase(ob, qb))
                        .aux("value", raw);
                    d.slots = slots;
                    out.push(d);
                }
            }
            Subtype::Comparison => {
                let all = names(topo, false);
                let mut pairs = Vec::new();
                for a in &all {
                    for b in &all {
                        if a != b {
                            pairs.push((*a, *b));
                        }
                    }
                }
                let mut chosen: Vec<_> = pairs.choose_multiple(rng, k.min(pairs.len())).copied().collect();
                chosen.shuffle(rng);
                for (a, b) in chosen {
                    let yes = answer_comparison(view, topo, a, b)?;
                    let mut d = Draft::new(AnswerValue::YesNo(yes))
                        .slot("classes1", plural(self.spec(topo, a)))
                        .slot("classes2", plural(self.spec(topo, b)));
                    d.slots.classes = vec![a.to_string(), b.to_string()];
                    out.push(d);
                }
            }
            Subtype::RelativeLocation => {
                let refs = self.referable();
                let mut pairs = Vec::new();
                for a in &refs {
                    for b in &refs {
                        if a == b {
                            continue;
                        }
                        let (oa, _) = referent(view, topo, a).expect("referable class");
                        let (ob, _) = referent(view, topo, b).expect("referable class");
                        if oa.centroid != ob.centroid {
                            pairs.push((*a, *b));
                        }
                    }
                }
                let mut chosen: Vec<_> = pairs.choose_multiple(rng, k.min(pairs.len())).copied().collect();
                chosen.shuffle(rng);
                for (reference, target) in chosen {
                    let (or, qr) = referent(view, topo, reference).expect("referable class");
                    let (ot, qt) = referent(view, topo, target).expect("referable class");
                    let sector = answer_relative(&or.centroid, &ot.centroid)?;
                    let mut d = Draft::new(AnswerValue::Sector(sector))
                        .slot("target", self.referent_phrase(ot, qt))
                        .slot("reference", self.referent_phrase(or, qr))
                        .aux("dx", ot.centroid.x - or.centroid.x)
                        .aux("dy", ot.centroid.y - or.centroid.y);
                    d.slots.classes = vec![reference.to_string(), target.to_string()];
                    d.slots.objects = vec![or.object.id.clone(), ot.object.id.clone()];
                    out.push(d);
                }
            }
            Subtype::Nearest => {
                let present: Vec<&str> = names(topo, false).into_iter().filter(|c| view.count(topo, c) > 0).collect();
                for c in sample(rng, present) {
                    let pos = self.random_pos(rng);
                    let p = view.px_to_world(pos.0 as f64, pos.1 as f64);
                    let obj = nearest(view, topo, c, &p).expect("present class");
                    let (col, row) = view.world_to_px(&obj.centroid);
                    let mut d = Draft::new(AnswerValue::Cell(answer_location(view, &obj.centroid)?))
                        .slot("pos", fmt_pos(pos))
                        .aux("x", obj.centroid.x)
                        .aux("y", obj.centroid.y)
                        .aux("col", col)
                        .aux("row", row);
                    d.text_slots.extend(self.class_slots(topo, c));
                    d.slots.classes = vec![c.to_string()];
                    d.slots.objects = vec![obj.object.id.clone()];
                    d.slots.pos = Some(pos);
                    out.push(d);
                }
            }
        }
        Ok(out)
    }
}

/// Question candidates of one patch: up to `cfg.per_subtype` per sub-type, deterministic in
/// (patch id, annotation content, seed).
pub fn generate_candidates(
    ctx: &PatchContext,
    store: &AnnotationStore,
    bank: &TemplateBank,
    cfg: &QuestionConfig,
    seed: u64,
) -> Result<Vec<QAPair>> {
    let view = PatchView::from_store(store, ctx.extent, cfg.min_area)?;
    generate_for_view(ctx, &view, bank, cfg, seed)
}

pub fn generate_for_view(
    ctx: &PatchContext,
    view: &PatchView,
    bank: &TemplateBank,
    cfg: &QuestionConfig,
    seed: u64,
) -> Result<Vec<QAPair>> {
    let generator = Generator { view, manifest: view.manifest, ctx, cfg };
    let mut out = Vec::new();
    for subtype in Subtype::ALL {
        let stream_seed = crate::seed::derive_u64(seed, &[ctx.patch_id, subtype.name()]);
        let mut rng = crate::seed::stream(seed, &[ctx.patch_id, subtype.name()]);
        let drafts = generator.drafts(subtype, &mut rng)?;
        for (i, d) in drafts.into_iter().enumerate() {
            let n_templates = bank.len(subtype);
            if n_templates == 0 {
                return Err(Error::Config(format!("no template for sub-type '{subtype}'")));
            }
            let template = rng.gen_range(0..n_templates);
            let text = bank.render(subtype, template, &d.text_slots)?;
            out.push(QAPair {
                id: format!("{}-{}-{i:02}", ctx.patch_id, subtype.name()),
                patch_id: ctx.patch_id.to_string(),
                department: ctx.department.to_string(),
                category: subtype.category(),
                subtype,
                slots: d.slots,
                template,
                text,
                canonical: d.answer.canonical(),
                answer: d.answer,
                aux: d.aux,
                seed: stream_seed,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
