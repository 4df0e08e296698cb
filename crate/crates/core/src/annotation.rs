//! Annotation layers: manifest, GeoJSON ingest, validation and the spatially indexed store.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{self, Extent, Geometry, GeometryKind, Polygon, WorldPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SourceKind {
    Topo,
    Flood,
    Urban,
    Landcover,
    Mountain,
}

pub const FLOOD_LEVELS: [&str; 3] = ["low", "medium", "high"];
pub const FLOOD_TYPES: [&str; 4] = ["River overflows", "Runoff", "Sea Flooding", "GroundWater overflows"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub geometry: GeometryKind,
    /// Plural used in rendered questions; defaults to a regular English plural.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plural: Option<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub source_kind: SourceKind,
    pub path: PathBuf,
    pub classes: Vec<ClassSpec>,
    /// Named groups of classes, e.g. `water` and `vegetation` for topographic layers.
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
}

impl LayerSpec {
    pub fn class(&self, name: &str) -> Option<&ClassSpec> {
        self.classes.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerManifest {
    pub layers: Vec<LayerSpec>,
}

impl LayerManifest {
    /// Reads a manifest; relative layer paths are resolved against the manifest directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: LayerManifest =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for layer in &mut manifest.layers {
            if layer.path.is_relative() {
                layer.path = base.join(&layer.path);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut kinds = HashSet::new();
        for layer in &self.layers {
            if !names.insert(layer.name.as_str()) {
                return Err(Error::Config(format!("duplicate layer name '{}'", layer.name)));
            }
            if !kinds.insert(layer.source_kind) {
                return Err(Error::Config(format!("more than one {:?} layer", layer.source_kind)));
            }
            if layer.classes.is_empty() {
                return Err(Error::Config(format!("layer '{}' has an empty taxonomy", layer.name)));
            }
            let mut classes = HashSet::new();
            for class in &layer.classes {
                if class.name.trim().is_empty() || !classes.insert(class.name.as_str()) {
                    return Err(Error::Config(format!("layer '{}': bad or duplicate class '{}'", layer.name, class.name)));
                }
                let needs: &[&str] = match layer.source_kind {
                    SourceKind::Flood => &["level", "type"],
                    SourceKind::Mountain => &["name"],
                    _ => &[],
                };
                for attr in needs {
                    if !class.attributes.iter().any(|a| a == attr) {
                        return Err(Error::Config(format!(
                            "layer '{}' class '{}' must require attribute '{attr}'",
                            layer.name, class.name
                        )));
                    }
                }
            }
            for (category, members) in &layer.categories {
                for m in members {
                    if !classes.contains(m.as_str()) {
                        return Err(Error::Config(format!(
                            "category '{category}' of layer '{}' names unknown class '{m}'",
                            layer.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_of_kind(&self, kind: SourceKind) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.source_kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedObject {
    /// `<layer>/<feature id>`, unique within a store.
    pub id: String,
    pub layer: String,
    pub source_kind: SourceKind,
    pub class: String,
    pub geometry: Geometry,
    pub attributes: BTreeMap<String, String>,
}

impl AnnotatedObject {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }
}

/// Query result: the object plus its geometry clipped to the query extent.
#[derive(Debug, Clone)]
pub struct QueryHit<'a> {
    pub object: &'a AnnotatedObject,
    pub clipped: Geometry,
}

/// Per-layer, per-class object counts produced by `load`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub layers: BTreeMap<String, BTreeMap<String, usize>>,
    pub total: usize,
}

type IndexEntry = GeomWithData<Rectangle<[f64; 2]>, usize>;

pub struct AnnotationStore {
    manifest: LayerManifest,
    objects: Vec<AnnotatedObject>,
    index: RTree<IndexEntry>,
}

impl std::fmt::Debug for AnnotationStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnnotationStore").field("objects", &self.objects.len()).finish()
    }
}

impl AnnotationStore {
    /// Loads every layer of the manifest from GeoJSON.
    pub fn load(manifest: &LayerManifest) -> Result<(Self, LoadReport)> {
        manifest.validate()?;
        let mut objects = Vec::new();
        for layer in &manifest.layers {
            let text = fs::read_to_string(&layer.path).map_err(|e| Error::io(&layer.path, e))?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| Error::json(layer.path.display().to_string(), e))?;
            objects.extend(parse_feature_collection(layer, &doc)?);
        }
        Self::from_objects(manifest.clone(), objects)
    }

    /// Builds a store from in-memory objects, applying the same validation as `load`.
    pub fn from_objects(manifest: LayerManifest, mut objects: Vec<AnnotatedObject>) -> Result<(Self, LoadReport)> {
        manifest.validate()?;
        let mut report = LoadReport::default();
        for layer in &manifest.layers {
            report.layers.insert(layer.name.clone(), BTreeMap::new());
        }
        let mut seen = HashSet::new();
        for obj in &objects {
            let layer = manifest
                .layer(&obj.layer)
                .ok_or_else(|| Error::Validation(format!("object '{}' references unknown layer '{}'", obj.id, obj.layer)))?;
            validate_object(layer, obj)?;
            if !seen.insert(obj.id.as_str()) {
                return Err(Error::Validation(format!("duplicate object id '{}'", obj.id)));
            }
            *report.layers.get_mut(&obj.layer).unwrap().entry(obj.class.clone()).or_default() += 1;
            report.total += 1;
        }
        objects.sort_by(|a, b| a.id.cmp(&b.id));
        let entries = objects
            .iter()
            .enumerate()
            .filter_map(|(i, o)| {
                o.geometry
                    .bounds()
                    .map(|b| GeomWithData::new(Rectangle::from_corners([b[0], b[1]], [b[2], b[3]]), i))
            })
            .collect();
        let store = Self { manifest, objects, index: RTree::bulk_load(entries) };
        Ok((store, report))
    }

    pub fn manifest(&self) -> &LayerManifest {
        &self.manifest
    }

    pub fn objects(&self) -> &[AnnotatedObject] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Objects whose geometry intersects `e`, ordered by id, with clipped geometry.
    ///
    /// Polygons must overlap the extent with positive area and lines with positive length;
    /// points count when inside the closed extent.
    pub fn query(&self, e: &Extent, layer: Option<&str>, class: Option<&str>) -> Result<Vec<QueryHit<'_>>> {
        if let Some(name) = layer {
            let spec = self
                .manifest
                .layer(name)
                .ok_or_else(|| Error::Domain(format!("unknown layer '{name}'")))?;
            if let Some(c) = class {
                if spec.class(c).is_none() {
                    return Err(Error::Domain(format!("unknown class '{c}' in layer '{name}'")));
                }
            }
        } else if let Some(c) = class {
            if !self.manifest.layers.iter().any(|l| l.class(c).is_some()) {
                return Err(Error::Domain(format!("unknown class '{c}'")));
            }
        }
        let envelope = AABB::from_corners([e.min_x, e.min_y], [e.max_x, e.max_y]);
        let mut idx: Vec<usize> = self
            .index
            .locate_in_envelope_intersecting(envelope)
            .map(|entry| entry.data)
            .collect();
        idx.sort_unstable();
        Ok(idx
            .into_iter()
            .map(|i| &self.objects[i])
            .filter(|o| layer.map_or(true, |l| o.layer == l) && class.map_or(true, |c| o.class == c))
            .filter_map(|o| {
                let clipped = geo::clip(&o.geometry, e);
                (!clipped.is_empty()).then_some(QueryHit { object: o, clipped })
            })
            .collect())
    }
}

fn validate_object(layer: &LayerSpec, obj: &AnnotatedObject) -> Result<()> {
    let class = layer.class(&obj.class).ok_or_else(|| {
        Error::Validation(format!("feature '{}': unknown class '{}' in layer '{}'", obj.id, obj.class, layer.name))
    })?;
    if obj.geometry.kind() != Some(class.geometry) {
        return Err(Error::Validation(format!(
            "feature '{}': class '{}' expects {} geometry",
            obj.id, obj.class, class.geometry
        )));
    }
    for attr in &class.attributes {
        if !obj.attributes.contains_key(attr) {
            return Err(Error::Validation(format!("feature '{}': missing required attribute '{attr}'", obj.id)));
        }
    }
    if layer.source_kind == SourceKind::Flood {
        let level = obj.attr("level").unwrap_or_default();
        if !FLOOD_LEVELS.contains(&level) {
            return Err(Error::Validation(format!("feature '{}': invalid flood level '{level}'", obj.id)));
        }
        let kind = obj.attr("type").unwrap_or_default();
        if !FLOOD_TYPES.contains(&kind) {
            return Err(Error::Validation(format!("feature '{}': invalid flood type '{kind}'", obj.id)));
        }
    }
    Ok(())
}

fn parse_feature_collection(layer: &LayerSpec, doc: &Value) -> Result<Vec<AnnotatedObject>> {
    let bad = |msg: String| Error::Validation(format!("{}: {msg}", layer.path.display()));
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(bad("not a FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing features array".into()))?;
    let mut out = Vec::with_capacity(features.len());
    let mut ids = BTreeSet::new();
    for (i, f) in features.iter().enumerate() {
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(bad(format!("feature #{i} is not a Feature")));
        }
        let props = f.get("properties").and_then(Value::as_object);
        let fid = match f.get("id").or_else(|| props.and_then(|p| p.get("id"))) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => format!("{i}"),
        };
        let id = format!("{}/{}", layer.name, fid);
        if !ids.insert(id.clone()) {
            return Err(bad(format!("duplicate feature id '{fid}'")));
        }
        let class = props
            .and_then(|p| p.get("class"))
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Validation(format!("feature '{id}': missing 'class' property")))?
            .to_string();
        let geometry = f
            .get("geometry")
            .ok_or_else(|| Error::Validation(format!("feature '{id}': missing geometry")))
            .and_then(|g| parse_geometry(g).map_err(|e| Error::Validation(format!("feature '{id}': {e}"))))?;
        let attributes = props
            .map(|p| {
                p.iter()
                    .filter(|(k, _)| k.as_str() != "class" && k.as_str() != "id")
                    .map(|(k, v)| {
                        let s = match v {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        (k.clone(), s)
                    })
                    .collect()
            })
            .unwrap_or_default();
        out.push(AnnotatedObject {
            id,
            layer: layer.name.clone(),
            source_kind: layer.source_kind,
            class,
            geometry,
            attributes,
        });
    }
    Ok(out)
}

fn position(v: &Value) -> Result<WorldPoint> {
    let arr = v.as_array().filter(|a| a.len() >= 2).ok_or_else(|| Error::InvalidGeometry("bad position".into()))?;
    match (arr[0].as_f64(), arr[1].as_f64()) {
        (Some(x), Some(y)) => Ok(WorldPoint::new(x, y)),
        _ => Err(Error::InvalidGeometry("non-numeric position".into())),
    }
}

fn positions(v: &Value) -> Result<Vec<WorldPoint>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidGeometry("expected position array".into()))?
        .iter()
        .map(position)
        .collect()
}

fn polygon(v: &Value) -> Result<Polygon> {
    let rings = v.as_array().ok_or_else(|| Error::InvalidGeometry("expected ring array".into()))?;
    let mut rings = rings.iter().map(positions);
    let exterior = rings.next().ok_or_else(|| Error::InvalidGeometry("polygon without rings".into()))??;
    let holes = rings.collect::<Result<Vec<_>>>()?;
    Polygon::new(exterior, holes)
}

/// Parses an RFC 7946 geometry object.
pub fn parse_geometry(g: &Value) -> Result<Geometry> {
    let kind = g.get("type").and_then(Value::as_str).unwrap_or_default();
    let coords = g
        .get("coordinates")
        .ok_or_else(|| Error::InvalidGeometry(format!("{kind} without coordinates")))?;
    match kind {
        "Point" => {
            let p = position(coords)?;
            Geometry::point(p.x, p.y)
        }
        "LineString" => Geometry::polyline(positions(coords)?),
        "MultiLineString" => {
            let parts = coords
                .as_array()
                .ok_or_else(|| Error::InvalidGeometry("expected line array".into()))?
                .iter()
                .map(positions)
                .collect::<Result<Vec<_>>>()?;
            Geometry::multi_polyline(parts)
        }
        "Polygon" => Ok(Geometry::Polygon(polygon(coords)?)),
        "MultiPolygon" => {
            let parts = coords
                .as_array()
                .ok_or_else(|| Error::InvalidGeometry("expected polygon array".into()))?
                .iter()
                .map(polygon)
                .collect::<Result<Vec<_>>>()?;
            Ok(Geometry::MultiPolygon(parts))
        }
        other => Err(Error::InvalidGeometry(format!("unsupported geometry type '{other}'"))),
    }
}

/// Serializes a geometry back to an RFC 7946 geometry object (closed rings).
pub fn geometry_to_geojson(g: &Geometry) -> Value {
    use serde_json::json;
    let pos = |p: &WorldPoint| json!([p.x, p.y]);
    let line = |l: &[WorldPoint]| Value::Array(l.iter().map(pos).collect());
    let ring = |r: &[WorldPoint]| {
        let mut v: Vec<Value> = r.iter().map(pos).collect();
        v.push(pos(&r[0]));
        Value::Array(v)
    };
    let poly = |p: &Polygon| {
        let mut rings = vec![ring(p.exterior())];
        rings.extend(p.holes().iter().map(|h| ring(h)));
        Value::Array(rings)
    };
    match g {
        Geometry::Empty => json!({"type": "GeometryCollection", "geometries": []}),
        Geometry::Point(p) => json!({"type": "Point", "coordinates": pos(p)}),
        Geometry::Polyline(l) => json!({"type": "LineString", "coordinates": line(l)}),
        Geometry::MultiPolyline(ls) => {
            json!({"type": "MultiLineString", "coordinates": ls.iter().map(|l| line(l)).collect::<Vec<_>>()})
        }
        Geometry::Polygon(p) => json!({"type": "Polygon", "coordinates": poly(p)}),
        Geometry::MultiPolygon(ps) => {
            json!({"type": "MultiPolygon", "coordinates": ps.iter().map(|p| poly(p)).collect::<Vec<_>>()})
        }
    }
}
