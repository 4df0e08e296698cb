//! Answer functions evaluated on the objects visible in one patch.

use std::collections::{BTreeMap, BTreeSet};

use crate::annotation::{AnnotatedObject, AnnotationStore, LayerManifest, SourceKind, FLOOD_LEVELS};
use crate::error::{Error, Result};
use crate::geo::{self, Extent, Geometry, GeometryKind, GridCell, OctagonSector, WorldPoint};
use crate::raster::PATCH_PIXELS;

/// An annotated object clipped to a patch extent.
#[derive(Debug, Clone)]
pub struct PatchObject<'a> {
    pub object: &'a AnnotatedObject,
    pub clipped: Geometry,
    /// Clipped area for polygons, clipped length for lines, 0 for points.
    pub measure: f64,
    pub centroid: WorldPoint,
}

impl PatchObject<'_> {
    pub fn kind(&self) -> GeometryKind {
        self.clipped.kind().expect("clipped objects are non-empty")
    }

    pub fn area(&self) -> f64 {
        if self.kind() == GeometryKind::Polygon {
            self.measure
        } else {
            0.0
        }
    }
}

/// The objects of every layer intersecting one patch, ordered by object id.
#[derive(Debug, Clone)]
pub struct PatchView<'a> {
    pub extent: Extent,
    pub manifest: &'a LayerManifest,
    pub objects: Vec<PatchObject<'a>>,
}

impl<'a> PatchView<'a> {
    /// Clips `objects` to `extent`, dropping empty results and polygon slivers below `min_area`.
    pub fn new(
        manifest: &'a LayerManifest,
        extent: Extent,
        objects: impl IntoIterator<Item = &'a AnnotatedObject>,
        min_area: f64,
    ) -> Self {
        let mut out: Vec<PatchObject<'a>> = objects
            .into_iter()
            .filter_map(|o| Self::wrap(o, geo::clip(&o.geometry, &extent), min_area))
            .collect();
        out.sort_by(|a, b| a.object.id.cmp(&b.object.id));
        Self { extent, manifest, objects: out }
    }

    pub fn from_store(store: &'a AnnotationStore, extent: Extent, min_area: f64) -> Result<Self> {
        let objects = store
            .query(&extent, None, None)?
            .into_iter()
            .filter_map(|hit| Self::wrap(hit.object, hit.clipped, min_area))
            .collect();
        Ok(Self { extent, manifest: store.manifest(), objects })
    }

    fn wrap(object: &'a AnnotatedObject, clipped: Geometry, min_area: f64) -> Option<PatchObject<'a>> {
        if clipped.is_empty() {
            return None;
        }
        let measure = clipped.measure();
        if clipped.kind() == Some(GeometryKind::Polygon) && measure < min_area {
            return None;
        }
        let centroid = geo::centroid(&clipped).ok()?;
        Some(PatchObject { object, clipped, measure, centroid })
    }

    pub fn of_kind<'s>(&'s self, kind: SourceKind) -> impl Iterator<Item = &'s PatchObject<'a>> + use<'s, 'a> {
        self.objects.iter().filter(move |o| o.object.source_kind == kind)
    }

    pub fn of_class<'s, 'c>(
        &'s self,
        kind: SourceKind,
        class: &'c str,
    ) -> impl Iterator<Item = &'s PatchObject<'a>> + use<'s, 'c, 'a> {
        self.of_kind(kind).filter(move |o| o.object.class == class)
    }

    pub fn count(&self, kind: SourceKind, class: &str) -> usize {
        self.of_class(kind, class).count()
    }

    /// Sum of clipped areas of one class.
    pub fn class_area(&self, kind: SourceKind, class: &str) -> f64 {
        self.of_class(kind, class).map(PatchObject::area).sum()
    }

    /// Classes of a layer with at least one object in the patch.
    pub fn present_classes(&self, kind: SourceKind) -> BTreeSet<&str> {
        self.of_kind(kind).map(|o| o.object.class.as_str()).collect()
    }

    fn check_class(&self, kind: SourceKind, class: &str) -> Result<()> {
        let known = self.manifest.layer_of_kind(kind).is_some_and(|l| l.class(class).is_some());
        if known {
            Ok(())
        } else {
            Err(Error::Domain(format!("unknown {kind:?} class '{class}'")))
        }
    }

    /// Patch pixel coordinates `(col, row)` of a world point; pixel centers are integers.
    pub fn world_to_px(&self, p: &WorldPoint) -> (f64, f64) {
        let px = self.extent.width() / PATCH_PIXELS as f64;
        let py = self.extent.height() / PATCH_PIXELS as f64;
        ((p.x - self.extent.min_x) / px - 0.5, (self.extent.max_y - p.y) / py - 0.5)
    }

    pub fn px_to_world(&self, col: f64, row: f64) -> WorldPoint {
        let px = self.extent.width() / PATCH_PIXELS as f64;
        let py = self.extent.height() / PATCH_PIXELS as f64;
        WorldPoint::new(self.extent.min_x + (col + 0.5) * px, self.extent.max_y - (row + 0.5) * py)
    }
}

/// Which end of a ranking a question asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Largest,
    Smallest,
}

impl Extreme {
    pub fn word(self) -> &'static str {
        match self {
            Extreme::Largest => "largest",
            Extreme::Smallest => "smallest",
        }
    }
}

/// Presence of a class (or of any object of the layer when `class` is `None`).
pub fn answer_presence(view: &PatchView, kind: SourceKind, class: Option<&str>) -> Result<bool> {
    match class {
        Some(c) => {
            view.check_class(kind, c)?;
            Ok(view.count(kind, c) > 0)
        }
        None => Ok(view.of_kind(kind).next().is_some()),
    }
}

pub fn answer_count(view: &PatchView, kind: SourceKind, class: &str) -> Result<usize> {
    view.check_class(kind, class)?;
    Ok(view.count(kind, class))
}

/// Share of the patch covered by a class, in percent and capped at 100.
pub fn answer_cover_percent(view: &PatchView, kind: SourceKind, class: &str) -> Result<f64> {
    view.check_class(kind, class)?;
    Ok((view.class_area(kind, class) * 100.0 / view.extent.area()).min(100.0))
}

/// Object designated by "the <class>": the only instance, or the largest one (ties by id).
/// Returns the object and whether a qualifier is needed. Classes of point objects with several
/// instances have no referent.
pub fn referent<'v, 'a>(view: &'v PatchView<'a>, kind: SourceKind, class: &str) -> Option<(&'v PatchObject<'a>, bool)> {
    let objs: Vec<_> = view.of_class(kind, class).collect();
    match objs.len() {
        0 => None,
        1 => Some((objs[0], false)),
        _ if objs[0].kind() == GeometryKind::Point => None,
        // `of_class` yields ascending ids, so the first maximum wins ties.
        _ => objs
            .into_iter()
            .reduce(|best, o| if o.measure > best.measure { o } else { best })
            .map(|o| (o, true)),
    }
}

/// Grid cell of a position inside the patch.
pub fn answer_location(view: &PatchView, p: &WorldPoint) -> Result<GridCell> {
    geo::grid_cell(p, &view.extent)
}

/// Instance of `class` whose centroid is closest to `pos` (ties by id).
pub fn nearest<'v, 'a>(view: &'v PatchView<'a>, kind: SourceKind, class: &str, pos: &WorldPoint) -> Option<&'v PatchObject<'a>> {
    view.of_class(kind, class)
        .reduce(|best, o| if o.centroid.distance(pos) < best.centroid.distance(pos) { o } else { best })
}

/// Class with the largest or smallest total clipped area among the present members of `classes`.
/// Ties go to the lexicographically smallest label.
pub fn answer_extreme_class<'c>(
    view: &PatchView,
    kind: SourceKind,
    classes: impl IntoIterator<Item = &'c str>,
    extreme: Extreme,
) -> Option<&'c str> {
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for c in classes {
        let area = view.class_area(kind, c);
        if view.count(kind, c) > 0 && area > 0.0 {
            totals.insert(c, area);
        }
    }
    // BTreeMap iterates labels in ascending order; strict comparison keeps the first on ties.
    totals
        .into_iter()
        .reduce(|best, cur| {
            let better = match extreme {
                Extreme::Largest => cur.1 > best.1,
                Extreme::Smallest => cur.1 < best.1,
            };
            if better {
                cur
            } else {
                best
            }
        })
        .map(|(c, _)| c)
}

/// Highest flood level among the flood zones in the patch.
pub fn answer_flood_level(view: &PatchView) -> Option<&'static str> {
    view.of_kind(SourceKind::Flood)
        .filter_map(|o| FLOOD_LEVELS.iter().position(|l| Some(*l) == o.object.attr("level")))
        .max()
        .map(|i| FLOOD_LEVELS[i])
}

/// Sorted, lowercased set of flood types present in the patch.
pub fn answer_flood_types(view: &PatchView) -> Vec<String> {
    let set: BTreeSet<String> = view
        .of_kind(SourceKind::Flood)
        .filter_map(|o| o.object.attr("type"))
        .map(canonical_text)
        .collect();
    set.into_iter().collect()
}

pub const OUTSIDE_URBAN_UNIT: &str = "outside urban unit";

/// Urban class covering most of the patch; `None` outside any urban unit.
pub fn answer_urban<'v>(view: &'v PatchView) -> Option<&'v str> {
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for o in view.of_kind(SourceKind::Urban) {
        *totals.entry(o.object.class.as_str()).or_default() += o.measure;
    }
    totals
        .into_iter()
        .reduce(|best, cur| if cur.1 > best.1 { cur } else { best })
        .map(|(c, _)| c)
}

/// Mountain range with the largest clipped extent (ties by name, then id).
pub fn answer_mountain<'v, 'a>(view: &'v PatchView<'a>) -> Option<&'v PatchObject<'a>> {
    view.of_kind(SourceKind::Mountain).reduce(|best, o| {
        let key = |x: &PatchObject| (x.object.attr("name").unwrap_or_default().to_string(), x.object.id.clone());
        if o.measure > best.measure || (o.measure == best.measure && key(o) < key(best)) {
            o
        } else {
            best
        }
    })
}

/// Strict comparison of instance counts.
pub fn answer_comparison(view: &PatchView, kind: SourceKind, first: &str, second: &str) -> Result<bool> {
    Ok(answer_count(view, kind, first)? > answer_count(view, kind, second)?)
}

pub fn answer_distance(a: &WorldPoint, b: &WorldPoint) -> f64 {
    a.distance(b)
}

pub fn answer_relative(reference: &WorldPoint, target: &WorldPoint) -> Result<OctagonSector> {
    geo::octagon_sector(reference, target)
}

/// Lowercase with runs of whitespace collapsed to single spaces.
pub fn canonical_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{ClassSpec, LayerSpec};
    use crate::geo::Polygon;

    fn manifest() -> LayerManifest {
        let class = |name: &str, geometry, attributes: &[&str]| ClassSpec {
            name: name.into(),
            geometry,
            plural: None,
            attributes: attributes.iter().map(|s| s.to_string()).collect(),
        };
        let layer = |name: &str, kind, classes| LayerSpec {
            name: name.into(),
            source_kind: kind,
            path: "unused".into(),
            classes,
            categories: BTreeMap::new(),
        };
        LayerManifest {
            layers: vec![
                layer(
                    "topo",
                    SourceKind::Topo,
                    vec![
                        class("building", GeometryKind::Polygon, &[]),
                        class("lake", GeometryKind::Polygon, &[]),
                        class("pond", GeometryKind::Polygon, &[]),
                        class("road", GeometryKind::Line, &[]),
                        class("museum", GeometryKind::Point, &[]),
                    ],
                ),
                layer("tri", SourceKind::Flood, vec![class("flood zone", GeometryKind::Polygon, &["level", "type"])]),
            ],
        }
    }

    fn square(id: &str, class: &str, x: f64, y: f64, side: f64) -> AnnotatedObject {
        let e = Extent::new(x, y, x + side, y + side).unwrap();
        AnnotatedObject {
            id: format!("topo/{id}"),
            layer: "topo".into(),
            source_kind: SourceKind::Topo,
            class: class.into(),
            geometry: Geometry::Polygon(Polygon::rectangle(&e)),
            attributes: BTreeMap::new(),
        }
    }

    fn flood(id: &str, level: &str, kind: &str) -> AnnotatedObject {
        let mut o = square(id, "flood zone", 0.0, 0.0, 50.0);
        o.id = format!("tri/{id}");
        o.layer = "tri".into();
        o.source_kind = SourceKind::Flood;
        o.attributes = [("level".to_string(), level.to_string()), ("type".to_string(), kind.to_string())].into();
        o
    }

    fn patch() -> Extent {
        Extent::new(0.0, 0.0, 200.0, 200.0).unwrap()
    }

    #[test]
    fn presence_and_count() {
        let m = manifest();
        let objs = vec![square("1", "building", 10.0, 10.0, 10.0), square("2", "building", 50.0, 50.0, 10.0)];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        assert!(answer_presence(&v, SourceKind::Topo, Some("building")).unwrap());
        assert!(!answer_presence(&v, SourceKind::Topo, Some("lake")).unwrap());
        assert!(matches!(answer_presence(&v, SourceKind::Topo, Some("castle")), Err(Error::Domain(_))));
        assert_eq!(answer_count(&v, SourceKind::Topo, "building").unwrap(), 2);
        let empty = PatchView::new(&m, patch(), &[], 0.04);
        assert!(!answer_presence(&empty, SourceKind::Flood, None).unwrap());
        assert_eq!(answer_count(&empty, SourceKind::Topo, "road").unwrap(), 0);
    }

    #[test]
    fn density_of_one_building() {
        let m = manifest();
        let objs = vec![square("1", "building", 10.0, 10.0, 10.0)];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        assert!((answer_cover_percent(&v, SourceKind::Topo, "building").unwrap() - 0.25).abs() < 1e-12);
        let full = vec![square("2", "lake", -10.0, -10.0, 300.0)];
        let v = PatchView::new(&m, patch(), &full, 0.04);
        assert_eq!(answer_cover_percent(&v, SourceKind::Topo, "lake").unwrap(), 100.0);
    }

    #[test]
    fn slivers_are_dropped() {
        let m = manifest();
        // 0.1 x 0.1 m overlap.
        let objs = vec![square("1", "building", 199.9, 199.9, 10.0)];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        assert!(v.objects.is_empty());
    }

    #[test]
    fn referent_and_location() {
        let m = manifest();
        let objs = vec![square("a", "lake", 150.0, 150.0, 20.0), square("b", "lake", 0.0, 0.0, 30.0)];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        let (obj, qualified) = referent(&v, SourceKind::Topo, "lake").unwrap();
        assert_eq!(obj.object.id, "topo/b");
        assert!(qualified);
        assert_eq!(answer_location(&v, &obj.centroid).unwrap().label(), "bottom-left");
        let single = vec![square("c", "pond", 90.0, 90.0, 20.0)];
        let v = PatchView::new(&m, patch(), &single, 0.04);
        let (obj, qualified) = referent(&v, SourceKind::Topo, "pond").unwrap();
        assert!(!qualified);
        assert_eq!(answer_location(&v, &obj.centroid).unwrap().label(), "center");
    }

    #[test]
    fn nearest_singleton_ignores_position() {
        let m = manifest();
        let objs = vec![square("a", "lake", 150.0, 150.0, 20.0)];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        for pos in [WorldPoint::new(0.0, 0.0), WorldPoint::new(199.0, 1.0)] {
            assert_eq!(nearest(&v, SourceKind::Topo, "lake", &pos).unwrap().object.id, "topo/a");
        }
    }

    #[test]
    fn extreme_classes_and_ties() {
        let m = manifest();
        let objs = vec![square("a", "lake", 0.0, 0.0, 20.0), square("b", "pond", 100.0, 100.0, 10.0)];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        let water = ["lake", "pond"];
        assert_eq!(answer_extreme_class(&v, SourceKind::Topo, water, Extreme::Largest), Some("lake"));
        assert_eq!(answer_extreme_class(&v, SourceKind::Topo, water, Extreme::Smallest), Some("pond"));
        let tie = vec![square("a", "pond", 0.0, 0.0, 20.0), square("b", "lake", 100.0, 100.0, 20.0)];
        let v = PatchView::new(&m, patch(), &tie, 0.04);
        assert_eq!(answer_extreme_class(&v, SourceKind::Topo, water, Extreme::Largest), Some("lake"));
        assert_eq!(answer_extreme_class(&v, SourceKind::Topo, water, Extreme::Smallest), Some("lake"));
        let one = vec![square("a", "pond", 0.0, 0.0, 20.0)];
        let v = PatchView::new(&m, patch(), &one, 0.04);
        assert_eq!(answer_extreme_class(&v, SourceKind::Topo, water, Extreme::Largest), Some("pond"));
        assert_eq!(answer_extreme_class(&v, SourceKind::Topo, water, Extreme::Smallest), Some("pond"));
    }

    #[test]
    fn flood_answers() {
        let m = manifest();
        let objs = vec![flood("1", "low", "Runoff"), flood("2", "high", "River overflows"), flood("3", "low", "Runoff")];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        assert_eq!(answer_flood_level(&v), Some("high"));
        assert_eq!(answer_flood_types(&v), vec!["river overflows", "runoff"]);
    }

    #[test]
    fn comparison_is_strict() {
        let m = manifest();
        let objs = vec![square("1", "lake", 0.0, 0.0, 10.0), square("2", "pond", 50.0, 50.0, 10.0)];
        let v = PatchView::new(&m, patch(), &objs, 0.04);
        assert!(!answer_comparison(&v, SourceKind::Topo, "lake", "pond").unwrap());
        assert!(answer_comparison(&v, SourceKind::Topo, "lake", "building").unwrap());
    }

    #[test]
    fn pixel_mapping_round_trips() {
        let m = manifest();
        let v = PatchView::new(&m, patch(), &[], 0.04);
        let p = v.px_to_world(142.0, 221.0);
        let (c, r) = v.world_to_px(&p);
        assert!((c - 142.0).abs() < 1e-9 && (r - 221.0).abs() < 1e-9);
        let origin = v.px_to_world(0.0, 0.0);
        assert!((origin.x - 0.1).abs() < 1e-12 && (origin.y - 199.9).abs() < 1e-12);
    }
}
