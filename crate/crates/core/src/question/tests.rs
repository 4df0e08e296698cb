use super::*;
use crate::annotation::{AnnotatedObject, LayerSpec};
use crate::geo::{Geometry, Polygon, WorldPoint};

fn class(name: &str, geometry: GeometryKind, attributes: &[&str]) -> ClassSpec {
    ClassSpec { name: name.into(), geometry, plural: None, attributes: attributes.iter().map(|s| s.to_string()).collect() }
}

fn manifest() -> LayerManifest {
    let layer = |name: &str, kind, classes, categories: &[(&str, &[&str])]| LayerSpec {
        name: name.into(),
        source_kind: kind,
        path: "unused".into(),
        classes,
        categories: categories
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
            .collect(),
    };
    LayerManifest {
        layers: vec![
            layer(
                "topo",
                SourceKind::Topo,
                vec![
                    class("building", GeometryKind::Polygon, &[]),
                    class("lake", GeometryKind::Polygon, &[]),
                    class("forest", GeometryKind::Polygon, &[]),
                    class("road", GeometryKind::Line, &[]),
                    class("museum", GeometryKind::Point, &[]),
                ],
                &[("water", &["lake"]), ("vegetation", &["forest"])],
            ),
            layer("tri", SourceKind::Flood, vec![class("flood zone", GeometryKind::Polygon, &["level", "type"])], &[]),
            layer("bu20", SourceKind::Urban, vec![class("Suburb", GeometryKind::Polygon, &[])], &[]),
            layer("clc", SourceKind::Landcover, vec![class("wetland", GeometryKind::Polygon, &[])], &[]),
            layer("ema", SourceKind::Mountain, vec![class("mountain area", GeometryKind::Polygon, &["name"])], &[]),
        ],
    }
}

fn obj(layer: &str, kind: SourceKind, id: &str, class: &str, geometry: Geometry, attrs: &[(&str, &str)]) -> AnnotatedObject {
    AnnotatedObject {
        id: format!("{layer}/{id}"),
        layer: layer.into(),
        source_kind: kind,
        class: class.into(),
        geometry,
        attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Geometry {
    Geometry::Polygon(Polygon::rectangle(&Extent::new(x0, y0, x1, y1).unwrap()))
}

fn rich_world() -> Vec<AnnotatedObject> {
    let t = SourceKind::Topo;
    vec![
        obj("topo", t, "b1", "building", rect(10.0, 10.0, 30.0, 30.0), &[]),
        obj("topo", t, "b2", "building", rect(150.0, 150.0, 160.0, 170.0), &[]),
        obj("topo", t, "l1", "lake", rect(60.0, 100.0, 110.0, 140.0), &[]),
        obj("topo", t, "f1", "forest", rect(120.0, 20.0, 190.0, 60.0), &[]),
        obj(
            "topo",
            t,
            "r1",
            "road",
            Geometry::polyline(vec![WorldPoint::new(-10.0, 90.0), WorldPoint::new(210.0, 95.0)]).unwrap(),
            &[],
        ),
        obj("topo", t, "m1", "museum", Geometry::point(40.0, 170.0).unwrap(), &[]),
        obj("tri", SourceKind::Flood, "z1", "flood zone", rect(0.0, 0.0, 100.0, 50.0), &[("level", "medium"), ("type", "Runoff")]),
        obj("bu20", SourceKind::Urban, "u1", "Suburb", rect(-50.0, -50.0, 250.0, 250.0), &[]),
        obj("clc", SourceKind::Landcover, "c1", "wetland", rect(0.0, 0.0, 200.0, 100.0), &[]),
        obj("ema", SourceKind::Mountain, "e1", "mountain area", rect(-500.0, -500.0, 500.0, 500.0), &[("name", "Alpes")]),
    ]
}

fn ctx() -> PatchContext<'static> {
    PatchContext {
        patch_id: "t_r00_c00",
        extent: Extent::new(0.0, 0.0, 200.0, 200.0).unwrap(),
        department: "Haute-Savoie",
        region: "Auvergne-Rhône-Alpes",
    }
}

fn generate(objects: Vec<AnnotatedObject>, seed: u64) -> Vec<QAPair> {
    let (store, _) = AnnotationStore::from_objects(manifest(), objects).unwrap();
    generate_candidates(&ctx(), &store, &TemplateBank::default(), &QuestionConfig::default(), seed).unwrap()
}

#[test]
fn subtype_names_round_trip() {
    for s in Subtype::ALL {
        assert_eq!(s.name().parse::<Subtype>().unwrap(), s);
        assert_eq!(serde_json::to_value(s).unwrap(), serde_json::Value::String(s.name().into()));
    }
    assert_eq!(Subtype::ALL.iter().map(|s| s.category()).filter(|c| *c == Category::Classification).count(), 9);
}

#[test]
fn number_rendering() {
    assert_eq!(format_number(12.0), "12");
    assert_eq!(format_number(quantize(12.34, 0.1)), "12.3");
    assert_eq!(format_number(quantize(-0.04, 0.1)), "0");
    assert_eq!(quantize(0.25, 0.1), 0.3);
}

#[test]
fn plurals() {
    let c = |n: &str| class(n, GeometryKind::Point, &[]);
    assert_eq!(plural(&c("building")), "buildings");
    assert_eq!(plural(&c("church")), "churches");
    assert_eq!(plural(&c("cemetery")), "cemeteries");
    assert_eq!(plural(&c("railway")), "railways");
    let mut custom = c("religious building");
    custom.plural = Some("religious places".into());
    assert_eq!(plural(&custom), "religious places");
}

#[test]
fn all_subtypes_in_rich_world() {
    let qa = generate(rich_world(), 1);
    let subtypes: std::collections::BTreeSet<_> = qa.iter().map(|q| q.subtype).collect();
    assert_eq!(subtypes.len(), 21, "{subtypes:?}");
    for q in &qa {
        assert!(qa.iter().filter(|o| o.subtype == q.subtype).count() <= 10);
        assert_eq!(q.canonical, q.answer.canonical());
        assert_eq!(q.category, q.subtype.category());
    }
    let find = |s: Subtype| qa.iter().find(|q| q.subtype == s).unwrap();
    assert_eq!(find(Subtype::MountainName).canonical, "alpes");
    assert_eq!(find(Subtype::FloodLevel).canonical, "medium");
    assert_eq!(find(Subtype::FloodType).canonical, "runoff");
    assert_eq!(find(Subtype::Urban).canonical, "suburb");
    assert_eq!(find(Subtype::Department).canonical, "haute-savoie");
    assert_eq!(find(Subtype::Region).canonical, "auvergne-rhône-alpes");
    let wetland = qa.iter().find(|q| q.subtype == Subtype::Percentage).unwrap();
    assert_eq!(wetland.canonical, "50");
}

#[test]
fn empty_world() {
    let qa = generate(Vec::new(), 3);
    assert!(qa.iter().filter(|q| q.subtype == Subtype::Presence).all(|q| q.canonical == "no"));
    assert!(qa.iter().filter(|q| q.subtype == Subtype::Count).all(|q| q.canonical == "0"));
    for s in [Subtype::MountainName, Subtype::Area, Subtype::Nearest, Subtype::FloodLevel, Subtype::Water] {
        assert!(!qa.iter().any(|q| q.subtype == s), "{s}");
    }
    let mp = qa.iter().find(|q| q.subtype == Subtype::MountainPresence).unwrap();
    assert_eq!(mp.canonical, "no");
    assert_eq!(qa.iter().find(|q| q.subtype == Subtype::Urban).unwrap().canonical, OUTSIDE_URBAN_UNIT);
}

#[test]
fn deterministic_and_seed_sensitive() {
    let a = generate(rich_world(), 11);
    let b = generate(rich_world(), 11);
    assert_eq!(a, b);
    let mut shuffled = rich_world();
    shuffled.reverse();
    assert_eq!(generate(shuffled, 11), a);
    assert_ne!(generate(rich_world(), 12), a);
}

#[test]
fn text_names_the_slots() {
    for q in generate(rich_world(), 5) {
        match q.subtype {
            Subtype::Count | Subtype::Nearest | Subtype::Area | Subtype::AbsoluteLocation => {
                assert!(q.text.contains(&q.slots.classes[0]), "{}", q.text)
            }
            _ => {}
        }
        if let Some((c, r)) = q.slots.pos {
            assert!(q.text.contains(&format!("({c}, {r})")), "{}", q.text);
        }
    }
}

#[test]
fn qa_pairs_round_trip_through_json() {
    for q in generate(rich_world(), 9) {
        let text = crate::json::to_canonical_string(&q, false).unwrap();
        let back: QAPair = serde_json::from_str(&text).unwrap();
        assert_eq!(back, q);
    }
}
