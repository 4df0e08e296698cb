//! Scripted "miniworld": a small, fully populated input tree for tests and demos.
//!
//! Three departments tiled into 21 patches, five annotation layers, two usable MS scenes plus
//! a cloudy one, one burst-structured SLC scene with its geolocation grid and an elevation grid.
//! Everything is generated from a fixed internal seed, so the tree is identical on every call.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::annotation::geometry_to_geojson;
use crate::error::{Error, Result};
use crate::geo::{Extent, GeoTransform, Geometry, Polygon, WorldPoint};
use crate::projection::{Projection, ProjectionSpec};
use crate::raster::{io, DType, GeolocationGrid, GridLayer, Modality, RasterData, RasterHeader, TiePoint, MS_BANDS};

const DATA_SEED: u64 = 0x6d69_6e69;

/// `(tile id, department, west edge, north edge, width px, height px)`.
pub const TILES: [(&str, &str, f64, f64, usize, usize); 3] = [
    ("t_ain", "Ain", 900_000.0, 6_500_600.0, 3000, 3000),
    ("t_isere", "Isère", 900_600.0, 6_500_600.0, 3000, 2000),
    ("t_savoie", "Savoie", 901_200.0, 6_500_600.0, 2000, 3000),
];
pub const REGION: &str = "Auvergne-Rhône-Alpes";

/// Ground geometry of the SAR scene: 10 m lines and columns from this north-west corner.
const SAR_ORIGIN: (f64, f64) = (899_700.0, 6_500_900.0);
const SAR_LINES: usize = 120;
const SAR_COLS: usize = 220;
/// Burst boundaries on the ground grid with the duplicated rows and black rows at each seam.
pub const SAR_SEAMS: [(usize, usize, usize); 2] = [(40, 3, 2), (80, 2, 3)];

fn rng(part: &str) -> ChaCha8Rng {
    crate::seed::stream(DATA_SEED, &["miniworld", part])
}

fn write(path: &Path, v: &Value) -> Result<()> {
    crate::json::write_json(path, v)
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Geometry> {
    Ok(Geometry::Polygon(Polygon::rectangle(&Extent::new(x0, y0, x1, y1)?)))
}

/// Rectangle of half-sides `(hw, hh)` rotated by `angle` around `(cx, cy)`.
fn rotated(cx: f64, cy: f64, hw: f64, hh: f64, angle: f64) -> Result<Geometry> {
    let (s, c) = angle.sin_cos();
    let ring = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
        .iter()
        .map(|&(dx, dy)| WorldPoint::new(cx + dx * c - dy * s, cy + dx * s + dy * c))
        .collect();
    Ok(Geometry::Polygon(Polygon::new(ring, Vec::new())?))
}

fn feature(id: usize, class: &str, g: &Geometry, attrs: &[(&str, &str)]) -> Value {
    let mut props = serde_json::Map::new();
    props.insert("class".into(), json!(class));
    for (k, v) in attrs {
        props.insert((*k).into(), json!(v));
    }
    json!({"type": "Feature", "id": id, "properties": props, "geometry": geometry_to_geojson(g)})
}

fn collection(features: Vec<Value>) -> Value {
    json!({"type": "FeatureCollection", "features": features})
}

/// Patch extents in world coordinates, in tile then row-major order.
pub fn patch_extents() -> Vec<Extent> {
    let mut out = Vec::new();
    for (_, _, west, north, w, h) in TILES {
        for r in 0..h / 1000 {
            for c in 0..w / 1000 {
                let x0 = west + 200.0 * c as f64;
                let y1 = north - 200.0 * r as f64;
                out.push(Extent::new(x0, y1 - 200.0, x0 + 200.0, y1).expect("patch extent"));
            }
        }
    }
    out
}

fn manifest() -> Value {
    let cls = |name: &str, geometry: &str| json!({"name": name, "geometry": geometry});
    json!({"layers": [
        {"name": "bdtopo", "source_kind": "TOPO", "path": "bdtopo.geojson",
         "classes": [cls("building", "polygon"), cls("lake", "polygon"), cls("pond", "polygon"),
                     cls("forest", "polygon"), cls("orchard", "polygon"), cls("road", "line"),
                     cls("river", "line"), cls("church", "point"), cls("museum", "point")],
         "categories": {"water": ["lake", "pond", "river"], "vegetation": ["forest", "orchard"]}},
        {"name": "tri", "source_kind": "FLOOD", "path": "tri.geojson",
         "classes": [{"name": "flood risk zone", "geometry": "polygon", "attributes": ["level", "type"]}]},
        {"name": "bu20", "source_kind": "URBAN", "path": "bu20.geojson",
         "classes": [cls("Urban centre", "polygon"), cls("Suburb", "polygon"), cls("Isolated town", "polygon")]},
        {"name": "clc", "source_kind": "LANDCOVER", "path": "clc.geojson",
         "classes": [cls("Discontinuous urban fabric", "polygon"), cls("Broad-leaved forest", "polygon"),
                     cls("Pastures", "polygon"), cls("Water bodies", "polygon")]},
        {"name": "ema", "source_kind": "MOUNTAIN", "path": "ema.geojson",
         "classes": [{"name": "mountain area", "geometry": "polygon", "attributes": ["name"]}]}
    ]})
}

fn topo_features() -> Result<Vec<Value>> {
    let mut r = rng("topo");
    let mut out = Vec::new();
    let mut next = 0;
    let mut push = |class: &str, g: Geometry, out: &mut Vec<Value>| {
        out.push(feature(next, class, &g, &[]));
        next += 1;
    };
    for e in patch_extents() {
        let (x0, y0) = (e.min_x, e.min_y);
        let at = |r: &mut ChaCha8Rng, lo: f64, hi: f64| r.gen_range(lo..hi);
        // Buildings may straddle the patch border.
        for _ in 0..r.gen_range(0..7) {
            let (cx, cy) = (x0 + at(&mut r, -5.0, 205.0), y0 + at(&mut r, -5.0, 205.0));
            let g = rotated(cx, cy, at(&mut r, 4.0, 15.0), at(&mut r, 4.0, 12.0), at(&mut r, 0.0, 1.5))?;
            push("building", g, &mut out);
        }
        for (class, p, lo, hi) in [("lake", 0.5, 20.0, 45.0), ("pond", 0.4, 3.0, 8.0), ("forest", 0.6, 25.0, 60.0), ("orchard", 0.4, 10.0, 25.0)] {
            let n = if r.gen_bool(p) { r.gen_range(1..3) } else { 0 };
            for _ in 0..n {
                let (w, h) = (at(&mut r, lo, hi), at(&mut r, lo, hi));
                let (cx, cy) = (x0 + at(&mut r, 0.0, 200.0), y0 + at(&mut r, 0.0, 200.0));
                push(class, rect(cx - w, cy - h, cx + w, cy + h)?, &mut out);
            }
        }
        if r.gen_bool(0.7) {
            let ys: Vec<f64> = (0..4).map(|_| y0 + at(&mut r, 10.0, 190.0)).collect();
            let pts = (0..4).map(|i| WorldPoint::new(x0 - 20.0 + 80.0 * i as f64, ys[i])).collect();
            push("road", Geometry::polyline(pts)?, &mut out);
        }
        if r.gen_bool(0.3) {
            let pts = vec![
                WorldPoint::new(x0 + at(&mut r, 0.0, 60.0), y0 + 230.0),
                WorldPoint::new(x0 + at(&mut r, 60.0, 140.0), y0 + 100.0),
                WorldPoint::new(x0 + at(&mut r, 140.0, 200.0), y0 - 30.0),
            ];
            push("river", Geometry::polyline(pts)?, &mut out);
        }
        for (class, p) in [("church", 0.5), ("museum", 0.3)] {
            let n = if r.gen_bool(p) { r.gen_range(1..3) } else { 0 };
            for _ in 0..n {
                push(class, Geometry::point(x0 + at(&mut r, 1.0, 199.0), y0 + at(&mut r, 1.0, 199.0))?, &mut out);
            }
        }
    }
    Ok(out)
}

fn flood_features() -> Result<Vec<Value>> {
    let zones = [
        (899_950.0, 6_500_250.0, 900_450.0, 6_500_650.0, "high", "River overflows"),
        (900_300.0, 6_500_000.0, 900_700.0, 6_500_330.0, "medium", "Runoff"),
        (900_900.0, 6_500_380.0, 901_350.0, 6_500_520.0, "low", "GroundWater overflows"),
        (901_250.0, 6_499_950.0, 901_650.0, 6_500_150.0, "medium", "Sea Flooding"),
        (901_100.0, 6_500_400.0, 901_300.0, 6_500_620.0, "high", "Runoff"),
    ];
    zones
        .iter()
        .enumerate()
        .map(|(i, &(x0, y0, x1, y1, level, kind))| {
            Ok(feature(i, "flood risk zone", &rect(x0, y0, x1, y1)?, &[("level", level), ("type", kind)]))
        })
        .collect()
}

fn urban_features() -> Result<Vec<Value>> {
    let units = [
        (900_000.0, 6_500_300.0, 900_330.0, 6_500_600.0, "Urban centre"),
        (900_330.0, 6_500_300.0, 900_700.0, 6_500_600.0, "Suburb"),
        (900_800.0, 6_500_200.0, 901_100.0, 6_500_450.0, "Suburb"),
        (901_250.0, 6_500_050.0, 901_500.0, 6_500_260.0, "Isolated town"),
    ];
    units
        .iter()
        .enumerate()
        .map(|(i, &(x0, y0, x1, y1, class))| Ok(feature(i, class, &rect(x0, y0, x1, y1)?, &[])))
        .collect()
}

/// Vertical strips that partition the whole area.
fn landcover_features() -> Result<Vec<Value>> {
    let cuts = [899_900.0, 900_170.0, 900_420.0, 900_650.0, 900_930.0, 901_240.0, 901_430.0, 901_700.0];
    let classes = ["Discontinuous urban fabric", "Pastures", "Broad-leaved forest", "Water bodies"];
    let mut r = rng("landcover");
    let mut out = Vec::new();
    for (i, w) in cuts.windows(2).enumerate() {
        let split = 6_500_000.0 + r.gen_range(150.0..450.0);
        out.push(feature(2 * i, classes[i % 4], &rect(w[0], 6_499_900.0, w[1], split)?, &[]));
        out.push(feature(2 * i + 1, classes[(i + 1) % 4], &rect(w[0], split, w[1], 6_500_700.0)?, &[]));
    }
    Ok(out)
}

fn mountain_features() -> Result<Vec<Value>> {
    Ok(vec![
        feature(0, "mountain area", &rect(899_900.0, 6_499_900.0, 900_500.0, 6_500_700.0)?, &[("name", "Jura")]),
        feature(1, "mountain area", &rect(901_050.0, 6_500_150.0, 901_700.0, 6_500_700.0)?, &[("name", "Alpes")]),
    ])
}

/// Empty VHR payload of the right length (sparse on most file systems); tiling reads headers only.
fn write_vhr(dir: &Path, id: &str, west: f64, north: f64, w: usize, h: usize) -> Result<PathBuf> {
    let mut header = RasterHeader::new(w, h, DType::U8, vec!["red".into(), "green".into(), "blue".into()]);
    header.modality = Some(Modality::Vhr);
    header.geotransform = Some(GeoTransform::north_up(west + 0.1, north - 0.1, 0.2)?);
    let path = dir.join(format!("{id}.json"));
    write(&path, &serde_json::to_value(&header).map_err(|e| Error::json("vhr header", e))?)?;
    let bin = io::data_path(&path);
    let f = File::create(&bin).map_err(|e| Error::io(&bin, e))?;
    f.set_len(header.byte_len() as u64).map_err(|e| Error::io(&bin, e))?;
    Ok(path)
}

fn write_ms(dir: &Path, id: &str, acquired: &str, cloud: f64) -> Result<PathBuf> {
    let (w, h) = (200, 80);
    let mut header = RasterHeader::new(w, h, DType::U16, (1..=MS_BANDS).map(|i| format!("B{i}")).collect());
    header.modality = Some(Modality::Ms);
    header.geotransform = Some(GeoTransform::north_up(899_805.0, 6_500_695.0, 10.0)?);
    header.acquired = Some(acquired.into());
    header.cloud_fraction = Some(cloud);
    header.band_pixel_sizes = Some(vec![10.0, 10.0, 10.0, 10.0, 20.0, 20.0, 20.0, 20.0, 20.0, 20.0]);
    let mut r = rng(id);
    let values = (0..w * h * MS_BANDS).map(|_| r.gen_range(100..5000u16)).collect();
    let path = dir.join(format!("{id}.json"));
    io::write_raster(&path, &header, &RasterData::U16(values))?;
    Ok(path)
}

/// Continuous ground-truth amplitudes `(vv, vh)` of the SAR scene, lines x columns.
pub fn sar_ground_truth() -> (Array2<f32>, Array2<f32>) {
    let mut r = rng("sar-ground");
    let vv = Array2::from_shape_fn((SAR_LINES, SAR_COLS), |_| r.gen_range(200u16..4000) as f32);
    let vh = Array2::from_shape_fn((SAR_LINES, SAR_COLS), |_| r.gen_range(80u16..2000) as f32);
    (vv, vh)
}

/// Input row holding the kept copy of each ground line.
fn input_row(line: usize) -> usize {
    SAR_SEAMS.iter().filter(|(at, _, _)| line >= *at).map(|(_, k, b)| k + b).sum::<usize>() + line
}

/// Burst-structured scene: each burst repeats the first rows of the next one above a black band.
fn burst_rows() -> Vec<Option<usize>> {
    let mut rows = Vec::new();
    let mut start = 0;
    for &(at, k, black) in &SAR_SEAMS {
        rows.extend((start..at + k).map(Some));
        rows.extend(std::iter::repeat(None).take(black));
        start = at;
    }
    rows.extend((start..SAR_LINES).map(Some));
    rows
}

fn write_sar(dir: &Path, projection: &Projection) -> Result<(PathBuf, PathBuf)> {
    let (vv, vh) = sar_ground_truth();
    let rows = burst_rows();
    let mut r = rng("sar-black");
    let mut planes = [Vec::new(), Vec::new()];
    for (plane, truth) in planes.iter_mut().zip([&vv, &vh]) {
        for row in &rows {
            match row {
                Some(line) => plane.extend(truth.row(*line).iter().map(|&a| a as u16)),
                None => plane.extend((0..SAR_COLS).map(|_| r.gen_range(0u16..4))),
            }
        }
    }
    let mut header = RasterHeader::new(SAR_COLS, rows.len(), DType::U16, vec!["VV".into(), "VH".into()]);
    header.modality = Some(Modality::Sar);
    header.acquired = Some("2021-06-20".into());
    let [a, b] = planes;
    let path = dir.join("s1_slc.json");
    io::write_raster(&path, &header, &RasterData::U16([a, b].concat()))?;

    let lines = [0, 20, 39, 40, 60, 79, 80, 100, SAR_LINES - 1];
    let cols = [0, 55, 110, 165, SAR_COLS - 1];
    let layers = [0.0, 2000.0]
        .iter()
        .map(|&height| {
            let mut points = Vec::new();
            for &g in &lines {
                for &c in &cols {
                    // Higher terrain shifts the line of sight east by 1 cm per meter.
                    let p = WorldPoint::new(SAR_ORIGIN.0 + 10.0 * c as f64 + 0.01 * height, SAR_ORIGIN.1 - 10.0 * g as f64);
                    let ll = projection.inverse(&p);
                    points.push(TiePoint { row: input_row(g) as f64, col: c as f64, lat: ll.lat, lon: ll.lon });
                }
            }
            GridLayer { height, lines: lines.len(), pixels: cols.len(), points }
        })
        .collect();
    let grid = GeolocationGrid { layers };
    grid.validate()?;
    let grid_path = dir.join("s1_slc.grid.json");
    crate::json::write_json(&grid_path, &grid)?;
    Ok((path, grid_path))
}

fn write_elevation(dir: &Path, projection: &Projection) -> Result<PathBuf> {
    let sw = projection.inverse(&WorldPoint::new(899_500.0, 6_499_500.0));
    let ne = projection.inverse(&WorldPoint::new(902_000.0, 6_501_000.0));
    let n = 20;
    let (dlon, dlat) = ((ne.lon - sw.lon) / (n - 1) as f64, (ne.lat - sw.lat) / (n - 1) as f64);
    let mut header = RasterHeader::new(n, n, DType::F32, vec!["elevation".into()]);
    header.geotransform = Some(GeoTransform::new([sw.lon, dlon, 0.0, ne.lat, 0.0, -dlat])?);
    let values = (0..n * n)
        .map(|i| {
            let (row, col) = ((i / n) as f32, (i % n) as f32);
            300.0 + 80.0 * col + 10.0 * row
        })
        .collect();
    let path = dir.join("elevation.json");
    io::write_raster(&path, &header, &RasterData::F32(values))?;
    Ok(path)
}

/// Writes the miniworld under `dir` and returns the path of its pipeline config.
pub fn write_miniworld(dir: &Path, seed: u64) -> Result<PathBuf> {
    let projection = Projection::from_spec(&ProjectionSpec::Lambert93)?;
    for sub in ["layers", "vhr", "ms", "sar"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let layers = dir.join("layers");
    write(&layers.join("manifest.json"), &manifest())?;
    write(&layers.join("bdtopo.geojson"), &collection(topo_features()?))?;
    write(&layers.join("tri.geojson"), &collection(flood_features()?))?;
    write(&layers.join("bu20.geojson"), &collection(urban_features()?))?;
    write(&layers.join("clc.geojson"), &collection(landcover_features()?))?;
    write(&layers.join("ema.geojson"), &collection(mountain_features()?))?;

    let mut tiles = Vec::new();
    for (id, department, west, north, w, h) in TILES {
        write_vhr(&dir.join("vhr"), id, west, north, w, h)?;
        tiles.push(json!({"path": format!("vhr/{id}.json"), "department": department}));
    }
    write_ms(&dir.join("ms"), "ms_2020_06", "2020-06-14", 0.02)?;
    write_ms(&dir.join("ms"), "ms_2021_07", "2021-07-02", 0.01)?;
    write_ms(&dir.join("ms"), "ms_2022_05", "2022-05-09", 0.05)?;
    write_sar(&dir.join("sar"), &projection)?;
    write_elevation(dir, &projection)?;

    let departments: serde_json::Map<String, Value> =
        TILES.iter().map(|t| (t.1.to_string(), json!(REGION))).collect();
    let config = json!({
        "profile": "desk",
        "seed": seed,
        "output_dir": "out",
        "projection": {"kind": "lambert93"},
        "manifest": "layers/manifest.json",
        "tiles": tiles,
        "departments": departments,
        "ms_scenes": ["ms/ms_2020_06.json", "ms/ms_2021_07.json", "ms/ms_2022_05.json"],
        "sar_scenes": [{"raster": "sar/s1_slc.json", "grid": "sar/s1_slc.grid.json"}],
        "elevation": {"kind": "grid", "path": "elevation.json"},
        "l_ms": 16,
        "l_sar": 32,
        "max_cloud": 0.03,
        "split_ratios": [0.6, 0.2, 0.2],
        "vocab_size": 1000
    });
    let path = dir.join("config.json");
    write(&path, &config)?;
    Ok(path)
}
