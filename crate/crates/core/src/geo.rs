//! Planar geometry kernel.
//!
//! Everything here works in a single projected, meter-unit reference system. Polygons are
//! stored with open rings (the closing vertex is implicit) and any orientation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExtent")]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Deserialize)]
struct RawExtent {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl TryFrom<RawExtent> for Extent {
    type Error = Error;

    fn try_from(raw: RawExtent) -> Result<Self> {
        Extent::new(raw.min_x, raw.min_y, raw.max_x, raw.max_y)
    }
}

impl Extent {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let finite = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite());
        if !finite || max_x <= min_x || max_y <= min_y {
            return Err(Error::Domain(format!(
                "degenerate extent ({min_x}, {min_y}, {max_x}, {max_y})"
            )));
        }
        Ok(Self { min_x, min_y, max_x, max_y })
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> WorldPoint {
        WorldPoint::new(0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }

    /// Closed containment test.
    pub fn contains(&self, p: &WorldPoint) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Closed containment with a slack of `eps` on every side.
    pub fn contains_with(&self, p: &WorldPoint, eps: f64) -> bool {
        p.x >= self.min_x - eps
            && p.x <= self.max_x + eps
            && p.y >= self.min_y - eps
            && p.y <= self.max_y + eps
    }

    /// True when the closed rectangles share at least one point.
    pub fn touches(&self, other: &Extent) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn corners(&self) -> [WorldPoint; 4] {
        [
            WorldPoint::new(self.min_x, self.min_y),
            WorldPoint::new(self.max_x, self.min_y),
            WorldPoint::new(self.max_x, self.max_y),
            WorldPoint::new(self.min_x, self.max_y),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    exterior: Vec<WorldPoint>,
    holes: Vec<Vec<WorldPoint>>,
}

impl Polygon {
    /// Builds a validated polygon. Rings may be given closed or open; they are stored open.
    pub fn new(exterior: Vec<WorldPoint>, holes: Vec<Vec<WorldPoint>>) -> Result<Self> {
        let exterior = normalize_ring(exterior, "exterior ring")?;
        let holes = holes
            .into_iter()
            .enumerate()
            .map(|(i, h)| normalize_ring(h, &format!("hole {i}")))
            .collect::<Result<Vec<_>>>()?;
        let poly = Self { exterior, holes };
        if poly.area() <= 0.0 {
            return Err(Error::InvalidGeometry("polygon has no interior".into()));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle polygon.
    pub fn rectangle(e: &Extent) -> Self {
        Self { exterior: e.corners().to_vec(), holes: Vec::new() }
    }

    pub(crate) fn from_parts_unchecked(exterior: Vec<WorldPoint>, holes: Vec<Vec<WorldPoint>>) -> Self {
        Self { exterior, holes }
    }

    pub fn exterior(&self) -> &[WorldPoint] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<WorldPoint>] {
        &self.holes
    }

    pub fn area(&self) -> f64 {
        let holes: f64 = self.holes.iter().map(|h| ring_signed_area(h).abs()).sum();
        (ring_signed_area(&self.exterior).abs() - holes).max(0.0)
    }

    /// Area-weighted centroid and the (absolute) area it was weighted with.
    fn weighted_centroid(&self) -> Option<(WorldPoint, f64)> {
        let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
        let mut add = |ring: &[WorldPoint], sign: f64| {
            let a = ring_signed_area(ring);
            if a != 0.0 {
                let c = ring_centroid(ring, a);
                sx += sign * a.abs() * c.x;
                sy += sign * a.abs() * c.y;
                total += sign * a.abs();
            }
        };
        add(&self.exterior, 1.0);
        for h in &self.holes {
            add(h, -1.0);
        }
        (total > 0.0).then(|| (WorldPoint::new(sx / total, sy / total), total))
    }

    fn rings(&self) -> impl Iterator<Item = &Vec<WorldPoint>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

/// One of the supported vector geometry kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coordinates", rename_all = "snake_case")]
pub enum Geometry {
    Empty,
    Point(WorldPoint),
    Polyline(Vec<WorldPoint>),
    MultiPolyline(Vec<Vec<WorldPoint>>),
    Polygon(Polygon),
    MultiPolygon(Vec<Polygon>),
}

/// Coarse geometry family, used by class taxonomies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Point,
    Line,
    Polygon,
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryKind::Point => "point",
            GeometryKind::Line => "line",
            GeometryKind::Polygon => "polygon",
        })
    }
}

impl Geometry {
    pub fn point(x: f64, y: f64) -> Result<Self> {
        let p = WorldPoint::new(x, y);
        if !p.is_finite() {
            return Err(Error::InvalidGeometry("non-finite point".into()));
        }
        Ok(Geometry::Point(p))
    }

    pub fn polyline(points: Vec<WorldPoint>) -> Result<Self> {
        Ok(Geometry::Polyline(normalize_line(points)?))
    }

    pub fn multi_polyline(parts: Vec<Vec<WorldPoint>>) -> Result<Self> {
        let parts = parts.into_iter().map(normalize_line).collect::<Result<Vec<_>>>()?;
        Ok(Geometry::MultiPolyline(parts))
    }

    pub fn kind(&self) -> Option<GeometryKind> {
        match self {
            Geometry::Empty => None,
            Geometry::Point(_) => Some(GeometryKind::Point),
            Geometry::Polyline(_) | Geometry::MultiPolyline(_) => Some(GeometryKind::Line),
            Geometry::Polygon(_) | Geometry::MultiPolygon(_) => Some(GeometryKind::Polygon),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Geometry::Empty => true,
            Geometry::MultiPolyline(parts) => parts.is_empty(),
            Geometry::MultiPolygon(parts) => parts.is_empty(),
            _ => false,
        }
    }

    pub fn polygons(&self) -> &[Polygon] {
        match self {
            Geometry::Polygon(p) => std::slice::from_ref(p),
            Geometry::MultiPolygon(ps) => ps,
            _ => &[],
        }
    }

    fn lines(&self) -> Vec<&[WorldPoint]> {
        match self {
            Geometry::Polyline(l) => vec![l.as_slice()],
            Geometry::MultiPolyline(ls) => ls.iter().map(Vec::as_slice).collect(),
            _ => Vec::new(),
        }
    }

    fn vertices(&self) -> Vec<WorldPoint> {
        match self {
            Geometry::Empty => Vec::new(),
            Geometry::Point(p) => vec![*p],
            Geometry::Polyline(l) => l.clone(),
            Geometry::MultiPolyline(ls) => ls.iter().flatten().copied().collect(),
            Geometry::Polygon(p) => p.rings().flatten().copied().collect(),
            Geometry::MultiPolygon(ps) => ps.iter().flat_map(|p| p.rings().flatten().copied()).collect(),
        }
    }

    /// Bounding box of all vertices, or `None` for empty geometries.
    pub fn bounds(&self) -> Option<[f64; 4]> {
        let verts = self.vertices();
        let first = verts.first()?;
        let init = [first.x, first.y, first.x, first.y];
        Some(verts.iter().fold(init, |b, p| [b[0].min(p.x), b[1].min(p.y), b[2].max(p.x), b[3].max(p.y)]))
    }

    /// Total length of linear parts (0 for points and polygons).
    pub fn length(&self) -> f64 {
        self.lines()
            .iter()
            .map(|l| l.windows(2).map(|w| w[0].distance(&w[1])).sum::<f64>())
            .sum()
    }

    /// Size measure used to rank instances: area for polygons, length for lines, 0 for points.
    pub fn measure(&self) -> f64 {
        match self.kind() {
            Some(GeometryKind::Polygon) => self.polygons().iter().map(Polygon::area).sum(),
            Some(GeometryKind::Line) => self.length(),
            _ => 0.0,
        }
    }
}

/// Planar area of a polygonal geometry in square meters.
pub fn area(g: &Geometry) -> Result<f64> {
    match g {
        Geometry::Polygon(_) | Geometry::MultiPolygon(_) => Ok(g.polygons().iter().map(Polygon::area).sum()),
        other => Err(Error::Domain(format!("area of non-areal geometry {:?}", other.kind()))),
    }
}

/// Area-weighted centroid for polygons, vertex mean for points and polylines.
pub fn centroid(g: &Geometry) -> Result<WorldPoint> {
    let empty = || Error::Domain("centroid of empty geometry".into());
    match g {
        Geometry::Polygon(_) | Geometry::MultiPolygon(_) => {
            let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
            for (c, a) in g.polygons().iter().filter_map(Polygon::weighted_centroid) {
                sx += a * c.x;
                sy += a * c.y;
                total += a;
            }
            if total > 0.0 {
                Ok(WorldPoint::new(sx / total, sy / total))
            } else {
                Err(empty())
            }
        }
        _ => {
            let verts = g.vertices();
            if verts.is_empty() {
                return Err(empty());
            }
            let n = verts.len() as f64;
            let (sx, sy) = verts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            Ok(WorldPoint::new(sx / n, sy / n))
        }
    }
}

/// Distance between two geometries, measured between their centroids.
pub fn distance(a: &Geometry, b: &Geometry) -> Result<f64> {
    Ok(centroid(a)?.distance(&centroid(b)?))
}

/// Intersection of a geometry with an extent. Empty results are returned as empty values.
pub fn clip(g: &Geometry, e: &Extent) -> Geometry {
    match g {
        Geometry::Empty => Geometry::Empty,
        Geometry::Point(p) => {
            if e.contains(p) {
                Geometry::Point(*p)
            } else {
                Geometry::Empty
            }
        }
        Geometry::Polyline(_) | Geometry::MultiPolyline(_) => {
            let parts: Vec<Vec<WorldPoint>> = g.lines().into_iter().flat_map(|l| clip_line(l, e)).collect();
            match parts.len() {
                1 => Geometry::Polyline(parts.into_iter().next().unwrap()),
                _ => Geometry::MultiPolyline(parts),
            }
        }
        Geometry::Polygon(_) | Geometry::MultiPolygon(_) => {
            let parts: Vec<Polygon> = g.polygons().iter().filter_map(|p| clip_polygon(p, e)).collect();
            match (g, parts.len()) {
                (Geometry::Polygon(_), 1) => Geometry::Polygon(parts.into_iter().next().unwrap()),
                _ => Geometry::MultiPolygon(parts),
            }
        }
    }
}

fn clip_polygon(p: &Polygon, e: &Extent) -> Option<Polygon> {
    let exterior = clip_ring(&p.exterior, e);
    if exterior.len() < 3 || ring_signed_area(&exterior) == 0.0 {
        return None;
    }
    let holes = p
        .holes
        .iter()
        .map(|h| clip_ring(h, e))
        .filter(|h| h.len() >= 3 && ring_signed_area(h) != 0.0)
        .collect();
    let clipped = Polygon::from_parts_unchecked(exterior, holes);
    (clipped.area() > 0.0).then_some(clipped)
}

#[derive(Clone, Copy)]
enum Edge {
    Left(f64),
    Right(f64),
    Bottom(f64),
    Top(f64),
}

impl Edge {
    fn inside(self, p: &WorldPoint) -> bool {
        match self {
            Edge::Left(v) => p.x >= v,
            Edge::Right(v) => p.x <= v,
            Edge::Bottom(v) => p.y >= v,
            Edge::Top(v) => p.y <= v,
        }
    }

    fn intersect(self, a: &WorldPoint, b: &WorldPoint) -> WorldPoint {
        match self {
            Edge::Left(v) | Edge::Right(v) => {
                let t = (v - a.x) / (b.x - a.x);
                WorldPoint::new(v, a.y + t * (b.y - a.y))
            }
            Edge::Bottom(v) | Edge::Top(v) => {
                let t = (v - a.y) / (b.y - a.y);
                WorldPoint::new(a.x + t * (b.x - a.x), v)
            }
        }
    }
}

// Sutherland-Hodgman against the four half-planes of the extent. Concave inputs can produce
// zero-width bridges along the boundary; those carry no area.
fn clip_ring(ring: &[WorldPoint], e: &Extent) -> Vec<WorldPoint> {
    let edges = [Edge::Left(e.min_x), Edge::Right(e.max_x), Edge::Bottom(e.min_y), Edge::Top(e.max_y)];
    let mut out = ring.to_vec();
    for edge in edges {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        let mut prev = *input.last().unwrap();
        for cur in input {
            match (edge.inside(&prev), edge.inside(&cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(edge.intersect(&prev, &cur)),
                (false, true) => {
                    out.push(edge.intersect(&prev, &cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
            prev = cur;
        }
    }
    out.dedup();
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

// Liang-Barsky per segment; consecutive visible pieces are chained into runs.
fn clip_line(line: &[WorldPoint], e: &Extent) -> Vec<Vec<WorldPoint>> {
    let mut runs: Vec<Vec<WorldPoint>> = Vec::new();
    let mut current: Vec<WorldPoint> = Vec::new();
    for w in line.windows(2) {
        match clip_segment(&w[0], &w[1], e) {
            Some((a, b)) if a != b => {
                if current.last() != Some(&a) {
                    if current.len() >= 2 {
                        runs.push(std::mem::take(&mut current));
                    }
                    current.clear();
                    current.push(a);
                }
                current.push(b);
            }
            _ => {
                if current.len() >= 2 {
                    runs.push(std::mem::take(&mut current));
                }
                current.clear();
            }
        }
    }
    if current.len() >= 2 {
        runs.push(current);
    }
    runs
}

fn clip_segment(a: &WorldPoint, b: &WorldPoint, e: &Extent) -> Option<(WorldPoint, WorldPoint)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let checks = [
        (-dx, a.x - e.min_x),
        (dx, e.max_x - a.x),
        (-dy, a.y - e.min_y),
        (dy, e.max_y - a.y),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| {
        if t == 0.0 {
            *a
        } else if t == 1.0 {
            *b
        } else {
            WorldPoint::new(a.x + t * dx, a.y + t * dy)
        }
    };
    Some((at(t0), at(t1)))
}

fn ring_signed_area(ring: &[WorldPoint]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    // Shift to the first vertex to limit cancellation on projected coordinates.
    let o = ring[0];
    let mut twice = 0.0;
    for i in 0..ring.len() {
        let p = ring[i];
        let q = ring[(i + 1) % ring.len()];
        twice += (p.x - o.x) * (q.y - o.y) - (q.x - o.x) * (p.y - o.y);
    }
    0.5 * twice
}

fn ring_centroid(ring: &[WorldPoint], signed_area: f64) -> WorldPoint {
    let o = ring[0];
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..ring.len() {
        let (px, py) = (ring[i].x - o.x, ring[i].y - o.y);
        let q = ring[(i + 1) % ring.len()];
        let (qx, qy) = (q.x - o.x, q.y - o.y);
        let cross = px * qy - qx * py;
        cx += (px + qx) * cross;
        cy += (py + qy) * cross;
    }
    let k = 1.0 / (6.0 * signed_area);
    WorldPoint::new(o.x + cx * k, o.y + cy * k)
}

fn normalize_line(mut points: Vec<WorldPoint>) -> Result<Vec<WorldPoint>> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidGeometry("non-finite coordinate".into()));
    }
    points.dedup();
    if points.len() < 2 {
        return Err(Error::InvalidGeometry("polyline needs two distinct vertices".into()));
    }
    Ok(points)
}

fn normalize_ring(mut ring: Vec<WorldPoint>, what: &str) -> Result<Vec<WorldPoint>> {
    if ring.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidGeometry(format!("{what}: non-finite coordinate")));
    }
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::InvalidGeometry(format!("{what}: fewer than 3 distinct vertices")));
    }
    if ring_signed_area(&ring) == 0.0 {
        return Err(Error::InvalidGeometry(format!("{what}: collinear vertices")));
    }
    if ring_self_intersects(&ring) {
        return Err(Error::InvalidGeometry(format!("{what}: self-intersecting ring")));
    }
    Ok(ring)
}

fn orient(a: &WorldPoint, b: &WorldPoint, c: &WorldPoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: &WorldPoint, b: &WorldPoint, p: &WorldPoint) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: &WorldPoint, b: &WorldPoint, c: &WorldPoint, d: &WorldPoint) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn ring_self_intersects(ring: &[WorldPoint]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (&ring[i], &ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (c, d) = (&ring[j], &ring[(j + 1) % n]);
            if adjacent {
                // Adjacent edges share one vertex; they only conflict when they fold back.
                let shared = if j == i + 1 { b } else { a };
                let (other_a, other_b) = if j == i + 1 { (a, d) } else { (b, c) };
                if orient(shared, other_a, other_b) == 0.0
                    && (other_a.x - shared.x) * (other_b.x - shared.x) + (other_a.y - shared.y) * (other_b.y - shared.y) > 0.0
                {
                    return true;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// One cell of the 3x3 grid laid over an image, row 0 being the north edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub row: u8,
    pub col: u8,
}

impl GridCell {
    pub const ALL: [GridCell; 9] = {
        let mut cells = [GridCell { row: 0, col: 0 }; 9];
        let mut i = 0;
        while i < 9 {
            cells[i] = GridCell { row: (i / 3) as u8, col: (i % 3) as u8 };
            i += 1;
        }
        cells
    };

    pub fn new(row: u8, col: u8) -> Result<Self> {
        if row > 2 || col > 2 {
            return Err(Error::Domain(format!("grid cell ({row}, {col}) out of range")));
        }
        Ok(Self { row, col })
    }

    pub fn label(&self) -> &'static str {
        const LABELS: [[&str; 3]; 3] = [
            ["top-left", "top", "top-right"],
            ["left", "center", "right"],
            ["bottom-left", "bottom", "bottom-right"],
        ];
        LABELS[self.row as usize][self.col as usize]
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == label)
    }
}

/// Cell of the 3x3 grid over `e` containing `p`. Points on an internal boundary go to the
/// lower row/column index.
pub fn grid_cell(p: &WorldPoint, e: &Extent) -> Result<GridCell> {
    if !p.is_finite() || !e.contains(p) {
        return Err(Error::Domain(format!("point ({}, {}) outside extent", p.x, p.y)));
    }
    let bin = |offset: f64, span: f64| -> u8 {
        let t = 3.0 * offset / span;
        (t.ceil() - 1.0).clamp(0.0, 2.0) as u8
    };
    let col = bin(p.x - e.min_x, e.width());
    let row = bin(e.max_y - p.y, e.height());
    Ok(GridCell { row, col })
}

/// Eight 45-degree slices of a regular octagon, centered on the compass directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OctagonSector {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl OctagonSector {
    pub const ALL: [OctagonSector; 8] = [
        OctagonSector::N,
        OctagonSector::NE,
        OctagonSector::E,
        OctagonSector::SE,
        OctagonSector::S,
        OctagonSector::SW,
        OctagonSector::W,
        OctagonSector::NW,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            OctagonSector::N => "north",
            OctagonSector::NE => "north-east",
            OctagonSector::E => "east",
            OctagonSector::SE => "south-east",
            OctagonSector::S => "south",
            OctagonSector::SW => "south-west",
            OctagonSector::W => "west",
            OctagonSector::NW => "north-west",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.label() == label)
    }
}

/// Compass bearing of `v` in degrees, clockwise from +y, in `[0, 360)`.
pub fn bearing_degrees(dx: f64, dy: f64) -> f64 {
    let b = dx.atan2(dy).to_degrees();
    if b < 0.0 {
        b + 360.0
    } else {
        b
    }
}

/// Sector of `target` seen from `reference`. A bearing exactly on a sector boundary belongs to
/// the sector that comes first going clockwise.
pub fn octagon_sector(reference: &WorldPoint, target: &WorldPoint) -> Result<OctagonSector> {
    let (dx, dy) = (target.x - reference.x, target.y - reference.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Domain("zero displacement has no sector".into()));
    }
    if !(dx.is_finite() && dy.is_finite()) {
        return Err(Error::Domain("non-finite displacement".into()));
    }
    let b = bearing_degrees(dx, dy);
    let idx = ((b - 22.5) / 45.0).ceil().rem_euclid(8.0) as usize;
    Ok(OctagonSector::ALL[idx])
}

/// Affine map from pixel coordinates to world coordinates. Integer pixel coordinates address
/// pixel centers: `x = c0 + col*c1 + row*c2`, `y = c3 + col*c4 + row*c5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct GeoTransform {
    coeffs: [f64; 6],
    inverse: [f64; 4],
}

impl TryFrom<[f64; 6]> for GeoTransform {
    type Error = Error;

    fn try_from(coeffs: [f64; 6]) -> Result<Self> {
        GeoTransform::new(coeffs)
    }
}

impl From<GeoTransform> for [f64; 6] {
    fn from(t: GeoTransform) -> Self {
        t.coeffs
    }
}

impl GeoTransform {
    pub fn new(coeffs: [f64; 6]) -> Result<Self> {
        let [_, a, b, _, c, d] = coeffs;
        let det = a * d - b * c;
        if !coeffs.iter().all(|v| v.is_finite()) || det == 0.0 || !det.is_finite() {
            return Err(Error::Config(format!("non-invertible geotransform {coeffs:?}")));
        }
        Ok(Self { coeffs, inverse: [d / det, -b / det, -c / det, a / det] })
    }

    /// North-up transform with square pixels; `(x0, y0)` is the center of pixel (0, 0).
    pub fn north_up(x0: f64, y0: f64, pixel_size: f64) -> Result<Self> {
        Self::new([x0, pixel_size, 0.0, y0, 0.0, -pixel_size])
    }

    pub fn identity() -> Self {
        Self::new([0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).expect("identity is invertible")
    }

    pub fn coeffs(&self) -> [f64; 6] {
        self.coeffs
    }

    /// Pixel size along columns and rows (absolute values of the scaled axes).
    pub fn pixel_size(&self) -> (f64, f64) {
        let [_, a, b, _, c, d] = self.coeffs;
        (a.hypot(c), b.hypot(d))
    }

    pub fn pixel_to_world(&self, col: f64, row: f64) -> WorldPoint {
        let [x0, a, b, y0, c, d] = self.coeffs;
        WorldPoint::new(x0 + col * a + row * b, y0 + col * c + row * d)
    }

    pub fn world_to_pixel(&self, p: &WorldPoint) -> (f64, f64) {
        let [x0, _, _, y0, _, _] = self.coeffs;
        let (dx, dy) = (p.x - x0, p.y - y0);
        let [ia, ib, ic, id] = self.inverse;
        (ia * dx + ib * dy, ic * dx + id * dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> WorldPoint {
        WorldPoint::new(x, y)
    }

    fn square(x0: f64, y0: f64, side: f64) -> Geometry {
        Geometry::Polygon(
            Polygon::new(vec![pt(x0, y0), pt(x0 + side, y0), pt(x0 + side, y0 + side), pt(x0, y0 + side)], vec![])
                .unwrap(),
        )
    }

    #[test]
    fn square_area() {
        assert_eq!(area(&square(0.0, 0.0, 10.0)).unwrap(), 100.0);
    }

    #[test]
    fn collinear_polygon_rejected() {
        let err = Polygon::new(vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(2.0, 2.0)], vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidGeometry(_)));
    }

    #[test]
    fn bowtie_rejected() {
        let err =
            Polygon::new(vec![pt(0.0, 0.0), pt(2.0, 2.0), pt(2.0, 0.0), pt(0.0, 1.0)], vec![]).unwrap_err();
        assert!(err.to_string().contains("self-intersecting"));
    }

    #[test]
    fn closed_rings_are_opened() {
        let p = Polygon::new(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(1.0, 1.0), pt(0.0, 0.0)], vec![]).unwrap();
        assert_eq!(p.exterior().len(), 3);
        assert!((p.area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn area_of_non_areal_is_domain_error() {
        assert!(matches!(area(&Geometry::point(1.0, 2.0).unwrap()), Err(Error::Domain(_))));
    }

    #[test]
    fn holes_reduce_area_and_shift_centroid() {
        let outer = vec![pt(0.0, 0.0), pt(4.0, 0.0), pt(4.0, 4.0), pt(0.0, 4.0)];
        let hole = vec![pt(2.0, 0.5), pt(3.5, 0.5), pt(3.5, 2.0), pt(2.0, 2.0)];
        let g = Geometry::Polygon(Polygon::new(outer, vec![hole]).unwrap());
        assert!((area(&g).unwrap() - (16.0 - 2.25)).abs() < 1e-12);
        let c = centroid(&g).unwrap();
        assert!(c.x < 2.0 && c.y > 2.0);
    }

    #[test]
    fn unit_square_centroid() {
        let c = centroid(&square(0.0, 0.0, 1.0)).unwrap();
        assert!((c.x - 0.5).abs() < 1e-12 && (c.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn point_centroid_is_itself() {
        assert_eq!(centroid(&Geometry::point(3.0, -2.0).unwrap()).unwrap(), pt(3.0, -2.0));
        assert!(centroid(&Geometry::Empty).is_err());
        assert!(centroid(&Geometry::MultiPolygon(vec![])).is_err());
    }

    #[test]
    fn three_four_five() {
        let a = Geometry::point(0.0, 0.0).unwrap();
        let b = Geometry::point(3.0, 4.0).unwrap();
        assert_eq!(distance(&a, &b).unwrap(), 5.0);
        assert_eq!(distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn clip_inside_and_half() {
        let e = Extent::new(0.0, 0.0, 100.0, 100.0).unwrap();
        let inside = square(10.0, 10.0, 10.0);
        assert_eq!(clip(&inside, &e), inside);
        let half = square(-5.0, 10.0, 10.0);
        assert!((area(&clip(&half, &e)).unwrap() - 50.0).abs() < 1e-12);
        let outside = square(200.0, 10.0, 10.0);
        let c = clip(&outside, &e);
        assert!(c.is_empty());
        assert_eq!(area(&c).unwrap(), 0.0);
    }

    #[test]
    fn clip_polyline_splits_runs() {
        let e = Extent::new(0.0, 0.0, 10.0, 10.0).unwrap();
        // In, out through the right edge, back in.
        let line = Geometry::polyline(vec![pt(1.0, 1.0), pt(15.0, 1.0), pt(15.0, 5.0), pt(1.0, 5.0)]).unwrap();
        let c = clip(&line, &e);
        match &c {
            Geometry::MultiPolyline(parts) => assert_eq!(parts.len(), 2),
            other => panic!("expected two runs, got {other:?}"),
        }
        assert!((c.length() - 18.0).abs() < 1e-12);
        let touching = Geometry::polyline(vec![pt(10.0, 20.0), pt(10.0, 30.0)]).unwrap();
        assert!(clip(&touching, &e).is_empty());
    }

    #[test]
    fn grid_cells() {
        let e = Extent::new(0.0, 0.0, 300.0, 300.0).unwrap();
        assert_eq!(grid_cell(&pt(150.0, 150.0), &e).unwrap().label(), "center");
        // Min corner is the south-west corner: bottom-left in a north-up image.
        assert_eq!(grid_cell(&pt(0.0, 0.0), &e).unwrap().label(), "bottom-left");
        assert_eq!(grid_cell(&pt(0.0, 300.0), &e).unwrap().label(), "top-left");
        // Boundary at x = 100 goes to the lower column index.
        assert_eq!(grid_cell(&pt(100.0, 150.0), &e).unwrap(), GridCell { row: 1, col: 0 });
        // Boundary at y = 200 (between top and middle rows) goes to row 0.
        assert_eq!(grid_cell(&pt(150.0, 200.0), &e).unwrap(), GridCell { row: 0, col: 1 });
        assert!(grid_cell(&pt(-1.0, 0.0), &e).is_err());
    }

    #[test]
    fn sectors() {
        let o = pt(0.0, 0.0);
        assert_eq!(octagon_sector(&o, &pt(0.0, 1.0)).unwrap(), OctagonSector::N);
        assert_eq!(octagon_sector(&o, &pt(1.0, 1.0)).unwrap(), OctagonSector::NE);
        assert_eq!(octagon_sector(&o, &pt(1.0, 0.0)).unwrap(), OctagonSector::E);
        assert_eq!(octagon_sector(&o, &pt(0.0, -1.0)).unwrap(), OctagonSector::S);
        assert_eq!(octagon_sector(&o, &pt(-1.0, 0.0)).unwrap(), OctagonSector::W);
        assert_eq!(octagon_sector(&o, &pt(-1.0, 1.0)).unwrap(), OctagonSector::NW);
        assert!(octagon_sector(&o, &o).is_err());
    }

    #[test]
    fn transforms() {
        let id = GeoTransform::identity();
        assert_eq!(id.world_to_pixel(&pt(3.5, -2.0)), (3.5, -2.0));
        let t = GeoTransform::north_up(0.0, 0.0, 10.0).unwrap();
        assert_eq!(t.world_to_pixel(&pt(100.0, -100.0)), (10.0, 10.0));
        assert!(GeoTransform::new([0.0, 1.0, 2.0, 0.0, 2.0, 4.0]).is_err());
    }
}
