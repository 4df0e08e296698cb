//! Tie-point geolocation grids mapping geographic positions to SAR image rows and columns.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiePoint {
    pub row: f64,
    pub col: f64,
    pub lat: f64,
    pub lon: f64,
}

/// Regular lattice of `lines x pixels` tie points (row-major) valid at one terrain height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayer {
    pub height: f64,
    pub lines: usize,
    pub pixels: usize,
    pub points: Vec<TiePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeolocationGrid {
    pub layers: Vec<GridLayer>,
}

impl GridLayer {
    fn node(&self, i: usize, j: usize) -> &TiePoint {
        &self.points[i * self.pixels + j]
    }

    fn validate(&self) -> Result<()> {
        if self.lines < 2 || self.pixels < 2 || self.points.len() != self.lines * self.pixels {
            return Err(Error::Validation(format!(
                "geolocation layer needs a {}x{} lattice of at least 2x2 points, found {}",
                self.lines,
                self.pixels,
                self.points.len()
            )));
        }
        Ok(())
    }

    /// Fractional `(row, col)` of a geographic position, or `None` outside the lattice hull.
    pub fn locate(&self, lat: f64, lon: f64) -> Option<(f64, f64)> {
        const EPS: f64 = 1e-9;
        for i in 0..self.lines - 1 {
            for j in 0..self.pixels - 1 {
                let quad = [self.node(i, j), self.node(i, j + 1), self.node(i + 1, j), self.node(i + 1, j + 1)];
                let (min_lat, max_lat, min_lon, max_lon) = quad.iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
                    |(a, b, c, d), p| (a.min(p.lat), b.max(p.lat), c.min(p.lon), d.max(p.lon)),
                );
                let pad = 1e-12 + EPS * (max_lat - min_lat).max(max_lon - min_lon);
                if lat < min_lat - pad || lat > max_lat + pad || lon < min_lon - pad || lon > max_lon + pad {
                    continue;
                }
                if let Some((u, v)) = invert_bilinear(quad, lat, lon) {
                    if (-EPS..=1.0 + EPS).contains(&u) && (-EPS..=1.0 + EPS).contains(&v) {
                        let interp = |f: fn(&TiePoint) -> f64| {
                            let [p00, p01, p10, p11] = quad;
                            (1.0 - u) * (1.0 - v) * f(p00) + u * (1.0 - v) * f(p01) + (1.0 - u) * v * f(p10) + u * v * f(p11)
                        };
                        return Some((interp(|p| p.row), interp(|p| p.col)));
                    }
                }
            }
        }
        None
    }
}

/// Solves for `(u, v)` (u along pixels, v along lines) such that the bilinear blend of the
/// quad's geographic corners equals `(lat, lon)`. Newton iteration from the cell center.
fn invert_bilinear(quad: [&TiePoint; 4], lat: f64, lon: f64) -> Option<(f64, f64)> {
    let [p00, p01, p10, p11] = quad;
    let eval = |u: f64, v: f64| {
        let f = |g: fn(&TiePoint) -> f64| {
            (1.0 - u) * (1.0 - v) * g(p00) + u * (1.0 - v) * g(p01) + (1.0 - u) * v * g(p10) + u * v * g(p11)
        };
        (f(|p| p.lon), f(|p| p.lat))
    };
    let (mut u, mut v) = (0.5, 0.5);
    for _ in 0..60 {
        let (x, y) = eval(u, v);
        let (rx, ry) = (x - lon, y - lat);
        // Partial derivatives of the bilinear map.
        let dxu = (1.0 - v) * (p01.lon - p00.lon) + v * (p11.lon - p10.lon);
        let dxv = (1.0 - u) * (p10.lon - p00.lon) + u * (p11.lon - p01.lon);
        let dyu = (1.0 - v) * (p01.lat - p00.lat) + v * (p11.lat - p10.lat);
        let dyv = (1.0 - u) * (p10.lat - p00.lat) + u * (p11.lat - p01.lat);
        let det = dxu * dyv - dxv * dyu;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let du = (rx * dyv - ry * dxv) / det;
        let dv = (ry * dxu - rx * dyu) / det;
        u -= du;
        v -= dv;
        if du.abs() < 1e-15 && dv.abs() < 1e-15 {
            break;
        }
    }
    let (x, y) = eval(u, v);
    let scale = [p00, p01, p10, p11]
        .iter()
        .map(|p| p.lat.abs().max(p.lon.abs()))
        .fold(1.0, f64::max);
    ((x - lon).abs() <= 1e-12 * scale && (y - lat).abs() <= 1e-12 * scale).then_some((u, v))
}

impl GeolocationGrid {
    pub fn open(path: &Path) -> Result<Self> {
        let grid: GeolocationGrid = crate::json::read_json(path)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Validation("geolocation grid without layers".into()));
        }
        self.layers.iter().try_for_each(GridLayer::validate)
    }

    /// Layer whose height is nearest to `alt` (lower height wins ties).
    pub fn layer_for(&self, alt: f64) -> &GridLayer {
        self.layers
            .iter()
            .min_by(|a, b| {
                let (da, db) = ((a.height - alt).abs(), (b.height - alt).abs());
                da.total_cmp(&db).then(a.height.total_cmp(&b.height))
            })
            .expect("validated grid has layers")
    }

    /// Image `(row, col)` of a geographic position at altitude `alt`.
    pub fn locate(&self, lat: f64, lon: f64, alt: f64) -> Result<(f64, f64)> {
        self.layer_for(alt)
            .locate(lat, lon)
            .ok_or_else(|| Error::Domain(format!("({lat:.6}, {lon:.6}) outside the geolocation grid hull")))
    }

    /// True when the position falls inside the layer selected for `alt`.
    pub fn covers(&self, lat: f64, lon: f64, alt: f64) -> bool {
        self.layer_for(alt).locate(lat, lon).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed_layer(height: f64) -> GridLayer {
        let mut points = Vec::new();
        for i in 0..4 {
            for j in 0..5 {
                let (row, col) = (i as f64 * 100.0, j as f64 * 250.0);
                // Slightly rotated, non-affine lattice.
                let lat = 45.0 + 0.002 * i as f64 + 0.0003 * j as f64 + 0.00001 * (i * j) as f64;
                let lon = 6.0 + 0.004 * j as f64 - 0.0005 * i as f64;
                points.push(TiePoint { row, col, lat, lon });
            }
        }
        GridLayer { height, lines: 4, pixels: 5, points }
    }

    #[test]
    fn tie_point_is_exact() {
        let g = GeolocationGrid { layers: vec![skewed_layer(0.0)] };
        let n = g.layers[0].points[7];
        let (r, c) = g.locate(n.lat, n.lon, 0.0).unwrap();
        assert!((r - n.row).abs() < 1e-6 && (c - n.col).abs() < 1e-6, "{r} {c}");
    }

    #[test]
    fn edge_midpoint_is_mean() {
        let layer = skewed_layer(0.0);
        let (a, b) = (layer.points[0], layer.points[1]);
        let g = GeolocationGrid { layers: vec![layer] };
        let (r, c) = g.locate(0.5 * (a.lat + b.lat), 0.5 * (a.lon + b.lon), 0.0).unwrap();
        assert!((r - 0.5 * (a.row + b.row)).abs() < 1e-6);
        assert!((c - 0.5 * (a.col + b.col)).abs() < 1e-6);
    }

    #[test]
    fn outside_hull_errors() {
        let g = GeolocationGrid { layers: vec![skewed_layer(0.0)] };
        assert!(matches!(g.locate(44.0, 6.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn nearest_height_layer() {
        let mut high = skewed_layer(1000.0);
        for p in &mut high.points {
            p.row += 3.0;
        }
        let g = GeolocationGrid { layers: vec![skewed_layer(0.0), high] };
        let n = g.layers[0].points[6];
        let (low_r, _) = g.locate(n.lat, n.lon, 100.0).unwrap();
        let (high_r, _) = g.locate(n.lat, n.lon, 900.0).unwrap();
        assert!((high_r - low_r - 3.0).abs() < 1e-6);
        assert_eq!(g.layer_for(500.0).height, 0.0);
    }
}
