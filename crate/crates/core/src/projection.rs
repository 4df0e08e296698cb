//! Projected coordinate system declaration and geographic conversion.
//!
//! Only Lambert conformal conic (two standard parallels) is supported; Lambert-93 is the
//! preset used for metropolitan France.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::WorldPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProjectionSpec {
    Lambert93,
    Lcc {
        semi_major: f64,
        inverse_flattening: f64,
        lat1: f64,
        lat2: f64,
        lat0: f64,
        lon0: f64,
        false_easting: f64,
        false_northing: f64,
    },
}

impl Default for ProjectionSpec {
    fn default() -> Self {
        ProjectionSpec::Lambert93
    }
}

/// Geographic coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Projection {
    a: f64,
    e: f64,
    n: f64,
    af: f64,
    rho0: f64,
    lon0: f64,
    x0: f64,
    y0: f64,
}

impl Projection {
    pub fn from_spec(spec: &ProjectionSpec) -> Result<Self> {
        match *spec {
            ProjectionSpec::Lambert93 => {
                Self::lcc(6_378_137.0, 298.257_222_101, 49.0, 44.0, 46.5, 3.0, 700_000.0, 6_600_000.0)
            }
            ProjectionSpec::Lcc {
                semi_major,
                inverse_flattening,
                lat1,
                lat2,
                lat0,
                lon0,
                false_easting,
                false_northing,
            } => Self::lcc(semi_major, inverse_flattening, lat1, lat2, lat0, lon0, false_easting, false_northing),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn lcc(a: f64, inv_f: f64, lat1: f64, lat2: f64, lat0: f64, lon0: f64, x0: f64, y0: f64) -> Result<Self> {
        if !(a > 0.0 && inv_f > 1.0) || lat1 == lat2 || [lat1, lat2, lat0].iter().any(|l| l.abs() >= 90.0) {
            return Err(Error::Config("invalid Lambert conformal conic parameters".into()));
        }
        let f = 1.0 / inv_f;
        let e = (2.0 * f - f * f).sqrt();
        let (p1, p2, p0) = (lat1.to_radians(), lat2.to_radians(), lat0.to_radians());
        let (m1, m2) = (m_of(p1, e), m_of(p2, e));
        let (t1, t2, t0) = (t_of(p1, e), t_of(p2, e), t_of(p0, e));
        let n = (m1.ln() - m2.ln()) / (t1.ln() - t2.ln());
        let af = a * m1 / (n * t1.powf(n));
        Ok(Self { a, e, n, af, rho0: af * t0.powf(n), lon0: lon0.to_radians(), x0, y0 })
    }

    pub fn forward(&self, ll: LatLon) -> WorldPoint {
        let rho = self.af * t_of(ll.lat.to_radians(), self.e).powf(self.n);
        let theta = self.n * (ll.lon.to_radians() - self.lon0);
        WorldPoint::new(self.x0 + rho * theta.sin(), self.y0 + self.rho0 - rho * theta.cos())
    }

    pub fn inverse(&self, p: &WorldPoint) -> LatLon {
        let s = self.n.signum();
        let dx = p.x - self.x0;
        let dy = self.rho0 - (p.y - self.y0);
        let rho = s * dx.hypot(dy);
        let theta = (s * dx).atan2(s * dy);
        let t = (rho / self.af).powf(1.0 / self.n);
        let e = self.e;
        let mut phi = std::f64::consts::FRAC_PI_2 - 2.0 * t.atan();
        for _ in 0..30 {
            let es = e * phi.sin();
            let next = std::f64::consts::FRAC_PI_2 - 2.0 * (t * ((1.0 - es) / (1.0 + es)).powf(e / 2.0)).atan();
            let done = (next - phi).abs() < 1e-14;
            phi = next;
            if done {
                break;
            }
        }
        LatLon { lat: phi.to_degrees(), lon: (theta / self.n + self.lon0).to_degrees() }
    }

    pub fn semi_major(&self) -> f64 {
        self.a
    }
}

fn m_of(phi: f64, e: f64) -> f64 {
    phi.cos() / (1.0 - (e * phi.sin()).powi(2)).sqrt()
}

fn t_of(phi: f64, e: f64) -> f64 {
    let es = e * phi.sin();
    (std::f64::consts::FRAC_PI_4 - phi / 2.0).tan() / ((1.0 - es) / (1.0 + es)).powf(e / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert93_origin() {
        let p = Projection::from_spec(&ProjectionSpec::Lambert93).unwrap();
        let w = p.forward(LatLon { lat: 46.5, lon: 3.0 });
        assert!((w.x - 700_000.0).abs() < 1e-6 && (w.y - 6_600_000.0).abs() < 1e-6);
    }

    #[test]
    fn lambert93_round_trip() {
        let p = Projection::from_spec(&ProjectionSpec::Lambert93).unwrap();
        for &(lat, lon) in &[(48.853, 2.35), (45.9, 6.6), (43.6, 3.88), (50.9, -1.5)] {
            let back = p.inverse(&p.forward(LatLon { lat, lon }));
            assert!((back.lat - lat).abs() < 1e-10 && (back.lon - lon).abs() < 1e-10);
        }
    }

    #[test]
    fn lambert93_paris_is_north_west_of_origin() {
        let p = Projection::from_spec(&ProjectionSpec::Lambert93).unwrap();
        let w = p.forward(LatLon { lat: 48.8566, lon: 2.3522 });
        // Paris lies roughly 48 km west and 262 km north of the false origin.
        assert!((w.x - 652_000.0).abs() < 2_000.0, "{w:?}");
        assert!((w.y - 6_862_000.0).abs() < 2_000.0, "{w:?}");
    }
}
