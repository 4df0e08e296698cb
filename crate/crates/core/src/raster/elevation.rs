//! Altitude lookup for patch centers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::io::{self, RasterData, RasterHeader};
use crate::error::{Error, Result};
use crate::geo::{GeoTransform, WorldPoint};
use crate::projection::LatLon;

/// Maps a geographic position to an altitude in meters.
pub trait ElevationProvider: Send + Sync {
    fn altitude(&self, ll: LatLon) -> Result<f64>;

    /// Persists any lookup state; a no-op for stateless providers.
    fn flush(&self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantElevation(pub f64);

impl ElevationProvider for ConstantElevation {
    fn altitude(&self, _ll: LatLon) -> Result<f64> {
        Ok(self.0)
    }
}

/// Gridded elevation model stored in the raw raster format (single f32 band, meters), with a
/// geotransform expressed in degrees (x = longitude, y = latitude). Bilinear interpolation.
#[derive(Debug, Clone)]
pub struct GridElevation {
    header: RasterHeader,
    transform: GeoTransform,
    values: Vec<f32>,
}

impl GridElevation {
    pub fn open(path: &Path) -> Result<Self> {
        let (header, data) = io::read_raster(path)?;
        Self::new(header, data)
    }

    pub fn new(header: RasterHeader, data: RasterData) -> Result<Self> {
        let transform = header
            .geotransform
            .ok_or_else(|| Error::Validation("elevation grid without geotransform".into()))?;
        match data {
            RasterData::F32(values) if header.bands == 1 => Ok(Self { header, transform, values }),
            _ => Err(Error::Validation("elevation grid must be a single f32 band".into())),
        }
    }
}

impl ElevationProvider for GridElevation {
    fn altitude(&self, ll: LatLon) -> Result<f64> {
        let (col, row) = self.transform.world_to_pixel(&WorldPoint::new(ll.lon, ll.lat));
        let (w, h) = (self.header.width, self.header.height);
        let eps = 1e-9;
        if !(col >= -eps && row >= -eps && col <= (w - 1) as f64 + eps && row <= (h - 1) as f64 + eps) {
            return Err(Error::Elevation(format!("({}, {}) outside elevation grid", ll.lat, ll.lon)));
        }
        let (col, row) = (col.clamp(0.0, (w - 1) as f64), row.clamp(0.0, (h - 1) as f64));
        let (c0, r0) = (col.floor() as usize, row.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(w - 1), (r0 + 1).min(h - 1));
        let (fx, fy) = (col - c0 as f64, row - r0 as f64);
        let v = |c: usize, r: usize| self.values[r * w + c] as f64;
        let top = v(c0, r0) * (1.0 - fx) + v(c1, r0) * fx;
        let bottom = v(c0, r1) * (1.0 - fx) + v(c1, r1) * fx;
        Ok(top * (1.0 - fy) + bottom * fy)
    }
}

/// Remote altimetry service queried as `GET {base_url}?lon=..&lat=..`. Accepts responses of the
/// form `{"elevations": [z]}` or `{"elevations": [{"z": z, ...}]}`.
#[derive(Debug, Clone)]
pub struct HttpElevation {
    base_url: String,
    agent: ureq::Agent,
}

impl HttpElevation {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { base_url: base_url.to_string(), agent }
    }
}

pub(crate) fn parse_elevation_response(body: &str) -> Result<f64> {
    let v: Value = serde_json::from_str(body).map_err(|e| Error::Elevation(format!("bad response: {e}")))?;
    let first = v
        .get("elevations")
        .and_then(Value::as_array)
        .and_then(|a| a.first())
        .ok_or_else(|| Error::Elevation("response without elevations".into()))?;
    first
        .as_f64()
        .or_else(|| first.get("z").and_then(Value::as_f64))
        .ok_or_else(|| Error::Elevation("non-numeric elevation".into()))
}

impl ElevationProvider for HttpElevation {
    fn altitude(&self, ll: LatLon) -> Result<f64> {
        let sep = if self.base_url.contains('?') { '&' } else { '?' };
        let url = format!("{}{sep}lon={:.6}&lat={:.6}", self.base_url, ll.lon, ll.lat);
        let mut resp = self.agent.get(&url).call().map_err(|e| Error::Elevation(format!("{url}: {e}")))?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Elevation(format!("{url}: {e}")))?;
        parse_elevation_response(&body)
    }
}

type CacheKey = (i64, i64);

fn cache_key(ll: LatLon) -> CacheKey {
    ((ll.lat * 1e6).round() as i64, (ll.lon * 1e6).round() as i64)
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    /// `[lat * 1e6, lon * 1e6, altitude]`, sorted.
    entries: Vec<(i64, i64, f64)>,
}

/// Read-mostly cache in front of another provider, keyed by coordinates rounded to 1e-6
/// degrees. The inner provider is always queried at the rounded coordinate.
pub struct CachedElevation<P> {
    inner: P,
    cache: RwLock<BTreeMap<CacheKey, f64>>,
    path: Option<PathBuf>,
}

impl<P: ElevationProvider> CachedElevation<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, cache: RwLock::new(BTreeMap::new()), path: None }
    }

    /// Cache persisted at `path`; existing entries are loaded.
    pub fn persistent(inner: P, path: &Path) -> Result<Self> {
        let mut cache = BTreeMap::new();
        if path.exists() {
            let file: CacheFile = crate::json::read_json(path)?;
            cache.extend(file.entries.into_iter().map(|(a, b, z)| ((a, b), z)));
        }
        Ok(Self { inner, cache: RwLock::new(cache), path: Some(path.to_path_buf()) })
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("elevation cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let entries = self
            .cache
            .read()
            .expect("elevation cache poisoned")
            .iter()
            .map(|(&(a, b), &z)| (a, b, z))
            .collect();
        crate::json::write_json(path, &CacheFile { entries })
    }
}

impl<P: ElevationProvider> ElevationProvider for CachedElevation<P> {
    fn altitude(&self, ll: LatLon) -> Result<f64> {
        let key = cache_key(ll);
        if let Some(z) = self.cache.read().expect("elevation cache poisoned").get(&key) {
            return Ok(*z);
        }
        let rounded = LatLon { lat: key.0 as f64 / 1e6, lon: key.1 as f64 / 1e6 };
        let z = self.inner.altitude(rounded)?;
        self.cache.write().expect("elevation cache poisoned").insert(key, z);
        Ok(z)
    }

    fn flush(&self) -> Result<()> {
        self.save()
    }
}

impl<P: ElevationProvider + ?Sized> ElevationProvider for Box<P> {
    fn altitude(&self, ll: LatLon) -> Result<f64> {
        (**self).altitude(ll)
    }

    fn flush(&self) -> Result<()> {
        (**self).flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::io::DType;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Counting(Arc<AtomicUsize>);

    impl ElevationProvider for Counting {
        fn altitude(&self, ll: LatLon) -> Result<f64> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(ll.lat * 100.0 + ll.lon)
        }
    }

    fn grid() -> GridElevation {
        let mut h = RasterHeader::new(3, 2, DType::F32, vec!["z".into()]);
        // Pixel (0, 0) at lon 2.0, lat 46.0; 0.1 degree steps, north-up.
        h.geotransform = Some(GeoTransform::new([2.0, 0.1, 0.0, 46.0, 0.0, -0.1]).unwrap());
        GridElevation::new(h, RasterData::F32(vec![0.0, 10.0, 20.0, 100.0, 110.0, 120.0])).unwrap()
    }

    #[test]
    fn grid_interpolates() {
        let g = grid();
        assert_eq!(g.altitude(LatLon { lat: 46.0, lon: 2.0 }).unwrap(), 0.0);
        let mid = g.altitude(LatLon { lat: 45.95, lon: 2.05 }).unwrap();
        assert!((mid - 55.0).abs() < 1e-6, "{mid}");
        assert!(g.altitude(LatLon { lat: 47.0, lon: 2.0 }).is_err());
    }

    #[test]
    fn cache_is_transparent() {
        let calls = Arc::new(AtomicUsize::new(0));
        let cached = CachedElevation::new(Counting(calls.clone()));
        let ll = LatLon { lat: 45.123456, lon: 6.654321 };
        let first = cached.altitude(ll).unwrap();
        let second = cached.altitude(ll).unwrap();
        assert_eq!(first, second);
        assert_eq!(first, Counting(Arc::new(AtomicUsize::new(0))).altitude(ll).unwrap());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn cache_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let ll = LatLon { lat: 45.5, lon: 6.25 };
        {
            let c = CachedElevation::persistent(ConstantElevation(812.5), &path).unwrap();
            c.altitude(ll).unwrap();
            c.save().unwrap();
        }
        let c = CachedElevation::persistent(ConstantElevation(-1.0), &path).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.altitude(ll).unwrap(), 812.5);
    }

    #[test]
    fn response_shapes() {
        assert_eq!(parse_elevation_response(r#"{"elevations":[123.5]}"#).unwrap(), 123.5);
        assert_eq!(parse_elevation_response(r#"{"elevations":[{"lon":1,"lat":2,"z":7.25}]}"#).unwrap(), 7.25);
        assert!(parse_elevation_response(r#"{"oops":1}"#).is_err());
    }

    #[test]
    fn http_provider_against_local_server() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 2048];
            let n = stream.read(&mut buf).unwrap();
            let request = String::from_utf8_lossy(&buf[..n]).to_string();
            let body = r#"{"elevations":[{"z":431.25}]}"#;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
            request
        });
        let provider = HttpElevation::new(&format!("http://{addr}/alti"), Duration::from_secs(5));
        let z = provider.altitude(LatLon { lat: 45.9, lon: 6.1 }).unwrap();
        assert_eq!(z, 431.25);
        let request = server.join().unwrap();
        assert!(request.starts_with("GET /alti?lon=6.100000&lat=45.900000"), "{request}");
    }
}
