//! Raster references, VHR tiling into patches, scene selection and context windows.

pub mod elevation;
pub mod geolocation;
pub mod io;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Extent, GeoTransform, WorldPoint};
use crate::json::round6;
use crate::projection::Projection;

pub use elevation::{CachedElevation, ConstantElevation, ElevationProvider, GridElevation, HttpElevation};
pub use geolocation::{GeolocationGrid, GridLayer, TiePoint};
pub use io::{DType, Modality, RasterData, RasterHeader};

/// VHR ground sampling distance in meters.
pub const VHR_PIXEL_SIZE: f64 = 0.2;
/// Side of a VHR patch in pixels.
pub const PATCH_PIXELS: usize = 1000;
/// Number of multi-spectral bands kept per scene.
pub const MS_BANDS: usize = 10;

/// A raster file on disk together with its validated header.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterRef {
    pub id: String,
    pub path: PathBuf,
    pub modality: Modality,
    pub header: RasterHeader,
}

impl RasterRef {
    /// Opens a raster header and checks the modality-specific invariants.
    pub fn open(path: &Path, modality: Modality) -> Result<Self> {
        let header = io::read_header(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::from_header(id, path.to_path_buf(), modality, header)
    }

    pub fn from_header(id: String, path: PathBuf, modality: Modality, header: RasterHeader) -> Result<Self> {
        header.validate()?;
        if let Some(m) = header.modality {
            if m != modality {
                return Err(Error::Validation(format!("{id}: header declares {m:?}, expected {modality:?}")));
            }
        }
        match modality {
            Modality::Vhr => {
                let t = header
                    .geotransform
                    .ok_or_else(|| Error::Validation(format!("{id}: VHR tile without geotransform")))?;
                let [_, a, b, _, c, d] = t.coeffs();
                if b != 0.0 || c != 0.0 || (a - VHR_PIXEL_SIZE).abs() > 1e-9 || (d + VHR_PIXEL_SIZE).abs() > 1e-9 {
                    return Err(Error::Validation(format!(
                        "{id}: VHR tiles must be north-up at {VHR_PIXEL_SIZE} m/px"
                    )));
                }
            }
            Modality::Ms => {
                if header.geotransform.is_none() {
                    return Err(Error::Validation(format!("{id}: MS scene without geotransform")));
                }
                if header.bands != MS_BANDS {
                    return Err(Error::Validation(format!("{id}: MS scene has {} bands, expected {MS_BANDS}", header.bands)));
                }
            }
            Modality::Sar => {
                if header.geotransform.is_some() {
                    return Err(Error::Validation(format!("{id}: SAR rasters are addressed by geolocation grid only")));
                }
            }
        }
        Ok(Self { id, path, modality, header })
    }

    pub fn geotransform(&self) -> Result<&GeoTransform> {
        self.header
            .geotransform
            .as_ref()
            .ok_or_else(|| Error::Domain(format!("{} has no geotransform", self.id)))
    }

    pub fn read_data(&self) -> Result<RasterData> {
        io::read_data(&self.path, &self.header)
    }
}

/// Latitude, longitude (degrees) and altitude (meters) of a patch center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPosition {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

/// A VHR patch before geographic location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFootprint {
    pub id: String,
    pub tile_id: String,
    /// Pixel origin `(col, row)` of the patch inside its tile.
    pub origin: (usize, usize),
    pub extent: Extent,
    pub center: WorldPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub id: String,
    pub tile_id: String,
    pub origin: (usize, usize),
    pub extent: Extent,
    pub center: WorldPoint,
    pub position: GeoPosition,
}

impl Patch {
    /// Ground area of the patch in square meters.
    pub fn area(&self) -> f64 {
        self.extent.area()
    }

    /// World position of a patch pixel coordinate (0-based, pixel centers).
    pub fn pixel_to_world(&self, col: f64, row: f64) -> WorldPoint {
        WorldPoint::new(
            self.extent.min_x + (col + 0.5) * VHR_PIXEL_SIZE,
            self.extent.max_y - (row + 0.5) * VHR_PIXEL_SIZE,
        )
    }
}

impl PatchFootprint {
    /// Attaches latitude/longitude (rounded to 1e-6 degrees) and altitude.
    pub fn locate(self, projection: &Projection, elevation: &dyn ElevationProvider) -> Result<Patch> {
        let ll = projection.inverse(&self.center);
        let ll = crate::projection::LatLon { lat: round6(ll.lat), lon: round6(ll.lon) };
        let alt = elevation.altitude(ll)?;
        Ok(Patch {
            id: self.id,
            tile_id: self.tile_id,
            origin: self.origin,
            extent: self.extent,
            center: self.center,
            position: GeoPosition { lat: ll.lat, lon: ll.lon, alt: round6(alt) },
        })
    }
}

/// Splits a VHR tile into non-overlapping 1000x1000 px patches in row-major order.
pub fn tile_to_patches(tile: &RasterRef) -> Result<Vec<PatchFootprint>> {
    if tile.modality != Modality::Vhr {
        return Err(Error::Config(format!("{} is not a VHR tile", tile.id)));
    }
    let (w, h) = (tile.header.width, tile.header.height);
    if w % PATCH_PIXELS != 0 || h % PATCH_PIXELS != 0 {
        return Err(Error::Config(format!(
            "tile {} is {w}x{h} px, not a multiple of {PATCH_PIXELS}",
            tile.id
        )));
    }
    let t = tile.geotransform()?;
    let half = 0.5;
    let mut out = Vec::with_capacity((w / PATCH_PIXELS) * (h / PATCH_PIXELS));
    for pr in 0..h / PATCH_PIXELS {
        for pc in 0..w / PATCH_PIXELS {
            let (c0, r0) = (pc * PATCH_PIXELS, pr * PATCH_PIXELS);
            let nw = t.pixel_to_world(c0 as f64 - half, r0 as f64 - half);
            let se = t.pixel_to_world((c0 + PATCH_PIXELS) as f64 - half, (r0 + PATCH_PIXELS) as f64 - half);
            let extent = Extent::new(nw.x, se.y, se.x, nw.y)?;
            let center = t.pixel_to_world((c0 + PATCH_PIXELS / 2) as f64, (r0 + PATCH_PIXELS / 2) as f64);
            out.push(PatchFootprint {
                id: format!("{}_r{:02}_c{:02}", tile.id, pr, pc),
                tile_id: tile.id.clone(),
                origin: (c0, r0),
                extent,
                center,
            });
        }
    }
    Ok(out)
}

/// Keeps scenes with cloud fraction strictly below `max_cloud`, most recent first, ties by id.
pub fn filter_scenes(scenes: &[RasterRef], max_cloud: f64) -> Result<Vec<RasterRef>> {
    let mut kept = Vec::new();
    for s in scenes {
        let cloud = s
            .header
            .cloud_fraction
            .ok_or_else(|| Error::Validation(format!("scene {} has no cloud fraction", s.id)))?;
        if !(0.0..=1.0).contains(&cloud) {
            return Err(Error::Validation(format!("scene {}: cloud fraction {cloud} outside [0, 1]", s.id)));
        }
        if cloud < max_cloud {
            kept.push(s.clone());
        }
    }
    kept.sort_by(|a, b| b.header.acquired.cmp(&a.header.acquired).then_with(|| a.id.cmp(&b.id)));
    Ok(kept)
}

/// Square pixel window of side `size` with its top-left corner at `(col0, row0)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelWindow {
    pub raster_id: String,
    pub col0: usize,
    pub row0: usize,
    pub size: usize,
}

/// A context window together with the center pixel it was built around.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlacement {
    pub window: PixelWindow,
    /// Center pixel `(col, row)` in raster coordinates.
    pub center_px: (i64, i64),
    /// True when the window had to be shifted to stay inside the raster.
    pub truncated: bool,
}

/// Places a `size`-pixel window centered on `(col, row)` inside a `width x height` raster.
pub fn place_window(
    raster_id: &str,
    width: usize,
    height: usize,
    col: f64,
    row: f64,
    size: usize,
) -> Result<WindowPlacement> {
    if size == 0 {
        return Err(Error::Config("window size must be positive".into()));
    }
    let (cc, cr) = (col.round(), row.round());
    if !(cc >= 0.0 && cr >= 0.0 && cc < width as f64 && cr < height as f64) {
        return Err(Error::Domain(format!(
            "center pixel ({col:.2}, {row:.2}) outside {raster_id} ({width}x{height})"
        )));
    }
    if size > width || size > height {
        return Err(Error::Domain(format!("window of {size} px does not fit in {raster_id} ({width}x{height})")));
    }
    let (cc, cr) = (cc as i64, cr as i64);
    let half = (size / 2) as i64;
    let clamp = |v: i64, extent: usize| v.clamp(0, (extent - size) as i64);
    let (c0, r0) = (cc - half, cr - half);
    let (col0, row0) = (clamp(c0, width), clamp(r0, height));
    Ok(WindowPlacement {
        window: PixelWindow { raster_id: raster_id.to_string(), col0: col0 as usize, row0: row0 as usize, size },
        center_px: (cc, cr),
        truncated: col0 != c0 || row0 != r0,
    })
}

/// Multi-spectral context window of side `size` around the patch center.
pub fn ms_window(patch: &Patch, ms: &RasterRef, size: usize) -> Result<WindowPlacement> {
    let (col, row) = ms.geotransform()?.world_to_pixel(&patch.center);
    place_window(&ms.id, ms.header.width, ms.header.height, col, row, size)
}

/// SAR context window of side `size`, located through the tie-point grid and, for debursted
/// images, the input-row to output-row lookup.
pub fn sar_window(
    patch: &Patch,
    grid: &GeolocationGrid,
    row_lookup: Option<&[usize]>,
    raster_id: &str,
    width: usize,
    height: usize,
    size: usize,
) -> Result<WindowPlacement> {
    let (row, col) = grid.locate(patch.position.lat, patch.position.lon, patch.position.alt)?;
    let row = match row_lookup {
        Some(lookup) => {
            let r = row.round();
            if r < 0.0 || r as usize >= lookup.len() {
                return Err(Error::Domain(format!("row {row:.2} outside the deburst lookup")));
            }
            lookup[r as usize] as f64
        }
        None => row,
    };
    place_window(raster_id, width, height, col, row, size)
}

/// Copies a window out of band-major raster data, keeping the source dtype.
pub fn crop(header: &RasterHeader, data: &RasterData, w: &PixelWindow) -> Result<RasterData> {
    if w.size == 0 || w.col0 + w.size > header.width || w.row0 + w.size > header.height {
        return Err(Error::Domain(format!(
            "window ({}, {}, {}) outside raster {}x{}",
            w.col0, w.row0, w.size, header.width, header.height
        )));
    }
    fn copy<T: Copy>(src: &[T], header: &RasterHeader, w: &PixelWindow) -> Vec<T> {
        let mut out = Vec::with_capacity(w.size * w.size * header.bands);
        for b in 0..header.bands {
            let base = b * header.pixel_count();
            for r in w.row0..w.row0 + w.size {
                let start = base + r * header.width + w.col0;
                out.extend_from_slice(&src[start..start + w.size]);
            }
        }
        out
    }
    Ok(match data {
        RasterData::U8(v) => RasterData::U8(copy(v, header, w)),
        RasterData::U16(v) => RasterData::U16(copy(v, header, w)),
        RasterData::F32(v) => RasterData::F32(copy(v, header, w)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vhr(width: usize, height: usize) -> RasterRef {
        let mut h = RasterHeader::new(width, height, DType::U8, vec!["r".into(), "g".into(), "b".into()]);
        h.geotransform = Some(GeoTransform::north_up(1000.1, 2000.0 - 0.1, VHR_PIXEL_SIZE).unwrap());
        RasterRef::from_header("tile".into(), PathBuf::from("tile.json"), Modality::Vhr, h).unwrap()
    }

    fn scene(id: &str, date: &str, cloud: Option<f64>) -> RasterRef {
        let mut h = RasterHeader::new(10, 10, DType::U16, (0..10).map(|i| format!("b{i}")).collect());
        h.geotransform = Some(GeoTransform::north_up(5.0, 95.0, 10.0).unwrap());
        h.acquired = Some(date.into());
        h.cloud_fraction = cloud;
        RasterRef::from_header(id.into(), PathBuf::from(id), Modality::Ms, h).unwrap()
    }

    #[test]
    fn full_scale_tile_yields_625() {
        assert_eq!(tile_to_patches(&vhr(25_000, 25_000)).unwrap().len(), 625);
    }

    #[test]
    fn two_patches_abut() {
        let p = tile_to_patches(&vhr(2000, 1000)).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].extent.max_x, p[1].extent.min_x);
        assert!((p[0].extent.width() - 200.0).abs() < 1e-9);
        assert!((p[0].extent.height() - 200.0).abs() < 1e-9);
        assert_eq!(p[0].extent.min_x, 1000.0);
        assert_eq!(p[0].extent.max_y, 2000.0);
        // Center is the center of pixel (500, 500).
        assert!((p[0].center.x - 1100.1).abs() < 1e-9 && (p[0].center.y - 1899.9).abs() < 1e-9);
    }

    #[test]
    fn non_divisible_tile_is_config_error() {
        assert!(matches!(tile_to_patches(&vhr(1500, 1000)), Err(Error::Config(_))));
    }

    #[test]
    fn scene_filter() {
        let scenes = vec![scene("a", "2021-05-01", Some(0.01)), scene("b", "2021-06-01", Some(0.05))];
        let kept = filter_scenes(&scenes, 0.03).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
        assert!(filter_scenes(&[], 0.03).unwrap().is_empty());
        let tied = vec![scene("z", "2021-05-01", Some(0.0)), scene("m", "2021-05-01", Some(0.0))];
        let ids: Vec<_> = filter_scenes(&tied, 0.03).unwrap().into_iter().map(|s| s.id).collect();
        assert_eq!(ids, ["m", "z"]);
        let recent = vec![scene("old", "2020-01-01", Some(0.0)), scene("new", "2021-01-01", Some(0.0))];
        assert_eq!(filter_scenes(&recent, 0.03).unwrap()[0].id, "new");
        assert!(filter_scenes(&[scene("x", "2021-01-01", None)], 0.03).is_err());
    }

    #[test]
    fn window_centering_and_degenerate() {
        let p = place_window("ms", 300, 300, 150.0, 150.0, 100).unwrap();
        assert_eq!((p.window.col0, p.window.row0, p.window.size), (100, 100, 100));
        assert!(!p.truncated);
        let one = place_window("ms", 300, 300, 17.4, 33.6, 1).unwrap();
        assert_eq!((one.window.col0, one.window.row0), (17, 34));
        let edge = place_window("ms", 300, 300, 10.0, 290.0, 100).unwrap();
        assert_eq!((edge.window.col0, edge.window.row0), (0, 200));
        assert!(edge.truncated);
        assert!(place_window("ms", 300, 300, -3.0, 10.0, 10).is_err());
        assert!(place_window("ms", 50, 300, 10.0, 10.0, 100).is_err());
    }

    #[test]
    fn crop_identity_and_single_pixel() {
        let header = RasterHeader::new(4, 3, DType::U16, vec!["a".into(), "b".into()]);
        let data = RasterData::U16((0..24).collect());
        let h3 = RasterHeader::new(3, 3, DType::U16, vec!["a".into(), "b".into()]);
        let d3 = RasterData::U16((0..18).collect());
        let full = PixelWindow { raster_id: "x".into(), col0: 0, row0: 0, size: 3 };
        assert_eq!(crop(&h3, &d3, &full).unwrap(), d3);
        let px = PixelWindow { raster_id: "x".into(), col0: 2, row0: 1, size: 1 };
        assert_eq!(crop(&header, &data, &px).unwrap(), RasterData::U16(vec![6, 18]));
        let out = PixelWindow { raster_id: "x".into(), col0: 2, row0: 1, size: 3 };
        assert!(crop(&header, &data, &out).is_err());
    }
}
