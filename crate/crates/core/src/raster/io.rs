//! Raw raster container: a JSON header next to a band-sequential little-endian binary file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoTransform;
use crate::json::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    U16,
    F32,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    Vhr,
    Ms,
    Sar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: DType,
    pub geotransform: Option<GeoTransform>,
    pub band_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    /// Acquisition date, `YYYY-MM-DD`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquired: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_fraction: Option<f64>,
    /// Native ground sampling distance of each band in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_pixel_sizes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl RasterHeader {
    pub fn new(width: usize, height: usize, dtype: DType, band_names: Vec<String>) -> Self {
        Self {
            width,
            height,
            bands: band_names.len(),
            dtype,
            geotransform: None,
            band_names,
            modality: None,
            acquired: None,
            cloud_fraction: None,
            band_pixel_sizes: None,
            provenance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.bands == 0 {
            return Err(Error::Validation("raster with zero width, height or bands".into()));
        }
        if self.band_names.len() != self.bands {
            return Err(Error::Validation(format!(
                "{} band names for {} bands",
                self.band_names.len(),
                self.bands
            )));
        }
        if let Some(sizes) = &self.band_pixel_sizes {
            if sizes.len() != self.bands {
                return Err(Error::Validation("band_pixel_sizes length differs from band count".into()));
            }
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn byte_len(&self) -> usize {
        self.pixel_count() * self.bands * self.dtype.size()
    }
}

/// Band-major pixel storage (`band * width * height + row * width + col`).
#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl RasterData {
    pub fn dtype(&self) -> DType {
        match self {
            RasterData::U8(_) => DType::U8,
            RasterData::U16(_) => DType::U16,
            RasterData::F32(_) => DType::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RasterData::U8(v) => v.len(),
            RasterData::U16(v) => v.len(),
            RasterData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value at a flat index, widened to `f64`.
    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            RasterData::U8(v) => v[i] as f64,
            RasterData::U16(v) => v[i] as f64,
            RasterData::F32(v) => v[i] as f64,
        }
    }

    pub fn to_f32(&self) -> Vec<f32> {
        match self {
            RasterData::U8(v) => v.iter().map(|&x| x as f32).collect(),
            RasterData::U16(v) => v.iter().map(|&x| x as f32).collect(),
            RasterData::F32(v) => v.clone(),
        }
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            RasterData::U8(v) => v.clone(),
            RasterData::U16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            RasterData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_le_bytes(dtype: DType, bytes: &[u8]) -> Self {
        match dtype {
            DType::U8 => RasterData::U8(bytes.to_vec()),
            DType::U16 => RasterData::U16(bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()),
            DType::F32 => {
                RasterData::F32(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
            }
        }
    }
}

/// Path of the binary payload belonging to a header file.
pub fn data_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

pub fn read_header(path: &Path) -> Result<RasterHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: RasterHeader = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    header.validate()?;
    Ok(header)
}

pub fn read_data(header_path: &Path, header: &RasterHeader) -> Result<RasterData> {
    let path = data_path(header_path);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() != header.byte_len() {
        return Err(Error::Validation(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            header.byte_len(),
            bytes.len()
        )));
    }
    Ok(RasterData::from_le_bytes(header.dtype, &bytes))
}

pub fn read_raster(header_path: &Path) -> Result<(RasterHeader, RasterData)> {
    let header = read_header(header_path)?;
    let data = read_data(header_path, &header)?;
    Ok((header, data))
}

/// Writes header and payload. The header is pretty-printed with sorted keys.
pub fn write_raster(header_path: &Path, header: &RasterHeader, data: &RasterData) -> Result<()> {
    header.validate()?;
    if data.dtype() != header.dtype || data.len() != header.pixel_count() * header.bands {
        return Err(Error::Validation(format!(
            "payload of {} {:?} values does not match header {}x{}x{} {:?}",
            data.len(),
            data.dtype(),
            header.width,
            header.height,
            header.bands,
            header.dtype
        )));
    }
    crate::json::write_json(header_path, header)?;
    let path = data_path(header_path);
    fs::write(&path, data.to_le_bytes()).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let mut header = RasterHeader::new(3, 2, DType::F32, vec!["a".into(), "b".into()]);
        header.geotransform = Some(GeoTransform::north_up(10.0, 20.0, 0.5).unwrap());
        let data = RasterData::F32((0..12).map(|i| i as f32 * 0.1 - 0.3).collect());
        write_raster(&path, &header, &data).unwrap();
        let (h2, d2) = read_raster(&path).unwrap();
        assert_eq!(h2, header);
        assert_eq!(d2, data);
        assert_eq!(fs::metadata(data_path(&path)).unwrap().len(), 48);
    }

    #[test]
    fn short_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let header = RasterHeader::new(2, 2, DType::U16, vec!["a".into()]);
        write_raster(&path, &header, &RasterData::U16(vec![1, 2, 3, 4])).unwrap();
        fs::write(data_path(&path), [0u8; 6]).unwrap();
        assert!(matches!(read_raster(&path), Err(Error::Validation(_))));
    }
}
