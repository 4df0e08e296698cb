//! SAR preparation: burst stitching of SLC amplitude images, dB conversion, dataset-level tail
//! clipping statistics and normalization.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::round6;

/// Dual-polarization SLC amplitude image.
#[derive(Debug, Clone, PartialEq)]
pub struct SlcImage {
    pub vv: Array2<f32>,
    pub vh: Array2<f32>,
}

impl SlcImage {
    pub fn new(vv: Array2<f32>, vh: Array2<f32>) -> Result<Self> {
        if vv.dim() != vh.dim() {
            return Err(Error::Domain(format!("VV {:?} and VH {:?} shapes differ", vv.dim(), vh.dim())));
        }
        if vv.is_empty() {
            return Err(Error::Domain("empty SLC image".into()));
        }
        if vv.iter().chain(vh.iter()).any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Domain("amplitudes must be finite and non-negative".into()));
        }
        Ok(Self { vv, vh })
    }

    pub fn rows(&self) -> usize {
        self.vv.nrows()
    }

    pub fn cols(&self) -> usize {
        self.vv.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeburstConfig {
    /// A row is black when its energy is below `mean / black_factor`.
    pub black_factor: f64,
    /// Maximum absolute difference for two rows to count as duplicates.
    pub dup_tolerance: f32,
}

impl Default for DeburstConfig {
    fn default() -> Self {
        Self { black_factor: 1.5, dup_tolerance: 0.0 }
    }
}

/// Half-open row range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowBand {
    pub start: usize,
    pub end: usize,
}

impl RowBand {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Row bookkeeping of a deburst run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeburstLayout {
    pub input_rows: usize,
    /// Output row -> input row; strictly increasing.
    pub provenance: Vec<usize>,
    /// Input row -> output row showing the same ground content. Removed duplicate rows point at
    /// their kept twin, black rows at the next kept row.
    pub row_lookup: Vec<usize>,
    pub black_bands: Vec<RowBand>,
    /// Number of duplicated rows removed above each black band.
    pub overlaps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeburstedImage {
    pub vv: Array2<f32>,
    pub vh: Array2<f32>,
    pub layout: DeburstLayout,
}

/// Energy of each row, summed over both polarizations: `sum_c a(r, c)^2`.
pub fn row_energy(img: &SlcImage) -> Vec<f64> {
    let vv = plane_row_energy(&img.vv);
    let vh = plane_row_energy(&img.vh);
    vv.iter().zip(vh).map(|(a, b)| a + b).collect()
}

pub fn plane_row_energy(plane: &Array2<f32>) -> Vec<f64> {
    plane
        .axis_iter(Axis(0))
        .map(|row| row.iter().map(|&a| (a as f64) * (a as f64)).sum())
        .collect()
}

/// Maximal runs of rows whose energy is below `mean / factor`.
pub fn detect_black_rows(energies: &[f64], factor: f64) -> Result<Vec<RowBand>> {
    if energies.is_empty() {
        return Err(Error::Domain("no rows".into()));
    }
    if !(factor > 0.0) {
        return Err(Error::Config(format!("black-row factor must be positive, got {factor}")));
    }
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("image has no energy".into()));
    }
    let threshold = mean / factor;
    let mut bands = Vec::new();
    let mut start = None;
    for (i, &e) in energies.iter().enumerate() {
        match (e < threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                bands.push(RowBand { start: s, end: i });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        bands.push(RowBand { start: s, end: energies.len() });
    }
    if bands.len() == 1 && bands[0].start == 0 && bands[0].end == energies.len() {
        return Err(Error::Degenerate("every row is black".into()));
    }
    Ok(bands)
}

fn rows_equal(a: ArrayView1<f32>, b: ArrayView1<f32>, tol: f32) -> bool {
    if tol == 0.0 {
        a == b
    } else {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }
}

/// Largest `k <= max_k` such that the `k` rows above `band` equal the `k` rows below it.
fn overlap_len(plane: &Array2<f32>, band: RowBand, max_k: usize, tol: f32) -> usize {
    (1..=max_k)
        .rev()
        .find(|&k| (0..k).all(|i| rows_equal(plane.row(band.start - k + i), plane.row(band.end + i), tol)))
        .unwrap_or(0)
}

/// Removes black separator rows and the duplicated overlap rows above each separator.
pub fn deburst(img: &SlcImage, cfg: &DeburstConfig) -> Result<DeburstedImage> {
    let rows = img.rows();
    let bands = detect_black_rows(&row_energy(img), cfg.black_factor)?;
    if bands.first().is_some_and(|b| b.start == 0) && bands.last().is_some_and(|b| b.end == rows) {
        return Err(Error::Degenerate("black bands at both the first and the last row".into()));
    }

    let mut keep = vec![true; rows];
    // Twin of a removed duplicate row (in the burst below the separator).
    let mut twin: Vec<Option<usize>> = vec![None; rows];
    let mut overlaps = Vec::with_capacity(bands.len());
    for (i, band) in bands.iter().enumerate() {
        keep[band.start..band.end].iter_mut().for_each(|k| *k = false);
        if band.start == 0 || band.end == rows {
            overlaps.push(0);
            continue;
        }
        let above = band.start - if i == 0 { 0 } else { bands[i - 1].end };
        let below = bands.get(i + 1).map_or(rows, |b| b.start) - band.end;
        let max_k = above.min(below);
        let k_vv = overlap_len(&img.vv, *band, max_k, cfg.dup_tolerance);
        let k_vh = overlap_len(&img.vh, *band, max_k, cfg.dup_tolerance);
        if k_vv != k_vh {
            return Err(Error::Degenerate(format!(
                "overlap above rows {}..{} differs between VV ({k_vv}) and VH ({k_vh})",
                band.start, band.end
            )));
        }
        for j in 0..k_vv {
            let r = band.start - k_vv + j;
            keep[r] = false;
            twin[r] = Some(band.end + j);
        }
        overlaps.push(k_vv);
    }

    let provenance: Vec<usize> = (0..rows).filter(|&r| keep[r]).collect();
    if provenance.is_empty() {
        return Err(Error::Degenerate("no rows survive stitching".into()));
    }
    let mut out_index = vec![usize::MAX; rows];
    for (o, &r) in provenance.iter().enumerate() {
        out_index[r] = o;
    }
    let mut row_lookup = vec![0usize; rows];
    // Walk bottom-up so the next kept row and any twin are already resolved.
    let mut next_kept: Option<usize> = None;
    for r in (0..rows).rev() {
        row_lookup[r] = if keep[r] {
            next_kept = Some(out_index[r]);
            out_index[r]
        } else if let Some(t) = twin[r] {
            row_lookup[t]
        } else {
            next_kept.unwrap_or(provenance.len() - 1)
        };
    }

    let select = |plane: &Array2<f32>| plane.select(Axis(0), &provenance);
    Ok(DeburstedImage {
        vv: select(&img.vv),
        vh: select(&img.vh),
        layout: DeburstLayout { input_rows: rows, provenance, row_lookup, black_bands: bands, overlaps },
    })
}

/// Floor applied before the logarithm for a stored sample type.
pub fn default_epsilon(dtype: crate::raster::DType) -> f64 {
    match dtype {
        crate::raster::DType::U8 | crate::raster::DType::U16 => 1.0,
        crate::raster::DType::F32 => f32::from_bits(1) as f64,
    }
}

/// Amplitude to decibels: `20 log10(max(a, eps))`.
pub fn to_db(amplitude: &[f32], eps: f64) -> Vec<f64> {
    amplitude.iter().map(|&a| 20.0 * (a as f64).max(eps).log10()).collect()
}

/// VV/VH ratio in the dB domain.
pub fn ratio_channel(vv_db: &[f64], vh_db: &[f64]) -> Result<Vec<f64>> {
    if vv_db.len() != vh_db.len() {
        return Err(Error::Domain(format!("ratio of blocks with {} and {} values", vv_db.len(), vh_db.len())));
    }
    Ok(vv_db.iter().zip(vh_db).map(|(a, b)| a - b).collect())
}

/// Fixed-range histogram; out-of-range values land in the first or last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SparseHistogram", try_from = "SparseHistogram")]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct SparseHistogram {
    min: f64,
    max: f64,
    bins: usize,
    /// Non-empty bins as `[index, count]`.
    counts: Vec<(usize, u64)>,
}

impl From<Histogram> for SparseHistogram {
    fn from(h: Histogram) -> Self {
        let counts = h.counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)).collect();
        Self { min: h.min, max: h.max, bins: h.counts.len(), counts }
    }
}

impl TryFrom<SparseHistogram> for Histogram {
    type Error = Error;

    fn try_from(s: SparseHistogram) -> Result<Self> {
        let mut h = Histogram::new(s.min, s.max, s.bins)?;
        for (i, c) in s.counts {
            *h.counts
                .get_mut(i)
                .ok_or_else(|| Error::Validation(format!("histogram bin {i} out of range")))? = c;
        }
        Ok(h)
    }
}

impl Histogram {
    pub fn new(min: f64, max: f64, bins: usize) -> Result<Self> {
        if !(min < max) || bins == 0 {
            return Err(Error::Config(format!("bad histogram range [{min}, {max}) with {bins} bins")));
        }
        Ok(Self { min, max, counts: vec![0; bins] })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn width(&self) -> f64 {
        (self.max - self.min) / self.bins() as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        if i == self.bins() {
            self.max
        } else {
            self.min + i as f64 * self.width()
        }
    }

    pub fn add(&mut self, v: f64) {
        let i = ((v - self.min) / self.width()).floor();
        let i = if i.is_nan() { 0 } else { i.clamp(0.0, (self.bins() - 1) as f64) as usize };
        self.counts[i] += 1;
    }

    pub fn extend(&mut self, values: &[f64]) {
        values.iter().for_each(|&v| self.add(v));
    }

    /// Adds another histogram with the same binning.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.min != other.min || self.max != other.max || self.bins() != other.bins() {
            return Err(Error::Domain("merging histograms with different binning".into()));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Clip bounds for the `(lo, hi)` quantiles: the lower edge of the bin holding the low
    /// quantile and the upper edge of the bin holding the high quantile.
    pub fn clip_bounds(&self, p_lo: f64, p_hi: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&p_lo) || !(0.0..=1.0).contains(&p_hi) || p_lo >= p_hi {
            return Err(Error::Config(format!("bad percentile pair ({p_lo}, {p_hi})")));
        }
        let total = self.total();
        if total == 0 {
            return Err(Error::Domain("clip bounds of an empty histogram".into()));
        }
        let bin_of = |p: f64| {
            let target = ((p * total as f64).ceil() as u64).max(1);
            let mut cum = 0;
            self.counts
                .iter()
                .position(|&c| {
                    cum += c;
                    cum >= target
                })
                .unwrap_or(self.bins() - 1)
        };
        // Rounded like the persisted form, so reloaded stats normalize identically.
        Ok((round6(self.edge(bin_of(p_lo))), round6(self.edge(bin_of(p_hi) + 1))))
    }
}

/// Clip bounds of one channel together with the histogram they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub histogram: Histogram,
    pub percentiles: (f64, f64),
    pub lo: f64,
    pub hi: f64,
}

impl ChannelStats {
    pub fn from_histogram(histogram: Histogram, percentiles: (f64, f64)) -> Result<Self> {
        let (lo, hi) = histogram.clip_bounds(percentiles.0, percentiles.1)?;
        Ok(Self { histogram, percentiles, lo, hi })
    }
}

/// Clips to `[lo, hi]` and maps affinely onto `[0, 1]`.
pub fn tail_clip_and_normalize(block: &[f64], stats: &ChannelStats) -> Result<Vec<f32>> {
    let (lo, hi) = (stats.lo, stats.hi);
    if !(lo < hi) {
        return Err(Error::Degenerate(format!("clip bounds lo = {lo} and hi = {hi} do not span a range")));
    }
    let span = hi - lo;
    Ok(block.iter().map(|&v| ((v.clamp(lo, hi) - lo) / span) as f32).collect())
}

pub const CHANNELS: [&str; 3] = ["vv", "vh", "ratio"];

/// Histogram ranges and percentile choice for the three SAR channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub percentiles: (f64, f64),
    pub db_range: (f64, f64),
    pub ratio_range: (f64, f64),
    pub bin_width: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { percentiles: (0.01, 0.99), db_range: (-50.0, 150.0), ratio_range: (-100.0, 100.0), bin_width: 0.01 }
    }
}

/// Accumulates dB histograms for VV, VH and the ratio channel. Merge is associative.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    pub channels: BTreeMap<String, Histogram>,
}

impl StatsAccumulator {
    pub fn new(cfg: &StatsConfig) -> Result<Self> {
        let hist = |(lo, hi): (f64, f64)| Histogram::new(lo, hi, ((hi - lo) / cfg.bin_width).round() as usize);
        let mut channels = BTreeMap::new();
        channels.insert("vv".to_string(), hist(cfg.db_range)?);
        channels.insert("vh".to_string(), hist(cfg.db_range)?);
        channels.insert("ratio".to_string(), hist(cfg.ratio_range)?);
        Ok(Self { channels })
    }

    pub fn add_block(&mut self, vv_db: &[f64], vh_db: &[f64]) -> Result<()> {
        let ratio = ratio_channel(vv_db, vh_db)?;
        self.channels.get_mut("vv").unwrap().extend(vv_db);
        self.channels.get_mut("vh").unwrap().extend(vh_db);
        self.channels.get_mut("ratio").unwrap().extend(&ratio);
        Ok(())
    }

    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<()> {
        for (name, h) in &mut self.channels {
            h.merge(&other.channels[name])?;
        }
        Ok(())
    }

    pub fn finish(self, percentiles: (f64, f64)) -> Result<BTreeMap<String, ChannelStats>> {
        self.channels
            .into_iter()
            .map(|(name, h)| Ok((name, ChannelStats::from_histogram(h, percentiles)?)))
            .collect()
    }
}

/// Normalized three-channel (VV, VH, VV/VH) block, band-major.
pub fn normalize_patch(
    vv_amp: &[f32],
    vh_amp: &[f32],
    eps: f64,
    stats: &BTreeMap<String, ChannelStats>,
) -> Result<Vec<f32>> {
    let get = |name: &str| {
        stats
            .get(name)
            .ok_or_else(|| Error::Validation(format!("channel stats missing '{name}'")))
    };
    let vv = to_db(vv_amp, eps);
    let vh = to_db(vh_amp, eps);
    let ratio = ratio_channel(&vv, &vh)?;
    let mut out = tail_clip_and_normalize(&vv, get("vv")?)?;
    out.extend(tail_clip_and_normalize(&vh, get("vh")?)?);
    out.extend(tail_clip_and_normalize(&ratio, get("ratio")?)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn img(rows: &[[f32; 3]]) -> SlcImage {
        let a = Array2::from_shape_vec((rows.len(), 3), rows.iter().flatten().copied().collect()).unwrap();
        SlcImage::new(a.clone(), a).unwrap()
    }

    #[test]
    fn energies() {
        let i = img(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0, 2.0, 3.0]]);
        let e = plane_row_energy(&i.vv);
        assert_eq!(e, vec![0.0, 3.0, 14.0]);
        assert_eq!(row_energy(&i), vec![0.0, 6.0, 28.0]);
    }

    #[test]
    fn uniform_energy_has_no_band() {
        assert!(detect_black_rows(&[5.0; 10], 1.5).unwrap().is_empty());
    }

    #[test]
    fn single_dark_band() {
        let mut e = vec![100.0; 10];
        e[4] = 0.0;
        e[5] = 0.0;
        assert_eq!(detect_black_rows(&e, 1.5).unwrap(), vec![RowBand { start: 4, end: 6 }]);
        assert!(matches!(detect_black_rows(&[0.0, 0.0], 1.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn overlap_rows_removed() {
        // Rows A, B, C | black | C, D, E -> A, B, C, D, E.
        let (a, b, c, d, e) = ([9.0, 8.0, 7.0], [6.0, 9.0, 8.0], [7.0, 7.0, 9.0], [8.0, 6.0, 9.0], [9.0, 9.0, 6.0]);
        let z = [0.0, 0.0, 0.0];
        let out = deburst(&img(&[a, b, c, z, c, d, e]), &DeburstConfig::default()).unwrap();
        let expect = img(&[a, b, c, d, e]);
        assert_eq!(out.vv, expect.vv);
        assert_eq!(out.layout.provenance, vec![0, 1, 4, 5, 6]);
        assert_eq!(out.layout.overlaps, vec![1]);
        // The removed upper C maps to the kept lower C; the black row to the next kept row.
        assert_eq!(out.layout.row_lookup, vec![0, 1, 2, 2, 2, 3, 4]);
    }

    #[test]
    fn no_band_is_identity() {
        let i = img(&[[5.0, 5.0, 5.0], [6.0, 5.0, 6.0]]);
        let out = deburst(&i, &DeburstConfig::default()).unwrap();
        assert_eq!(out.vv, i.vv);
        assert_eq!(out.layout.provenance, vec![0, 1]);
        assert_eq!(out.layout.row_lookup, vec![0, 1]);
    }

    #[test]
    fn polarization_mismatch_is_error() {
        let vv = array![[5.0f32, 6.0], [7.0, 8.0], [0.0, 0.0], [7.0, 8.0], [9.0, 9.0]];
        let mut vh = vv.clone();
        vh[[3, 0]] = 6.0;
        let err = deburst(&SlcImage::new(vv, vh).unwrap(), &DeburstConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn bands_at_both_ends_rejected() {
        let i = img(&[[0.0; 3], [5.0, 5.0, 5.0], [6.0, 6.0, 6.0], [0.0; 3]]);
        assert!(matches!(deburst(&i, &DeburstConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn db_values() {
        assert_eq!(to_db(&[1.0, 10.0], 1.0), vec![0.0, 20.0]);
        assert_eq!(to_db(&[0.0], 1e-3), vec![-60.0]);
    }

    #[test]
    fn ratio_values() {
        assert_eq!(ratio_channel(&[3.0, 5.0], &[3.0, 2.0]).unwrap(), vec![0.0, 3.0]);
        assert!(ratio_channel(&[1.0], &[]).is_err());
    }

    fn stats(lo: f64, hi: f64) -> ChannelStats {
        ChannelStats { histogram: Histogram::new(0.0, 1.0, 1).unwrap(), percentiles: (0.01, 0.99), lo, hi }
    }

    #[test]
    fn normalization_endpoints() {
        let s = stats(-10.0, 30.0);
        assert_eq!(tail_clip_and_normalize(&[-10.0, 30.0, 50.0, -99.0, 10.0], &s).unwrap(), vec![0.0, 1.0, 1.0, 0.0, 0.5]);
        assert!(matches!(tail_clip_and_normalize(&[1.0], &stats(2.0, 2.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn histogram_bounds_and_serde() {
        let mut h = Histogram::new(0.0, 100.0, 100).unwrap();
        h.extend(&(0..1000).map(|i| i as f64 / 10.0).collect::<Vec<_>>());
        let (lo, hi) = h.clip_bounds(0.01, 0.99).unwrap();
        assert_eq!((lo, hi), (0.0, 99.0));
        let text = serde_json::to_string(&h).unwrap();
        let back: Histogram = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h);
        let mut one = Histogram::new(0.0, 10.0, 10).unwrap();
        one.extend(&[3.5; 20]);
        let (lo, hi) = one.clip_bounds(0.01, 0.99).unwrap();
        assert!(lo < hi);
    }

    use proptest::prelude::*;

    /// Ground rows plus a burst image: bursts separated by `black` zero rows, each burst after the
    /// first repeating the last `overlap` ground rows of its predecessor.
    fn bursts(ground: &[[f32; 3]], cuts: &[usize], overlap: usize, black: usize) -> Vec<[f32; 3]> {
        let mut rows = Vec::new();
        let mut start = 0;
        for (i, &end) in cuts.iter().chain(std::iter::once(&ground.len())).enumerate() {
            if i > 0 {
                rows.extend(std::iter::repeat([0.0; 3]).take(black));
                rows.extend_from_slice(&ground[start - overlap..start]);
            }
            rows.extend_from_slice(&ground[start..end]);
            start = end;
        }
        rows
    }

    fn burst_case() -> impl Strategy<Value = (Vec<[f32; 3]>, Vec<usize>, usize, usize)> {
        (1usize..=5, 0usize..=4, 1usize..=3).prop_flat_map(|(n, overlap, black)| {
            let len = n * (overlap + 3);
            (prop::collection::vec(prop::array::uniform3(9.0f32..10.0), len), Just(n), Just(overlap), Just(black))
                .prop_map(move |(ground, n, overlap, black)| {
                    let step = ground.len() / n;
                    let cuts = (1..n).map(|i| i * step).collect();
                    (ground, cuts, overlap, black)
                })
        })
    }

    proptest! {
        #[test]
        fn deburst_reconstructs_and_is_idempotent((ground, cuts, overlap, black) in burst_case()) {
            let input = img(&bursts(&ground, &cuts, overlap, black));
            let cfg = DeburstConfig::default();
            let out = deburst(&input, &cfg).unwrap();
            prop_assert_eq!(&out.vv, &img(&ground).vv);
            // Every output row is a bit-exact copy of the input row it came from.
            for (o, &r) in out.layout.provenance.iter().enumerate() {
                prop_assert_eq!(out.vv.row(o), input.vv.row(r));
                prop_assert_eq!(out.layout.row_lookup[r], o);
            }
            let again = deburst(&SlcImage::new(out.vv.clone(), out.vh.clone()).unwrap(), &cfg).unwrap();
            prop_assert_eq!(again.vv, out.vv);
        }

        #[test]
        fn normalization_is_bounded_monotone_and_idempotent(
            values in prop::collection::vec(-80.0f64..180.0, 1..200),
            lo in -50.0f64..50.0,
            span in 0.01f64..100.0,
        ) {
            let s = stats(lo, lo + span);
            let out = tail_clip_and_normalize(&values, &s).unwrap();
            prop_assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            prop_assert!(order.windows(2).all(|w| out[w[0]] <= out[w[1]]));
            // Clipping an already clipped block changes nothing.
            let clipped: Vec<f64> = values.iter().map(|v| v.clamp(lo, lo + span)).collect();
            prop_assert_eq!(tail_clip_and_normalize(&clipped, &s).unwrap(), out);
        }

        #[test]
        fn clip_bounds_bracket_the_data(values in prop::collection::vec(-40.0f64..140.0, 2..300)) {
            let mut h = Histogram::new(-50.0, 150.0, 20000).unwrap();
            h.extend(&values);
            let (lo, hi) = h.clip_bounds(0.0, 1.0).unwrap();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= min + 1e-6 && hi >= max - 1e-6 && lo < hi);
        }
    }
}
