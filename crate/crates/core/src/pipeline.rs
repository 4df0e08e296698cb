//! Pipeline commands. Each command reads its declared artifacts under the output directory and
//! writes its own; every artifact carries the config hash and seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationStore, LayerManifest};
use crate::balance::{self, BalanceReport};
use crate::config::PipelineConfig;
use crate::dataset::{self, DatasetStats, ImageRecord, Split, SplitAssignment, VhrRef, VocabFile, WindowRef};
use crate::error::{Error, Result};
use crate::json::{self, Provenance};
use crate::projection::Projection;
use crate::question::{generate_candidates, PatchContext, QAPair, TemplateBank};
use crate::raster::{
    filter_scenes, io, ms_window, sar_window, tile_to_patches, DType, GeolocationGrid, Modality, Patch, RasterData,
    RasterHeader, RasterRef, WindowPlacement, PATCH_PIXELS,
};
use crate::sar::{self, ChannelStats, DeburstLayout, SlcImage, StatsAccumulator};

/// Artifact paths under one output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn patches(&self) -> PathBuf {
        self.root.join("patches.json")
    }
    pub fn sar_scene(&self, scene: &str) -> PathBuf {
        self.root.join("sar/scenes").join(format!("{scene}.json"))
    }
    pub fn sar_layout(&self, scene: &str) -> PathBuf {
        self.root.join("sar/layouts").join(format!("{scene}.json"))
    }
    pub fn sar_stats(&self) -> PathBuf {
        self.root.join("sar/stats.json")
    }
    pub fn sar_windows(&self) -> PathBuf {
        self.root.join("sar/windows.json")
    }
    pub fn sar_patch(&self, patch: &str) -> PathBuf {
        self.root.join("sar/patches").join(format!("{patch}.json"))
    }
    pub fn candidates(&self) -> PathBuf {
        self.root.join("candidates.jsonl")
    }
    pub fn balanced(&self) -> PathBuf {
        self.root.join("balanced.jsonl")
    }
    pub fn balance_report(&self) -> PathBuf {
        self.root.join("balance_report.json")
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn stats(&self) -> PathBuf {
        self.root.join("stats.json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneWindow {
    pub scene: String,
    #[serde(flatten)]
    pub placement: WindowPlacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    #[serde(flatten)]
    pub patch: Patch,
    pub department: String,
    pub region: String,
    pub ms: Option<SceneWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchTable {
    pub provenance: Provenance,
    pub patches: Vec<PatchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub provenance: Provenance,
    pub scene: String,
    pub epsilon: f64,
    pub layout: DeburstLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarWindows {
    pub provenance: Provenance,
    pub windows: BTreeMap<String, SceneWindow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsScope {
    Global,
    Department,
}

/// Persisted clip statistics: scope key (`global` or a department) -> channel -> stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub provenance: Provenance,
    pub scope: StatsScope,
    pub stats: BTreeMap<String, BTreeMap<String, ChannelStats>>,
}

pub const GLOBAL_SCOPE: &str = "global";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaHeader {
    pub provenance: Provenance,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReportFile {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: BalanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDocument {
    pub provenance: Provenance,
    pub ratios: [f64; 3],
    pub sizes: BTreeMap<Split, usize>,
    pub assignment: SplitAssignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub stats: DatasetStats,
}

/// QA stream: one header line, then one pair per line sorted by id.
pub fn write_qa_stream(path: &Path, provenance: &Provenance, pairs: &[QAPair]) -> Result<()> {
    let mut text = json::to_canonical_string(&QaHeader { provenance: provenance.clone(), count: pairs.len() }, false)?;
    text.push('\n');
    for q in pairs {
        text.push_str(&json::to_canonical_string(q, false)?);
        text.push('\n');
    }
    json::write_text(path, &text)
}

pub fn read_qa_stream(path: &Path) -> Result<(QaHeader, Vec<QAPair>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Validation(format!("{} is empty", path.display())))?;
    let header: QaHeader = serde_json::from_str(first).map_err(|e| Error::json(format!("{}:1", path.display()), e))?;
    let pairs: Vec<QAPair> = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e)))
        .collect::<Result<_>>()?;
    if pairs.len() != header.count {
        return Err(Error::Validation(format!(
            "{} announces {} pairs but holds {}",
            path.display(),
            header.count,
            pairs.len()
        )));
    }
    Ok((header, pairs))
}

fn ms_context(patch: &Patch, scenes: &[RasterRef], size: usize) -> Result<Option<SceneWindow>> {
    for scene in scenes {
        let (col, row) = scene.geotransform()?.world_to_pixel(&patch.center);
        let (c, r) = (col.round(), row.round());
        if c >= 0.0 && r >= 0.0 && c < scene.header.width as f64 && r < scene.header.height as f64 {
            let placement = ms_window(patch, scene, size)?;
            return Ok(Some(SceneWindow { scene: scene.id.clone(), placement }));
        }
    }
    Ok(None)
}

/// Tiles every VHR input, locates patch centers and picks the most recent clear MS scene.
pub fn tile(cfg: &PipelineConfig) -> Result<PatchTable> {
    cfg.check_parameters()?;
    let projection = Projection::from_spec(&cfg.projection)?;
    let elevation = cfg.elevation_provider()?;
    let mut footprints = Vec::new();
    for t in &cfg.tiles {
        let tile = RasterRef::open(&cfg.resolve(&t.path), Modality::Vhr)?;
        let region = cfg.region_of(&t.department)?;
        footprints.extend(tile_to_patches(&tile)?.into_iter().map(|f| (f, t.department.clone(), region.to_string())));
    }
    let scenes: Vec<RasterRef> = cfg
        .ms_scenes
        .iter()
        .map(|p| RasterRef::open(&cfg.resolve(p), Modality::Ms))
        .collect::<Result<_>>()?;
    let scenes = filter_scenes(&scenes, cfg.max_cloud)?;
    let mut patches: Vec<PatchRecord> = footprints
        .into_par_iter()
        .map(|(f, department, region)| {
            let patch = f.locate(&projection, elevation.as_ref())?;
            let ms = ms_context(&patch, &scenes, cfg.l_ms)?;
            Ok(PatchRecord { patch, department, region, ms })
        })
        .collect::<Result<_>>()?;
    elevation.flush()?;
    patches.sort_by(|a, b| a.patch.id.cmp(&b.patch.id));
    if let Some(w) = patches.windows(2).find(|w| w[0].patch.id == w[1].patch.id) {
        return Err(Error::Validation(format!("duplicate patch id '{}'", w[0].patch.id)));
    }
    let table = PatchTable { provenance: cfg.provenance()?, patches };
    json::write_json(&Artifacts::new(cfg.output()).patches(), &table)?;
    Ok(table)
}

struct SceneProduct {
    id: String,
    grid: GeolocationGrid,
    layout: DeburstLayout,
    vv: Array2<f32>,
    vh: Array2<f32>,
    epsilon: f64,
}

fn band(header: &RasterHeader, name: &str) -> Result<usize> {
    header
        .band_names
        .iter()
        .position(|b| b.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Validation(format!("SAR raster lacks band {name}")))
}

fn deburst_scene(cfg: &PipelineConfig, raster: &RasterRef, grid: GeolocationGrid) -> Result<SceneProduct> {
    let h = &raster.header;
    let data = raster.read_data()?.to_f32();
    let plane = |name: &str| -> Result<Array2<f32>> {
        let b = band(h, name)?;
        let n = h.pixel_count();
        Ok(Array2::from_shape_vec((h.height, h.width), data[b * n..(b + 1) * n].to_vec()).expect("plane shape"))
    };
    let img = SlcImage::new(plane("VV")?, plane("VH")?)?;
    let out = sar::deburst(&img, &cfg.sar.deburst).map_err(|e| match e {
        Error::Degenerate(m) => Error::Degenerate(format!("{}: {m}", raster.id)),
        other => other,
    })?;
    Ok(SceneProduct {
        id: raster.id.clone(),
        grid,
        layout: out.layout,
        vv: out.vv,
        vh: out.vh,
        epsilon: cfg.sar.epsilon.unwrap_or_else(|| sar::default_epsilon(h.dtype)),
    })
}

fn write_scene(art: &Artifacts, prov: &Provenance, p: &SceneProduct) -> Result<()> {
    let (rows, cols) = p.vv.dim();
    let mut header = RasterHeader::new(cols, rows, DType::F32, vec!["VV".into(), "VH".into()]);
    header.modality = Some(Modality::Sar);
    header.provenance = Some(prov.clone());
    let mut values = Vec::with_capacity(2 * rows * cols);
    values.extend(p.vv.iter().copied());
    values.extend(p.vh.iter().copied());
    io::write_raster(&art.sar_scene(&p.id), &header, &RasterData::F32(values))?;
    let layout = SceneLayout { provenance: prov.clone(), scene: p.id.clone(), epsilon: p.epsilon, layout: p.layout.clone() };
    json::write_json(&art.sar_layout(&p.id), &layout)
}

/// Amplitude windows of one patch.
struct SarBlock<'a> {
    patch: &'a str,
    scope: String,
    vv: Vec<f32>,
    vh: Vec<f32>,
    epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarSummary {
    pub scenes: usize,
    pub patches: usize,
    pub stats_reused: bool,
}

/// Debursts every scene, places SAR windows, computes (or reloads) clip statistics and writes
/// normalized three-channel patches.
pub fn sar_prep(cfg: &PipelineConfig, reuse_stats: Option<&Path>) -> Result<SarSummary> {
    let art = Artifacts::new(cfg.output());
    let table: PatchTable = json::read_json(&art.patches())?;
    let prov = cfg.provenance()?;
    let mut inputs: Vec<(RasterRef, GeolocationGrid)> = cfg
        .sar_scenes
        .iter()
        .map(|s| {
            let r = RasterRef::open(&cfg.resolve(&s.raster), Modality::Sar)?;
            Ok((r, GeolocationGrid::open(&cfg.resolve(&s.grid))?))
        })
        .collect::<Result<_>>()?;
    inputs.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    if let Some(w) = inputs.windows(2).find(|w| w[0].0.id == w[1].0.id) {
        return Err(Error::Validation(format!("duplicate SAR scene id '{}'", w[0].0.id)));
    }
    let products: Vec<SceneProduct> =
        inputs.into_par_iter().map(|(r, g)| deburst_scene(cfg, &r, g)).collect::<Result<_>>()?;
    products.par_iter().try_for_each(|p| write_scene(&art, &prov, p))?;

    let windows: BTreeMap<String, SceneWindow> = table
        .patches
        .par_iter()
        .map(|rec| {
            let p = &rec.patch;
            let Some(scene) = products.iter().find(|s| s.grid.covers(p.position.lat, p.position.lon, p.position.alt))
            else {
                return Ok(None);
            };
            let (rows, cols) = scene.vv.dim();
            let placement = sar_window(p, &scene.grid, Some(&scene.layout.row_lookup), &scene.id, cols, rows, cfg.l_sar)?;
            Ok(Some((p.id.clone(), SceneWindow { scene: scene.id.clone(), placement })))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let department: BTreeMap<&str, &str> =
        table.patches.iter().map(|r| (r.patch.id.as_str(), r.department.as_str())).collect();
    let blocks: Vec<SarBlock> = windows
        .iter()
        .map(|(pid, w)| {
            let scene = products.iter().find(|s| s.id == w.scene).expect("window scene exists");
            let win = &w.placement.window;
            let cut = |a: &Array2<f32>| {
                a.slice(s![win.row0..win.row0 + win.size, win.col0..win.col0 + win.size]).iter().copied().collect()
            };
            SarBlock {
                patch: pid,
                scope: if cfg.sar.per_department { department[pid.as_str()].to_string() } else { GLOBAL_SCOPE.into() },
                vv: cut(&scene.vv),
                vh: cut(&scene.vh),
                epsilon: scene.epsilon,
            }
        })
        .collect();

    let scope = if cfg.sar.per_department { StatsScope::Department } else { StatsScope::Global };
    let (stats, reused) = match reuse_stats {
        Some(path) => {
            let file: StatsFile = json::read_json(path)?;
            if file.scope != scope {
                return Err(Error::Validation(format!("{} has a different statistics scope", path.display())));
            }
            (file.stats, true)
        }
        None => (accumulate_stats(cfg, &blocks)?, false),
    };
    json::write_json(&art.sar_stats(), &StatsFile { provenance: prov.clone(), scope, stats: stats.clone() })?;

    blocks.par_iter().try_for_each(|b| {
        let channel_stats = stats
            .get(&b.scope)
            .ok_or_else(|| Error::Validation(format!("no SAR statistics for scope '{}'", b.scope)))?;
        let values = sar::normalize_patch(&b.vv, &b.vh, b.epsilon, channel_stats)?;
        let mut header =
            RasterHeader::new(cfg.l_sar, cfg.l_sar, DType::F32, vec!["VV".into(), "VH".into(), "VV/VH".into()]);
        header.modality = Some(Modality::Sar);
        header.provenance = Some(prov.clone());
        io::write_raster(&art.sar_patch(b.patch), &header, &RasterData::F32(values))
    })?;
    let summary = SarSummary { scenes: products.len(), patches: blocks.len(), stats_reused: reused };
    drop(blocks);
    json::write_json(&art.sar_windows(), &SarWindows { provenance: prov, windows })?;
    Ok(summary)
}

fn accumulate_stats(cfg: &PipelineConfig, blocks: &[SarBlock]) -> Result<BTreeMap<String, BTreeMap<String, ChannelStats>>> {
    let mut scopes: Vec<&str> = blocks.iter().map(|b| b.scope.as_str()).collect();
    scopes.sort();
    scopes.dedup();
    scopes
        .into_iter()
        .map(|scope| {
            let acc = blocks
                .par_iter()
                .filter(|b| b.scope == scope)
                .try_fold(
                    || StatsAccumulator::new(&cfg.sar.stats),
                    |acc, b| {
                        let mut acc = acc?;
                        acc.add_block(&sar::to_db(&b.vv, b.epsilon), &sar::to_db(&b.vh, b.epsilon))?;
                        Ok::<_, Error>(Ok(acc))
                    },
                )
                .map(|r| r.and_then(|x| x))
                .try_reduce_with(|mut a, b| {
                    a.merge(&b)?;
                    Ok(a)
                })
                .expect("scope has at least one block")?;
            Ok((scope.to_string(), acc.finish(cfg.sar.stats.percentiles)?))
        })
        .collect()
}

fn load_store(cfg: &PipelineConfig) -> Result<AnnotationStore> {
    let manifest = LayerManifest::from_file(&cfg.resolve(&cfg.manifest))?;
    Ok(AnnotationStore::load(&manifest)?.0)
}

/// Candidate QA pairs for every patch, sorted by id.
pub fn generate(cfg: &PipelineConfig) -> Result<Vec<QAPair>> {
    let art = Artifacts::new(cfg.output());
    let table: PatchTable = json::read_json(&art.patches())?;
    let store = load_store(cfg)?;
    let bank = match &cfg.templates {
        Some(p) => TemplateBank::from_file(&cfg.resolve(p))?,
        None => TemplateBank::default(),
    };
    let per_patch: Vec<Vec<QAPair>> = table
        .patches
        .par_iter()
        .map(|rec| {
            let ctx = PatchContext {
                patch_id: &rec.patch.id,
                extent: rec.patch.extent,
                department: &rec.department,
                region: &rec.region,
            };
            generate_candidates(&ctx, &store, &bank, &cfg.questions, cfg.seed)
        })
        .collect::<Result<_>>()?;
    let mut pairs: Vec<QAPair> = per_patch.into_iter().flatten().collect();
    pairs.par_sort_unstable_by(|a, b| a.id.cmp(&b.id));
    write_qa_stream(&art.candidates(), &cfg.provenance()?, &pairs)?;
    Ok(pairs)
}

pub fn patches_per_department(table: &PatchTable) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for r in &table.patches {
        *out.entry(r.department.clone()).or_default() += 1;
    }
    out
}

pub fn run_balance(cfg: &PipelineConfig) -> Result<(Vec<QAPair>, BalanceReport)> {
    let art = Artifacts::new(cfg.output());
    let table: PatchTable = json::read_json(&art.patches())?;
    let (_, candidates) = read_qa_stream(&art.candidates())?;
    let store = load_store(cfg)?;
    let cardinality = balance::answer_cardinalities(&store, cfg.departments.len(), cfg.n_regions());
    let (selected, report) =
        balance::balance(candidates, &patches_per_department(&table), &cardinality, &cfg.balance, cfg.seed)?;
    let prov = cfg.provenance()?;
    write_qa_stream(&art.balanced(), &prov, &selected)?;
    json::write_json(&art.balance_report(), &BalanceReportFile { provenance: prov, report: report.clone() })?;
    Ok((selected, report))
}

pub fn run_split(cfg: &PipelineConfig) -> Result<SplitDocument> {
    let art = Artifacts::new(cfg.output());
    let table: PatchTable = json::read_json(&art.patches())?;
    let ids: Vec<String> = table.patches.iter().map(|r| r.patch.id.clone()).collect();
    let assignment = dataset::split(&ids, cfg.split_ratios, cfg.seed)?;
    let mut sizes: BTreeMap<Split, usize> = Split::ALL.iter().map(|s| (*s, 0)).collect();
    for s in assignment.values() {
        *sizes.get_mut(s).expect("all splits present") += 1;
    }
    let doc = SplitDocument { provenance: cfg.provenance()?, ratios: cfg.split_ratios, sizes, assignment };
    json::write_json(&art.split(), &doc)?;
    Ok(doc)
}

pub fn image_records(table: &PatchTable, sar: &SarWindows) -> Vec<ImageRecord> {
    table
        .patches
        .iter()
        .map(|r| ImageRecord {
            id: r.patch.id.clone(),
            vhr: VhrRef { reference: r.patch.tile_id.clone(), origin_px: r.patch.origin, size: PATCH_PIXELS },
            ms: r.ms.as_ref().map(|w| WindowRef { reference: w.scene.clone(), center_px: w.placement.center_px }),
            sar: sar
                .windows
                .get(&r.patch.id)
                .map(|w| WindowRef { reference: w.scene.clone(), center_px: w.placement.center_px }),
            center: r.patch.position,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub questions: BTreeMap<Split, usize>,
    pub vocab_coverage: f64,
}

pub fn run_export(cfg: &PipelineConfig) -> Result<ExportSummary> {
    let art = Artifacts::new(cfg.output());
    let table: PatchTable = json::read_json(&art.patches())?;
    let sar: SarWindows = json::read_json(&art.sar_windows())?;
    let split: SplitDocument = json::read_json(&art.split())?;
    let (_, pairs) = read_qa_stream(&art.balanced())?;
    let train: Vec<&str> = pairs
        .iter()
        .filter(|q| split.assignment.get(&q.patch_id) == Some(&Split::Train))
        .map(|q| q.canonical.as_str())
        .collect();
    let vocab = dataset::build_vocab(train.iter().copied(), cfg.vocab_size)?;
    let prov = cfg.provenance()?;
    let files = dataset::build_split_files(&split.assignment, &pairs, &image_records(&table, &sar), &vocab, &prov)?;
    let vocab_file =
        VocabFile { provenance: prov, coverage_curve: dataset::coverage_curve(train.iter().copied()), vocab };
    dataset::export(&art.dataset(), &files, &vocab_file)?;
    Ok(ExportSummary {
        questions: files.iter().map(|f| (f.split, f.questions.len())).collect(),
        vocab_coverage: vocab_file.vocab.coverage,
    })
}

pub fn run_stats(cfg: &PipelineConfig) -> Result<DatasetStats> {
    let art = Artifacts::new(cfg.output());
    let files = dataset::import(&art.dataset())?;
    let stats = dataset::stats(&files);
    json::write_json(&art.stats(), &StatsReport { provenance: cfg.provenance()?, stats: stats.clone() })?;
    Ok(stats)
}

/// Every command in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<DatasetStats> {
    tile(cfg)?;
    sar_prep(cfg, None)?;
    generate(cfg)?;
    run_balance(cfg)?;
    run_split(cfg)?;
    run_export(cfg)?;
    run_stats(cfg)
}
