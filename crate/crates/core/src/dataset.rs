//! Image-level train/val/test split, answer vocabulary, split-file export/import and statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{self, Provenance};
use crate::question::{Category, QAPair, Subtype};
use crate::raster::GeoPosition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Patch id -> split.
pub type SplitAssignment = BTreeMap<String, Split>;

/// Split sizes by largest remainder; remainder ties go to the earlier split.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: [usize; 3] = [0; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

/// Seeded shuffle of the sorted patch ids, then contiguous slices.
pub fn split(patch_ids: &[String], ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    let mut ids: Vec<&String> = patch_ids.iter().collect();
    ids.sort();
    ids.dedup();
    if ids.len() < Split::ALL.len() {
        return Err(Error::Domain(format!("{} patches cannot fill {} splits", ids.len(), Split::ALL.len())));
    }
    let sizes = split_sizes(ids.len(), ratios)?;
    ids.shuffle(&mut crate::seed::stream(seed, &["split"]));
    let mut out = BTreeMap::new();
    let mut it = ids.into_iter();
    for (split, size) in Split::ALL.into_iter().zip(sizes) {
        for id in it.by_ref().take(size) {
            out.insert(id.clone(), split);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub answer: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerVocabulary {
    pub k: usize,
    /// Share of train answers covered by the vocabulary.
    pub coverage: f64,
    pub total: usize,
    pub answers: Vec<VocabEntry>,
}

impl AnswerVocabulary {
    pub fn contains(&self, answer: &str) -> bool {
        self.answers.iter().any(|e| e.answer == answer)
    }

    pub fn answer_set(&self) -> HashSet<&str> {
        self.answers.iter().map(|e| e.answer.as_str()).collect()
    }
}

fn ranked<'a>(answers: impl IntoIterator<Item = &'a str>) -> (Vec<VocabEntry>, usize) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0;
    for a in answers {
        *counts.entry(a).or_default() += 1;
        total += 1;
    }
    let mut entries: Vec<VocabEntry> =
        counts.into_iter().map(|(answer, count)| VocabEntry { answer: answer.to_string(), count }).collect();
    entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.answer.cmp(&b.answer)));
    (entries, total)
}

/// Top-`k` train answers by frequency, ties in lexicographic order.
pub fn build_vocab<'a>(answers: impl IntoIterator<Item = &'a str>, k: usize) -> Result<AnswerVocabulary> {
    if k == 0 {
        return Err(Error::Config("vocabulary size k must be at least 1".into()));
    }
    let (mut entries, total) = ranked(answers);
    entries.truncate(k);
    let covered: usize = entries.iter().map(|e| e.count).sum();
    let coverage = if total == 0 { 1.0 } else { covered as f64 / total as f64 };
    Ok(AnswerVocabulary { k, coverage, total, answers: entries })
}

/// Coverage for a ladder of vocabulary sizes (1, 2, 5, 10, ... up to the distinct count).
pub fn coverage_curve<'a>(answers: impl IntoIterator<Item = &'a str>) -> Vec<(usize, f64)> {
    let (entries, total) = ranked(answers);
    let mut ks = Vec::new();
    let mut base = 1;
    while base < entries.len() {
        for m in [1, 2, 5] {
            if base * m < entries.len() {
                ks.push(base * m);
            }
        }
        base *= 10;
    }
    ks.push(entries.len().max(1));
    let mut prefix = 0;
    let mut cum = Vec::with_capacity(entries.len());
    for e in &entries {
        prefix += e.count;
        cum.push(prefix);
    }
    ks.into_iter()
        .map(|k| {
            let covered = cum.get(k.min(cum.len()).wrapping_sub(1)).copied().unwrap_or(0);
            (k, if total == 0 { 1.0 } else { covered as f64 / total as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VhrRef {
    #[serde(rename = "ref")]
    pub reference: String,
    pub origin_px: (usize, usize),
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRef {
    #[serde(rename = "ref")]
    pub reference: String,
    pub center_px: (i64, i64),
}

/// One image triplet of a split file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub vhr: VhrRef,
    pub ms: Option<WindowRef>,
    pub sar: Option<WindowRef>,
    pub center: GeoPosition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub image_id: String,
    #[serde(rename = "type")]
    pub category: Category,
    pub subtype: Subtype,
    pub text: String,
    pub answer: String,
    pub answer_aux: BTreeMap<String, f64>,
    pub in_vocab: bool,
}

impl QuestionRecord {
    pub fn from_pair(q: &QAPair, in_vocab: bool) -> Self {
        Self {
            id: q.id.clone(),
            image_id: q.patch_id.clone(),
            category: q.category,
            subtype: q.subtype,
            text: q.text.clone(),
            answer: q.canonical.clone(),
            answer_aux: q.aux.clone(),
            in_vocab,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub split: Split,
    pub provenance: Provenance,
    pub images: Vec<ImageRecord>,
    pub questions: Vec<QuestionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabFile {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub vocab: AnswerVocabulary,
    pub coverage_curve: Vec<(usize, f64)>,
}

pub fn split_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{split}.json"))
}

pub fn vocab_path(dir: &Path) -> PathBuf {
    dir.join("vocab.json")
}

/// Builds the three split documents. Out-of-vocabulary answers are dropped from train and
/// flagged in val/test.
pub fn build_split_files(
    assignment: &SplitAssignment,
    pairs: &[QAPair],
    images: &[ImageRecord],
    vocab: &AnswerVocabulary,
    provenance: &Provenance,
) -> Result<Vec<SplitFile>> {
    let known: BTreeSet<&str> = images.iter().map(|i| i.id.as_str()).collect();
    for id in assignment.keys() {
        if !known.contains(id.as_str()) {
            return Err(Error::Validation(format!("split assigns unknown image '{id}'")));
        }
    }
    for q in pairs {
        if !assignment.contains_key(&q.patch_id) {
            return Err(Error::Validation(format!("question {} references unknown image '{}'", q.id, q.patch_id)));
        }
    }
    let in_vocab = vocab.answer_set();
    let mut files: Vec<SplitFile> = Split::ALL
        .into_iter()
        .map(|split| SplitFile { split, provenance: provenance.clone(), images: Vec::new(), questions: Vec::new() })
        .collect();
    let index = |s: Split| Split::ALL.iter().position(|x| *x == s).expect("split");
    let mut sorted_images: Vec<&ImageRecord> = images.iter().filter(|i| assignment.contains_key(&i.id)).collect();
    sorted_images.sort_by(|a, b| a.id.cmp(&b.id));
    for img in sorted_images {
        files[index(assignment[&img.id])].images.push(img.clone());
    }
    let mut sorted_pairs: Vec<&QAPair> = pairs.iter().collect();
    sorted_pairs.sort_by(|a, b| a.id.cmp(&b.id));
    for q in sorted_pairs {
        let split = assignment[&q.patch_id];
        let ok = in_vocab.contains(q.canonical.as_str());
        if split == Split::Train && !ok {
            continue;
        }
        files[index(split)].questions.push(QuestionRecord::from_pair(q, ok));
    }
    Ok(files)
}

/// Writes `train.json`, `val.json`, `test.json` and `vocab.json` into `dir`.
pub fn export(dir: &Path, files: &[SplitFile], vocab: &VocabFile) -> Result<()> {
    files
        .par_iter()
        .map(|f| json::write_json(&split_path(dir, f.split), f))
        .collect::<Result<Vec<_>>>()?;
    json::write_json(&vocab_path(dir), vocab)
}

pub fn import(dir: &Path) -> Result<Vec<SplitFile>> {
    Split::ALL
        .into_iter()
        .map(|s| {
            let f: SplitFile = json::read_json(&split_path(dir, s))?;
            if f.split != s {
                return Err(Error::Validation(format!("{} holds split '{}'", split_path(dir, s).display(), f.split)));
            }
            Ok(f)
        })
        .collect()
}

/// Counts over an exported dataset. `merge` is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub images: usize,
    pub questions: usize,
    pub question_types: usize,
    pub unique_answers: usize,
    pub per_split: BTreeMap<Split, SplitCounts>,
    pub per_type: BTreeMap<Category, usize>,
    pub per_subtype: BTreeMap<Subtype, usize>,
    pub per_answer: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub images: usize,
    pub questions: usize,
}

impl DatasetStats {
    pub fn of_split(file: &SplitFile) -> Self {
        let mut s = DatasetStats { images: file.images.len(), questions: file.questions.len(), ..Default::default() };
        s.per_split.insert(file.split, SplitCounts { images: file.images.len(), questions: file.questions.len() });
        for q in &file.questions {
            *s.per_type.entry(q.category).or_default() += 1;
            *s.per_subtype.entry(q.subtype).or_default() += 1;
            *s.per_answer.entry(q.answer.clone()).or_default() += 1;
        }
        s.refresh();
        s
    }

    pub fn merge(mut self, other: DatasetStats) -> Self {
        self.images += other.images;
        self.questions += other.questions;
        for (k, v) in other.per_split {
            let e = self.per_split.entry(k).or_default();
            e.images += v.images;
            e.questions += v.questions;
        }
        for (k, v) in other.per_type {
            *self.per_type.entry(k).or_default() += v;
        }
        for (k, v) in other.per_subtype {
            *self.per_subtype.entry(k).or_default() += v;
        }
        for (k, v) in other.per_answer {
            *self.per_answer.entry(k).or_default() += v;
        }
        self.refresh();
        self
    }

    fn refresh(&mut self) {
        self.question_types = self.per_subtype.len();
        self.unique_answers = self.per_answer.len();
    }
}

pub fn stats(files: &[SplitFile]) -> DatasetStats {
    files.par_iter().map(DatasetStats::of_split).reduce(DatasetStats::default, DatasetStats::merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:03}")).collect()
    }

    #[test]
    fn sizes() {
        assert_eq!(split_sizes(10, [0.6, 0.2, 0.2]).unwrap(), [6, 2, 2]);
        assert_eq!(split_sizes(11, [0.6, 0.2, 0.2]).unwrap(), [7, 2, 2]);
        assert_eq!(split_sizes(21, [0.6, 0.2, 0.2]).unwrap(), [13, 4, 4]);
        assert!(split_sizes(10, [0.5, 0.2, 0.2]).is_err());
    }

    #[test]
    fn split_is_partition_and_deterministic() {
        let a = split(&ids(11), [0.6, 0.2, 0.2], 4).unwrap();
        assert_eq!(a.len(), 11);
        assert_eq!(a, split(&ids(11), [0.6, 0.2, 0.2], 4).unwrap());
        let mut reversed = ids(11);
        reversed.reverse();
        assert_eq!(a, split(&reversed, [0.6, 0.2, 0.2], 4).unwrap());
        assert!(matches!(split(&ids(2), [0.6, 0.2, 0.2], 4), Err(Error::Domain(_))));
    }

    #[test]
    fn vocab_counting() {
        let answers = ["yes", "yes", "yes", "no", "no", "5"];
        let v = build_vocab(answers, 2).unwrap();
        assert_eq!(v.answers.iter().map(|e| e.answer.as_str()).collect::<Vec<_>>(), ["yes", "no"]);
        assert!((v.coverage - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(build_vocab(answers, 10).unwrap().coverage, 1.0);
        assert!(build_vocab(answers, 0).is_err());
        let curve = coverage_curve(answers);
        assert_eq!(curve.last().unwrap(), &(3, 1.0));
    }

    #[test]
    fn empty_split_files_and_stats() {
        let vocab = build_vocab([], 10).unwrap();
        let prov = Provenance { config_hash: "h".into(), seed: 1 };
        let files = build_split_files(&BTreeMap::new(), &[], &[], &vocab, &prov).unwrap();
        assert_eq!(files.len(), 3);
        assert!(files.iter().all(|f| f.questions.is_empty()));
        let s = stats(&files);
        assert_eq!((s.images, s.questions, s.question_types, s.unique_answers), (0, 0, 0, 0));
    }

    fn image(id: &str) -> ImageRecord {
        ImageRecord {
            id: id.into(),
            vhr: VhrRef { reference: "tile".into(), origin_px: (0, 0), size: 1000 },
            ms: None,
            sar: Some(WindowRef { reference: "s1".into(), center_px: (4, -2) }),
            center: crate::raster::GeoPosition { lat: 45.5, lon: 5.25, alt: 812.125 },
        }
    }

    fn pair(id: usize, patch: &str, subtype: Subtype, answer: &str) -> QAPair {
        QAPair {
            id: format!("q{id:04}"),
            patch_id: patch.into(),
            department: "d".into(),
            category: subtype.category(),
            subtype,
            slots: Default::default(),
            template: 0,
            text: format!("question {id}"),
            answer: crate::question::AnswerValue::Label(answer.into()),
            canonical: answer.into(),
            aux: BTreeMap::from([("value".to_string(), 1.5)]),
            seed: 7,
        }
    }

    proptest! {
        #[test]
        fn export_round_trip_and_recount(
            n_images in 3usize..12,
            questions in proptest::collection::vec((0usize..12, 0usize..21, 0u8..6), 0..60),
            seed in 0u64..50,
        ) {
            let images: Vec<ImageRecord> = ids(n_images).iter().map(|i| image(i)).collect();
            let assignment = split(&ids(n_images), [0.6, 0.2, 0.2], seed).unwrap();
            let pairs: Vec<QAPair> = questions
                .iter()
                .enumerate()
                .map(|(i, &(img, t, a))| pair(i, &images[img % n_images].id, Subtype::ALL[t], &format!("a{a}")))
                .collect();
            let train: Vec<&str> = pairs
                .iter()
                .filter(|q| assignment[&q.patch_id] == Split::Train)
                .map(|q| q.canonical.as_str())
                .collect();
            let vocab = build_vocab(train.iter().copied(), 3).unwrap();
            let prov = Provenance { config_hash: "h".into(), seed };
            let files = build_split_files(&assignment, &pairs, &images, &vocab, &prov).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let vf = VocabFile { provenance: prov, coverage_curve: coverage_curve(train.iter().copied()), vocab: vocab.clone() };
            export(dir.path(), &files, &vf).unwrap();
            prop_assert_eq!(&import(dir.path()).unwrap(), &files);

            // Recount directly from the pairs: train drops out-of-vocabulary answers.
            let kept: Vec<&QAPair> = pairs
                .iter()
                .filter(|q| assignment[&q.patch_id] != Split::Train || vocab.contains(&q.canonical))
                .collect();
            let s = stats(&files);
            prop_assert_eq!(s.images, n_images);
            prop_assert_eq!(s.questions, kept.len());
            let subtypes: BTreeSet<Subtype> = kept.iter().map(|q| q.subtype).collect();
            prop_assert_eq!(s.question_types, subtypes.len());
            let answers: BTreeSet<&str> = kept.iter().map(|q| q.canonical.as_str()).collect();
            prop_assert_eq!(s.unique_answers, answers.len());
            for f in &files {
                prop_assert!(f.questions.iter().all(|q| f.images.iter().any(|i| i.id == q.image_id)));
                prop_assert!(f.questions.iter().all(|q| q.in_vocab == vocab.contains(&q.answer)));
            }
            // Merge order does not matter.
            let parts: Vec<DatasetStats> = files.iter().map(DatasetStats::of_split).collect();
            let left = parts[0].clone().merge(parts[1].clone()).merge(parts[2].clone());
            let right = parts[2].clone().merge(parts[0].clone().merge(parts[1].clone()));
            prop_assert_eq!(left, right);
        }

        #[test]
        fn split_counts_within_one(n in 3usize..400, seed in 0u64..100) {
            let a = split(&ids(n), [0.6, 0.2, 0.2], seed).unwrap();
            for (s, r) in Split::ALL.into_iter().zip([0.6, 0.2, 0.2]) {
                let c = a.values().filter(|x| **x == s).count() as f64;
                prop_assert!((c - r * n as f64).abs() <= 1.0);
            }
        }

        #[test]
        fn coverage_monotone_in_k(answers in proptest::collection::vec(0u8..30, 0..200)) {
            let strs: Vec<String> = answers.iter().map(|a| a.to_string()).collect();
            let mut last = 0.0;
            for k in 1..35 {
                let c = build_vocab(strs.iter().map(String::as_str), k).unwrap().coverage;
                prop_assert!(c >= last);
                last = c;
            }
            prop_assert_eq!(last, 1.0);
        }
    }
}
