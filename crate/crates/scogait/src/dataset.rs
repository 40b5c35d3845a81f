//! Dataset layout, manifests, splits, ratio subsampling and batch sampling.
//!
//! On-disk layout: `root/<label>/<subject_id>/<sequence_id>/frame_%06d.png`
//! with `<label>` one of `positive`, `neutral`, `negative`. A manifest is the
//! deterministic, validated index of such a tree and can be cached as JSON
//! lines (one record per line).

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::silhouette;

/// Diagnostic class. The integer encoding is fixed: positive = 0,
/// neutral = 1, negative = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticLabel {
    Positive,
    Neutral,
    Negative,
}

pub const LABELS: [DiagnosticLabel; 3] = [
    DiagnosticLabel::Positive,
    DiagnosticLabel::Neutral,
    DiagnosticLabel::Negative,
];

impl DiagnosticLabel {
    pub fn index(self) -> usize {
        match self {
            DiagnosticLabel::Positive => 0,
            DiagnosticLabel::Neutral => 1,
            DiagnosticLabel::Negative => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        LABELS.get(i).copied()
    }

    pub fn dir_name(self) -> &'static str {
        match self {
            DiagnosticLabel::Positive => "positive",
            DiagnosticLabel::Neutral => "neutral",
            DiagnosticLabel::Negative => "negative",
        }
    }

    pub fn from_dir_name(name: &str) -> Option<Self> {
        match name {
            "positive" => Some(DiagnosticLabel::Positive),
            "neutral" => Some(DiagnosticLabel::Neutral),
            "negative" => Some(DiagnosticLabel::Negative),
            _ => None,
        }
    }
}

impl std::fmt::Display for DiagnosticLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.dir_name())
    }
}

/// One gait sequence: ordered frame paths plus subject identity and label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub subject_id: String,
    pub sequence_id: String,
    pub label: DiagnosticLabel,
    pub n_frames: usize,
    /// Frame paths relative to the manifest root, in temporal order.
    pub frames: Vec<PathBuf>,
}

impl SequenceRecord {
    pub fn frame_path(&self, root: &Path, i: usize) -> PathBuf {
        root.join(&self.frames[i])
    }
}

/// Validated index of a dataset tree.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<SequenceRecord>,
}

impl Manifest {
    /// Sequence counts per label, ordered positive/neutral/negative.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0usize; 3];
        for r in &self.records {
            c[r.label.index()] += 1;
        }
        c
    }

    pub fn total_frames(&self) -> usize {
        self.records.iter().map(|r| r.n_frames).sum()
    }

    /// Distinct subject ids in lexicographic order.
    pub fn subjects(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.subject_id.as_str()).collect();
        set.into_iter().collect()
    }

    /// Stable subject_id -> dense index map (lexicographic order).
    pub fn subject_indices(&self) -> BTreeMap<&str, usize> {
        self.subjects()
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect()
    }

    fn with_records(&self, records: Vec<SequenceRecord>) -> Manifest {
        Manifest {
            root: self.root.clone(),
            records,
        }
    }

    /// Write the JSON-lines manifest cache.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("create {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        for r in &self.records {
            let line = serde_json::to_string(r)
                .map_err(|e| Error::Other(format!("serialize manifest record: {e}")))?;
            writeln!(w, "{line}").map_err(|e| Error::io("write manifest cache", e))?;
        }
        Ok(())
    }

    /// Load a JSON-lines manifest cache; `root` is the dataset root the
    /// relative frame paths resolve against.
    pub fn load_jsonl(path: &Path, root: &Path) -> Result<Manifest> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
        let reader = std::io::BufReader::new(file);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("read manifest cache", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SequenceRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Other(format!("manifest line {}: {e}", i + 1)))?;
            if rec.n_frames != rec.frames.len() {
                return Err(Error::Other(format!(
                    "manifest line {}: n_frames {} != {} paths",
                    i + 1,
                    rec.n_frames,
                    rec.frames.len()
                )));
            }
            records.push(rec);
        }
        validate_label_consistency(&records)?;
        Ok(Manifest {
            root: root.to_path_buf(),
            records,
        })
    }
}

fn validate_label_consistency(records: &[SequenceRecord]) -> Result<()> {
    let mut seen: BTreeMap<&str, DiagnosticLabel> = BTreeMap::new();
    for r in records {
        if let Some(&prev) = seen.get(r.subject_id.as_str()) {
            if prev != r.label {
                return Err(Error::ManifestConflict {
                    subject: r.subject_id.clone(),
                    a: prev.to_string(),
                    b: r.label.to_string(),
                });
            }
        } else {
            seen.insert(&r.subject_id, r.label);
        }
    }
    Ok(())
}

fn sorted_dir_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(format!("read {}", dir.display()), e))?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io("read dir entry", e))?;
        let p = entry.path();
        if p.is_dir() == want_dirs {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Scan a dataset tree into a manifest. Ordering of records and frames is
/// deterministic (lexicographic); per-subject label consistency is enforced.
/// Empty sequence directories are skipped with a warning.
pub fn build_manifest(root: &Path) -> Result<Manifest> {
    if !root.is_dir() {
        return Err(Error::Layout {
            path: root.to_path_buf(),
            reason: "dataset root is not a directory".into(),
        });
    }
    let mut records = Vec::new();
    for label_dir in sorted_dir_entries(root, true)? {
        let name = label_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let Some(label) = DiagnosticLabel::from_dir_name(&name) else {
            return Err(Error::Layout {
                path: label_dir,
                reason: "expected a label directory (positive/neutral/negative)".into(),
            });
        };
        for subject_dir in sorted_dir_entries(&label_dir, true)? {
            let subject_id = subject_dir
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            for seq_dir in sorted_dir_entries(&subject_dir, true)? {
                let sequence_id = seq_dir
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_string();
                let mut frames: Vec<PathBuf> = sorted_dir_entries(&seq_dir, false)?
                    .into_iter()
                    .filter(|p| p.extension().is_some_and(|e| e == "png"))
                    .collect();
                if frames.is_empty() {
                    log::warn!("skipping empty sequence directory {}", seq_dir.display());
                    continue;
                }
                for f in &mut frames {
                    *f = f
                        .strip_prefix(root)
                        .expect("frame path under root")
                        .to_path_buf();
                }
                records.push(SequenceRecord {
                    subject_id: subject_id.clone(),
                    sequence_id,
                    label,
                    n_frames: frames.len(),
                    frames,
                });
            }
        }
    }
    records.sort_by(|a, b| {
        (&a.subject_id, &a.sequence_id, a.label.index())
            .cmp(&(&b.subject_id, &b.sequence_id, b.label.index()))
    });
    validate_label_consistency(&records)?;
    Ok(Manifest {
        root: root.to_path_buf(),
        records,
    })
}

/// Class-ratio request for training pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ratio {
    /// Keep the pool as-is.
    All,
    /// positive : neutral : negative
    Triple(u32, u32, u32),
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Ratio::All);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "ratio must be `all` or `P:N:G`, got `{s}`"
            )));
        }
        let mut v = [0u32; 3];
        for (i, p) in parts.iter().enumerate() {
            v[i] = p
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad ratio component `{p}`")))?;
            if v[i] == 0 {
                return Err(Error::Config("ratio components must be >= 1".into()));
            }
        }
        Ok(Ratio::Triple(v[0], v[1], v[2]))
    }
}

impl TryFrom<String> for Ratio {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Ratio> for String {
    fn from(r: Ratio) -> String {
        r.to_string()
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::All => f.write_str("all"),
            Ratio::Triple(a, b, c) => write!(f, "{a}:{b}:{c}"),
        }
    }
}

/// How to divide a manifest into train and test.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SplitMode {
    /// Shuffle subjects and assign whole subjects to train until roughly
    /// `train_fraction` of the sequences are covered. No subject appears in
    /// both splits.
    SubjectDisjoint { train_fraction: f64 },
    /// Explicit membership lists, one sequence_id per line per file.
    SequenceList {
        train_list: PathBuf,
        test_list: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(flatten)]
    pub mode: SplitMode,
    pub seed: u64,
    pub ratio: Ratio,
}

fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("read split list {}", path.display()), e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Split a manifest per the spec. Subject-disjoint mode guarantees an empty
/// subject intersection; list mode follows the files exactly and errors on
/// unknown sequence ids.
pub fn split_train_test(manifest: &Manifest, spec: &SplitSpec) -> Result<(Manifest, Manifest)> {
    match &spec.mode {
        SplitMode::SubjectDisjoint { train_fraction } => {
            if !(0.0..=1.0).contains(train_fraction) {
                return Err(Error::Split(format!(
                    "train_fraction {train_fraction} outside [0, 1]"
                )));
            }
            let mut subjects: Vec<&str> = manifest.subjects();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            subjects.shuffle(&mut rng);

            let mut seqs_per_subject: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &manifest.records {
                *seqs_per_subject.entry(r.subject_id.as_str()).or_default() += 1;
            }
            let total = manifest.records.len();
            let target = (total as f64 * train_fraction).round() as usize;

            let mut train_subjects: BTreeSet<&str> = BTreeSet::new();
            let mut covered = 0usize;
            for s in subjects {
                if covered >= target && !train_subjects.is_empty() {
                    break;
                }
                covered += seqs_per_subject[s];
                train_subjects.insert(s);
            }
            let (train, test): (Vec<_>, Vec<_>) = manifest
                .records
                .iter()
                .cloned()
                .partition(|r| train_subjects.contains(r.subject_id.as_str()));
            if test.is_empty() {
                log::warn!("test split is empty (too few subjects for the requested fraction)");
            }
            Ok((manifest.with_records(train), manifest.with_records(test)))
        }
        SplitMode::SequenceList {
            train_list,
            test_list,
        } => {
            let known: BTreeSet<&str> = manifest
                .records
                .iter()
                .map(|r| r.sequence_id.as_str())
                .collect();
            let train_ids = read_id_list(train_list)?;
            let test_ids = read_id_list(test_list)?;
            for id in train_ids.iter().chain(test_ids.iter()) {
                if !known.contains(id.as_str()) {
                    return Err(Error::Split(format!(
                        "split list references unknown sequence `{id}`"
                    )));
                }
            }
            let train_set: BTreeSet<&str> = train_ids.iter().map(String::as_str).collect();
            let test_set: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
            if let Some(both) = train_set.intersection(&test_set).next() {
                return Err(Error::Split(format!(
                    "sequence `{both}` appears in both split lists"
                )));
            }
            let train = manifest
                .records
                .iter()
                .filter(|r| train_set.contains(r.sequence_id.as_str()))
                .cloned()
                .collect();
            let test = manifest
                .records
                .iter()
                .filter(|r| test_set.contains(r.sequence_id.as_str()))
                .cloned()
                .collect();
            Ok((manifest.with_records(train), manifest.with_records(test)))
        }
    }
}

/// Subsample a training pool to a class ratio.
///
/// The limiting class (smallest `count/ratio`) keeps all its sequences; the
/// others are randomly subsampled to `floor(r_i * n_L / r_L)`. Deterministic
/// given the seed.
pub fn subsample_ratio(train: &Manifest, ratio: Ratio, seed: u64) -> Result<Manifest> {
    let (ra, rb, rc) = match ratio {
        Ratio::All => return Ok(train.clone()),
        Ratio::Triple(a, b, c) => (a as u64, b as u64, c as u64),
    };
    let r = [ra, rb, rc];
    let n = train.counts().map(|c| c as u64);
    for (i, &count) in n.iter().enumerate() {
        if count == 0 {
            return Err(Error::Ratio(format!(
                "class `{}` has no sequences in the pool",
                LABELS[i]
            )));
        }
    }
    // Limiting class: minimal n_i / r_i, compared exactly in integers.
    let mut lim = 0usize;
    for i in 1..3 {
        if n[i] * r[lim] < n[lim] * r[i] {
            lim = i;
        }
    }
    let targets: [usize; 3] = std::array::from_fn(|i| ((r[i] * n[lim]) / r[lim]) as usize);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    for (class, &target) in targets.iter().enumerate() {
        let idx: Vec<usize> = train
            .records
            .iter()
            .enumerate()
            .filter(|(_, rec)| rec.label.index() == class)
            .map(|(i, _)| i)
            .collect();
        if target >= idx.len() {
            kept.extend(idx);
        } else {
            let chosen = rand::seq::index::sample(&mut rng, idx.len(), target);
            kept.extend(chosen.iter().map(|j| idx[j]));
        }
    }
    kept.sort_unstable();
    let records = kept.into_iter().map(|i| train.records[i].clone()).collect();
    Ok(train.with_records(records))
}

/// Pick `n` frame indices from a sequence, ascending. Uses sampling without
/// replacement when the sequence is long enough, with replacement otherwise.
pub fn sample_frames(record: &SequenceRecord, n: usize, seed: u64) -> Vec<usize> {
    assert!(n >= 1, "frame sample size must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = record.n_frames;
    let mut idx: Vec<usize> = if total >= n {
        rand::seq::index::sample(&mut rng, total, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..total)).collect()
    };
    idx.sort_unstable();
    idx
}

/// One training view: a frame subset of one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchView {
    pub record_index: usize,
    pub subject_index: usize,
    pub label: DiagnosticLabel,
    pub frame_indices: Vec<usize>,
}

/// A P x K batch: P subjects, K views each, every view `n` frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub views: Vec<BatchView>,
    pub frames_per_view: usize,
}

impl Batch {
    pub fn subject_ids(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.subject_index).collect()
    }

    pub fn label_ids(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.label.index()).collect()
    }

    /// Compact description for diagnostics.
    pub fn describe(&self, manifest: &Manifest) -> String {
        self.views
            .iter()
            .map(|v| {
                let r = &manifest.records[v.record_index];
                format!("{}/{}[{} frames]", r.subject_id, r.sequence_id, v.frame_indices.len())
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Draw a P x K batch. Each subject contributes one sequence split into K
/// frame subsets; the subsets are pairwise disjoint whenever the sequence has
/// at least K*n frames. Deterministic given the seed.
pub fn make_batch(
    train: &Manifest,
    p: usize,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<Batch> {
    assert!(k >= 2, "K must be >= 2 for within-sequence positives");
    assert!(n >= 1);
    let subject_idx = train.subject_indices();
    let subjects = train.subjects();
    if p > subjects.len() {
        return Err(Error::Sampler(format!(
            "P={p} exceeds {} distinct subjects",
            subjects.len()
        )));
    }
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in train.records.iter().enumerate() {
        by_subject.entry(r.subject_id.as_str()).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, subjects.len(), p);
    let mut views = Vec::with_capacity(p * k);
    for s in chosen.iter() {
        let subject = subjects[s];
        let recs = &by_subject[subject];
        let rec_i = recs[rng.random_range(0..recs.len())];
        let record = &train.records[rec_i];

        // Deal shuffled frame indices into K chunks of n, extending the pool
        // with fresh shuffles when the sequence is shorter than K*n.
        let mut pool: Vec<usize> = Vec::with_capacity(k * n);
        while pool.len() < k * n {
            let mut idx: Vec<usize> = (0..record.n_frames).collect();
            idx.shuffle(&mut rng);
            pool.extend(idx);
        }
        for view in 0..k {
            let mut frame_indices: Vec<usize> = pool[view * n..(view + 1) * n].to_vec();
            frame_indices.sort_unstable();
            views.push(BatchView {
                record_index: rec_i,
                subject_index: subject_idx[subject],
                label: record.label,
                frame_indices,
            });
        }
    }
    Ok(Batch {
        views,
        frames_per_view: n,
    })
}

/// In-memory store of normalized frames for a manifest.
///
/// Frames are normalized once at load time (normalization is idempotent, so
/// pre-normalized datasets pass through unchanged) and kept as u8 masks.
pub struct FrameStore {
    pub target_h: usize,
    pub target_w: usize,
    /// One (n_frames, h, w) mask stack per manifest record.
    pub sequences: Vec<Array3<u8>>,
}

impl FrameStore {
    /// Load and normalize every frame of the manifest, in parallel.
    pub fn load(manifest: &Manifest, target_h: usize, target_w: usize) -> Result<FrameStore> {
        use rayon::prelude::*;
        let sequences: Result<Vec<Array3<u8>>> = manifest
            .records
            .par_iter()
            .map(|rec| {
                let mut frames = Vec::with_capacity(rec.n_frames);
                for i in 0..rec.n_frames {
                    let path = rec.frame_path(&manifest.root, i);
                    frames.push(silhouette::load_silhouette(&path)?);
                }
                let normalized = silhouette::normalize_sequence(&frames, target_h, target_w)?;
                let mut stack = Array3::<u8>::zeros((normalized.len(), target_h, target_w));
                for (i, f) in normalized.iter().enumerate() {
                    stack.index_axis_mut(ndarray::Axis(0), i).assign(&f.mask);
                }
                Ok(stack)
            })
            .collect();
        Ok(FrameStore {
            target_h,
            target_w,
            sequences: sequences?,
        })
    }

    /// Build a store from frames already in memory (used by tests).
    pub fn from_sequences(sequences: Vec<Array3<u8>>, target_h: usize, target_w: usize) -> Self {
        FrameStore {
            target_h,
            target_w,
            sequences,
        }
    }

    pub fn n_frames(&self, record_index: usize) -> usize {
        self.sequences[record_index].dim().0
    }

    /// Gather selected frames of one record as an (n, h, w) f32-convertible
    /// mask stack.
    pub fn gather(&self, record_index: usize, frame_indices: &[usize]) -> Array3<u8> {
        let seq = &self.sequences[record_index];
        let (_, h, w) = seq.dim();
        let mut out = Array3::<u8>::zeros((frame_indices.len(), h, w));
        for (i, &fi) in frame_indices.iter().enumerate() {
            out.index_axis_mut(ndarray::Axis(0), i)
                .assign(&seq.index_axis(ndarray::Axis(0), fi));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(subject: &str, sequence: &str, label: DiagnosticLabel, n: usize) -> SequenceRecord {
        SequenceRecord {
            subject_id: subject.into(),
            sequence_id: sequence.into(),
            label,
            n_frames: n,
            frames: (0..n)
                .map(|i| PathBuf::from(format!("{}/{}/frame_{:06}.png", subject, sequence, i)))
                .collect(),
        }
    }

    fn manifest(records: Vec<SequenceRecord>) -> Manifest {
        Manifest {
            root: PathBuf::from("/nonexistent"),
            records,
        }
    }

    fn synthetic_manifest(pos: usize, neu: usize, neg: usize, seqs_each: usize) -> Manifest {
        let mut records = Vec::new();
        let mut id = 0;
        for (count, label) in [
            (pos, DiagnosticLabel::Positive),
            (neu, DiagnosticLabel::Neutral),
            (neg, DiagnosticLabel::Negative),
        ] {
            for _ in 0..count {
                let subject = format!("subj{:04}", id);
                id += 1;
                for s in 0..seqs_each {
                    records.push(record(&subject, &format!("{subject}-seq{s}"), label, 40));
                }
            }
        }
        manifest(records)
    }

    #[test]
    fn build_manifest_scans_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let img = image::GrayImage::from_pixel(8, 8, image::Luma([255]));
        for (label, subject, seq, frames) in [
            ("positive", "s01", "s01-a", 3),
            ("positive", "s01", "s01-b", 2),
            ("negative", "s02", "s02-a", 1),
        ] {
            let d = root.join(label).join(subject).join(seq);
            std::fs::create_dir_all(&d).unwrap();
            for i in 0..frames {
                img.save(d.join(format!("frame_{i:06}.png"))).unwrap();
            }
        }
        // Empty sequence directory is skipped.
        std::fs::create_dir_all(root.join("negative/s03/s03-a")).unwrap();

        let m = build_manifest(root).unwrap();
        assert_eq!(m.records.len(), 3);
        assert_eq!(m.counts(), [2, 0, 1]);
        assert_eq!(m.total_frames(), 6);
        assert_eq!(m.subjects(), vec!["s01", "s02"]);

        // Round-trip through the JSONL cache.
        let cache = root.join("manifest.jsonl");
        m.save_jsonl(&cache).unwrap();
        let m2 = Manifest::load_jsonl(&cache, root).unwrap();
        assert_eq!(m2.records.len(), 3);
        assert_eq!(m2.counts(), m.counts());

        // Subject under two labels is a conflict.
        let d = root.join("neutral/s01/s01-c");
        std::fs::create_dir_all(&d).unwrap();
        img.save(d.join("frame_000000.png")).unwrap();
        assert!(matches!(
            build_manifest(root),
            Err(Error::ManifestConflict { .. })
        ));
    }

    #[test]
    fn empty_root_gives_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_manifest(dir.path()).unwrap();
        assert!(m.records.is_empty());
        assert_eq!(m.counts(), [0, 0, 0]);
    }

    #[test]
    fn unknown_label_directory_is_a_layout_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("bogus")).unwrap();
        assert!(matches!(
            build_manifest(dir.path()),
            Err(Error::Layout { .. })
        ));
    }

    #[test]
    fn subject_disjoint_split_has_empty_intersection() {
        let m = synthetic_manifest(20, 20, 60, 2);
        let spec = SplitSpec {
            mode: SplitMode::SubjectDisjoint {
                train_fraction: 0.5,
            },
            seed: 7,
            ratio: Ratio::All,
        };
        let (train, test) = split_train_test(&m, &spec).unwrap();
        assert_eq!(train.records.len() + test.records.len(), m.records.len());
        let ts: BTreeSet<_> = train.subjects().into_iter().map(String::from).collect();
        let vs: BTreeSet<_> = test.subjects().into_iter().map(String::from).collect();
        assert!(ts.intersection(&vs).next().is_none());
        assert!(!test.records.is_empty());
    }

    #[test]
    fn single_subject_goes_to_train() {
        let m = synthetic_manifest(1, 0, 0, 2);
        let spec = SplitSpec {
            mode: SplitMode::SubjectDisjoint {
                train_fraction: 0.5,
            },
            seed: 0,
            ratio: Ratio::All,
        };
        let (train, test) = split_train_test(&m, &spec).unwrap();
        assert_eq!(train.records.len(), 2);
        assert!(test.records.is_empty());
    }

    #[test]
    fn sequence_list_split_follows_files_and_rejects_unknown_ids() {
        let m = synthetic_manifest(2, 2, 2, 1);
        let dir = tempfile::tempdir().unwrap();
        let train_list = dir.path().join("train.txt");
        let test_list = dir.path().join("test.txt");
        let ids: Vec<&str> = m.records.iter().map(|r| r.sequence_id.as_str()).collect();
        std::fs::write(&train_list, format!("{}\n{}\n", ids[0], ids[1])).unwrap();
        std::fs::write(&test_list, format!("{}\n", ids[2])).unwrap();
        let spec = SplitSpec {
            mode: SplitMode::SequenceList {
                train_list: train_list.clone(),
                test_list: test_list.clone(),
            },
            seed: 0,
            ratio: Ratio::All,
        };
        let (train, test) = split_train_test(&m, &spec).unwrap();
        assert_eq!(train.records.len(), 2);
        assert_eq!(test.records.len(), 1);

        std::fs::write(&test_list, "no-such-sequence\n").unwrap();
        assert!(matches!(
            split_train_test(&m, &spec),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn ratio_subsampling_matches_limiting_class_rule() {
        // Pool shaped like the published train pools: the negative class is
        // limiting, the others subsample to floor(n_neg / r_neg).
        let m = synthetic_manifest(80, 80, 596, 1);
        let out = subsample_ratio(&m, "1:1:8".parse().unwrap(), 3).unwrap();
        assert_eq!(out.counts(), [74, 74, 596]);

        let m = synthetic_manifest(50, 50, 663, 1);
        let out = subsample_ratio(&m, "1:1:16".parse().unwrap(), 3).unwrap();
        assert_eq!(out.counts(), [41, 41, 663]);

        let m = synthetic_manifest(200, 200, 373, 1);
        let out = subsample_ratio(&m, "1:1:2".parse().unwrap(), 3).unwrap();
        assert_eq!(out.counts(), [186, 186, 373]);

        // Infeasible when a class is empty.
        let m = synthetic_manifest(0, 10, 10, 1);
        assert!(matches!(
            subsample_ratio(&m, "1:1:2".parse().unwrap(), 0),
            Err(Error::Ratio(_))
        ));
    }

    #[test]
    fn ratio_subsampling_is_deterministic_and_label_preserving() {
        let m = synthetic_manifest(30, 30, 100, 1);
        let a = subsample_ratio(&m, "1:1:8".parse().unwrap(), 11).unwrap();
        let b = subsample_ratio(&m, "1:1:8".parse().unwrap(), 11).unwrap();
        let ids =
            |mm: &Manifest| mm.records.iter().map(|r| r.sequence_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        // No duplicates.
        let set: BTreeSet<_> = ids(&a).into_iter().collect();
        assert_eq!(set.len(), a.records.len());
    }

    #[test]
    fn sample_frames_covers_the_spec_cases() {
        let short = record("s", "q", DiagnosticLabel::Negative, 30);
        assert_eq!(sample_frames(&short, 30, 0), (0..30).collect::<Vec<_>>());

        let tiny = record("s", "q", DiagnosticLabel::Negative, 10);
        let idx = sample_frames(&tiny, 30, 5);
        assert_eq!(idx.len(), 30);
        assert!(idx.iter().all(|&i| i < 10));
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));

        let long = record("s", "q", DiagnosticLabel::Negative, 300);
        assert_eq!(sample_frames(&long, 30, 42), sample_frames(&long, 30, 42));
        let idx = sample_frames(&long, 30, 42);
        let set: BTreeSet<_> = idx.iter().collect();
        assert_eq!(set.len(), 30);
    }

    #[test]
    fn make_batch_counts_disjointness_and_determinism() {
        let mut records = Vec::new();
        for s in 0..10 {
            records.push(record(
                &format!("subj{s:02}"),
                &format!("seq{s:02}"),
                DiagnosticLabel::Negative,
                60,
            ));
        }
        let m = manifest(records);

        let b = make_batch(&m, 8, 2, 30, 9).unwrap();
        assert_eq!(b.views.len(), 16);
        let mut per_subject: BTreeMap<usize, usize> = BTreeMap::new();
        for v in &b.views {
            *per_subject.entry(v.subject_index).or_default() += 1;
        }
        assert_eq!(per_subject.len(), 8);
        assert!(per_subject.values().all(|&c| c == 2));

        // 60 frames, K=2, n=30: views are disjoint and union to all frames.
        for pair in b.views.chunks(2) {
            let a: BTreeSet<_> = pair[0].frame_indices.iter().collect();
            let c: BTreeSet<_> = pair[1].frame_indices.iter().collect();
            assert!(a.intersection(&c).next().is_none());
            assert_eq!(a.union(&c).count(), 60);
        }

        assert_eq!(b, make_batch(&m, 8, 2, 30, 9).unwrap());
        assert!(matches!(
            make_batch(&m, 11, 2, 30, 0),
            Err(Error::Sampler(_))
        ));
    }

    #[test]
    fn batch_labels_match_manifest_labels() {
        let m = synthetic_manifest(3, 3, 6, 2);
        let b = make_batch(&m, 6, 2, 10, 1).unwrap();
        for v in &b.views {
            assert_eq!(v.label, m.records[v.record_index].label);
        }
    }

    proptest! {
        #[test]
        fn subject_disjoint_property(
            pos in 1usize..8,
            neu in 1usize..8,
            neg in 1usize..20,
            seed in 0u64..1000,
        ) {
            let m = synthetic_manifest(pos, neu, neg, 2);
            let spec = SplitSpec {
                mode: SplitMode::SubjectDisjoint { train_fraction: 0.5 },
                seed,
                ratio: Ratio::All,
            };
            let (train, test) = split_train_test(&m, &spec).unwrap();
            let ts: BTreeSet<_> = train.subjects().into_iter().map(String::from).collect();
            let vs: BTreeSet<_> = test.subjects().into_iter().map(String::from).collect();
            prop_assert!(ts.intersection(&vs).next().is_none());
            prop_assert_eq!(train.records.len() + test.records.len(), m.records.len());
        }

        #[test]
        fn subsample_never_duplicates_or_relabels(
            pos in 1usize..20,
            neu in 1usize..20,
            neg in 1usize..60,
            seed in 0u64..100,
        ) {
            let m = synthetic_manifest(pos, neu, neg, 1);
            let out = subsample_ratio(&m, Ratio::Triple(1, 1, 8), seed).unwrap();
            let ids: Vec<_> = out.records.iter().map(|r| r.sequence_id.clone()).collect();
            let set: BTreeSet<_> = ids.iter().collect();
            prop_assert_eq!(set.len(), ids.len());
            let orig: BTreeMap<_, _> = m
                .records
                .iter()
                .map(|r| (r.sequence_id.clone(), r.label))
                .collect();
            for r in &out.records {
                prop_assert_eq!(orig[&r.sequence_id], r.label);
            }
        }
    }
}
