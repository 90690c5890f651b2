//! Trial ingestion, preprocessing, and cross-validation splits.
//!
//! The interchange format is a wide CSV: one row per trial with columns
//! `subject_id,task,fmma_ue,sample_rate,unit_pos,unit_ang,n_samples`
//! followed by nine channel blocks `ch<k>_t<j>`. Ingestion applies the
//! preprocessing pipeline (task filter, impairment grouping, crop/pad to
//! 300 samples, unit normalization); export emits the identical format.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::SeededRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

/// Number of kinematic channels per trial.
pub const CHANNELS: usize = 9;
/// Samples per trial after crop/pad (5 s at 60 Hz).
pub const SAMPLES: usize = 300;
/// Canonical sampling rate in Hz.
pub const SAMPLE_RATE: f64 = 60.0;

/// Channel layout, fixed across the whole pipeline.
pub const CHANNEL_NAMES: [&str; 9] = [
    "t8_pos_x_cm",
    "t8_pos_y_cm",
    "t8_pos_z_cm",
    "t8_orient_z_rad",
    "shoulder_x_rad",
    "shoulder_y_rad",
    "shoulder_z_rad",
    "elbow_x_rad",
    "elbow_y_rad",
];

/// Indices of the trunk position channels (displacement semantics).
const POSITION_CHANNELS: std::ops::Range<usize> = 0..3;

/// The ten reaching tasks kept from the source corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    T02,
    T03,
    T04,
    T06,
    T08,
    T10,
    T16,
    T18,
    T19,
    T28,
}

impl Task {
    pub const ALL: [Task; 10] = [
        Task::T02,
        Task::T03,
        Task::T04,
        Task::T06,
        Task::T08,
        Task::T10,
        Task::T16,
        Task::T18,
        Task::T19,
        Task::T28,
    ];
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Task {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Task::ALL.iter().copied().find(|t| t.to_string() == s).ok_or(())
    }
}

/// Impairment grouping. Stroke recordings are split at an FMMA-UE score of
/// 42; controls carry no score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Impairment {
    Control,
    Mild,
    ModerateSevere,
}

impl Impairment {
    pub const ALL: [Impairment; 3] = [Impairment::Control, Impairment::Mild, Impairment::ModerateSevere];

    /// Representative FMMA-UE score consistent with [`categorize_impairment`],
    /// used when labelling synthetic trials (cohort medians: mild 55,
    /// moderate 42).
    pub fn representative_fmma(self) -> Option<u8> {
        match self {
            Impairment::Control => None,
            Impairment::Mild => Some(55),
            Impairment::ModerateSevere => Some(42),
        }
    }
}

impl fmt::Display for Impairment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Impairment::Control => "Control",
            Impairment::Mild => "Mild",
            Impairment::ModerateSevere => "ModerateSevere",
        };
        f.write_str(s)
    }
}

impl FromStr for Impairment {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "Control" => Ok(Impairment::Control),
            "Mild" => Ok(Impairment::Mild),
            "ModerateSevere" => Ok(Impairment::ModerateSevere),
            _ => Err(()),
        }
    }
}

/// Map an optional FMMA-UE score to its impairment group: absent means
/// control, above 42 mild, 42 or below moderate+severe.
pub fn categorize_impairment(fmma_ue: Option<u8>) -> Result<Impairment> {
    match fmma_ue {
        None => Ok(Impairment::Control),
        Some(score) if score > 66 => Err(Error::Range(format!("FMMA-UE score {score} outside [0, 66]"))),
        Some(score) if score > 42 => Ok(Impairment::Mild),
        Some(_) => Ok(Impairment::ModerateSevere),
    }
}

/// Whether a trial came from the source corpus or from the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Real,
    Synthetic,
}

/// Subject id that marks generated trials in the interchange format.
pub const SYNTHETIC_SUBJECT: &str = "synthetic";

/// One preprocessed recording: a 9 x 300 signal with its labels.
#[derive(Debug, Clone)]
pub struct Trial {
    pub subject_id: String,
    pub task: Task,
    pub impairment: Impairment,
    pub fmma_ue: Option<u8>,
    pub sample_rate: f64,
    /// `[9 x 300]`, positions in cm relative to the first sample, angles in
    /// radians.
    pub signal: Tensor,
    pub provenance: Provenance,
}

impl Trial {
    pub fn new(
        subject_id: impl Into<String>,
        task: Task,
        fmma_ue: Option<u8>,
        signal: Tensor,
        provenance: Provenance,
    ) -> Result<Self> {
        if signal.shape() != [CHANNELS, SAMPLES] {
            return Err(Error::dim(
                "trial",
                format!("signal must be [{CHANNELS} x {SAMPLES}], got {:?}", signal.shape()),
            ));
        }
        if !signal.all_finite() {
            return Err(Error::Range("trial signal contains non-finite samples".to_string()));
        }
        let impairment = categorize_impairment(fmma_ue)?;
        Ok(Self {
            subject_id: subject_id.into(),
            task,
            impairment,
            fmma_ue,
            sample_rate: SAMPLE_RATE,
            signal,
            provenance,
        })
    }
}

/// Stable class-index mappings for the tasks and (task, impairment)
/// conditions present in a dataset. For the full corpus this is the
/// 10-task / 30-condition grid; indices follow sorted task id crossed with
/// impairment order (Control, Mild, ModerateSevere).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tasks: Vec<Task>,
    conditions: Vec<(Task, Impairment)>,
}

impl Vocab {
    fn from_trials(trials: &[Trial]) -> Self {
        let mut tasks: Vec<Task> = trials.iter().map(|t| t.task).collect();
        tasks.sort_unstable();
        tasks.dedup();
        let mut conditions: Vec<(Task, Impairment)> = trials.iter().map(|t| (t.task, t.impairment)).collect();
        conditions.sort_unstable();
        conditions.dedup();
        Self { tasks, conditions }
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.conditions.len()
    }

    pub fn task_index(&self, task: Task) -> Option<usize> {
        self.tasks.iter().position(|&t| t == task)
    }

    pub fn condition_index(&self, task: Task, impairment: Impairment) -> Option<usize> {
        self.conditions.iter().position(|&c| c == (task, impairment))
    }

    pub fn condition(&self, index: usize) -> Option<(Task, Impairment)> {
        self.conditions.get(index).copied()
    }

    pub fn conditions(&self) -> &[(Task, Impairment)] {
        &self.conditions
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }
}

/// Which label a classifier or split should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// The 10 reaching tasks (the headline classification problem).
    Task,
    /// The full (task, impairment) condition grid.
    Condition,
}

/// Ordered trials plus their label vocabularies.
#[derive(Debug, Clone)]
pub struct Dataset {
    trials: Vec<Trial>,
    vocab: Vocab,
}

impl Dataset {
    pub fn new(trials: Vec<Trial>) -> Self {
        let vocab = Vocab::from_trials(&trials);
        Self { trials, vocab }
    }

    /// Build a subset that keeps the parent's vocabulary, so class indices
    /// remain comparable across folds.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            trials: indices.iter().map(|&i| self.trials[i].clone()).collect(),
            vocab: self.vocab.clone(),
        }
    }

    /// Extend with additional trials (e.g. synthetic augmentation) without
    /// rebuilding the vocabulary.
    pub fn extended(&self, extra: Vec<Trial>) -> Dataset {
        let mut trials = self.trials.clone();
        trials.extend(extra);
        Dataset { trials, vocab: self.vocab.clone() }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Class index of trial `i` under the given label mode.
    pub fn label(&self, i: usize, mode: LabelMode) -> usize {
        let t = &self.trials[i];
        match mode {
            LabelMode::Task => self.vocab.task_index(t.task).expect("vocab covers own trials"),
            LabelMode::Condition => self
                .vocab
                .condition_index(t.task, t.impairment)
                .expect("vocab covers own trials"),
        }
    }

    pub fn labels(&self, mode: LabelMode) -> Vec<usize> {
        (0..self.len()).map(|i| self.label(i, mode)).collect()
    }

    pub fn n_classes(&self, mode: LabelMode) -> usize {
        match mode {
            LabelMode::Task => self.vocab.n_tasks(),
            LabelMode::Condition => self.vocab.n_conditions(),
        }
    }

    /// Trial counts per condition class, in vocabulary order.
    pub fn condition_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.vocab.n_conditions()];
        for i in 0..self.len() {
            counts[self.label(i, LabelMode::Condition)] += 1;
        }
        counts
    }
}

/// Crop to the first 300 samples or pad by repeating the final column.
pub fn crop_or_pad(raw: &Tensor) -> Result<Tensor> {
    if raw.rank() != 2 || raw.dim(0) != CHANNELS {
        return Err(Error::dim("crop_or_pad", format!("expected [{CHANNELS} x L], got {:?}", raw.shape())));
    }
    let l = raw.dim(1);
    if l == 0 {
        return Err(Error::EmptyTrial("recording has zero samples".to_string()));
    }
    if l == SAMPLES {
        return Ok(raw.clone());
    }
    let mut out = Vec::with_capacity(CHANNELS * SAMPLES);
    for ch in raw.data().chunks(l) {
        if l > SAMPLES {
            out.extend_from_slice(&ch[..SAMPLES]);
        } else {
            out.extend_from_slice(ch);
            out.extend(std::iter::repeat(ch[l - 1]).take(SAMPLES - l));
        }
    }
    Tensor::from_vec(&[CHANNELS, SAMPLES], out)
}

/// Declared unit of the trunk position channels in an interchange file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositionUnit {
    Meters,
    Centimeters,
}

impl PositionUnit {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "m" => Some(PositionUnit::Meters),
            "cm" => Some(PositionUnit::Centimeters),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            PositionUnit::Meters => "m",
            PositionUnit::Centimeters => "cm",
        }
    }
}

/// Declared unit of the orientation and joint-angle channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleUnit {
    Degrees,
    Radians,
}

impl AngleUnit {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "deg" => Some(AngleUnit::Degrees),
            "rad" => Some(AngleUnit::Radians),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            AngleUnit::Degrees => "deg",
            AngleUnit::Radians => "rad",
        }
    }
}

/// Express position channels as displacement from the trial's first sample
/// in centimeters and angle channels in radians. Idempotent: output
/// declared as (cm, rad) re-normalizes to itself bit-exactly.
pub fn normalize_units(signal: &Tensor, unit_pos: PositionUnit, unit_ang: AngleUnit) -> Result<Tensor> {
    if signal.rank() != 2 || signal.dim(0) != CHANNELS {
        return Err(Error::dim("normalize_units", format!("expected [{CHANNELS} x L], got {:?}", signal.shape())));
    }
    let l = signal.dim(1);
    let pos_factor = match unit_pos {
        PositionUnit::Meters => 100.0,
        PositionUnit::Centimeters => 1.0,
    };
    let ang_factor = match unit_ang {
        AngleUnit::Degrees => std::f64::consts::PI / 180.0,
        AngleUnit::Radians => 1.0,
    };
    let mut out = signal.data().to_vec();
    for (ci, ch) in out.chunks_mut(l).enumerate() {
        if POSITION_CHANNELS.contains(&ci) {
            let first = ch[0];
            for v in ch.iter_mut() {
                *v = (*v - first) * pos_factor;
            }
        } else if ang_factor != 1.0 {
            for v in ch.iter_mut() {
                *v *= ang_factor;
            }
        }
    }
    Tensor::from_vec(signal.shape(), out)
}

/// How trials are assigned to cross-validation folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Shuffle within each condition class, then deal round-robin; per-class
    /// fold counts stay within one of each other.
    TrialStratified,
    /// Whole subjects go to single folds, balancing trial counts greedily.
    SubjectWise,
}

/// A fold assignment for every trial in a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n_folds: usize,
    /// `assignments[i]` is the fold of trial `i`.
    pub assignments: Vec<usize>,
    pub strategy: SplitStrategy,
    pub seed: u64,
}

impl SplitPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

/// Build a deterministic cross-validation split.
pub fn make_folds(dataset: &Dataset, n_folds: usize, strategy: SplitStrategy, seed: u64) -> Result<SplitPlan> {
    if n_folds < 2 {
        return Err(Error::param("n_folds", format!("need at least 2 folds, got {n_folds}")));
    }
    let mut assignments = vec![0usize; dataset.len()];
    match strategy {
        SplitStrategy::TrialStratified => {
            let labels = dataset.labels(LabelMode::Condition);
            let n_classes = dataset.n_classes(LabelMode::Condition);
            let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
            for (i, &c) in labels.iter().enumerate() {
                per_class[c].push(i);
            }
            let deficient: Vec<String> = per_class
                .iter()
                .enumerate()
                .filter(|(_, members)| members.len() < n_folds)
                .map(|(c, members)| {
                    let (task, imp) = dataset.vocab.condition(c).expect("class index valid");
                    format!("{task}/{imp} ({} trials)", members.len())
                })
                .collect();
            if !deficient.is_empty() {
                return Err(Error::Stratification { n_folds, classes: deficient.join(", ") });
            }
            let mut rng = SeededRng::new(seed);
            for (c, members) in per_class.iter_mut().enumerate() {
                rng.shuffle(members);
                // Rotate the starting fold by class so leftover trials spread
                // across folds instead of piling into fold 0.
                for (k, &i) in members.iter().enumerate() {
                    assignments[i] = (k + c) % n_folds;
                }
            }
        }
        SplitStrategy::SubjectWise => {
            let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, t) in dataset.trials.iter().enumerate() {
                by_subject.entry(t.subject_id.as_str()).or_default().push(i);
            }
            let mut subjects: Vec<(&str, Vec<usize>)> = by_subject.into_iter().collect();
            subjects.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
            let mut fold_sizes = vec![0usize; n_folds];
            for (_, indices) in subjects {
                let fold = fold_sizes
                    .iter()
                    .enumerate()
                    .min_by_key(|&(f, &size)| (size, f))
                    .map(|(f, _)| f)
                    .expect("n_folds >= 2");
                fold_sizes[fold] += indices.len();
                for i in indices {
                    assignments[i] = fold;
                }
            }
        }
    }
    Ok(SplitPlan { n_folds, assignments, strategy, seed })
}

/// Optional per-channel affine standardization recorded with GAN models so
/// generation can invert it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelScaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ChannelScaler {
    /// Identity scaler.
    pub fn identity() -> Self {
        Self { shift: vec![0.0; CHANNELS], scale: vec![1.0; CHANNELS] }
    }

    /// Per-channel mean/std over all trials (std floored at 1e-8).
    pub fn fit(trials: &[Trial]) -> Self {
        let mut mean = vec![0.0; CHANNELS];
        let mut count = 0usize;
        for t in trials {
            for (c, ch) in t.signal.data().chunks(SAMPLES).enumerate() {
                mean[c] += ch.iter().sum::<f64>();
            }
            count += SAMPLES;
        }
        for m in &mut mean {
            *m /= count.max(1) as f64;
        }
        let mut var = vec![0.0; CHANNELS];
        for t in trials {
            for (c, ch) in t.signal.data().chunks(SAMPLES).enumerate() {
                var[c] += ch.iter().map(|&x| (x - mean[c]) * (x - mean[c])).sum::<f64>();
            }
        }
        let scale = var.iter().map(|v| (v / count.max(1) as f64).sqrt().max(1e-8)).collect();
        Self { shift: mean, scale }
    }

    /// `(x - shift) / scale` per channel.
    pub fn apply(&self, signal: &Tensor) -> Tensor {
        self.transform(signal, |x, m, s| (x - m) / s)
    }

    /// `x * scale + shift` per channel.
    pub fn invert(&self, signal: &Tensor) -> Tensor {
        self.transform(signal, |x, m, s| x * s + m)
    }

    fn transform(&self, signal: &Tensor, f: impl Fn(f64, f64, f64) -> f64) -> Tensor {
        let t = signal.dim(signal.rank() - 1);
        let mut out = signal.data().to_vec();
        for (c, ch) in out.chunks_mut(t).enumerate() {
            let (m, s) = (self.shift[c % CHANNELS], self.scale[c % CHANNELS]);
            for v in ch.iter_mut() {
                *v = f(*v, m, s);
            }
        }
        Tensor::from_vec(signal.shape(), out).expect("same shape")
    }
}

/// Ingestion tallies: what was kept, what was dropped, and per-class counts.
#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub trials_kept: usize,
    pub skipped_unknown_task: usize,
    /// `(task, impairment, count)` in vocabulary order.
    pub counts: Vec<(Task, Impairment, usize)>,
}

fn schema_err(line: usize, detail: impl Into<String>) -> Error {
    Error::Schema { line: Some(line), detail: detail.into() }
}

/// Read an interchange CSV, apply preprocessing, and assemble a dataset.
/// Rows with unknown task ids are dropped and counted.
pub fn ingest<R: Read>(reader: R) -> Result<(Dataset, IngestSummary)> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    {
        let headers = csv_reader.headers()?;
        let expected = ["subject_id", "task", "fmma_ue", "sample_rate", "unit_pos", "unit_ang", "n_samples"];
        for (i, name) in expected.iter().enumerate() {
            if headers.get(i) != Some(*name) {
                return Err(Error::Schema {
                    line: Some(1),
                    detail: format!("missing required column '{name}' at position {i}"),
                });
            }
        }
    }
    let mut trials = Vec::new();
    let mut rows_read = 0usize;
    let mut skipped = 0usize;
    for (row_idx, record) in csv_reader.records().enumerate() {
        let line = row_idx + 2; // header is line 1
        let record = record?;
        rows_read += 1;
        let field = |i: usize, name: &str| -> Result<&str> {
            record.get(i).ok_or_else(|| schema_err(line, format!("missing field '{name}'")))
        };
        let subject_id = field(0, "subject_id")?.to_string();
        let task_str = field(1, "task")?;
        let task = match Task::from_str(task_str) {
            Ok(t) => t,
            Err(()) => {
                log::warn!("line {line}: dropping row with unknown task '{task_str}'");
                skipped += 1;
                continue;
            }
        };
        let fmma_str = field(2, "fmma_ue")?;
        let fmma_ue = if fmma_str.is_empty() {
            None
        } else {
            Some(
                fmma_str
                    .parse::<u8>()
                    .map_err(|_| schema_err(line, format!("fmma_ue '{fmma_str}' is not an integer in [0, 255]")))?,
            )
        };
        let sample_rate: f64 = field(3, "sample_rate")?
            .parse()
            .map_err(|_| schema_err(line, "sample_rate is not a number"))?;
        if (sample_rate - SAMPLE_RATE).abs() > 1e-9 {
            return Err(schema_err(line, format!("sample_rate {sample_rate} != canonical {SAMPLE_RATE} Hz")));
        }
        let unit_pos = PositionUnit::parse(field(4, "unit_pos")?)
            .ok_or_else(|| schema_err(line, "unit_pos must be 'm' or 'cm'"))?;
        let unit_ang = AngleUnit::parse(field(5, "unit_ang")?)
            .ok_or_else(|| schema_err(line, "unit_ang must be 'deg' or 'rad'"))?;
        let n_samples: usize = field(6, "n_samples")?
            .parse()
            .map_err(|_| schema_err(line, "n_samples is not an integer"))?;
        if n_samples == 0 {
            return Err(Error::EmptyTrial(format!("line {line}: n_samples is 0")));
        }
        let expected_fields = 7 + CHANNELS * n_samples;
        if record.len() != expected_fields {
            return Err(schema_err(
                line,
                format!("expected {expected_fields} fields for n_samples={n_samples}, found {}", record.len()),
            ));
        }
        let mut raw = Vec::with_capacity(CHANNELS * n_samples);
        for i in 7..expected_fields {
            let v: f64 = record
                .get(i)
                .unwrap()
                .parse()
                .map_err(|_| schema_err(line, format!("sample field {i} is not a number")))?;
            raw.push(v);
        }
        let raw = Tensor::from_vec(&[CHANNELS, n_samples], raw)?;
        let cropped = crop_or_pad(&raw)?;
        let normalized = normalize_units(&cropped, unit_pos, unit_ang)?;
        if !normalized.all_finite() {
            return Err(schema_err(line, "signal contains non-finite values"));
        }
        categorize_impairment(fmma_ue).map_err(|e| schema_err(line, e.to_string()))?;
        let provenance = if subject_id == SYNTHETIC_SUBJECT { Provenance::Synthetic } else { Provenance::Real };
        trials.push(Trial::new(subject_id, task, fmma_ue, normalized, provenance)?);
    }
    let dataset = Dataset::new(trials);
    let mut counts: Vec<(Task, Impairment, usize)> = dataset
        .vocab
        .conditions()
        .iter()
        .map(|&(t, i)| (t, i, 0usize))
        .collect();
    for i in 0..dataset.len() {
        counts[dataset.label(i, LabelMode::Condition)].2 += 1;
    }
    let summary = IngestSummary {
        rows_read,
        trials_kept: dataset.len(),
        skipped_unknown_task: skipped,
        counts,
    };
    Ok((dataset, summary))
}

pub fn ingest_path(path: &Path) -> Result<(Dataset, IngestSummary)> {
    let file = std::fs::File::open(path)?;
    ingest(std::io::BufReader::new(file))
}

/// Write a dataset in the interchange format. Floats use shortest
/// round-trip formatting, so export/ingest round-trips bit-exactly.
pub fn export<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    let mut header = String::from("subject_id,task,fmma_ue,sample_rate,unit_pos,unit_ang,n_samples");
    let max_samples = dataset.trials.iter().map(|t| t.signal.dim(1)).max().unwrap_or(SAMPLES);
    for c in 0..CHANNELS {
        for t in 0..max_samples {
            header.push_str(&format!(",ch{c}_t{t}"));
        }
    }
    header.push('\n');
    writer.write_all(header.as_bytes())?;
    for trial in &dataset.trials {
        let mut row = String::new();
        row.push_str(&trial.subject_id);
        row.push(',');
        row.push_str(&trial.task.to_string());
        row.push(',');
        if let Some(score) = trial.fmma_ue {
            row.push_str(&score.to_string());
        }
        row.push(',');
        row.push_str(&format!("{}", trial.sample_rate));
        row.push_str(",cm,rad,");
        row.push_str(&format!("{}", trial.signal.dim(1)));
        for v in trial.signal.data() {
            row.push(',');
            row.push_str(&format!("{v}"));
        }
        row.push('\n');
        writer.write_all(row.as_bytes())?;
    }
    Ok(())
}

pub fn export_path(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    export(dataset, std::io::BufWriter::new(file))
}
