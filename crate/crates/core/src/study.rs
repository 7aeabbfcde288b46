//! Annotation logs and the evaluation pipeline built on them: trial
//! planning, best-of-trials selection, top-90% trimming, inter-personal and
//! intra-personal error statistics, timing tables and questionnaire scores.
//!
//! All standard deviations are population standard deviations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RigidTransform;
use crate::io::{self, DatasetError};
use crate::metrics::{add_metric, pose_errors, MetricsError, PoseErrors};
use crate::scene::MeshAsset;

/// Each sample is annotated this many times per participant.
pub const REPETITIONS: u8 = 3;

pub const SUS_ITEMS: usize = 10;
pub const TLX_DIMENSIONS: usize = 6;
pub const TLX_NAMES: [&str; TLX_DIMENSIONS] =
    ["mental demand", "physical demand", "temporal demand", "performance", "effort", "frustration"];

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("no annotation records")]
    NoRecords,
    #[error("user {user} has {found} trials of {sample}/{object}, expected {expected}")]
    MissingTrials { user: String, sample: String, object: String, found: usize, expected: usize },
    #[error("no mesh or ground truth for {sample}/{object}")]
    MissingReference { sample: String, object: String },
    #[error("duplicate record for user {user}, sample {sample}, trial {trial}, object {object}")]
    DuplicateRecord { user: String, sample: String, trial: u8, object: String },
    #[error("{what} out of range: {value}")]
    OutOfRange { what: String, value: f64 },
    #[error("annotation log line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One confirmed annotation of one object.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub user: String,
    pub sample: String,
    pub trial: u8,
    pub object: String,
    pub pose: RigidTransform,
    /// Seconds from sample load to confirmation.
    pub duration_s: f64,
    pub timestamp: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogLine {
    user: String,
    sample: String,
    trial: u8,
    object: String,
    pose: Vec<f64>,
    duration_s: f64,
    timestamp: DateTime<Utc>,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.trial >= REPETITIONS {
            return Err(StudyError::OutOfRange { what: "trial".into(), value: f64::from(self.trial) });
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(StudyError::OutOfRange { what: "duration_s".into(), value: self.duration_s });
        }
        Ok(())
    }

    /// One JSON object, no trailing newline.
    pub fn to_log_line(&self) -> String {
        let line = LogLine {
            user: self.user.clone(),
            sample: self.sample.clone(),
            trial: self.trial,
            object: self.object.clone(),
            pose: self.pose.to_row_major().to_vec(),
            duration_s: self.duration_s,
            timestamp: self.timestamp,
        };
        serde_json::to_string(&line).expect("log line serializes")
    }

    pub fn from_log_line(text: &str, line_no: usize) -> Result<Self, StudyError> {
        let err = |msg: String| StudyError::Parse { line: line_no, msg };
        let l: LogLine = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let arr: [f64; 16] = l
            .pose
            .as_slice()
            .try_into()
            .map_err(|_| err(format!("pose has {} values, expected 16", l.pose.len())))?;
        let pose = RigidTransform::from_row_major(&arr).map_err(|e| err(e.to_string()))?;
        let rec = AnnotationRecord {
            user: l.user,
            sample: l.sample,
            trial: l.trial,
            object: l.object,
            pose,
            duration_s: l.duration_s,
            timestamp: l.timestamp,
        };
        rec.validate().map_err(|e| err(e.to_string()))?;
        Ok(rec)
    }

    fn key(&self) -> (&str, &str, u8, &str) {
        (&self.user, &self.sample, self.trial, &self.object)
    }
}

/// Reads a JSON-lines annotation log; blank lines are skipped.
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<AnnotationRecord>, StudyError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(AnnotationRecord::from_log_line(&line, i + 1)?);
    }
    check_unique(&out)?;
    Ok(out)
}

pub fn read_log_file(path: &Path) -> Result<Vec<AnnotationRecord>, StudyError> {
    read_log(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_log<W: Write>(mut w: W, records: &[AnnotationRecord]) -> Result<(), StudyError> {
    for r in records {
        writeln!(w, "{}", r.to_log_line())?;
    }
    Ok(())
}

fn check_unique(records: &[AnnotationRecord]) -> Result<(), StudyError> {
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert(r.key()) {
            return Err(StudyError::DuplicateRecord {
                user: r.user.clone(),
                sample: r.sample.clone(),
                trial: r.trial,
                object: r.object.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub sample: String,
    pub repetition: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub entries: Vec<TrialEntry>,
    pub seed: u64,
}

impl TrialPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Three blocks, each an independently shuffled copy of `samples`.
pub fn make_trial_plan(samples: &[String], seed: u64) -> Result<TrialPlan, StudyError> {
    if samples.is_empty() {
        return Err(StudyError::NoRecords);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(samples.len() * usize::from(REPETITIONS));
    for repetition in 0..REPETITIONS {
        let mut block: Vec<&String> = samples.iter().collect();
        block.shuffle(&mut rng);
        entries.extend(block.into_iter().map(|s| TrialEntry { sample: s.clone(), repetition }));
    }
    Ok(TrialPlan { entries, seed })
}

/// The record with the lowest ADD against `gt`; ties go to the lower trial
/// index.
pub fn best_of_trials<'a>(
    records: &[&'a AnnotationRecord],
    mesh: &MeshAsset,
    gt: &RigidTransform,
) -> Result<&'a AnnotationRecord, StudyError> {
    let mut best: Option<(f64, &AnnotationRecord)> = None;
    for r in records {
        let add = add_metric(mesh, &r.pose, gt)?;
        let better = match best {
            None => true,
            Some((b, br)) => add < b || (add == b && r.trial < br.trial),
        };
        if better {
            best = Some((add, r));
        }
    }
    best.map(|(_, r)| r).ok_or(StudyError::NoRecords)
}

/// Number of values kept out of `n`: `⌈0.9·n⌉`.
pub fn trim_keep_count(n: usize) -> usize {
    (9 * n).div_ceil(10)
}

/// Indices (ascending) of the `⌈0.9·n⌉` smallest values. Among equal values
/// at the cut, lower indices are kept.
pub fn trim_top_90_indices(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut kept = order[..trim_keep_count(values.len())].to_vec();
    kept.sort_unstable();
    kept
}

/// Keeps the `⌈0.9·n⌉` smallest values in their original order.
pub fn trim_top_90(values: &[f64]) -> Vec<f64> {
    trim_top_90_indices(values).into_iter().map(|i| values[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean and population standard deviation. Empty input gives zeros with
/// `count = 0`.
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0, count: 0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt(), count: values.len() }
}

/// Which values a top-90% cut is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimScope {
    /// Per metric within each group (sample or user).
    #[default]
    PerGroup,
    /// Per metric across all groups together.
    Pooled,
    /// No trimming.
    Off,
}

impl std::str::FromStr for TrimScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-group" => Ok(Self::PerGroup),
            "pooled" => Ok(Self::Pooled),
            "off" => Ok(Self::Off),
            other => Err(format!("unknown trim scope {other:?} (per-group|pooled|off)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub group: String,
    pub angular: MeanStd,
    pub euclidean: MeanStd,
    pub add: MeanStd,
}

fn summarize(groups: BTreeMap<String, Vec<PoseErrors>>, scope: TrimScope) -> Vec<SummaryStats> {
    let metric = |e: &PoseErrors, m: usize| match m {
        0 => e.angular,
        1 => e.euclidean,
        _ => e.add,
    };
    // kept[group][metric] -> values
    let mut kept: BTreeMap<String, [Vec<f64>; 3]> = BTreeMap::new();
    match scope {
        TrimScope::PerGroup | TrimScope::Off => {
            for (g, errs) in &groups {
                let per = [0, 1, 2].map(|m| {
                    let vals: Vec<f64> = errs.iter().map(|e| metric(e, m)).collect();
                    if scope == TrimScope::Off {
                        vals
                    } else {
                        trim_top_90(&vals)
                    }
                });
                kept.insert(g.clone(), per);
            }
        }
        TrimScope::Pooled => {
            let flat: Vec<(&String, &PoseErrors)> =
                groups.iter().flat_map(|(g, errs)| errs.iter().map(move |e| (g, e))).collect();
            for g in groups.keys() {
                kept.insert(g.clone(), Default::default());
            }
            for m in 0..3 {
                let vals: Vec<f64> = flat.iter().map(|(_, e)| metric(e, m)).collect();
                for i in trim_top_90_indices(&vals) {
                    kept.get_mut(flat[i].0).expect("group exists")[m].push(vals[i]);
                }
            }
        }
    }
    kept.into_iter()
        .map(|(group, [a, e, d])| SummaryStats {
            group,
            angular: mean_std(&a),
            euclidean: mean_std(&e),
            add: mean_std(&d),
        })
        .collect()
}

/// Meshes and ground-truth poses keyed by `(sample, object)`.
#[derive(Debug, Clone, Default)]
pub struct StudyReference {
    pub meshes: HashMap<(String, String), Arc<MeshAsset>>,
    pub ground_truth: HashMap<(String, String), RigidTransform>,
}

impl StudyReference {
    /// Loads every sample under a dataset root.
    pub fn from_dataset(root: &Path) -> Result<Self, StudyError> {
        let mut r = StudyReference::default();
        for id in io::list_samples(root)? {
            let sample = io::load_sample(root, &id)?;
            for obj in &sample.objects {
                let key = (id.clone(), obj.name.clone());
                r.meshes.insert(key.clone(), Arc::new(sample.load_mesh(obj)?));
                if let Some(gt) = obj.ground_truth {
                    r.ground_truth.insert(key, gt);
                }
            }
        }
        Ok(r)
    }

    fn mesh(&self, sample: &str, object: &str) -> Result<&MeshAsset, StudyError> {
        self.meshes
            .get(&(sample.to_owned(), object.to_owned()))
            .map(|m| m.as_ref())
            .ok_or_else(|| StudyError::MissingReference { sample: sample.into(), object: object.into() })
    }

    fn gt(&self, sample: &str, object: &str) -> Result<&RigidTransform, StudyError> {
        self.ground_truth
            .get(&(sample.to_owned(), object.to_owned()))
            .ok_or_else(|| StudyError::MissingReference { sample: sample.into(), object: object.into() })
    }
}

type TrialGroups<'a> = BTreeMap<(&'a str, &'a str, &'a str), Vec<&'a AnnotationRecord>>;

/// Groups by `(user, sample, object)`, trials sorted by index.
fn group_trials(records: &[AnnotationRecord]) -> TrialGroups<'_> {
    let mut groups: TrialGroups<'_> = BTreeMap::new();
    for r in records {
        groups.entry((&r.user, &r.sample, &r.object)).or_default().push(r);
    }
    for v in groups.values_mut() {
        v.sort_by_key(|r| r.trial);
    }
    groups
}

/// Per sample: each user's best trial against ground truth, then the three
/// error metrics trimmed and summarized across users.
pub fn inter_personal_stats(
    records: &[AnnotationRecord],
    reference: &StudyReference,
    scope: TrimScope,
) -> Result<Vec<SummaryStats>, StudyError> {
    if records.is_empty() {
        return Err(StudyError::NoRecords);
    }
    check_unique(records)?;
    let mut per_sample: BTreeMap<String, Vec<PoseErrors>> = BTreeMap::new();
    for ((_, sample, object), trials) in group_trials(records) {
        let mesh = reference.mesh(sample, object)?;
        let gt = reference.gt(sample, object)?;
        let best = best_of_trials(&trials, mesh, gt)?;
        per_sample.entry(sample.to_owned()).or_default().push(pose_errors(mesh, &best.pose, gt)?);
    }
    Ok(summarize(per_sample, scope))
}

/// Per user: errors between every pair of that user's three trials of the
/// same sample (ground truth unused), trimmed and averaged over pairs and
/// samples.
pub fn intra_personal_stats(
    records: &[AnnotationRecord],
    reference: &StudyReference,
    scope: TrimScope,
) -> Result<Vec<SummaryStats>, StudyError> {
    if records.is_empty() {
        return Err(StudyError::NoRecords);
    }
    check_unique(records)?;
    let mut per_user: BTreeMap<String, Vec<PoseErrors>> = BTreeMap::new();
    for ((user, sample, object), trials) in group_trials(records) {
        if trials.len() != usize::from(REPETITIONS) {
            return Err(StudyError::MissingTrials {
                user: user.into(),
                sample: sample.into(),
                object: object.into(),
                found: trials.len(),
                expected: usize::from(REPETITIONS),
            });
        }
        let mesh = reference.mesh(sample, object)?;
        let out = per_user.entry(user.to_owned()).or_default();
        for i in 0..trials.len() {
            for j in i + 1..trials.len() {
                out.push(pose_errors(mesh, &trials[i].pose, &trials[j].pose)?);
            }
        }
    }
    Ok(summarize(per_user, scope))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTime {
    pub user: String,
    pub seconds: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTable {
    pub per_user: Vec<UserTime>,
    /// Mean ± std over the per-user means.
    pub aggregate: MeanStd,
}

/// Per-user mean annotation time and the aggregate over users.
pub fn time_table(records: &[AnnotationRecord]) -> TimeTable {
    let mut by_user: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_user.entry(&r.user).or_default().push(r.duration_s);
    }
    let per_user: Vec<UserTime> = by_user
        .into_iter()
        .filter(|(_, d)| !d.is_empty())
        .map(|(u, d)| UserTime { user: u.to_owned(), seconds: mean_std(&d) })
        .collect();
    let means: Vec<f64> = per_user.iter().map(|u| u.seconds.mean).collect();
    TimeTable { aggregate: aggregate_user_means(&means), per_user }
}

pub fn aggregate_user_means(means: &[f64]) -> MeanStd {
    mean_std(means)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// Standard SUS wording: odd items positive, even items negative.
pub const SUS_STANDARD_POLARITY: [Polarity; SUS_ITEMS] = [
    Polarity::Positive,
    Polarity::Negative,
    Polarity::Positive,
    Polarity::Negative,
    Polarity::Positive,
    Polarity::Negative,
    Polarity::Positive,
    Polarity::Negative,
    Polarity::Positive,
    Polarity::Negative,
];

/// Inverts negative items (`s → 6 − s`) so every score reads positively.
pub fn sus_adjust(responses: &[u8], polarity: &[Polarity]) -> Result<[u8; SUS_ITEMS], StudyError> {
    if responses.len() != SUS_ITEMS || polarity.len() != SUS_ITEMS {
        return Err(StudyError::OutOfRange {
            what: "SUS item count".into(),
            value: responses.len() as f64,
        });
    }
    let mut out = [0u8; SUS_ITEMS];
    for (i, (&s, p)) in responses.iter().zip(polarity).enumerate() {
        if !(1..=5).contains(&s) {
            return Err(StudyError::OutOfRange { what: format!("SUS item {}", i + 1), value: f64::from(s) });
        }
        out[i] = match p {
            Polarity::Positive => s,
            Polarity::Negative => 6 - s,
        };
    }
    Ok(out)
}

/// Per-item statistics of adjusted SUS scores across respondents.
pub fn sus_summary(responses: &[[u8; SUS_ITEMS]], polarity: &[Polarity]) -> Result<Vec<MeanStd>, StudyError> {
    if responses.is_empty() {
        return Err(StudyError::NoRecords);
    }
    let adjusted = responses.iter().map(|r| sus_adjust(r, polarity)).collect::<Result<Vec<_>, _>>()?;
    Ok((0..SUS_ITEMS)
        .map(|i| mean_std(&adjusted.iter().map(|a| f64::from(a[i])).collect::<Vec<_>>()))
        .collect())
}

/// Raw (unweighted) NASA-TLX: per-dimension statistics of 0–20 scores.
pub fn tlx_summary(responses: &[[f64; TLX_DIMENSIONS]]) -> Result<[MeanStd; TLX_DIMENSIONS], StudyError> {
    if responses.is_empty() {
        return Err(StudyError::NoRecords);
    }
    for r in responses {
        for (i, &v) in r.iter().enumerate() {
            if !(0.0..=20.0).contains(&v) {
                return Err(StudyError::OutOfRange { what: format!("TLX {}", TLX_NAMES[i]), value: v });
            }
        }
    }
    Ok(std::array::from_fn(|d| mean_std(&responses.iter().map(|r| r[d]).collect::<Vec<_>>())))
}

/// Delimiter-separated table of summary statistics, one row per group.
pub fn summary_csv(stats: &[SummaryStats], group_label: &str) -> Result<String, StudyError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        group_label,
        "count",
        "angular_mean_deg",
        "angular_std_deg",
        "euclidean_mean_mm",
        "euclidean_std_mm",
        "add_mean_mm",
        "add_std_mm",
    ])
    .map_err(csv_err)?;
    for s in stats {
        w.write_record([
            s.group.clone(),
            s.add.count.to_string(),
            s.angular.mean.to_string(),
            s.angular.std.to_string(),
            s.euclidean.mean.to_string(),
            s.euclidean.std.to_string(),
            s.add.mean.to_string(),
            s.add.std.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

pub fn time_csv(table: &TimeTable) -> Result<String, StudyError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["user", "count", "mean_s", "std_s"]).map_err(csv_err)?;
    for u in &table.per_user {
        w.write_record([u.user.clone(), u.seconds.count.to_string(), u.seconds.mean.to_string(), u.seconds.std.to_string()])
            .map_err(csv_err)?;
    }
    let a = &table.aggregate;
    w.write_record(["all".to_owned(), a.count.to_string(), a.mean.to_string(), a.std.to_string()]).map_err(csv_err)?;
    finish_csv(w)
}

/// Table of per-item or per-dimension statistics.
pub fn items_csv(labels: &[String], stats: &[MeanStd]) -> Result<String, StudyError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item", "count", "mean", "std"]).map_err(csv_err)?;
    for (l, s) in labels.iter().zip(stats) {
        w.write_record([l.clone(), s.count.to_string(), s.mean.to_string(), s.std.to_string()]).map_err(csv_err)?;
    }
    finish_csv(w)
}

fn csv_err(e: csv::Error) -> StudyError {
    StudyError::Io(std::io::Error::other(e.to_string()))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, StudyError> {
    let bytes = w.into_inner().map_err(|e| StudyError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Questionnaire responses as CSV: a header row, then `respondent,v1,..,vN`.
pub fn read_questionnaire_csv<R: std::io::Read>(reader: R, columns: usize) -> Result<Vec<(String, Vec<f64>)>, StudyError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| StudyError::Parse { line, msg: e.to_string() })?;
        if row.len() != columns + 1 {
            return Err(StudyError::Parse { line, msg: format!("expected {} columns, found {}", columns + 1, row.len()) });
        }
        let vals = row
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| StudyError::Parse { line, msg: format!("bad number {v:?}") }))
            .collect::<Result<Vec<_>, _>>()?;
        out.push((row[0].to_owned(), vals));
    }
    Ok(out)
}
