//! Dataset loading and the labeled/unlabeled trial split.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::auc::auc;
use crate::data::{FeatureMatrix, Label, LabeledSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawDataset {
    pub name: String,
    pub x: FeatureMatrix,
    pub y: Vec<Label>,
}

impl RawDataset {
    pub fn new(name: impl Into<String>, x: FeatureMatrix, y: Vec<Label>) -> Result<Self> {
        // validates labels and lengths
        let set = LabeledSet::new(x, y)?;
        Ok(Self {
            name: name.into(),
            x: set.features().clone(),
            y: set.labels().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.x.n_cols()
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Maps raw class labels to ±1. With `positive`, that class is +1 and all
/// others -1; otherwise the labels must be {0, 1} or {-1, +1}.
fn map_labels(path: &Path, raw: &[(usize, String)], positive: Option<&str>) -> Result<Vec<Label>> {
    if let Some(pos) = positive {
        let pos_num = pos.parse::<f64>().ok();
        return Ok(raw
            .iter()
            .map(|(_, s)| {
                let hit = match (pos_num, s.parse::<f64>()) {
                    (Some(a), Ok(b)) => a == b,
                    _ => s == pos,
                };
                if hit {
                    1
                } else {
                    -1
                }
            })
            .collect());
    }
    let mut seen_zero = None;
    let mut seen_minus = None;
    let mut out = Vec::with_capacity(raw.len());
    for (line, s) in raw {
        let v = s.parse::<f64>().ok().filter(|v| [-1.0, 0.0, 1.0].contains(v)).ok_or_else(|| {
            parse_err(
                path,
                *line,
                format!("label '{s}' is not binary; pass --positive-class to binarize"),
            )
        })?;
        if v == 0.0 {
            seen_zero.get_or_insert(*line);
        }
        if v == -1.0 {
            seen_minus.get_or_insert(*line);
        }
        if let (Some(a), Some(b)) = (seen_zero, seen_minus) {
            return Err(parse_err(
                path,
                a.max(b),
                "labels mix 0 and -1; pass --positive-class to binarize",
            ));
        }
        out.push(if v > 0.0 { 1 } else { -1 });
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Parses LIBSVM text: `label idx:val idx:val ...` with 1-based indices;
/// absent features are 0. Blank lines and `#` comments are skipped.
pub fn load_libsvm(path: impl AsRef<Path>, positive: Option<&str>) -> Result<RawDataset> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_libsvm(path, &text, positive)
}

pub(crate) fn parse_libsvm(path: &Path, text: &str, positive: Option<&str>) -> Result<RawDataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0;
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().expect("nonempty line");
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(path, line_no, format!("expected index:value, got '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("bad feature index '{idx}'")))?;
            if idx == 0 {
                return Err(parse_err(path, line_no, "feature indices are 1-based"));
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(path, line_no, format!("bad feature value '{val}'")))?;
            dim = dim.max(idx);
            row.push((idx - 1, val));
        }
        labels.push((line_no, label.to_string()));
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let y = map_labels(path, &labels, positive)?;
    let mut data = vec![0.0; rows.len() * dim];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            data[i * dim + j] = v;
        }
    }
    RawDataset::new(dataset_name(path), FeatureMatrix::new(rows.len(), dim, data)?, y)
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum LabelColumn {
    #[default]
    Last,
    Name(String),
    Index(usize),
}

/// Parses a CSV file with a header row; every non-label column must be
/// numeric.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, positive: Option<&str>) -> Result<RawDataset> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_csv(path, &text, label, positive)
}

pub(crate) fn parse_csv(path: &Path, text: &str, label: &LabelColumn, positive: Option<&str>) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, format!("header: {e}")))?
        .clone();
    if header.is_empty() {
        return Err(parse_err(path, 1, "missing header row"));
    }
    let label_col = match label {
        LabelColumn::Last => header.len() - 1,
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Index(i) => return Err(parse_err(path, 1, format!("no column {i}"))),
        LabelColumn::Name(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| parse_err(path, 1, format!("no column named '{n}'")))?,
    };
    let dim = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line_no = k + 2;
        let record = record.map_err(|e| parse_err(path, line_no, e.to_string()))?;
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {} fields, got {}", header.len(), record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_col {
                labels.push((line_no, cell.to_string()));
            } else {
                let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    parse_err(
                        path,
                        line_no,
                        format!("column {} ('{}'): non-numeric value '{cell}'", c + 1, &header[c]),
                    )
                })?;
                data.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let y = map_labels(path, &labels, positive)?;
    RawDataset::new(dataset_name(path), FeatureMatrix::new(labels.len(), dim, data)?, y)
}

/// Labels of the unlabeled set, kept apart from training inputs. The labels
/// themselves are never handed out; they can only be used to score
/// predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLabels(Vec<Label>);

impl HiddenLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// AUC of `scores` (aligned with the unlabeled rows).
    pub fn auc(&self, scores: &[f64]) -> Result<f64> {
        auc(scores, &self.0)
    }

    /// Counts of positive and negative labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.0.iter().filter(|&&y| y > 0).count();
        (pos, self.0.len() - pos)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSplit {
    pub labeled: LabeledSet,
    pub unlabeled: FeatureMatrix,
    pub hidden: HiddenLabels,
    /// Dataset rows in `labeled`, then in `unlabeled`.
    pub labeled_rows: Vec<usize>,
    pub unlabeled_rows: Vec<usize>,
    pub seed: u64,
}

/// Uniformly samples `m` rows as the labeled set; the rest become the
/// unlabeled set with their labels hidden.
pub fn split_protocol(data: &RawDataset, m: usize, seed: u64) -> Result<TrialSplit> {
    if m == 0 || m >= data.len() {
        return Err(Error::invalid(format!(
            "labeled size {m} must be in 1..{}",
            data.len()
        )));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let unlabeled_rows = idx.split_off(m);
    let labeled_rows = idx;
    let labeled = LabeledSet::new(
        data.x.select(&labeled_rows),
        labeled_rows.iter().map(|&i| data.y[i]).collect(),
    )?;
    Ok(TrialSplit {
        labeled,
        unlabeled: data.x.select(&unlabeled_rows),
        hidden: HiddenLabels(unlabeled_rows.iter().map(|&i| data.y[i]).collect()),
        labeled_rows,
        unlabeled_rows,
        seed,
    })
}

/// Class balance summary, for logs.
pub fn label_counts(y: &[Label]) -> BTreeMap<Label, usize> {
    let mut out = BTreeMap::new();
    for &l in y {
        *out.entry(l).or_insert(0) += 1;
    }
    out
}
