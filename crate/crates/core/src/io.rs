//! Reading datasets, train/test splitting and writing result records.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::problem::{fit_normalization, Dataset};
use crate::solver::{FeatureRanking, SolverConfig, SolverState};

/// Maps label text to class ids `1..=c` in order of first appearance.
#[derive(Default)]
struct LabelMap {
    ids: HashMap<String, usize>,
    names: Vec<String>,
}

impl LabelMap {
    fn id(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        self.names.push(name.to_string());
        let id = self.names.len();
        self.ids.insert(name.to_string(), id);
        id
    }
}

fn finish(path: &str, rows: Vec<Vec<f64>>, width: usize, labels: Vec<usize>, map: LabelMap) -> Result<Dataset> {
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let m = rows.len();
    let data: Vec<f64> = rows
        .into_iter()
        .flat_map(|mut r| {
            r.resize(width, 0.0);
            r
        })
        .collect();
    let ds = Dataset {
        features: Matrix::from_vec(m, width, data)?,
        labels,
        class_count: map.names.len(),
        class_names: map.names,
        normalization: None,
    };
    ds.validate()?;
    Ok(ds)
}

fn parse_value(path: &str, line: usize, column: usize, text: &str) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.into(),
            line,
            column,
            message: format!("cannot parse {text:?} as a finite number"),
        }),
    }
}

/// Reads comma-separated rows of numbers with one label column.
///
/// `label_column` is 0-based; `None` means the last column. Labels are
/// arbitrary text and are numbered in order of first appearance.
pub fn read_dense_csv(path: impl AsRef<Path>, has_header: bool, label_column: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dense_csv(file, &path.display().to_string(), has_header, label_column)
}

/// [`read_dense_csv`] on any reader; `name` labels error messages.
pub fn parse_dense_csv<R: Read>(
    reader: R,
    name: &str,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut map = LabelMap::default();
    let mut width: Option<usize> = None;
    let mut skip_header = has_header;

    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                path: name.into(),
                line,
                column: 1,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if skip_header {
            skip_header = false;
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                path: name.into(),
                line,
                column: record.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", record.len()),
            });
        }
        if w < 2 {
            return Err(Error::Parse {
                path: name.into(),
                line,
                column: 1,
                message: "need at least one feature column and a label column".into(),
            });
        }
        let label_at = label_column.unwrap_or(w - 1);
        if label_at >= w {
            return Err(Error::Parse {
                path: name.into(),
                line,
                column: w,
                message: format!("label column {} is past the last column", label_at + 1),
            });
        }
        let mut row = Vec::with_capacity(w - 1);
        for (j, cell) in record.iter().enumerate() {
            if j == label_at {
                if cell.is_empty() {
                    return Err(Error::Parse {
                        path: name.into(),
                        line,
                        column: j + 1,
                        message: "empty label".into(),
                    });
                }
                labels.push(map.id(cell));
            } else {
                row.push(parse_value(name, line, j + 1, cell)?);
            }
        }
        rows.push(row);
    }
    let width = width.map_or(0, |w| w - 1);
    finish(name, rows, width, labels, map)
}

/// Reads the sparse `label index:value ...` text format with 1-based,
/// strictly ascending indices. Missing entries are zero and the feature count
/// is the largest index seen. Blank lines are skipped.
pub fn read_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(BufReader::new(file), &path.display().to_string())
}

pub fn parse_libsvm<R: BufRead>(reader: R, name: &str) -> Result<Dataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut map = LabelMap::default();
    let mut width = 0;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::io(name, e))?;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        labels.push(map.id(label));
        let mut row = Vec::new();
        let mut last = 0;
        for (t, token) in tokens.enumerate() {
            let column = t + 2;
            let bad = |message: String| Error::Parse {
                path: name.into(),
                line: line_no,
                column,
                message,
            };
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| bad(format!("expected index:value, found {token:?}")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(bad("feature indices start at 1".into()));
            }
            if idx <= last {
                return Err(bad(format!("index {idx} does not ascend past {last}")));
            }
            last = idx;
            let val = parse_value(name, line_no, column, val)?;
            row.resize(idx, 0.0);
            row[idx - 1] = val;
        }
        width = width.max(row.len());
        rows.push(row);
    }
    if width == 0 && !rows.is_empty() {
        return Err(Error::Parse {
            path: name.into(),
            line: 1,
            column: 1,
            message: "no feature entries in file".into(),
        });
    }
    finish(name, rows, width, labels, map)
}

/// Writes features and the label text as the last column. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_dense_csv(path: impl AsRef<Path>, dataset: &Dataset, header: bool) -> Result<()> {
    let mut out = String::new();
    if header {
        let names: Vec<String> = (1..=dataset.feature_count()).map(|j| format!("f{j}")).collect();
        out.push_str(&names.join(","));
        out.push_str(",label\n");
    }
    for (i, &label) in dataset.labels.iter().enumerate() {
        for v in dataset.features.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&dataset.class_names[label - 1]);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.6,
            seed: 0,
            stratified: true,
        }
    }
}

/// Number of training samples per class by largest remainder: the shares
/// `total·count/m` are floored and the leftover goes to the largest
/// fractional parts, lower class first on ties. Every class keeps at least
/// one sample on each side.
pub fn stratified_counts(class_sizes: &[usize], total: usize) -> Vec<usize> {
    let m: usize = class_sizes.iter().sum();
    let shares: Vec<f64> = class_sizes
        .iter()
        .map(|&c| total as f64 * c as f64 / m as f64)
        .collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let leftover = total.saturating_sub(counts.iter().sum());
    for &k in order.iter().take(leftover) {
        counts[k] += 1;
    }
    let bounds: Vec<(usize, usize)> = class_sizes
        .iter()
        .map(|&s| if s >= 2 { (1, s - 1) } else { (0, s) })
        .collect();
    for (c, &(lo, hi)) in counts.iter_mut().zip(&bounds) {
        *c = (*c).clamp(lo, hi);
    }
    // Clamping can move the sum off `total`; settle the difference in the
    // same remainder order among classes that still have room.
    let mut sum: usize = counts.iter().sum();
    while sum < total {
        let Some(&k) = order.iter().find(|&&k| counts[k] < bounds[k].1) else {
            break;
        };
        counts[k] += 1;
        sum += 1;
    }
    while sum > total {
        let Some(&k) = order.iter().rev().find(|&&k| counts[k] > bounds[k].0) else {
            break;
        };
        counts[k] -= 1;
        sum -= 1;
    }
    counts
}

/// Train and test sample indices, each ascending.
pub fn split_indices(dataset: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = dataset.samples();
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} is outside (0, 1)",
            spec.train_fraction
        )));
    }
    if m < 2 {
        return Err(Error::InvalidDataset(format!("cannot split {m} samples")));
    }
    let total = ((spec.train_fraction * m as f64).round() as usize).clamp(1, m - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(total);
    if spec.stratified {
        let mut members = vec![Vec::new(); dataset.class_count];
        for (i, &y) in dataset.labels.iter().enumerate() {
            members[y - 1].push(i);
        }
        for (k, idx) in members.iter().enumerate() {
            if idx.len() < 2 {
                return Err(Error::Stratification {
                    class: k + 1,
                    count: idx.len(),
                });
            }
        }
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        for (mut idx, take) in members.into_iter().zip(stratified_counts(&sizes, total)) {
            idx.shuffle(&mut rng);
            train.extend_from_slice(&idx[..take]);
        }
    } else {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..total]);
    }
    train.sort_unstable();
    let mut in_train = vec![false; m];
    train.iter().for_each(|&i| in_train[i] = true);
    let test = (0..m).filter(|&i| !in_train[i]).collect();
    Ok((train, test))
}

/// Seeded split; both parts are standardized with statistics of the
/// training part only.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = split_indices(dataset, spec)?;
    let mut train = dataset.subset(&train_idx);
    let mut test = dataset.subset(&test_idx);
    let stats = fit_normalization(&train.features);
    train.features = stats.apply(&train.features)?;
    test.features = stats.apply(&test.features)?;
    train.normalization = Some(stats.clone());
    test.normalization = Some(stats);
    Ok((train, test))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    /// 1-based feature index.
    pub feature: usize,
    pub norm: f64,
}

/// Serialized outcome of one solver run. Feature indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: SolverConfig,
    pub selected: Vec<usize>,
    pub ranking: Vec<RankEntry>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_at_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl ResultRecord {
    pub fn from_run(config: &SolverConfig, state: &SolverState, ranking: &FeatureRanking) -> Self {
        ResultRecord {
            config: config.clone(),
            selected: ranking.selected.iter().map(|j| j + 1).collect(),
            ranking: ranking
                .order
                .iter()
                .map(|&j| RankEntry {
                    feature: j + 1,
                    norm: ranking.row_norms[j],
                })
                .collect(),
            objective_trace: state.objective_trace.clone(),
            iterations: state.iteration,
            converged: state.converged,
            support_size: Some(ranking.support_size()),
            precision_at_d: None,
            accuracy: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResultFormat {
    Json,
    Csv,
}

/// `f64` with 17 significant digits, enough to round-trip any value.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct RoundTripFormatter;

impl serde_json::ser::Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }
}

/// Compact JSON with 17-significant-digit numbers and a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, RoundTripFormatter);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// The ranking table, one row per feature in rank order.
pub fn ranking_csv(record: &ResultRecord) -> String {
    let mut out = String::from("feature,norm\n");
    for entry in &record.ranking {
        out.push_str(&format!("{},{}\n", entry.feature, format_f64(entry.norm)));
    }
    out
}

pub fn write_result(record: &ResultRecord, path: impl AsRef<Path>, format: ResultFormat) -> Result<()> {
    let bytes = match format {
        ResultFormat::Json => to_json_bytes(record)?,
        ResultFormat::Csv => ranking_csv(record).into_bytes(),
    };
    write_atomic(path, &bytes)
}

pub fn read_result(path: impl AsRef<Path>) -> Result<ResultRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
