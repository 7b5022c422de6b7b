//! Node attributes, the sensitive column with its disclosure mask, labels,
//! and train/validation/test splits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{FairgeError, Result};
use crate::graph::Graph;
use crate::seeded_rng;

const MASK_STREAM: u64 = 0x6d61_736b;
const SPLIT_STREAM: u64 = 0x7370_6c74;

/// Dense `n x d` attribute matrix; column `sensitive_index` holds the
/// sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
    sensitive_index: usize,
    names: Vec<String>,
}

impl AttributeMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>, sensitive_index: usize) -> Result<Self> {
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Self::with_names(n, d, data, sensitive_index, names)
    }

    pub fn with_names(
        n: usize,
        d: usize,
        data: Vec<f64>,
        sensitive_index: usize,
        names: Vec<String>,
    ) -> Result<Self> {
        if data.len() != n * d || names.len() != d {
            return Err(FairgeError::DimensionMismatch(format!(
                "attribute buffer of {} for {n}x{d}",
                data.len()
            )));
        }
        if sensitive_index >= d {
            return Err(FairgeError::InvalidArgument(format!(
                "sensitive column {sensitive_index} out of range for d={d}"
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(FairgeError::InvalidArgument(format!(
                "non-finite attribute at row {} column {}",
                bad / d,
                bad % d
            )));
        }
        Ok(Self {
            n,
            d,
            data,
            sensitive_index,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sensitive_index(&self) -> usize {
        self.sensitive_index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Row-major values.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Copy of the matrix without the sensitive column.
    pub fn without_sensitive(&self) -> Self {
        let s = self.sensitive_index;
        let d = self.d - 1;
        let data = (0..self.n)
            .flat_map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(move |(j, _)| *j != s)
                    .map(|(_, v)| *v)
            })
            .collect();
        let names = self
            .names
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != s)
            .map(|(_, name)| name.clone())
            .collect();
        // sensitive_index is meaningless here; keep it in range for d >= 1
        Self {
            n: self.n,
            d,
            data,
            sensitive_index: 0,
            names,
        }
    }
}

/// Per-node sensitive class ids plus the disclosure mask.
///
/// `values` always holds the ground truth; `present[i] == false` means the
/// model must treat node `i`'s attribute as missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveColumn {
    values: Vec<u32>,
    present: Vec<bool>,
}

impl SensitiveColumn {
    pub fn new(values: Vec<u32>, present: Vec<bool>) -> Result<Self> {
        if values.len() != present.len() {
            return Err(FairgeError::DimensionMismatch(format!(
                "{} sensitive values but {} mask entries",
                values.len(),
                present.len()
            )));
        }
        Ok(Self { values, present })
    }

    /// All values disclosed.
    pub fn complete(values: Vec<u32>) -> Self {
        let present = vec![true; values.len()];
        Self { values, present }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    pub fn missing_count(&self) -> usize {
        self.present.iter().filter(|p| !**p).count()
    }

    pub fn missing_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.present[i]).collect()
    }

    /// Fails when every node is masked.
    pub fn ensure_any_present(&self) -> Result<()> {
        if self.present.iter().any(|p| *p) {
            Ok(())
        } else {
            Err(FairgeError::NoPresentNodes)
        }
    }

    /// Replaces the mask with one that hides exactly `missing`.
    pub fn with_missing(&self, missing: &[usize]) -> Result<Self> {
        let mut present = vec![true; self.len()];
        for &i in missing {
            if i >= self.len() {
                return Err(FairgeError::InvalidArgument(format!(
                    "masked node {i} out of range for n={}",
                    self.len()
                )));
            }
            present[i] = false;
        }
        Ok(Self {
            values: self.values.clone(),
            present,
        })
    }
}

/// Binary node labels (classes above 1 are merged into 1 on ingestion).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector(pub Vec<u8>);

impl LabelVector {
    /// Merges every class greater than 1 into class 1.
    pub fn from_raw(raw: &[u64]) -> Self {
        Self(raw.iter().map(|&y| u8::from(y >= 1)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

fn parse_class(cell: &str, line: usize, what: &str) -> Result<u64> {
    let v: f64 = cell.trim().parse().map_err(|e| FairgeError::Parse {
        line,
        message: format!("{what} `{cell}` is not numeric: {e}"),
    })?;
    if !(v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
        return Err(FairgeError::Parse {
            line,
            message: format!("{what} `{cell}` is not a nonnegative integer class"),
        });
    }
    Ok(v as u64)
}

/// Parses the attribute CSV.
///
/// Required columns are `id`, `sensitive` and `label`; every other column is
/// a real-valued feature. The sensitive column stays inside the attribute
/// matrix at its header position.
pub fn load_attributes(csv_text: &str) -> Result<(AttributeMatrix, SensitiveColumn, LabelVector)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FairgeError::MissingColumn(name.to_string()))
    };
    let id_col = find("id")?;
    let sens_col = find("sensitive")?;
    let label_col = find("label")?;

    let attr_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != id_col && c != label_col)
        .collect();
    let sensitive_index = attr_cols
        .iter()
        .position(|&c| c == sens_col)
        .expect("sensitive column is an attribute column");
    let names: Vec<String> = attr_cols.iter().map(|&c| headers[c].to_string()).collect();
    let d = attr_cols.len();

    let mut rows: BTreeMap<usize, (Vec<f64>, u32, u64)> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(FairgeError::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let id = parse_class(&record[id_col], line, "id")? as usize;
        let mut feats = Vec::with_capacity(d);
        for &c in &attr_cols {
            let v: f64 = record[c].parse().map_err(|e| FairgeError::Parse {
                line,
                message: format!("column `{}` value `{}`: {e}", &headers[c], &record[c]),
            })?;
            if !v.is_finite() {
                return Err(FairgeError::Parse {
                    line,
                    message: format!("column `{}` is not finite", &headers[c]),
                });
            }
            feats.push(v);
        }
        let sensitive = parse_class(&record[sens_col], line, "sensitive")? as u32;
        let label = parse_class(&record[label_col], line, "label")?;
        if rows.insert(id, (feats, sensitive, label)).is_some() {
            return Err(FairgeError::NonContiguousIds(format!("duplicate id {id}")));
        }
    }
    if rows.is_empty() {
        return Err(FairgeError::EmptyInput);
    }
    let n = rows.len();
    if let Some((&last, _)) = rows.iter().next_back() {
        if last != n - 1 {
            return Err(FairgeError::NonContiguousIds(format!(
                "{n} rows but largest id is {last}"
            )));
        }
    }

    let mut data = Vec::with_capacity(n * d);
    let mut sensitive = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (_, (feats, s, y)) in rows {
        data.extend(feats);
        sensitive.push(s);
        labels.push(y);
    }
    let attrs = AttributeMatrix::with_names(n, d, data, sensitive_index, names)?;
    Ok((
        attrs,
        SensitiveColumn::complete(sensitive),
        LabelVector::from_raw(&labels),
    ))
}

/// Writes the attribute CSV format read by [`load_attributes`].
///
/// The sensitive column is written under the header `sensitive` regardless of
/// its stored name.
pub fn write_attributes(attrs: &AttributeMatrix, sensitive: &SensitiveColumn, labels: &LabelVector) -> Result<String> {
    if attrs.n() != sensitive.len() || attrs.n() != labels.len() {
        return Err(FairgeError::DimensionMismatch(
            "attributes, sensitive column and labels differ in length".into(),
        ));
    }
    let mut out = String::from("id");
    for (j, name) in attrs.names().iter().enumerate() {
        out.push(',');
        if j == attrs.sensitive_index() {
            out.push_str("sensitive");
        } else {
            out.push_str(name);
        }
    }
    out.push_str(",label\n");
    for i in 0..attrs.n() {
        let _ = write!(out, "{i}");
        for (j, v) in attrs.row(i).iter().enumerate() {
            if j == attrs.sensitive_index() {
                let _ = write!(out, ",{}", sensitive.values()[i]);
            } else {
                let _ = write!(out, ",{v}");
            }
        }
        let _ = writeln!(out, ",{}", labels.0[i]);
    }
    Ok(out)
}

/// `floor(rate * n)`, tolerant of decimal rates that are not exact in binary.
pub fn masked_count(rate: f64, n: usize) -> usize {
    (rate * n as f64 + 1e-9).floor() as usize
}

/// Hides the sensitive attribute of exactly `floor(rate * n)` nodes chosen
/// uniformly without replacement. Values are left untouched.
pub fn apply_missing_mask(sensitive: &SensitiveColumn, rate: f64, seed: u64) -> Result<SensitiveColumn> {
    if !(0.0..1.0).contains(&rate) {
        return Err(FairgeError::InvalidArgument(format!(
            "missing rate {rate} outside [0, 1)"
        )));
    }
    if sensitive.missing_count() != 0 {
        return Err(FairgeError::InvalidArgument(
            "input sensitive column is already masked".into(),
        ));
    }
    let n = sensitive.len();
    let count = masked_count(rate, n);
    let mut rng = seeded_rng(seed, MASK_STREAM);
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    sensitive.with_missing(&chosen)
}

/// One masked node id per line.
pub fn write_mask_file(sensitive: &SensitiveColumn) -> String {
    let mut out = String::new();
    for i in sensitive.missing_ids() {
        let _ = writeln!(out, "{i}");
    }
    out
}

/// Reads a mask file and returns the ids of nodes whose attribute is missing.
pub fn read_mask_file(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut ids = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let id: usize = line.parse().map_err(|e| FairgeError::Parse {
            line: idx + 1,
            message: format!("`{line}` is not a node id: {e}"),
        })?;
        if id >= n {
            return Err(FairgeError::Parse {
                line: idx + 1,
                message: format!("node {id} out of range for n={n}"),
            });
        }
        ids.push(id);
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

/// Disjoint train/validation/test index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded split: a quarter of the nodes each for validation and test, and
/// `train_size` nodes sampled from the remainder.
pub fn make_split(n: usize, train_size: usize, seed: u64) -> Result<Split> {
    let quarter = n / 4;
    let available = n - 2 * quarter;
    if train_size > available {
        return Err(FairgeError::InvalidArgument(format!(
            "train size {train_size} exceeds the {available} nodes left after validation/test"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, SPLIT_STREAM));
    let mut val = order[..quarter].to_vec();
    let mut test = order[quarter..2 * quarter].to_vec();
    let mut train = order[2 * quarter..2 * quarter + train_size].to_vec();
    val.sort_unstable();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, val, test })
}

/// A graph with its attributes, sensitive column and labels, checked for
/// consistent node counts.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub attributes: AttributeMatrix,
    pub sensitive: SensitiveColumn,
    pub labels: LabelVector,
}

impl Dataset {
    pub fn new(
        graph: Graph,
        attributes: AttributeMatrix,
        sensitive: SensitiveColumn,
        labels: LabelVector,
    ) -> Result<Self> {
        let n = graph.n();
        if attributes.n() != n || sensitive.len() != n || labels.len() != n {
            return Err(FairgeError::DimensionMismatch(format!(
                "graph has {n} nodes but attributes have {} rows, sensitive {}, labels {}",
                attributes.n(),
                sensitive.len(),
                labels.len()
            )));
        }
        Ok(Self {
            graph,
            attributes,
            sensitive,
            labels,
        })
    }

    /// Loads an edge list and attribute CSV from text.
    pub fn from_text(edge_list: &str, attributes_csv: &str) -> Result<Self> {
        let graph = crate::graph::load_edge_list(edge_list)?;
        let (attributes, sensitive, labels) = load_attributes(attributes_csv)?;
        Self::new(graph, attributes, sensitive, labels)
    }
}
