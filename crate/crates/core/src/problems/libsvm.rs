//! LIBSVM text format: `<label> <idx>:<val> <idx>:<val> ...` with 1-based
//! feature indices.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature count of the ijcnn1 benchmark.
pub const IJCNN1_DIM: usize = 22;

const FIXTURE: &str = include_str!("../../data/synthetic_fixture.svm");

/// Labelled sparse samples. Feature indices are 0-based and lie in `[0, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
    d: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, d: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid("rows and labels differ in length"));
        }
        for (r, row) in rows.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for &(k, _) in row {
                if k >= d {
                    return Err(Error::invalid(format!("row {r}: index {k} outside [0,{d})")));
                }
                if !seen.insert(k) {
                    return Err(Error::invalid(format!("row {r}: duplicate index {k}")));
                }
            }
        }
        if let Some(l) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::invalid(format!("label {l} is not ±1")));
        }
        Ok(Dataset { rows, labels, d })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Samples at `indices`, keeping this dataset's dimension.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            d: self.d,
        }
    }

    /// Raises the dimension to `d` (features beyond the last observed index
    /// may simply never appear in a file).
    pub fn with_dim(mut self, d: usize) -> Result<Self> {
        if d < self.d {
            return Err(Error::invalid(format!("dataset has dimension {} > {d}", self.d)));
        }
        self.d = d;
        Ok(self)
    }

    /// Multiplies feature `k` by `scales[k]` in every sample.
    pub fn scale_features(&self, scales: &[f64]) -> Result<Dataset> {
        if scales.len() != self.d {
            return Err(Error::invalid(format!("{} scales for dimension {}", scales.len(), self.d)));
        }
        if scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("feature scales must be finite"));
        }
        let rows = self.rows.iter().map(|r| r.iter().map(|&(k, v)| (k, v * scales[k])).collect()).collect();
        Ok(Dataset { rows, labels: self.labels.clone(), d: self.d })
    }
}

/// Geometric scales `ratio^(k/(d-1))`, from 1 down to `ratio` over `d` features.
pub fn geometric_scales(d: usize, ratio: f64) -> Vec<f64> {
    let denom = d.saturating_sub(1).max(1) as f64;
    (0..d).map(|k| ratio.powf(k as f64 / denom)).collect()
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_label(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("label {tok:?} is not numeric")))?;
    match v {
        v if v == 1.0 => Ok(1.0),
        v if v == -1.0 || v == 0.0 => Ok(-1.0),
        _ => Err(parse_err(line, format!("label {tok:?} is not one of -1, 0, +1"))),
    }
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    parse_libsvm(text.as_bytes())
}

pub fn parse_libsvm(reader: impl BufRead) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label = parse_label(toks.next().expect("nonempty line"), lineno)?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("malformed token {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index in {tok:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based"));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric value in {tok:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value in {tok:?}")));
            }
            let k = idx - 1;
            if row.iter().any(|&(j, _)| j == k) {
                return Err(parse_err(lineno, format!("duplicate index {idx}")));
            }
            d = d.max(idx);
            row.push((k, val));
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(Dataset { rows, labels, d })
}

/// Inverse of [`parse_libsvm`]: values use the shortest round-trip
/// representation, so parsing the output reproduces the dataset exactly.
pub fn write_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for (row, &label) in ds.rows.iter().zip(&ds.labels) {
        out.push_str(if label > 0.0 { "1" } else { "-1" });
        for &(k, v) in row {
            let _ = write!(out, " {}:{v:?}", k + 1);
        }
        out.push('\n');
    }
    out
}

/// Loads ijcnn1 from a user-supplied path and checks its dimension.
pub fn load_ijcnn1(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let ds = parse_libsvm(std::io::BufReader::new(file))?;
    if ds.dim() > IJCNN1_DIM {
        return Err(Error::invalid(format!(
            "ijcnn1 has {IJCNN1_DIM} features, file has {}",
            ds.dim()
        )));
    }
    ds.with_dim(IJCNN1_DIM)
}

/// Small ijcnn1-shaped dataset (22 features, ±1 labels) bundled with the
/// crate so tests and examples never need the real download.
pub fn synthetic_fixture() -> Dataset {
    parse_libsvm_str(FIXTURE)
        .and_then(|ds| ds.with_dim(IJCNN1_DIM))
        .expect("bundled fixture parses")
}

/// Random sparse dataset with labels drawn from a logistic model.
///
/// Each feature is present with probability 0.6 and takes a value in
/// `[-1, 1]` rounded to 4 decimals. This is the generator behind the bundled
/// fixture.
pub fn synthetic_dataset(m: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = Vec::new();
        let mut margin = 0.0;
        for (k, w) in truth.iter().enumerate() {
            if rng.random_bool(0.6) {
                let v = (rng.random_range(-1.0f64..1.0) * 1e4).round() / 1e4;
                if v != 0.0 {
                    margin += w * v;
                    row.push((k, v));
                }
            }
        }
        let prob = 1.0 / (1.0 + (-margin).exp());
        labels.push(if rng.random_bool(prob) { 1.0 } else { -1.0 });
        rows.push(row);
    }
    Dataset { rows, labels, d }
}

/// Assignment of sample indices to nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub seed: u64,
    /// `nodes[i]` lists the sample indices held by node `i`.
    pub nodes: Vec<Vec<usize>>,
}

impl ShardManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn materialize(&self, ds: &Dataset) -> Vec<Dataset> {
        self.nodes.iter().map(|idx| ds.subset(idx)).collect()
    }
}

/// Random even split: a seeded permutation cut into `n` contiguous blocks
/// whose sizes differ by at most one.
pub fn partition(ds: &Dataset, n: usize, seed: u64) -> Result<ShardManifest> {
    if ds.is_empty() {
        return Err(Error::invalid("cannot partition an empty dataset"));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one node"));
    }
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (ds.len() / n, ds.len() % n);
    let mut nodes = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        nodes.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(ShardManifest { seed, nodes })
}
