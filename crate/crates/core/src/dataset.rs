//! Sparse labeled datasets in the LIBSVM text format.
//!
//! Feature indices are 1-based on disk and 0-based in memory; the conversion
//! happens only in [`parse_libsvm`] and [`write_libsvm`].

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of re-draws when a random subset must contain both classes.
pub const MAX_SPLIT_DRAWS: usize = 100;

/// Sparse feature vector with strictly increasing 0-based indices and no
/// stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    pub fn new(indices: Vec<u32>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for pair in indices.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidArgument(format!(
                    "indices must be strictly increasing ({} then {})",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::InvalidArgument(format!(
                    "index {last} out of range for dim {dim}"
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature value {v}")));
        }
        let mut v = SparseVector {
            indices,
            values,
            dim,
        };
        v.drop_zeros();
        Ok(v)
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        SparseVector {
            indices,
            values,
            dim: dense.len(),
        }
    }

    fn drop_zeros(&mut self) {
        if self.values.contains(&0.0) {
            let (indices, values) = self
                .indices
                .iter()
                .zip(&self.values)
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (*i, *v))
                .unzip();
            self.indices = indices;
            self.values = values;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(i, v)| (*i as usize, *v))
    }

    /// `self · w`. `w` must cover every stored index.
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * w[i]).sum()
    }

    /// `w += alpha * self`
    pub fn axpy(&self, alpha: f64, w: &mut [f64]) {
        for (i, v) in self.iter() {
            w[i] += alpha * v;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    fn with_dim(mut self, dim: usize) -> Self {
        debug_assert!(self.indices.last().is_none_or(|&i| (i as usize) < dim));
        self.dim = dim;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    /// Raw class label; exactly -1 or +1 once the dataset is binary.
    pub label: i64,
}

impl Example {
    /// `+1.0` / `-1.0` for a binary label.
    pub fn sign(&self) -> f64 {
        if self.label > 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Immutable collection of examples sharing one feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    dim: usize,
    n_pos: usize,
    n_neg: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, dim: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(examples.len());
        for ex in examples {
            if ex.features.dim() > dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ex.features.dim(),
                });
            }
            out.push(Example {
                features: ex.features.with_dim(dim),
                label: ex.label,
            });
        }
        Ok(Self::from_checked(out, dim))
    }

    fn from_checked(examples: Vec<Example>, dim: usize) -> Self {
        let n_pos = examples.iter().filter(|e| e.label == 1).count();
        let n_neg = examples.iter().filter(|e| e.label == -1).count();
        Dataset {
            examples,
            dim,
            n_pos,
            n_neg,
        }
    }

    /// Builds a binary dataset from dense rows; `labels` must be ±1.
    pub fn from_dense(rows: &[Vec<f64>], labels: &[i64]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let dim = rows.iter().map(Vec::len).max().unwrap_or(0);
        let examples = rows
            .iter()
            .zip(labels)
            .map(|(r, &label)| Example {
                features: SparseVector::from_dense(r),
                label,
            })
            .collect();
        Dataset::new(examples, dim)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of `+1` examples.
    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    /// Number of `-1` examples.
    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    /// True when every label is -1 or +1.
    pub fn is_binary(&self) -> bool {
        self.n_pos + self.n_neg == self.examples.len()
    }

    /// Ok when labels are ±1 and both classes occur.
    pub fn require_both_classes(&self) -> Result<()> {
        self.require_binary()?;
        if self.n_pos == 0 || self.n_neg == 0 {
            return Err(Error::SingleClass {
                n_pos: self.n_pos,
                n_neg: self.n_neg,
            });
        }
        Ok(())
    }

    pub fn require_binary(&self) -> Result<()> {
        match self.examples.iter().find(|e| e.label != 1 && e.label != -1) {
            Some(e) => Err(Error::NonBinaryLabel(e.label)),
            None => Ok(()),
        }
    }

    pub fn distinct_labels(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.examples.iter().map(|e| e.label).collect();
        set.into_iter().collect()
    }

    /// Raises the feature dimension; used to align train and test files whose
    /// largest index differs.
    pub fn with_dim(self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: dim,
            });
        }
        let examples = self
            .examples
            .into_iter()
            .map(|e| Example {
                features: e.features.with_dim(dim),
                label: e.label,
            })
            .collect();
        Ok(Self::from_checked(examples, dim))
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let examples = indices.iter().map(|&i| self.examples[i].clone()).collect();
        Self::from_checked(examples, self.dim)
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_label(token: &str, line: usize) -> Result<i64> {
    if let Ok(v) = token.parse::<i64>() {
        return Ok(v);
    }
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(parse_error(line, format!("invalid label `{token}`"))),
    }
}

/// Parses LIBSVM text: one `<label> <idx>:<val> ...` example per nonempty line.
/// Text after `#` is ignored. The dataset dimension is the largest index
/// seen; labels are kept as parsed integers.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut examples = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or(""), lineno)?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut previous = 0usize;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| parse_error(lineno, format!("expected `index:value`, got `{token}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(lineno, format!("invalid feature index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_error(lineno, "feature indices are 1-based, found 0"));
            }
            if idx > u32::MAX as usize {
                return Err(parse_error(lineno, format!("feature index {idx} too large")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_error(lineno, format!("invalid feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(parse_error(lineno, format!("non-finite feature value `{val}`")));
            }
            if idx <= previous {
                return Err(Error::Format {
                    line: lineno,
                    previous,
                    found: idx,
                });
            }
            previous = idx;
            if val != 0.0 {
                indices.push((idx - 1) as u32);
                values.push(val);
            }
        }
        dim = dim.max(previous);
        examples.push((label, indices, values));
    }
    let examples = examples
        .into_iter()
        .map(|(label, indices, values)| Example {
            features: SparseVector {
                indices,
                values,
                dim,
            },
            label,
        })
        .collect();
    Ok(Dataset::from_checked(examples, dim))
}

/// Writes the dataset in LIBSVM text format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut writer: W) -> Result<()> {
    for ex in ds.examples() {
        write!(writer, "{}", ex.label)?;
        for (i, v) in ex.features.iter() {
            write!(writer, " {}:{}", i + 1, v)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Loads a LIBSVM file, transparently decompressing gzip input.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 2];
    let n = read_prefix(&mut file, &mut magic).map_err(io_err)?;
    let file = File::open(path).map_err(io_err)?;
    let result = if n == 2 && magic == [0x1f, 0x8b] {
        parse_libsvm(BufReader::new(GzDecoder::new(file)))
    } else {
        parse_libsvm(BufReader::new(file))
    };
    result.map_err(|e| match e {
        Error::Stream(source) => io_err(source),
        other => other,
    })
}

fn read_prefix(file: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

/// Assignment of original class labels to the positive and negative group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPartition {
    pub positive: Vec<i64>,
    pub negative: Vec<i64>,
}

impl LabelPartition {
    /// Relabels `ds` to ±1. Labels outside the partition are an error.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let examples = ds
            .examples()
            .iter()
            .map(|e| {
                let label = if self.positive.contains(&e.label) {
                    1
                } else if self.negative.contains(&e.label) {
                    -1
                } else {
                    return Err(Error::InvalidArgument(format!(
                        "label {} is not covered by the class partition",
                        e.label
                    )));
                };
                Ok(Example {
                    features: e.features.clone(),
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::from_checked(examples, ds.dim()))
    }
}

/// Randomly splits the distinct labels into two groups of equal size (the
/// positive group gets the extra class when the count is odd). A dataset that
/// is already `{-1, +1}` maps to itself.
pub fn class_partition(ds: &Dataset, seed: u64) -> Result<LabelPartition> {
    let mut labels = ds.distinct_labels();
    if labels.len() < 2 {
        return Err(Error::SingleClass {
            n_pos: ds.len(),
            n_neg: 0,
        });
    }
    if labels == [-1, 1] {
        return Ok(LabelPartition {
            positive: vec![1],
            negative: vec![-1],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels.shuffle(&mut rng);
    let split = labels.len().div_ceil(2);
    let mut positive = labels[..split].to_vec();
    let mut negative = labels[split..].to_vec();
    positive.sort_unstable();
    negative.sort_unstable();
    Ok(LabelPartition { positive, negative })
}

pub fn binarize_by_class_partition(ds: &Dataset, seed: u64) -> Result<Dataset> {
    class_partition(ds, seed)?.apply(ds)
}

fn has_both(ds: &Dataset, idx: &[usize]) -> bool {
    let mut pos = false;
    let mut neg = false;
    for &i in idx {
        match ds.examples()[i].label {
            1 => pos = true,
            _ => neg = true,
        }
        if pos && neg {
            return true;
        }
    }
    false
}

/// Shuffles indices until the first `take` (and, if `both_parts`, the rest)
/// contain both classes.
fn draw_split(ds: &Dataset, take: usize, seed: u64, both_parts: bool) -> Result<Vec<usize>> {
    ds.require_binary()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for _ in 0..MAX_SPLIT_DRAWS {
        order.shuffle(&mut rng);
        let (head, tail) = order.split_at(take);
        if has_both(ds, head) && (!both_parts || has_both(ds, tail)) {
            return Ok(order);
        }
    }
    Err(Error::RetriesExhausted {
        attempts: MAX_SPLIT_DRAWS,
    })
}

fn subset_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let take = (fraction * n as f64).round() as usize;
    if take < 2 {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} of {n} examples leaves fewer than 2"
        )));
    }
    Ok(take)
}

/// Uniform random subset of `round(fraction * N)` examples without
/// replacement, re-drawn until both classes are present.
pub fn subsample_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let take = subset_size(ds.len(), fraction)?;
    let order = draw_split(ds, take, seed, false)?;
    Ok(ds.subset(&order[..take]))
}

/// Like [`subsample_split`] but also returns the held-out remainder; both
/// parts are guaranteed to contain both classes.
pub fn holdout_split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let take = subset_size(ds.len(), fraction)?;
    if take >= ds.len() {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} leaves no held-out examples"
        )));
    }
    let order = draw_split(ds, take, seed, true)?;
    let (head, tail) = order.split_at(take);
    Ok((ds.subset(head), ds.subset(tail)))
}

/// Per-feature min/max of a training set, reusable on test data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub dim: usize,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::InvalidArgument("cannot fit scaling on an empty dataset".into()));
        }
        let dim = ds.dim();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        let mut stored = vec![0usize; dim];
        for ex in ds.examples() {
            for (i, v) in ex.features.iter() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
                stored[i] += 1;
            }
        }
        // Examples without an entry hold an implicit zero.
        for j in 0..dim {
            if stored[j] < ds.len() {
                min[j] = min[j].min(0.0);
                max[j] = max[j].max(0.0);
            }
        }
        Ok(ScalingParams { dim, min, max })
    }

    fn map(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi > lo {
            2.0 * (v - lo) / (hi - lo) - 1.0
        } else {
            0.0
        }
    }

    /// Maps every feature affinely so the fitted range becomes `[-1, 1]`.
    /// Values outside the fitted range pass through unclipped; constant
    /// features map to 0.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() > self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: ds.dim(),
            });
        }
        let zero_image: Vec<f64> = (0..self.dim).map(|j| self.map(j, 0.0)).collect();
        let examples = ds
            .examples()
            .iter()
            .map(|ex| {
                let mut dense = zero_image.clone();
                for (i, v) in ex.features.iter() {
                    dense[i] = self.map(i, v);
                }
                let mut features = SparseVector::from_dense(&dense);
                features.dim = self.dim;
                Example {
                    features,
                    label: ex.label,
                }
            })
            .collect();
        Ok(Dataset::from_checked(examples, self.dim))
    }
}

/// Min/max scaling of every feature to `[-1, 1]` using the dataset itself.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, ScalingParams)> {
    let params = ScalingParams::fit(ds)?;
    let scaled = params.apply(ds)?;
    Ok((scaled, params))
}
