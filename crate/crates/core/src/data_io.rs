//! libsvm-format datasets, train/test splitting and dataset constants.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Samples `(a_i, b_i)`: one feature row per sample and its target.
///
/// Targets read from libsvm files are always `-1` or `+1`. Regression targets
/// built in code may take any finite value; the logistic loss checks for
/// binary labels when the problem is assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: SparseMatrix,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: SparseMatrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::InvalidData(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if features.rows() == 0 {
            return Err(Error::InvalidData("dataset has no samples".into()));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidData("dataset has no features".into()));
        }
        if let Some(i) = labels.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidData(format!("label of sample {i} is not finite")));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &SparseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&b| b == 1.0 || b == -1.0)
    }

    /// The listed samples, in the listed order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select_rows(rows),
            rows.iter().map(|&r| self.labels[r]).collect(),
        )
    }
}

/// A dataset cut into training and test parts.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
    pub split_seed: u64,
    /// Source row of each training sample.
    pub train_rows: Vec<usize>,
    /// Source row of each test sample.
    pub test_rows: Vec<usize>,
}

/// Label conventions recognised in the wild, listed as (negative, positive).
const LABEL_CONVENTIONS: [(f64, f64); 3] = [(-1.0, 1.0), (0.0, 1.0), (1.0, 2.0)];

fn map_labels(raw: &[f64], distinct: &[f64]) -> Result<Vec<f64>> {
    let (neg, pos) = LABEL_CONVENTIONS
        .iter()
        .copied()
        .find(|&(neg, pos)| distinct.iter().all(|&v| v == neg || v == pos))
        .or_else(|| match *distinct {
            [lo, hi] => Some((lo, hi)),
            _ => None,
        })
        .ok_or_else(|| {
            Error::InvalidData(format!("cannot map single label {} onto {{-1, +1}}", distinct[0]))
        })?;
    Ok(raw
        .iter()
        .map(|&v| {
            debug_assert!(v == neg || v == pos);
            if v == neg {
                -1.0
            } else {
                1.0
            }
        })
        .collect())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses `label idx:value idx:value ...` lines.
///
/// Indices are 1-based and strictly increasing within a line. Blank lines and
/// `#` comments are skipped; explicit zero values are dropped. Two raw label
/// values are mapped onto `{-1, +1}` with the smaller one negative. The feature
/// dimension is the largest index seen unless `dim` overrides it.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut triplets = Vec::new();
    let mut raw_labels = Vec::new();
    let mut distinct: Vec<f64> = Vec::with_capacity(2);
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| parse_err(lineno, format!("read failed: {e}")))?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("label '{label_tok}' is not a number")))?;
        if !label.is_finite() {
            return Err(parse_err(lineno, format!("label '{label_tok}' is not finite")));
        }
        if !distinct.contains(&label) {
            if distinct.len() == 2 {
                return Err(parse_err(
                    lineno,
                    format!(
                        "third distinct label {label} (already saw {} and {})",
                        distinct[0], distinct[1]
                    ),
                ));
            }
            distinct.push(label);
        }
        let row = raw_labels.len();
        raw_labels.push(label);

        let mut prev = 0usize;
        for tok in tokens {
            let (idx_str, val_str) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected idx:value, found '{tok}'")))?;
            let idx: usize = idx_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("feature index '{idx_str}' is not an integer")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based, found 0"));
            }
            if idx <= prev {
                return Err(parse_err(
                    lineno,
                    format!("feature index {idx} does not increase (previous {prev})"),
                ));
            }
            prev = idx;
            let value: f64 = val_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("feature value '{val_str}' is not a number")))?;
            if !value.is_finite() {
                return Err(parse_err(lineno, format!("feature value '{val_str}' is not finite")));
            }
            max_index = max_index.max(idx);
            if value != 0.0 {
                triplets.push((row, idx - 1, value));
            }
        }
    }

    if raw_labels.is_empty() {
        return Err(Error::InvalidData("no samples found".into()));
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(Error::InvalidData(format!(
                "feature index {max_index} exceeds the requested dimension {d}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    distinct.sort_by(f64::total_cmp);
    let labels = map_labels(&raw_labels, &distinct)?;
    let features = SparseMatrix::from_triplets(raw_labels.len(), d, &triplets)?;
    Dataset::new(features, labels)
}

/// Reads a libsvm file; names ending in `.gz` are decompressed on the fly.
pub fn load_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
    })?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    parse_libsvm(BufReader::new(reader), dim)
}

/// Writes the dataset back in libsvm format with the shortest round-trip decimals.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    let feats = ds.features();
    for (r, &label) in ds.labels().iter().enumerate() {
        if label == 1.0 {
            write!(out, "+1")?;
        } else {
            write!(out, "{label}")?;
        }
        let (idx, vals) = feats.row(r);
        for (&c, &v) in idx.iter().zip(vals) {
            write!(out, " {}:{v}", c + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Shuffles rows with `seed` and keeps the first `floor(n * train_fraction)` for training.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.n();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "splitting {n} samples at fraction {train_fraction} leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::stream_rng(seed, 0));
    let (train_rows, test_rows) = order.split_at(n_train);
    Ok(SplitDataset {
        train: ds.subset(train_rows)?,
        test: ds.subset(test_rows)?,
        split_seed: seed,
        train_rows: train_rows.to_vec(),
        test_rows: test_rows.to_vec(),
    })
}

/// `0.25 * max_i ||a_i||^2`, the usual Lipschitz bound for the logistic loss gradient.
pub fn lipschitz_upper_bound(ds: &Dataset) -> f64 {
    let feats = ds.features();
    let max_sq = (0..feats.rows())
        .map(|r| feats.row_norm_sq(r))
        .fold(0.0, f64::max);
    0.25 * max_sq
}
