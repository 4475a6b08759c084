//! Dense-vector helpers and a compressed sparse row matrix.
//!
//! Every reduction here sums strictly left to right so that a run replayed
//! with the same seed reproduces the same bits.

use rand::Rng;

use crate::error::{check_len, Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn norm_l1(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc + v.abs())
}

/// Euclidean distance between two equal-length vectors.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Sparse matrix in CSR layout.
///
/// Column indices inside a row are strictly increasing and every stored
/// value is finite and non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// A `rows x cols` matrix with no stored entries.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from raw CSR arrays, checking every structural invariant.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                rows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidMatrix("row_offsets must start at 0".into()));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidMatrix(
                "row_offsets, col_indices and values disagree on the entry count".into(),
            ));
        }
        for r in 0..rows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if hi < lo {
                return Err(Error::InvalidMatrix(format!("row_offsets decreases at row {r}")));
            }
            for k in lo..hi {
                let c = col_indices[k];
                if c >= cols {
                    return Err(Error::InvalidMatrix(format!(
                        "column index {c} out of range in row {r} ({cols} columns)"
                    )));
                }
                if k > lo && col_indices[k - 1] >= c {
                    return Err(Error::InvalidMatrix(format!(
                        "column indices not strictly increasing in row {r}"
                    )));
                }
                let v = values[k];
                if !v.is_finite() || v == 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({r}, {c}) must be finite and non-zero, got {v}"
                    )));
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Duplicate coordinates are summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidMatrix(format!("non-finite value at ({r}, {c})")));
            }
            sorted.push((r, c, v));
        }
        // stable sort keeps the input order of duplicates, so merging is reproducible
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let (r, c, mut v) = sorted[i];
            i += 1;
            while i < sorted.len() && sorted[i].0 == r && sorted[i].1 == c {
                v += sorted[i].2;
                i += 1;
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self::from_csr(rows, cols, row_offsets, col_indices, values)
    }

    /// Builds a matrix from dense rows, skipping zeros.
    pub fn from_dense(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            check_len("SparseMatrix::from_dense row", cols, row.len())?;
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_offsets[r + 1] - self.row_offsets[r]
    }

    /// Inner product of row `r` with a dense vector.
    pub fn row_dot(&self, r: usize, v: &[f64]) -> f64 {
        let (idx, vals) = self.row(r);
        let mut acc = 0.0;
        for (&c, &a) in idx.iter().zip(vals) {
            acc += a * v[c];
        }
        acc
    }

    pub fn row_norm_sq(&self, r: usize) -> f64 {
        let (_, vals) = self.row(r);
        norm_sq(vals)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in out.iter_mut().enumerate() {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                row[c] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets)
            .expect("transpose of a valid matrix is valid")
    }

    /// New matrix made of the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            let (idx, vals) = self.row(r);
            col_indices.extend_from_slice(idx);
            values.extend_from_slice(vals);
            row_offsets.push(values.len());
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// `out = self * v`.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec input", self.cols, v.len())?;
        check_len("matvec output", self.rows, out.len())?;
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(r, v);
        }
        Ok(())
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(v, &mut out)?;
        Ok(out)
    }

    /// `out = self^T * v`, scattering rows in order.
    pub fn matvec_transpose_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec_transpose input", self.rows, v.len())?;
        check_len("matvec_transpose output", self.cols, out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &vr) in v.iter().enumerate() {
            let (idx, vals) = self.row(r);
            for (&c, &a) in idx.iter().zip(vals) {
                out[c] += a * vr;
            }
        }
        Ok(())
    }

    pub fn matvec_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.matvec_transpose_into(v, &mut out)?;
        Ok(out)
    }

    /// Largest eigenvalue of `M^T M` by power iteration.
    ///
    /// Stops once two successive Rayleigh quotients agree to relative `tol`.
    /// The start vector is drawn from a generator seeded with `seed`. A matrix
    /// without stored entries has `M^T M = 0` and returns 0 immediately.
    pub fn spectral_norm_sq(&self, tol: f64, max_iters: usize, seed: u64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        if self.nnz() == 0 {
            return Ok(0.0);
        }
        let mut rng = crate::stream_rng(seed, 0);
        let mut v: Vec<f64> = (0..self.cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n0 = norm(&v);
        v.iter_mut().for_each(|x| *x /= n0);

        let mut fv = vec![0.0; self.rows];
        let mut ftfv = vec![0.0; self.cols];
        let mut prev = f64::NAN;
        let mut estimate = 0.0;
        for _ in 0..max_iters {
            self.matvec_into(&v, &mut fv)?;
            self.matvec_transpose_into(&fv, &mut ftfv)?;
            estimate = norm_sq(&fv);
            if (estimate - prev).abs() <= tol * estimate.abs() {
                return Ok(estimate);
            }
            prev = estimate;
            let n = norm(&ftfv);
            if n == 0.0 {
                // start vector fell in the null space
                return Ok(estimate);
            }
            for (vi, wi) in v.iter_mut().zip(&ftfv) {
                *vi = wi / n;
            }
        }
        Err(Error::NotConverged {
            iterations: max_iters,
            estimate,
        })
    }
}
