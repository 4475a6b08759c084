//! The composite problem `min_{x in X} l(x) + r(Fx)` and its saddle form.
//!
//! `r` is represented by its dual set `Y` (`r(z) = max_{y in Y} <y, z>`), the
//! smooth part `l` by a per-sample loss averaged over the training rows plus an
//! optional ridge term `(gamma/2)||x||^2` that makes it `gamma`-strongly convex.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::Dataset;
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, SparseMatrix};

/// Tolerance used when checking that a dual point lies in `Y`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `log(1 + exp(-b a^T x))`, labels in `{-1, +1}`.
    Logistic,
    /// `(1/2)(a^T x - b)^2`.
    LeastSquares,
}

/// Per-sample loss plus a ridge coefficient `gamma >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossKind {
    pub loss: Loss,
    pub ridge: f64,
}

impl LossKind {
    pub fn logistic(ridge: f64) -> Self {
        Self {
            loss: Loss::Logistic,
            ridge,
        }
    }

    pub fn least_squares(ridge: f64) -> Self {
        Self {
            loss: Loss::LeastSquares,
            ridge,
        }
    }

    /// Strong convexity modulus; only the ridge term is counted.
    pub fn mu(&self) -> f64 {
        self.ridge
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-t))` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Loss {
    /// Loss of one sample given its prediction `a^T x` and target `b`.
    pub fn value(self, prediction: f64, target: f64) -> f64 {
        match self {
            Loss::Logistic => softplus(-target * prediction),
            Loss::LeastSquares => {
                let r = prediction - target;
                0.5 * r * r
            }
        }
    }

    /// Derivative of [`Loss::value`] with respect to the prediction.
    pub fn derivative(self, prediction: f64, target: f64) -> f64 {
        match self {
            Loss::Logistic => -target * sigmoid(-target * prediction),
            Loss::LeastSquares => prediction - target,
        }
    }
}

/// Dual set `Y` of the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualSet {
    /// `{y : ||y||_inf <= radius}`; support function `radius * ||z||_1`.
    LinfBall { radius: f64 },
    /// `{y : ||y||_2 <= radius}`; support function `radius * ||z||_2`.
    L2Ball { radius: f64 },
}

impl DualSet {
    pub fn radius(&self) -> f64 {
        match *self {
            DualSet::LinfBall { radius } | DualSet::L2Ball { radius } => radius,
        }
    }

    /// Euclidean diameter `D_y` of the set in `R^dim`.
    pub fn diameter(&self, dim: usize) -> f64 {
        match *self {
            DualSet::LinfBall { radius } => 2.0 * radius * (dim as f64).sqrt(),
            DualSet::L2Ball { radius } => 2.0 * radius,
        }
    }

    /// Support function `max_{y in Y} <y, z>`.
    pub fn support(&self, z: &[f64]) -> f64 {
        match *self {
            DualSet::LinfBall { radius } => radius * linalg::norm_l1(z),
            DualSet::L2Ball { radius } => radius * linalg::norm(z),
        }
    }

    /// How far `y` sits outside the set (0 when inside).
    pub fn violation(&self, y: &[f64]) -> f64 {
        match *self {
            DualSet::LinfBall { radius } => {
                y.iter().fold(0.0f64, |m, v| m.max(v.abs() - radius)).max(0.0)
            }
            DualSet::L2Ball { radius } => (linalg::norm(y) - radius).max(0.0),
        }
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.violation(y) <= tol
    }

    fn validate(&self) -> Result<()> {
        let r = self.radius();
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("dual radius must be positive, got {r}")));
        }
        Ok(())
    }
}

/// `r(z) = max_{y in Y} <y, z>` evaluated in closed form.
pub fn regularizer_value(dual: &DualSet, z: &[f64]) -> f64 {
    dual.support(z)
}

/// Primal feasible set `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimalSet {
    L2Ball { radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl PrimalSet {
    /// Euclidean diameter `D_x`.
    pub fn diameter(&self) -> f64 {
        match self {
            PrimalSet::L2Ball { radius } => 2.0 * radius,
            PrimalSet::Box { lo, hi } => linalg::distance(lo, hi),
        }
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            PrimalSet::L2Ball { radius } => (linalg::norm(x) - radius).max(0.0),
            PrimalSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .fold(0.0f64, |m, (&v, (&l, &h))| m.max(l - v).max(v - h)),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            PrimalSet::L2Ball { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "primal radius must be positive, got {radius}"
                    )));
                }
            }
            PrimalSet::Box { lo, hi } => {
                check_len("box lower bounds", dim, lo.len())?;
                check_len("box upper bounds", dim, hi.len())?;
                for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                    if !(l < h && l.is_finite() && h.is_finite()) {
                        return Err(Error::InvalidArgument(format!(
                            "box side {i} needs finite lo < hi, got [{l}, {h}]"
                        )));
                    }
                }
                if !self.diameter().is_finite() {
                    return Err(Error::InvalidArgument("box diameter overflows".into()));
                }
            }
        }
        Ok(())
    }
}

/// Everything a solver needs to know about one problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    data: Dataset,
    loss: LossKind,
    penalty: SparseMatrix,
    primal: PrimalSet,
    dual: DualSet,
}

impl ProblemSpec {
    pub fn new(
        data: Dataset,
        loss: LossKind,
        penalty: SparseMatrix,
        primal: PrimalSet,
        dual: DualSet,
    ) -> Result<Self> {
        check_len("penalty matrix columns", data.dim(), penalty.cols())?;
        if !(loss.ridge >= 0.0 && loss.ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ridge coefficient must be finite and >= 0, got {}",
                loss.ridge
            )));
        }
        if loss.loss == Loss::Logistic && !data.is_binary() {
            return Err(Error::InvalidData("logistic loss needs labels in {-1, +1}".into()));
        }
        primal.validate(data.dim())?;
        dual.validate()?;
        Ok(Self {
            data,
            loss,
            penalty,
            primal,
            dual,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn penalty(&self) -> &SparseMatrix {
        &self.penalty
    }

    pub fn primal_set(&self) -> &PrimalSet {
        &self.primal
    }

    pub fn dual_set(&self) -> &DualSet {
        &self.dual
    }

    /// Number of training samples.
    pub fn n(&self) -> usize {
        self.data.n()
    }

    /// Primal dimension `d`.
    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Dual dimension `l` (rows of `F`).
    pub fn dual_dim(&self) -> usize {
        self.penalty.rows()
    }

    pub fn mu(&self) -> f64 {
        self.loss.mu()
    }

    fn ridge_term(&self, x: &[f64]) -> f64 {
        if self.loss.ridge > 0.0 {
            0.5 * self.loss.ridge * linalg::norm_sq(x)
        } else {
            0.0
        }
    }

    /// Loss of training sample `i`, without the ridge term.
    pub fn sample_loss(&self, i: usize, x: &[f64]) -> f64 {
        let pred = self.data.features().row_dot(i, x);
        self.loss.loss.value(pred, self.data.labels()[i])
    }

    /// Mean per-sample loss over `subset` (all rows by default) plus the ridge term.
    pub fn loss_value(&self, x: &[f64], subset: Option<Range<usize>>) -> Result<f64> {
        check_len("loss_value point", self.dim(), x.len())?;
        let rows = subset.unwrap_or(0..self.n());
        if rows.is_empty() || rows.end > self.n() {
            return Err(Error::InvalidArgument(format!(
                "row range {rows:?} is empty or exceeds {} samples",
                self.n()
            )));
        }
        let count = rows.len() as f64;
        let mut acc = 0.0;
        for i in rows {
            acc += self.sample_loss(i, x);
        }
        Ok(acc / count + self.ridge_term(x))
    }

    fn add_ridge(&self, x: &[f64], out: &mut [f64]) {
        if self.loss.ridge > 0.0 {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += self.loss.ridge * xi;
            }
        }
    }

    fn scatter_sample(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let feats = self.data.features();
        let pred = feats.row_dot(i, x);
        let c = self.loss.loss.derivative(pred, self.data.labels()[i]);
        let (idx, vals) = feats.row(i);
        for (&j, &a) in idx.iter().zip(vals) {
            out[j] += c * a;
        }
    }

    /// Gradient of the smooth part, `mean_i grad l(x, xi_i) + gamma x`.
    pub fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("full_gradient point", self.dim(), x.len())?;
        check_len("full_gradient output", self.dim(), out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n() {
            self.scatter_sample(i, x, out);
        }
        let n = self.n() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        self.add_ridge(x, out);
        Ok(())
    }

    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.full_gradient_into(x, &mut out)?;
        Ok(out)
    }

    /// Gradient of sample `i`'s loss plus `gamma x`.
    pub fn sample_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("sample_gradient point", self.dim(), x.len())?;
        check_len("sample_gradient output", self.dim(), out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        self.scatter_sample(i, x, out);
        self.add_ridge(x, out);
        Ok(())
    }

    /// Draws a training row uniformly (with replacement) and returns its
    /// gradient and index.
    pub fn stochastic_gradient_into<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rng: &mut R,
        out: &mut [f64],
    ) -> Result<usize> {
        let i = rng.gen_range(0..self.n());
        self.sample_gradient_into(i, x, out)?;
        Ok(i)
    }

    pub fn stochastic_gradient<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<(Vec<f64>, usize)> {
        let mut out = vec![0.0; self.dim()];
        let i = self.stochastic_gradient_into(x, rng, &mut out)?;
        Ok((out, i))
    }

    /// `r(Fx)`.
    pub fn regularizer_at(&self, x: &[f64]) -> Result<f64> {
        let fx = self.penalty.matvec(x)?;
        Ok(self.dual.support(&fx))
    }

    /// Primal objective `l(x) + r(Fx)` on the training rows.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.loss_value(x, None)? + self.regularizer_at(x)?)
    }

    /// Saddle function `P(y, x) = l(x) + <y, Fx>`; `y` must lie in `Y`.
    pub fn saddle_value(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_len("saddle_value dual point", self.dual_dim(), y.len())?;
        let violation = self.dual.violation(y);
        if violation > FEASIBILITY_TOL {
            return Err(Error::Infeasible {
                what: "dual point",
                violation,
            });
        }
        let fx = self.penalty.matvec(x)?;
        Ok(self.loss_value(x, None)? + linalg::dot(y, &fx))
    }

    /// Population standard deviation of the per-sample gradients at `x`:
    /// `sqrt(mean_i ||g_i - g_bar||^2)`, over every training row.
    pub fn estimate_sigma(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        self.full_gradient_into(x, &mut mean)?;
        let mut g = vec![0.0; d];
        let mut acc = 0.0;
        for i in 0..self.n() {
            self.sample_gradient_into(i, x, &mut g)?;
            acc += linalg::distance(&g, &mean).powi(2);
        }
        Ok((acc / self.n() as f64).sqrt())
    }
}

/// Mean per-sample loss of `x` on an arbitrary dataset, without ridge term.
pub fn empirical_loss(loss: Loss, ds: &Dataset, x: &[f64]) -> Result<f64> {
    check_len("empirical_loss point", ds.dim(), x.len())?;
    let mut acc = 0.0;
    for (i, &b) in ds.labels().iter().enumerate() {
        acc += loss.value(ds.features().row_dot(i, x), b);
    }
    Ok(acc / ds.n() as f64)
}

/// Fusion penalty: one row per edge `(i, j)` with `+1` at `i` and `-1` at `j`.
pub fn build_fusion_matrix(edges: &[(usize, usize)], d: usize) -> Result<SparseMatrix> {
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    let mut triplets = Vec::with_capacity(2 * edges.len());
    for (row, &(i, j)) in edges.iter().enumerate() {
        if i >= j || j >= d {
            return Err(Error::InvalidArgument(format!(
                "edge ({i}, {j}) needs 0 <= i < j < {d}"
            )));
        }
        if !seen.insert((i, j)) {
            return Err(Error::InvalidArgument(format!("duplicate edge ({i}, {j})")));
        }
        triplets.push((row, i, 1.0));
        triplets.push((row, j, -1.0));
    }
    SparseMatrix::from_triplets(edges.len(), d, &triplets)
}

/// Path graph `0 - 1 - ... - (d-1)`.
pub fn chain_edges(d: usize) -> Vec<(usize, usize)> {
    (1..d).map(|j| (j - 1, j)).collect()
}

/// A feature-graph edge with the correlation that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub corr: f64,
}

/// Feature graph from absolute Pearson correlation.
///
/// Keeps pairs with `|corr| >= threshold`, strongest first (ties by index),
/// at most `max_edges` of them. Constant features never get an edge.
pub fn build_graph_by_correlation(ds: &Dataset, threshold: f64, max_edges: usize) -> Result<Vec<Edge>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "correlation threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let d = ds.dim();
    if d < 2 {
        return Err(Error::InvalidData(format!("need at least 2 features for a graph, got {d}")));
    }
    let n = ds.n();
    let dense = ds.features().to_dense();

    // centred columns, with None marking constant features
    let columns: Vec<Option<(Vec<f64>, f64)>> = (0..d)
        .map(|j| {
            let first = dense[0][j];
            if dense.iter().all(|row| row[j] == first) {
                return None;
            }
            let mean = dense.iter().fold(0.0, |acc, row| acc + row[j]) / n as f64;
            let centred: Vec<f64> = dense.iter().map(|row| row[j] - mean).collect();
            let scale = linalg::norm(&centred);
            Some((centred, scale))
        })
        .collect();

    let mut edges = Vec::new();
    for i in 0..d {
        let Some((ci, si)) = &columns[i] else { continue };
        for j in i + 1..d {
            let Some((cj, sj)) = &columns[j] else { continue };
            let corr = (linalg::dot(ci, cj) / (si * sj)).clamp(-1.0, 1.0);
            if corr.abs() >= threshold {
                edges.push(Edge { i, j, corr });
            }
        }
    }
    edges.sort_by(|a, b| {
        b.corr
            .abs()
            .total_cmp(&a.corr.abs())
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    edges.truncate(max_edges);
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;

    fn ds(rows: &[Vec<f64>], labels: &[f64]) -> Dataset {
        let d = rows[0].len();
        Dataset::new(SparseMatrix::from_dense(rows, d).unwrap(), labels.to_vec()).unwrap()
    }

    fn spec(data: Dataset, loss: LossKind, edges: &[(usize, usize)]) -> ProblemSpec {
        let d = data.dim();
        ProblemSpec::new(
            data,
            loss,
            build_fusion_matrix(edges, d).unwrap(),
            PrimalSet::L2Ball { radius: 100.0 },
            DualSet::LinfBall { radius: 0.5 },
        )
        .unwrap()
    }

    #[test]
    fn logistic_at_origin_is_ln2() {
        let p = spec(
            ds(&[vec![1.0, 2.0], vec![-3.0, 0.5]], &[1.0, -1.0]),
            LossKind::logistic(0.0),
            &[(0, 1)],
        );
        assert_eq!(p.loss_value(&[0.0, 0.0], None).unwrap(), std::f64::consts::LN_2);
        assert_eq!(p.saddle_value(&[0.3], &[0.0, 0.0]).unwrap(), std::f64::consts::LN_2);
    }

    #[test]
    fn least_squares_exact_fit() {
        let p = spec(ds(&[vec![1.0, 0.0]], &[1.0]), LossKind::least_squares(0.0), &[]);
        assert_eq!(p.loss_value(&[1.0, 0.0], None).unwrap(), 0.0);
        let p = spec(ds(&[vec![1.0, 0.0]], &[1.0]), LossKind::least_squares(0.5), &[]);
        assert_eq!(p.full_gradient(&[1.0, 0.0]).unwrap(), vec![0.5, 0.0]);
    }

    #[test]
    fn logistic_large_margin_does_not_overflow() {
        let p = spec(ds(&[vec![1.0]], &[1.0]), LossKind::logistic(0.0), &[]);
        let v = p.loss_value(&[100.0], None).unwrap();
        // log1p(e^-100) = e^-100 - e^-200/2 + ..., the second term is far below one ulp
        let oracle = (-100.0f64).exp();
        assert!((v - oracle).abs() <= 1e-15 * oracle, "{v} vs {oracle}");
        let v = p.loss_value(&[-800.0], None).unwrap();
        assert_eq!(v, 800.0);
        let g = p.full_gradient(&[-800.0]).unwrap();
        assert_eq!(g, vec![-1.0]);
    }

    #[test]
    fn gradient_at_origin_is_half_label_weighted_mean() {
        let rows = [vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 4.0]];
        let labels = [1.0, -1.0, -1.0];
        let p = spec(ds(&rows, &labels), LossKind::logistic(0.0), &[]);
        let g = p.full_gradient(&[0.0, 0.0]).unwrap();
        for j in 0..2 {
            let expected: f64 = rows.iter().zip(&labels).map(|(a, b)| -b / 2.0 * a[j]).sum::<f64>() / 3.0;
            assert!((g[j] - expected).abs() < 1e-15);
        }
        let mut out = vec![0.0; 2];
        p.sample_gradient_into(1, &[0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, vec![-1.5, 0.25]);
    }

    #[test]
    fn single_row_stochastic_equals_full() {
        let p = spec(ds(&[vec![0.3, -1.2]], &[-1.0]), LossKind::logistic(0.01), &[]);
        let x = [0.7, 0.2];
        let (g, i) = p.stochastic_gradient(&x, &mut stream_rng(9, 0)).unwrap();
        assert_eq!(i, 0);
        let full = p.full_gradient(&x).unwrap();
        assert_eq!(
            g.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            full.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn regularizer_examples() {
        let y = DualSet::LinfBall { radius: 1.0 };
        assert_eq!(regularizer_value(&y, &[2.0, -3.0]), 5.0);
        assert_eq!(regularizer_value(&DualSet::LinfBall { radius: 0.7 }, &[0.0, 0.0]), 0.0);
        assert_eq!(regularizer_value(&DualSet::L2Ball { radius: 2.0 }, &[3.0, 4.0]), 10.0);
    }

    #[test]
    fn regularizer_matches_grid_search() {
        let y = DualSet::LinfBall { radius: 0.5 };
        let mut rng = stream_rng(4, 0);
        for _ in 0..5 {
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // grid over [-0.5, 0.5]^3 at step 0.01
            let grid: Vec<f64> = (0..=100).map(|k| -0.5 + 0.01 * k as f64).collect();
            let mut best = f64::MIN;
            for a in &grid {
                for b in &grid {
                    for c in &grid {
                        best = best.max(a * z[0] + b * z[1] + c * z[2]);
                    }
                }
            }
            let exact = regularizer_value(&y, &z);
            assert!((exact - best).abs() < 1e-9, "{exact} vs {best}");
        }
    }

    #[test]
    fn saddle_value_rejects_infeasible_dual() {
        let p = spec(ds(&[vec![1.0, 2.0]], &[1.0]), LossKind::logistic(0.0), &[(0, 1)]);
        assert!(matches!(
            p.saddle_value(&[0.6], &[0.0, 0.0]),
            Err(Error::Infeasible { .. })
        ));
        let x = [0.4, -0.1];
        assert_eq!(p.saddle_value(&[0.0], &x).unwrap(), p.loss_value(&x, None).unwrap());
    }

    #[test]
    fn sigma_edge_cases() {
        let p = spec(ds(&[vec![1.0, 2.0]], &[1.0]), LossKind::logistic(0.0), &[]);
        assert_eq!(p.estimate_sigma(&[0.3, 0.1]).unwrap(), 0.0);
        let p = spec(ds(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[1.0, 1.0]), LossKind::logistic(0.3), &[]);
        assert_eq!(p.estimate_sigma(&[0.3, 0.1]).unwrap(), 0.0);

        // two samples at x = 0: g_1 = -1/2 * [1, 0], g_2 = +1/2 * [0, 2]
        // mean = [-1/4, 1/2], deviations have squared norm 1/16 + 1/4 each
        let p = spec(ds(&[vec![1.0, 0.0], vec![0.0, 2.0]], &[1.0, -1.0]), LossKind::logistic(0.0), &[]);
        let expected = (1.0f64 / 16.0 + 0.25).sqrt();
        assert!((p.estimate_sigma(&[0.0, 0.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn fusion_matrix_construction() {
        let f = build_fusion_matrix(&[(0, 1)], 3).unwrap();
        assert_eq!(f.to_dense(), vec![vec![1.0, -1.0, 0.0]]);
        let empty = build_fusion_matrix(&[], 4).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 4));
        let chain = build_fusion_matrix(&chain_edges(4), 4).unwrap();
        assert_eq!(chain.rows(), 3);
        for row in chain.to_dense() {
            assert_eq!(row.iter().sum::<f64>(), 0.0);
        }
        assert!(build_fusion_matrix(&[(1, 1)], 3).is_err());
        assert!(build_fusion_matrix(&[(2, 1)], 3).is_err());
        assert!(build_fusion_matrix(&[(0, 3)], 3).is_err());
        assert!(build_fusion_matrix(&[(0, 1), (0, 1)], 3).is_err());
    }

    #[test]
    fn empty_graph_means_no_regularization() {
        let p = spec(ds(&[vec![1.0, 2.0]], &[1.0]), LossKind::logistic(0.0), &[]);
        let x = [0.5, -2.0];
        assert_eq!(p.objective(&x).unwrap(), p.loss_value(&x, None).unwrap());
        assert_eq!(p.dual_set().diameter(p.dual_dim()), 0.0);
    }

    #[test]
    fn correlation_graph() {
        let rows = [
            vec![1.0, 1.0, -1.0, 5.0, 0.3],
            vec![2.0, 2.0, -2.0, 5.0, -0.1],
            vec![4.0, 4.0, -4.0, 5.0, 0.2],
            vec![3.0, 3.0, -3.0, 5.0, 0.9],
        ];
        let data = ds(&rows, &[1.0, -1.0, 1.0, -1.0]);
        let edges = build_graph_by_correlation(&data, 0.99, 10).unwrap();
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert!((edges[0].corr - 1.0).abs() < 1e-12);
        assert!((edges[1].corr + 1.0).abs() < 1e-12);
        // constant column 3 never appears
        assert!(edges.iter().all(|e| e.i != 3 && e.j != 3));
        assert_eq!(build_graph_by_correlation(&data, 0.99, 1).unwrap().len(), 1);
        assert!(build_graph_by_correlation(&data, 1.0, 1).is_err());

        let narrow = ds(&[vec![1.0], vec![2.0]], &[1.0, -1.0]);
        assert!(build_graph_by_correlation(&narrow, 0.5, 1).is_err());
    }

    #[test]
    fn independent_columns_give_no_edges() {
        let mut rng = stream_rng(17, 0);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let data = ds(&rows, &labels);
        // direct oracle: the largest absolute correlation on this seed is well below 0.9
        let mut max_corr: f64 = 0.0;
        for i in 0..6 {
            for j in i + 1..6 {
                let mi = rows.iter().map(|r| r[i]).sum::<f64>() / 200.0;
                let mj = rows.iter().map(|r| r[j]).sum::<f64>() / 200.0;
                let (mut sij, mut sii, mut sjj) = (0.0, 0.0, 0.0);
                for r in &rows {
                    sij += (r[i] - mi) * (r[j] - mj);
                    sii += (r[i] - mi).powi(2);
                    sjj += (r[j] - mj).powi(2);
                }
                max_corr = max_corr.max((sij / (sii * sjj).sqrt()).abs());
            }
        }
        assert!(max_corr < 0.9);
        assert!(build_graph_by_correlation(&data, 0.9, 100).unwrap().is_empty());
    }
}
