use std::sync::Arc;

use super::sampling::covariance_of_rows;
use super::Dataset;
use crate::error::{Result, SpcaError};
use crate::linalg::{dot, project_out, SymMatrix};

/// Sparse nonnegative features in CSR form with their column means.
///
/// The operator it defines is the centered covariance
/// `X^T X / n - μ μ^T`, applied without ever forming a dense matrix.
#[derive(Debug, Clone)]
pub struct CenteredSparseData {
    n: usize,
    d: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    mean: Vec<f64>,
}

impl CenteredSparseData {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows(d: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        if d == 0 || rows.is_empty() {
            return Err(SpcaError::param("sparse data needs at least one row and column"));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut mean = vec![0.0; d];
        for row in rows {
            let mut sorted = row.clone();
            sorted.sort_by_key(|e| e.0);
            for w in sorted.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(SpcaError::param(format!("duplicate column {} in a row", w[0].0)));
                }
            }
            for (j, x) in sorted {
                if j >= d || !x.is_finite() {
                    return Err(SpcaError::param(format!("bad sparse entry ({j}, {x})")));
                }
                if x != 0.0 {
                    cols.push(j);
                    vals.push(x);
                    mean[j] += x;
                }
            }
            row_ptr.push(cols.len());
        }
        let n = rows.len();
        mean.iter_mut().for_each(|m| *m /= n as f64);
        Ok(Self {
            n,
            d,
            row_ptr,
            cols,
            vals,
            mean,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn row(&self, t: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[t], self.row_ptr[t + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for t in 0..self.n {
            let (c, v) = self.row(t);
            let y: f64 = c.iter().zip(v).map(|(&j, &x)| x * u[j]).sum();
            if y != 0.0 {
                for (&j, &x) in c.iter().zip(v) {
                    out[j] += y * x;
                }
            }
        }
        let mu = dot(&self.mean, u);
        let inv = 1.0 / self.n as f64;
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o = *o * inv - m * mu;
        }
        out
    }

    /// Column variances `E[x_j^2] - μ_j^2`.
    pub fn variances(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.d];
        for (&j, &x) in self.cols.iter().zip(&self.vals) {
            sq[j] += x * x;
        }
        let inv = 1.0 / self.n as f64;
        sq.iter()
            .zip(&self.mean)
            .map(|(s, m)| (s * inv - m * m).max(0.0))
            .collect()
    }
}

/// A covariance-like operator `u ↦ Σ u`, in one of several representations.
#[derive(Debug, Clone)]
pub enum CovOperator {
    /// An explicit symmetric matrix.
    Dense(Arc<SymMatrix>),
    /// `X_b^T X_b / |b|` for rows `start..end` of a dataset.
    Data {
        data: Arc<Dataset>,
        start: usize,
        end: usize,
    },
    /// Centered sparse covariance.
    SparseCentered(Arc<CenteredSparseData>),
    /// `P A P` with `P = I - U U^T` for orthonormal columns `U`.
    Projected {
        inner: Box<CovOperator>,
        basis: Arc<Vec<Vec<f64>>>,
    },
}

impl CovOperator {
    pub fn dense(m: SymMatrix) -> Self {
        CovOperator::Dense(Arc::new(m))
    }

    /// Sample covariance of the whole dataset, applied lazily.
    pub fn from_data(data: Arc<Dataset>) -> Self {
        let end = data.n();
        CovOperator::Data {
            data,
            start: 0,
            end,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovOperator::Dense(m) => m.dim(),
            CovOperator::Data { data, .. } => data.d(),
            CovOperator::SparseCentered(s) => s.d(),
            CovOperator::Projected { inner, .. } => inner.dim(),
        }
    }

    /// Number of samples behind a data-backed operator.
    pub fn samples(&self) -> Option<usize> {
        match self {
            CovOperator::Dense(_) => None,
            CovOperator::Data { start, end, .. } => Some(end - start),
            CovOperator::SparseCentered(s) => Some(s.n()),
            CovOperator::Projected { inner, .. } => inner.samples(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, CovOperator::Dense(_))
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            CovOperator::Dense(m) => m.matvec(u),
            CovOperator::SparseCentered(s) => s.apply(u),
            CovOperator::Data { .. } => {
                let support: Vec<usize> = (0..u.len()).filter(|&i| u[i] != 0.0).collect();
                self.apply_sparse(u, &support)
            }
            CovOperator::Projected { inner, basis } => {
                let mut v = u.to_vec();
                project_out(&mut v, basis);
                let mut w = inner.apply(&v);
                project_out(&mut w, basis);
                w
            }
        }
    }

    /// `Σ u` for `u` supported on `support` (other entries are ignored).
    pub fn apply_sparse(&self, u: &[f64], support: &[usize]) -> Vec<f64> {
        match self {
            CovOperator::Dense(m) => m.matvec_sparse(u, support),
            CovOperator::Data { data, start, end } => {
                let d = data.d();
                let mut out = vec![0.0; d];
                for t in *start..*end {
                    let x = data.row(t);
                    let y: f64 = support.iter().map(|&j| x[j] * u[j]).sum();
                    if y != 0.0 {
                        for (o, xi) in out.iter_mut().zip(x) {
                            *o += y * xi;
                        }
                    }
                }
                let inv = 1.0 / (end - start) as f64;
                out.iter_mut().for_each(|o| *o *= inv);
                out
            }
            _ => {
                let mut masked = vec![0.0; u.len()];
                for &j in support {
                    masked[j] = u[j];
                }
                self.apply(&masked)
            }
        }
    }

    /// The operator as an explicit matrix.
    pub fn to_dense(&self) -> Result<SymMatrix> {
        match self {
            CovOperator::Dense(m) => Ok((**m).clone()),
            CovOperator::Data { data, start, end } => {
                covariance_of_rows(data.slice(*start, *end), data.d())
            }
            CovOperator::Projected { inner, basis } => inner.to_dense()?.project_both_sides(basis),
            CovOperator::SparseCentered(s) => {
                let d = s.d();
                let mut cols = Vec::with_capacity(d);
                for j in 0..d {
                    let mut e = vec![0.0; d];
                    e[j] = 1.0;
                    cols.push(s.apply(&e));
                }
                SymMatrix::from_fn(d, |i, j| 0.5 * (cols[j][i] + cols[i][j]))
            }
        }
    }

    /// Diagonal entries `e_i^T Σ e_i`.
    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            CovOperator::Dense(m) => m.diagonal(),
            CovOperator::SparseCentered(s) => s.variances(),
            CovOperator::Data { data, start, end } => {
                let mut diag = vec![0.0; data.d()];
                for t in *start..*end {
                    for (g, x) in diag.iter_mut().zip(data.row(t)) {
                        *g += x * x;
                    }
                }
                let inv = 1.0 / (end - start) as f64;
                diag.iter_mut().for_each(|g| *g *= inv);
                diag
            }
            CovOperator::Projected { .. } => {
                let d = self.dim();
                (0..d)
                    .map(|i| {
                        let mut e = vec![0.0; d];
                        e[i] = 1.0;
                        self.apply(&e)[i]
                    })
                    .collect()
            }
        }
    }
}

/// Splits the rows into `t` disjoint batches of `⌊n/t⌋` rows each; the
/// `n mod t` trailing rows are unused.
pub fn batch_covariances(data: &Arc<Dataset>, t: usize) -> Result<Vec<CovOperator>> {
    if t == 0 || t > data.n() {
        return Err(SpcaError::param(format!(
            "need 1 <= T <= n for disjoint batches (T = {t}, n = {})",
            data.n()
        )));
    }
    let b = data.n() / t;
    Ok((0..t)
        .map(|k| CovOperator::Data {
            data: Arc::clone(data),
            start: k * b,
            end: (k + 1) * b,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_covariance;

    fn toy() -> Arc<Dataset> {
        let rows: Vec<f64> = (0..30).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        Arc::new(Dataset::new(10, 3, rows, 0).unwrap())
    }

    #[test]
    fn data_operator_matches_dense() {
        let data = toy();
        let op = CovOperator::from_data(Arc::clone(&data));
        let dense = sample_covariance(&data).unwrap();
        let u = [0.3, -1.0, 2.0];
        for (a, b) in op.apply(&u).iter().zip(dense.matvec(&u)) {
            assert!((a - b).abs() < 1e-12);
        }
        let sparse = op.apply_sparse(&u, &[0, 2]);
        let masked = dense.matvec(&[0.3, 0.0, 2.0]);
        for (a, b) in sparse.iter().zip(masked) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in op.diagonal().iter().zip(dense.diagonal()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn batches_drop_remainder() {
        let data = toy();
        let ops = batch_covariances(&data, 3).unwrap();
        assert_eq!(ops.len(), 3);
        assert!(ops.iter().all(|o| o.samples() == Some(3)));
        let sub = Dataset::new(3, 3, data.slice(3, 6).to_vec(), 0).unwrap();
        let want = sample_covariance(&sub).unwrap();
        let got = ops[1].to_dense().unwrap();
        for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(batch_covariances(&data, 0).is_err());
        assert!(batch_covariances(&data, 11).is_err());
    }

    #[test]
    fn sparse_centered_matches_dense_formula() {
        let rows = vec![
            vec![(0, 1.0), (2, 2.0)],
            vec![(1, 3.0)],
            vec![(0, 1.0), (1, 1.0), (2, 1.0)],
        ];
        let s = CenteredSparseData::from_rows(3, &rows).unwrap();
        let dense = [[1.0, 0.0, 2.0], [0.0, 3.0, 0.0], [1.0, 1.0, 1.0]];
        let mu: Vec<f64> = (0..3).map(|j| dense.iter().map(|r| r[j]).sum::<f64>() / 3.0).collect();
        let op = CovOperator::SparseCentered(Arc::new(s));
        let m = op.to_dense().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = dense.iter().map(|r| r[i] * r[j]).sum::<f64>() / 3.0 - mu[i] * mu[j];
                assert!((m.get(i, j) - e).abs() < 1e-12);
            }
        }
        for (a, b) in op.diagonal().iter().zip(m.diagonal()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_operator_annihilates_basis() {
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let basis = Arc::new(vec![vec![h, h, 0.0]]);
        let op = CovOperator::Projected {
            inner: Box::new(CovOperator::dense(m.clone())),
            basis: Arc::clone(&basis),
        };
        assert!(op.apply(&[h, h, 0.0]).iter().all(|x| x.abs() < 1e-14));
        let explicit = m.project_both_sides(&basis).unwrap();
        let u = [0.2, -0.5, 0.7];
        for (a, b) in op.apply(&u).iter().zip(explicit.matvec(&u)) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
