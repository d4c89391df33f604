use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::Dataset;
use crate::error::{Result, SpcaError};
use crate::linalg::SymMatrix;

/// Eigenvalues down to this level are rounding noise and clipped to zero.
const NEG_EIG_TOL: f64 = 1e-10;
/// Square-root entries below this fraction of the largest one are dropped.
const SPARSIFY_REL: f64 = 1e-14;
/// Rows per block in covariance accumulation.
const CHUNK_ROWS: usize = 512;

/// Draws `N(0, Σ)` rows as `x = Σ^{1/2} z`, one counter-based stream per row.
///
/// Row `i` of a dataset with seed `seed` depends only on `(seed, i)`, so the
/// output is identical for any thread count or chunking.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    d: usize,
    // symmetric square root in CSR form
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl GaussianSampler {
    pub fn new(sigma: &SymMatrix) -> Result<Self> {
        let d = sigma.dim();
        let eig = SymmetricEigen::try_new(sigma.to_nalgebra(), f64::EPSILON, 0).ok_or_else(|| {
            SpcaError::Numerical {
                message: "eigendecomposition for the covariance square root did not converge".into(),
                residual: f64::NAN,
            }
        })?;
        let mut roots = Vec::with_capacity(d);
        for &lam in eig.eigenvalues.iter() {
            if lam < -NEG_EIG_TOL {
                return Err(SpcaError::param(format!(
                    "covariance is not positive semidefinite (eigenvalue {lam:e})"
                )));
            }
            roots.push(lam.max(0.0).sqrt());
        }
        let v = &eig.eigenvectors;
        let scaled = DMatrix::from_fn(d, d, |i, k| v[(i, k)] * roots[k]);
        let root = &scaled * v.transpose();
        let cutoff = root.amax() * SPARSIFY_REL;

        let mut row_ptr = Vec::with_capacity(d + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..d {
            for j in 0..d {
                // symmetrize explicitly so both triangles carry the same value
                let x = 0.5 * (root[(i, j)] + root[(j, i)]);
                if x.abs() > cutoff {
                    cols.push(j);
                    vals.push(x);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            d,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Stored entries of the square root.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Writes row `index` of the stream `seed` into `out`, using `z` as scratch.
    pub fn sample_row(&self, seed: u64, index: u64, out: &mut [f64], z: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *o = self.cols[a..b]
                .iter()
                .zip(&self.vals[a..b])
                .map(|(&j, &r)| r * z[j])
                .sum();
        }
    }

    /// Rows `start..end` of stream `seed`, row-major.
    pub fn sample_range(&self, seed: u64, start: usize, end: usize) -> Vec<f64> {
        let d = self.d;
        let mut rows = vec![0.0; (end - start) * d];
        rows.par_chunks_mut(d).enumerate().for_each_init(
            || vec![0.0; d],
            |z, (k, out)| self.sample_row(seed, (start + k) as u64, out, z),
        );
        rows
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(SpcaError::param("sample size n must be positive"));
        }
        Dataset::new(n, self.d, self.sample_range(seed, 0, n), seed)
    }
}

/// `n` i.i.d. rows from `N(0, Σ)`.
pub fn sample_gaussian(sigma: &SymMatrix, n: usize, seed: u64) -> Result<Dataset> {
    GaussianSampler::new(sigma)?.sample(n, seed)
}

/// Running `Σ x x^T` over row blocks; [`snapshot`](Self::snapshot) divides by the count.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    d: usize,
    count: usize,
    sum: DMatrix<f64>,
}

impl CovarianceAccumulator {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            count: 0,
            sum: DMatrix::zeros(d, d),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds row-major rows (length a multiple of `d`).
    pub fn add_rows(&mut self, rows: &[f64]) {
        let d = self.d;
        debug_assert_eq!(rows.len() % d, 0);
        for block in rows.chunks(CHUNK_ROWS * d) {
            let m = block.len() / d;
            let x = DMatrix::from_row_slice(m, d, block);
            self.sum.gemm_tr(1.0, &x, &x, 1.0);
            self.count += m;
        }
    }

    pub fn snapshot(&self) -> Result<SymMatrix> {
        if self.count == 0 {
            return Err(SpcaError::param("no rows accumulated"));
        }
        let inv = 1.0 / self.count as f64;
        let d = self.d;
        let full: Vec<f64> = (0..d * d).map(|k| self.sum[(k / d, k % d)] * inv).collect();
        SymMatrix::from_upper(d, &full)
    }
}

/// Uncentered `X^T X / n`.
pub fn sample_covariance(data: &Dataset) -> Result<SymMatrix> {
    covariance_of_rows(data.rows(), data.d())
}

pub(crate) fn covariance_of_rows(rows: &[f64], d: usize) -> Result<SymMatrix> {
    let mut acc = CovarianceAccumulator::new(d);
    acc.add_rows(rows);
    acc.snapshot()
}
