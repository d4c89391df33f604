//! Dense symmetric linear algebra.
//!
//! [`SymMatrix`] stores the full square so that row access (and, by symmetry,
//! column access) is a contiguous slice. Symmetry is enforced at construction
//! and never re-checked afterwards because the type exposes no mutation.

mod construct;
mod eigen;

use std::fmt;

pub use construct::{good_ortho_basis, householder_to, OrthonormalBasis};
pub use eigen::{
    eig_top_m, eig_top_m_with, opnorm, opnorm_with, symmetric_eigenvalues, top_eig, EigConfig,
    EigPair, TopEig,
};

use crate::error::{Result, SpcaError};

/// Tolerance for "unit vector" preconditions on Rayleigh quotients.
pub const UNIT_TOL: f64 = 1e-8;

/// Dense symmetric `d × d` matrix.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.dim.min(8) {
            list.entry(&&self.row(i)[..self.dim.min(8)]);
        }
        list.finish()
    }
}

impl SymMatrix {
    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle (`i <= j`)
    /// and mirrored, so the result is symmetric by construction.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if dim == 0 {
            return Err(SpcaError::param("matrix dimension must be at least 1"));
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let x = f(i, j);
                data[i * dim + j] = x;
                data[j * dim + i] = x;
            }
        }
        Ok(Self { dim, data })
    }

    /// Row-major data that must already be exactly symmetric.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(SpcaError::param("matrix dimension must be at least 1"));
        }
        if data.len() != dim * dim {
            return Err(SpcaError::param(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(SpcaError::param(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(SpcaError::param("rows must form a square matrix"));
        }
        Self::from_row_major(dim, rows.concat())
    }

    /// Symmetrizes an arbitrary square row-major buffer by keeping its upper triangle.
    pub(crate) fn from_upper(dim: usize, data: &[f64]) -> Result<Self> {
        Self::from_fn(dim, |i, j| data[i * dim + j])
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |_, _| 0.0)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `M u`.
    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.dim, "dimension mismatch in matvec");
        self.data
            .chunks_exact(self.dim)
            .map(|row| dot(row, u))
            .collect()
    }

    /// `M u` touching only the columns in `support`; entries of `u` outside it
    /// are treated as zero. Costs `O(d |support|)`.
    pub fn matvec_sparse(&self, u: &[f64], support: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &j in support {
            let uj = u[j];
            if uj != 0.0 {
                // column j == row j
                axpy(uj, self.row(j), &mut out);
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `self + alpha * w w^T`.
    pub fn rank_one_update(&self, alpha: f64, w: &[f64]) -> Result<Self> {
        if w.len() != self.dim {
            return Err(SpcaError::param("dimension mismatch in rank-one update"));
        }
        Self::from_fn(self.dim, |i, j| self.get(i, j) + alpha * w[i] * w[j])
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        if other.dim != self.dim {
            return Err(SpcaError::param("dimension mismatch in matrix sum"));
        }
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// `P M P` with `P = I - U U^T` for the orthonormal columns `basis`.
    pub fn project_both_sides(&self, basis: &[Vec<f64>]) -> Result<Self> {
        let d = self.dim;
        if basis.iter().any(|b| b.len() != d) {
            return Err(SpcaError::param("projection basis has wrong dimension"));
        }
        // MP column by column, then P(MP); both are plain projections of vectors.
        let mut mp = vec![0.0; d * d];
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            project_out(&mut e, basis);
            let col = self.matvec(&e);
            for i in 0..d {
                mp[i * d + j] = col[i];
            }
        }
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            let mut col: Vec<f64> = (0..d).map(|i| mp[i * d + j]).collect();
            project_out(&mut col, basis);
            for i in 0..d {
                out[i * d + j] = col[i];
            }
        }
        Self::from_upper(d, &out)
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

/// Keeps the `r` largest-magnitude entries of `v` and zeroes the rest.
///
/// Ties in magnitude go to the smaller index, so the result is deterministic.
pub fn top_r(v: &[f64], r: usize) -> Result<Vec<f64>> {
    let support = top_r_support(v, r)?;
    let mut out = vec![0.0; v.len()];
    for i in support {
        out[i] = v[i];
    }
    Ok(out)
}

/// Indices kept by [`top_r`], in increasing order.
pub fn top_r_support(v: &[f64], r: usize) -> Result<Vec<usize>> {
    let d = v.len();
    if r == 0 || r > d {
        return Err(SpcaError::param(format!(
            "truncation level r = {r} must lie in [1, {d}]"
        )));
    }
    let mut idx: Vec<usize> = (0..d).collect();
    if r < d {
        idx.select_nth_unstable_by(r - 1, |&a, &b| {
            v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b))
        });
        idx.truncate(r);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Entrywise hard threshold: keep `M_ij` when `|M_ij| >= tau`.
pub fn threshold_entries(m: &SymMatrix, tau: f64) -> Result<SymMatrix> {
    if !(tau > 0.0) {
        return Err(SpcaError::param(format!("threshold tau = {tau} must be positive")));
    }
    Ok(SymMatrix {
        dim: m.dim,
        data: m
            .data
            .iter()
            .map(|&x| if x.abs() >= tau { x } else { 0.0 })
            .collect(),
    })
}

/// `1 - <u,v>^2 / (|u|^2 |v|^2)`, clamped to `[0, 1]`.
pub fn sin2_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(SpcaError::param("dimension mismatch in sin2_angle"));
    }
    let uu = dot(u, u);
    let vv = dot(v, v);
    if uu == 0.0 || vv == 0.0 {
        return Err(SpcaError::param("sin2_angle of a zero vector"));
    }
    let uv = dot(u, v);
    Ok((1.0 - uv * uv / (uu * vv)).clamp(0.0, 1.0))
}

/// `u^T M u` for a unit vector `u`.
pub fn rayleigh(m: &SymMatrix, u: &[f64]) -> Result<f64> {
    if u.len() != m.dim {
        return Err(SpcaError::param("dimension mismatch in rayleigh"));
    }
    let n = norm(u);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(SpcaError::param(format!(
            "rayleigh quotient needs a unit vector, |u| = {n}"
        )));
    }
    Ok(dot(u, &m.matvec(u)))
}

/// The principal submatrix `M[S, S]`, in the order given by `indices`.
pub fn restrict(m: &SymMatrix, indices: &[usize]) -> Result<SymMatrix> {
    if indices.is_empty() {
        return Err(SpcaError::param("cannot restrict to an empty index set"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= m.dim) {
        return Err(SpcaError::param(format!(
            "index {bad} out of range for dimension {}",
            m.dim
        )));
    }
    SymMatrix::from_fn(indices.len(), |a, b| m.get(indices[a], indices[b]))
}

/// Places `local` (indexed like `indices`) into a zero vector of length `dim`.
pub fn embed(local: &[f64], indices: &[usize], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (&i, &x) in indices.iter().zip(local) {
        out[i] = x;
    }
    out
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Scales `v` to unit length; returns the original norm (0 leaves `v` untouched).
pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// `v <- (I - U U^T) v` for orthonormal columns `basis`.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(b, v);
        axpy(-c, b, v);
    }
}

pub fn basis_vector(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

/// Flips the sign so the largest-magnitude entry is positive, ties going to
/// the smaller index (magnitudes within a relative `1e-12` count as tied).
pub fn canonical_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let cutoff = max * (1.0 - 1e-12);
    if let Some(&lead) = v.iter().find(|x| x.abs() >= cutoff) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_r_examples() {
        assert_eq!(
            top_r(&[3.0, -5.0, 2.0, 0.0], 2).unwrap(),
            vec![3.0, -5.0, 0.0, 0.0]
        );
        let v = [0.3, -1.2, 7.0, 0.0, 2.5];
        assert_eq!(top_r(&v, 5).unwrap(), v.to_vec());
        assert_eq!(top_r(&[1.0, -1.0], 1).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn top_r_rejects_bad_levels() {
        assert!(matches!(top_r(&[1.0, 2.0], 0), Err(SpcaError::Parameter(_))));
        assert!(matches!(top_r(&[1.0, 2.0], 3), Err(SpcaError::Parameter(_))));
    }

    #[test]
    fn top_r_matches_sort_oracle() {
        // full sort by (|v| desc, index asc) is the reference ordering
        let v: [f64; 8] = [0.5, -0.5, 0.1, 2.0, -2.0, 0.5, 0.0, -0.1];
        for r in 1..=v.len() {
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap().then(a.cmp(&b)));
            let mut expect = vec![0.0; v.len()];
            for &i in &order[..r] {
                expect[i] = v[i];
            }
            assert_eq!(top_r(&v, r).unwrap(), expect, "r = {r}");
        }
    }

    #[test]
    fn threshold_examples() {
        let m = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let t = threshold_entries(&m, 0.6).unwrap();
        assert_eq!(t, SymMatrix::diag(&[1.0, 2.0]).unwrap());
        assert_eq!(threshold_entries(&m, 2.5).unwrap(), SymMatrix::zeros(2).unwrap());
        assert_eq!(threshold_entries(&m, 0.1).unwrap(), m);
        assert!(threshold_entries(&m, 0.0).is_err());
        assert!(threshold_entries(&m, -1.0).is_err());
    }

    #[test]
    fn sin2_examples() {
        let u = [1.0, 2.0, -3.0];
        assert!(sin2_angle(&u, &u).unwrap().abs() < 1e-15);
        assert_eq!(sin2_angle(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sin2_angle(&[h, h], &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(sin2_angle(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn rayleigh_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let id = SymMatrix::identity(3).unwrap();
        assert!((rayleigh(&id, &[0.6, 0.0, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        let d = SymMatrix::diag(&[2.0, 1.0]).unwrap();
        assert_eq!(rayleigh(&d, &[1.0, 0.0]).unwrap(), 2.0);
        let ones = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!((rayleigh(&ones, &[h, h]).unwrap() - 2.0).abs() < 1e-15);
        assert!(rayleigh(&id, &[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn restrict_examples() {
        let m = SymMatrix::diag(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(restrict(&m, &[0, 1, 2]).unwrap(), m);
        assert_eq!(restrict(&m, &[0, 2]).unwrap(), SymMatrix::diag(&[1.0, 3.0]).unwrap());
        assert!(restrict(&m, &[3]).is_err());
        assert!(restrict(&m, &[]).is_err());

        let r = SymMatrix::from_fn(5, |i, j| (i * 7 + j * 7 + i * j) as f64).unwrap();
        let s = restrict(&r, &[1, 3]).unwrap();
        assert_eq!(s.get(0, 0), r.get(1, 1));
        assert_eq!(s.get(0, 1), r.get(1, 3));
        assert_eq!(s.get(1, 1), r.get(3, 3));
    }

    #[test]
    fn construction_rejects_asymmetry() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]).is_err());
        assert!(SymMatrix::zeros(0).is_err());
    }

    #[test]
    fn sparse_matvec_agrees_with_dense() {
        let m = SymMatrix::from_fn(6, |i, j| ((i + 1) * (j + 2)) as f64 * 0.1 - 0.3).unwrap();
        let u = [0.0, 1.5, 0.0, -2.0, 0.0, 0.25];
        let dense = m.matvec(&u);
        let sparse = m.matvec_sparse(&u, &[1, 3, 5]);
        for (a, b) in dense.iter().zip(&sparse) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn canonical_sign_prefers_smaller_index_on_ties() {
        let mut v = vec![-0.5, 0.5, 0.1];
        canonical_sign(&mut v);
        assert_eq!(v, vec![0.5, -0.5, -0.1]);
        let mut w = vec![0.1, -0.9, 0.2];
        canonical_sign(&mut w);
        assert_eq!(w, vec![-0.1, 0.9, -0.2]);
    }
}
