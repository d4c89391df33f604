use super::{dot, norm, SymMatrix};
use crate::error::{Result, SpcaError};

const UNIT_INPUT_TOL: f64 = 1e-10;
/// Below this separation the reflector is ill-defined and the identity is used.
const SAME_VECTOR_TOL: f64 = 1e-12;

/// A list of `dim` orthonormal columns in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    pub dim: usize,
    pub columns: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    /// `max_ij |(C^T C - I)_ij|`.
    pub fn gram_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}

/// Householder reflector `Q` with `Q x = t` for unit `x`, `t`.
///
/// `Q = I - 2 w w^T / |w|^2` with `w = x - t`; the identity when `x == t`.
/// The reflector is symmetric, so it is returned as a [`SymMatrix`].
pub fn householder_to(x: &[f64], t: &[f64]) -> Result<SymMatrix> {
    if x.len() != t.len() || x.is_empty() {
        return Err(SpcaError::param("householder_to needs two vectors of equal, positive length"));
    }
    for (name, v) in [("x", x), ("t", t)] {
        let n = norm(v);
        if (n - 1.0).abs() > UNIT_INPUT_TOL {
            return Err(SpcaError::param(format!("householder_to: |{name}| = {n} is not 1")));
        }
    }
    let w: Vec<f64> = x.iter().zip(t).map(|(a, b)| a - b).collect();
    let ww = dot(&w, &w);
    if ww.sqrt() < SAME_VECTOR_TOL {
        return SymMatrix::identity(x.len());
    }
    SymMatrix::from_fn(x.len(), |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - 2.0 * w[i] * w[j] / ww
    })
}

/// Orthonormal basis of `R^d` whose first column is `1_d / sqrt(d)` and whose
/// every other column has first coordinate exactly `1 / sqrt(d)`.
///
/// Built from two reflections: one sending `e_1` to `u_1` (its remaining
/// columns span the complement `V` of `u_1`), and one rotating the coordinates
/// of the normalized `w = e_1 - u_1 / sqrt(d)` inside `V` onto the uniform
/// vector.
pub fn good_ortho_basis(d: usize) -> Result<OrthonormalBasis> {
    if d == 0 {
        return Err(SpcaError::param("basis dimension must be at least 1"));
    }
    let inv = 1.0 / (d as f64).sqrt();
    let u1 = vec![inv; d];
    if d == 1 {
        return Ok(OrthonormalBasis {
            dim: 1,
            columns: vec![u1],
        });
    }

    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let h = householder_to(&e1, &u1)?;
    // columns 2..d of the reflector; H is symmetric so column k is row k
    let complement: Vec<&[f64]> = (1..d).map(|k| h.row(k)).collect();

    let mut w = e1.clone();
    for (wi, ui) in w.iter_mut().zip(&u1) {
        *wi -= inv * ui;
    }
    let w_norm = norm(&w);
    let x: Vec<f64> = complement.iter().map(|c| dot(c, &w) / w_norm).collect();
    // renormalize away rounding so the reflector input is unit to machine precision
    let x_norm = norm(&x);
    let x: Vec<f64> = x.iter().map(|xi| xi / x_norm).collect();
    let t = vec![1.0 / ((d - 1) as f64).sqrt(); d - 1];
    let q = householder_to(&x, &t)?;

    let mut columns = Vec::with_capacity(d);
    columns.push(u1);
    for i in 0..(d - 1) {
        // u_{i+2} = V * (row i of Q)
        let qi = q.row(i);
        let mut col = vec![0.0; d];
        for (k, c) in complement.iter().enumerate() {
            super::axpy(qi[k], c, &mut col);
        }
        columns.push(col);
    }
    Ok(OrthonormalBasis { dim: d, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflector_identity_branch() {
        let x = [0.6, 0.8];
        assert_eq!(householder_to(&x, &x).unwrap(), SymMatrix::identity(2).unwrap());
    }

    #[test]
    fn reflector_swaps_axes() {
        let q = householder_to(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let expect = [[0.0, 1.0], [1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((q.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reflector_rejects_non_unit() {
        assert!(householder_to(&[1.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(householder_to(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn basis_small_cases() {
        let b1 = good_ortho_basis(1).unwrap();
        assert_eq!(b1.columns, vec![vec![1.0]]);

        let b2 = good_ortho_basis(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b2.columns[0][0] - h).abs() < 1e-15 && (b2.columns[0][1] - h).abs() < 1e-15);
        // the only candidate up to sign is (1, -1)/sqrt(2); the sign is pinned by <u2, e1> > 0
        assert!((b2.columns[1][0] - h).abs() < 1e-12);
        assert!((b2.columns[1][1] + h).abs() < 1e-12);
    }

    #[test]
    fn basis_d25_first_coordinates() {
        let b = good_ortho_basis(25).unwrap();
        assert!(b.gram_error() < 1e-10);
        for col in &b.columns[1..] {
            assert!((col[0] - 0.2).abs() < 1e-10);
        }
    }
}
