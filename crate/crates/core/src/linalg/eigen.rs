//! Symmetric eigensolvers.
//!
//! Small problems go through a full tridiagonal QL/QR decomposition
//! (nalgebra's `SymmetricEigen`). Above [`EigConfig::dense_max_dim`] the top
//! eigenpairs come from shifted block power iteration with Rayleigh–Ritz
//! extraction, which only needs matrix–vector products.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{axpy, canonical_sign, dot, norm, SymMatrix};
use crate::error::{Result, SpcaError};

/// Eigenvalue gap below which the top eigenvector is reported as ambiguous.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigConfig {
    /// Largest dimension handled by the full dense decomposition.
    pub dense_max_dim: usize,
    /// Target residual `|Mv - λv| / max(1, |λ|)` for the iterative path.
    pub residual_tol: f64,
    /// Residual that must hold on return, or the solve fails.
    pub accept_tol: f64,
    /// Iteration cap, in multiples of the dimension.
    pub sweep_factor: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            dense_max_dim: 512,
            residual_tol: 1e-10,
            accept_tol: 1e-8,
            sweep_factor: 10,
        }
    }
}

/// Top eigenpair plus a flag for a (numerically) repeated top eigenvalue.
#[derive(Debug, Clone)]
pub struct TopEig {
    pub pair: EigPair,
    pub second: Option<f64>,
    pub tied: bool,
}

/// The `m` algebraically largest eigenpairs, in decreasing order.
pub fn eig_top_m(m: &SymMatrix, count: usize) -> Result<Vec<EigPair>> {
    eig_top_m_with(m, count, &EigConfig::default())
}

pub fn eig_top_m_with(m: &SymMatrix, count: usize, cfg: &EigConfig) -> Result<Vec<EigPair>> {
    let d = m.dim();
    if count == 0 || count > d {
        return Err(SpcaError::param(format!(
            "requested {count} eigenpairs of a {d}x{d} matrix"
        )));
    }
    let mut pairs = if d <= cfg.dense_max_dim {
        dense_top(m, count, cfg)?
    } else {
        block_power_top(m, count, cfg)?
    };
    for p in &mut pairs {
        canonical_sign(&mut p.vector);
        let r = residual(m, p);
        if r > cfg.accept_tol * p.value.abs().max(1.0) {
            return Err(SpcaError::Numerical {
                message: format!("eigenpair for λ = {} failed the residual check", p.value),
                residual: r,
            });
        }
    }
    Ok(pairs)
}

pub fn top_eig(m: &SymMatrix) -> Result<TopEig> {
    let count = m.dim().min(2);
    let mut pairs = eig_top_m(m, count)?;
    let second = pairs.get(1).map(|p| p.value);
    let pair = pairs.swap_remove(0);
    let tied = second.is_some_and(|s| (pair.value - s).abs() < TIE_TOL);
    Ok(TopEig { pair, second, tied })
}

/// All eigenvalues, decreasing.
pub fn symmetric_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = m.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// `max_i |λ_i(M)|`.
pub fn opnorm(m: &SymMatrix) -> Result<f64> {
    opnorm_with(m, &EigConfig::default())
}

pub fn opnorm_with(m: &SymMatrix, cfg: &EigConfig) -> Result<f64> {
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    if m.dim() <= cfg.dense_max_dim {
        return Ok(symmetric_eigenvalues(m)
            .iter()
            .fold(0.0_f64, |acc, x| acc.max(x.abs())));
    }
    let hi = eig_top_m_with(m, 1, cfg)?[0].value;
    let lo = -eig_top_m_with(&m.scaled(-1.0), 1, cfg)?[0].value;
    Ok(hi.abs().max(lo.abs()))
}

fn residual(m: &SymMatrix, p: &EigPair) -> f64 {
    let mut r = m.matvec(&p.vector);
    axpy(-p.value, &p.vector, &mut r);
    norm(&r)
}

fn dense_top(m: &SymMatrix, count: usize, cfg: &EigConfig) -> Result<Vec<EigPair>> {
    let d = m.dim();
    let eig = SymmetricEigen::try_new(m.to_nalgebra(), f64::EPSILON, cfg.sweep_factor * d.max(1))
        .ok_or_else(|| SpcaError::Numerical {
            message: format!("dense eigensolver did not converge within {} steps", cfg.sweep_factor * d),
            residual: f64::NAN,
        })?;
    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps the solver's order on exact ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Ok(order
        .into_iter()
        .take(count)
        .map(|k| EigPair {
            value: eig.eigenvalues[k],
            vector: eig.eigenvectors.column(k).iter().copied().collect(),
        })
        .collect())
}

/// Orthonormalizes the columns in place (two passes of modified Gram–Schmidt).
/// A column that collapses is replaced by a fresh basis direction.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    let d = cols.first().map_or(0, Vec::len);
    for k in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..k {
                let (head, tail) = cols.split_at_mut(k);
                let c = dot(&head[j], &tail[0]);
                axpy(-c, &head[j], &mut tail[0]);
            }
        }
        let n = norm(&cols[k]);
        if n > 1e-300 {
            cols[k].iter_mut().for_each(|x| *x /= n);
        } else {
            cols[k] = vec![0.0; d];
            cols[k][k % d] = 1.0;
        }
    }
}

fn block_power_top(m: &SymMatrix, count: usize, cfg: &EigConfig) -> Result<Vec<EigPair>> {
    let d = m.dim();
    let block = d.min(count + 8);
    // Gershgorin radius: M + cI is positive semidefinite, and its ordering
    // matches the algebraic ordering of M.
    let shift = (0..d)
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    orthonormalize(&mut q);

    let max_sweeps = cfg.sweep_factor * d;
    let check_every = 5;
    let mut best: Option<(Vec<EigPair>, f64)> = None;
    for sweep in 1..=max_sweeps {
        let mut y: Vec<Vec<f64>> = q
            .iter()
            .map(|col| {
                let mut out = m.matvec(col);
                axpy(shift, col, &mut out);
                out
            })
            .collect();
        orthonormalize(&mut y);
        q = y;
        if sweep % check_every != 0 && sweep != max_sweeps {
            continue;
        }
        let (pairs, rotated, worst) = rayleigh_ritz(m, &q, count);
        q = rotated;
        if worst <= cfg.residual_tol {
            return Ok(pairs);
        }
        best = Some((pairs, worst));
    }
    let (pairs, worst) = best.expect("at least one Rayleigh-Ritz step ran");
    if worst <= cfg.accept_tol {
        Ok(pairs)
    } else {
        Err(SpcaError::Numerical {
            message: format!("block power iteration hit the cap of {max_sweeps} sweeps"),
            residual: worst,
        })
    }
}

/// Returns the top `count` Ritz pairs, the rotated block, and the worst
/// relative residual among the returned pairs.
fn rayleigh_ritz(m: &SymMatrix, q: &[Vec<f64>], count: usize) -> (Vec<EigPair>, Vec<Vec<f64>>, f64) {
    let p = q.len();
    let d = m.dim();
    let mq: Vec<Vec<f64>> = q.iter().map(|c| m.matvec(c)).collect();
    let h = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&q[i], &mq[j]) + dot(&q[j], &mq[i])));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut rotated = Vec::with_capacity(p);
    let mut pairs = Vec::with_capacity(count);
    let mut worst = 0.0_f64;
    for (rank, &k) in order.iter().enumerate() {
        let w = eig.eigenvectors.column(k);
        let mut v = vec![0.0; d];
        let mut mv = vec![0.0; d];
        for j in 0..p {
            axpy(w[j], &q[j], &mut v);
            axpy(w[j], &mq[j], &mut mv);
        }
        if rank < count {
            let theta = eig.eigenvalues[k];
            axpy(-theta, &v, &mut mv);
            worst = worst.max(norm(&mv) / theta.abs().max(1.0));
            pairs.push(EigPair {
                value: theta,
                vector: v.clone(),
            });
        }
        rotated.push(v);
    }
    (pairs, rotated, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn diagonal_top_two() {
        let m = SymMatrix::diag(&[3.0, 2.0, 1.0]).unwrap();
        let pairs = eig_top_m(&m, 2).unwrap();
        assert!((pairs[0].value - 3.0).abs() < 1e-14);
        assert!((pairs[1].value - 2.0).abs() < 1e-14);
        assert!(close(&pairs[0].vector, &[1.0, 0.0, 0.0], 1e-14));
        assert!(close(&pairs[1].vector, &[0.0, 1.0, 0.0], 1e-14));
    }

    #[test]
    fn swap_matrix_analytic() {
        let m = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let top = &eig_top_m(&m, 1).unwrap()[0];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((top.value - 1.0).abs() < 1e-14);
        assert!(close(&top.vector, &[h, h], 1e-14));
    }

    #[test]
    fn rejects_bad_counts() {
        let m = SymMatrix::identity(3).unwrap();
        assert!(eig_top_m(&m, 0).is_err());
        assert!(eig_top_m(&m, 4).is_err());
    }

    #[test]
    fn opnorm_examples() {
        assert_eq!(opnorm(&SymMatrix::zeros(4).unwrap()).unwrap(), 0.0);
        let m = SymMatrix::diag(&[-4.0, 3.0]).unwrap();
        assert!((opnorm(&m).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn iterative_path_matches_dense_path() {
        // force the block power route on a small matrix and compare
        let d = 40;
        let m = SymMatrix::from_fn(d, |i, j| {
            let x = ((i * 31 + j * 17 + i * j) % 23) as f64 / 23.0 - 0.5;
            if i == j {
                x + (d - i) as f64 * 0.2
            } else {
                x * 0.3
            }
        })
        .unwrap();
        let dense = eig_top_m(&m, 3).unwrap();
        let cfg = EigConfig {
            dense_max_dim: 0,
            ..EigConfig::default()
        };
        let iter = eig_top_m_with(&m, 3, &cfg).unwrap();
        for (a, b) in dense.iter().zip(&iter) {
            assert!((a.value - b.value).abs() < 1e-9 * a.value.abs().max(1.0));
            assert!(close(&a.vector, &b.vector, 1e-7));
        }
        let on_dense = opnorm(&m).unwrap();
        let on_iter = opnorm_with(&m, &cfg).unwrap();
        assert!((on_dense - on_iter).abs() < 1e-8 * on_dense);
    }

    #[test]
    fn tie_flag() {
        let m = SymMatrix::identity(3).unwrap();
        assert!(top_eig(&m).unwrap().tied);
        let m = SymMatrix::diag(&[2.0, 1.0]).unwrap();
        assert!(!top_eig(&m).unwrap().tied);
        let one = SymMatrix::diag(&[5.0]).unwrap();
        let t = top_eig(&one).unwrap();
        assert!(!t.tied && t.second.is_none());
    }
}
