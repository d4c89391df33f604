//! Sparse-PCA solvers.

mod baselines;
mod deflation;
mod rtpm;

pub use baselines::{cov_thresh, diag_thresh, greedy_corr, greedy_corr_scores, top_indices_desc};
pub use deflation::{kspca_deflate, orthonormality_error, ExactOracle, FixedOracle, Oracle, RtpmOracle};
pub use rtpm::{
    rtpm, rtpm_iterate, rtpm_on_operators, Backend, Checkpoint, Mode, Restarts, RtpmConfig,
    RtpmResult,
};

use crate::error::{Result, SpcaError};
use crate::linalg::{norm, top_r};

const CANDIDATE_UNIT_TOL: f64 = 1e-10;

/// A unit vector together with its exact support and sparsity budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateVector {
    values: Vec<f64>,
    support: Vec<usize>,
    budget: usize,
    /// The solver met an undefined case (zero product, repeated eigenvalue).
    pub degenerate: bool,
}

impl CandidateVector {
    /// Wraps a unit vector with at most `budget` nonzeros.
    pub fn new(values: Vec<f64>, budget: usize) -> Result<Self> {
        let n = norm(&values);
        if (n - 1.0).abs() > CANDIDATE_UNIT_TOL {
            return Err(SpcaError::param(format!("candidate has norm {n}, expected 1")));
        }
        let support: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
        if support.len() > budget {
            return Err(SpcaError::param(format!(
                "candidate has {} nonzeros, budget is {budget}",
                support.len()
            )));
        }
        Ok(Self {
            values,
            support,
            budget,
            degenerate: false,
        })
    }

    /// Normalizes `values` first; a zero vector is degenerate input.
    pub fn from_unnormalized(mut values: Vec<f64>, budget: usize) -> Result<Self> {
        let n = norm(&values);
        if !(n > 0.0) || !n.is_finite() {
            return Err(SpcaError::Degenerate("cannot normalize a zero vector".into()));
        }
        values.iter_mut().for_each(|x| *x /= n);
        Self::new(values, budget)
    }

    /// The standard basis vector `e_i`.
    pub fn basis(dim: usize, i: usize, budget: usize) -> Self {
        let mut values = vec![0.0; dim];
        values[i] = 1.0;
        Self {
            values,
            support: vec![i],
            budget: budget.max(1),
            degenerate: false,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Nonzero coordinates in increasing order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Keeps the `s` largest-magnitude entries and renormalizes.
pub fn top_s_project(u: &CandidateVector, s: usize) -> Result<CandidateVector> {
    let d = u.dim();
    let kept = top_r(u.values(), s.min(d))?;
    let mut out = CandidateVector::from_unnormalized(kept, s)?;
    out.degenerate = u.degenerate;
    Ok(out)
}

/// Smallest `p` (1-based) with `λ_{p+1} / λ_p <= 1 - beta / k`.
///
/// Needs `λ_1 >= ... >= λ_{k+1} > 0`. For `k = 1` the answer is `1`
/// unconditionally, since `λ_1 / λ_1 >= 1 - beta` holds trivially.
pub fn find_gap_index(eigenvalues: &[f64], k: usize, beta: f64) -> Result<usize> {
    if k == 0 {
        return Err(SpcaError::param("k must be at least 1"));
    }
    if !(beta > 0.0) {
        return Err(SpcaError::param(format!("beta = {beta} must be positive")));
    }
    if k == 1 {
        return Ok(1);
    }
    if eigenvalues.len() < k + 1 {
        return Err(SpcaError::param(format!(
            "need {} eigenvalues, got {}",
            k + 1,
            eigenvalues.len()
        )));
    }
    let lam = &eigenvalues[..=k];
    if lam.iter().any(|&x| !(x > 0.0)) || lam.windows(2).any(|w| w[0] < w[1]) {
        return Err(SpcaError::param("eigenvalues must be positive and non-increasing"));
    }
    let cut = 1.0 - beta / k as f64;
    (1..=k)
        .find(|&i| lam[i] / lam[i - 1] <= cut)
        .ok_or_else(|| {
            SpcaError::Instance(format!(
                "no gap index: every ratio exceeds 1 - beta/k = {cut}, so the spectrum has no gap of size beta"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_invariants() {
        assert!(CandidateVector::new(vec![0.6, 0.8, 0.0], 2).is_ok());
        assert!(CandidateVector::new(vec![0.6, 0.8, 0.0], 1).is_err());
        assert!(CandidateVector::new(vec![1.0, 1.0], 2).is_err());
        let c = CandidateVector::from_unnormalized(vec![0.0, 3.0, -4.0], 3).unwrap();
        assert_eq!(c.support(), &[1, 2]);
        assert!(matches!(
            CandidateVector::from_unnormalized(vec![0.0; 3], 3),
            Err(SpcaError::Degenerate(_))
        ));
    }

    #[test]
    fn projection_examples() {
        let u = CandidateVector::new(vec![0.8, 0.6, 0.0, 0.0], 4).unwrap();
        let p = top_s_project(&u, 1).unwrap();
        assert_eq!(p.values(), &[1.0, 0.0, 0.0, 0.0]);
        let q = top_s_project(&u, 2).unwrap();
        assert_eq!(q.values(), u.values());
    }

    #[test]
    fn gap_index_examples() {
        assert_eq!(find_gap_index(&[1.0, 0.99], 1, 0.1).unwrap(), 1);
        assert_eq!(find_gap_index(&[1.0, 1.0, 1.0, 0.5], 3, 0.3).unwrap(), 3);
        let beta = 0.3;
        let q: f64 = 1.0 - beta / 3.0;
        let lam = [1.0, q, q * q, q * q * q];
        assert_eq!(find_gap_index(&lam, 3, beta).unwrap(), 1);
        assert!(matches!(
            find_gap_index(&[1.0, 1.0, 1.0], 2, 0.3),
            Err(SpcaError::Instance(_))
        ));
        assert!(find_gap_index(&[1.0, 2.0, 0.1], 2, 0.3).is_err());
    }
}
