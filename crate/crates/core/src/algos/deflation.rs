use std::sync::Arc;

use super::rtpm::{rtpm_on_operators, RtpmConfig};
use crate::error::{Result, SpcaError};
use crate::linalg::{dot, norm, project_out, top_eig, SymMatrix};
use crate::models::CovOperator;

/// Below this the oracle's answer lies in the span of earlier components.
const DEFLATION_TOL: f64 = 1e-8;

/// A one-component sparse PCA solver used inside deflation.
///
/// `round` counts from 0. The returned vector need not be normalized or
/// orthogonal to earlier rounds; the wrapper projects and renormalizes it.
pub trait Oracle {
    fn solve(&mut self, round: usize, op: &CovOperator) -> Result<Vec<f64>>;
}

/// Exact top eigenvector of the (materialized) operator.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactOracle;

impl Oracle for ExactOracle {
    fn solve(&mut self, _round: usize, op: &CovOperator) -> Result<Vec<f64>> {
        Ok(top_eig(&op.to_dense()?)?.pair.vector)
    }
}

/// Returns prescribed vectors for the first rounds, then defers to `fallback`.
pub struct FixedOracle {
    pub fixed: Vec<Vec<f64>>,
    pub fallback: Box<dyn Oracle + Send>,
}

impl Oracle for FixedOracle {
    fn solve(&mut self, round: usize, op: &CovOperator) -> Result<Vec<f64>> {
        match self.fixed.get(round) {
            Some(v) => Ok(v.clone()),
            None => self.fallback.solve(round, op),
        }
    }
}

/// RTPM with the full-sample operator every iteration.
#[derive(Debug, Clone)]
pub struct RtpmOracle {
    pub cfg: RtpmConfig,
}

impl Oracle for RtpmOracle {
    fn solve(&mut self, _round: usize, op: &CovOperator) -> Result<Vec<f64>> {
        let res = rtpm_on_operators(op, std::slice::from_ref(op), &self.cfg)?;
        Ok(res.candidate.into_values())
    }
}

/// `k` orthonormal components by repeated projection `P ← P - u u^T`.
///
/// A dense operator is deflated explicitly as `P Σ P`; any other operator
/// is wrapped so that `P` is applied before and after each product, which is
/// the same as projecting every sample.
pub fn kspca_deflate(op: &CovOperator, k: usize, oracle: &mut dyn Oracle) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(SpcaError::param("number of components k must be at least 1"));
    }
    let d = op.dim();
    if k > d {
        return Err(SpcaError::param(format!("cannot extract {k} components in dimension {d}")));
    }
    let mut comps: Vec<Vec<f64>> = Vec::with_capacity(k);
    for round in 0..k {
        let current = if comps.is_empty() {
            op.clone()
        } else {
            match op {
                CovOperator::Dense(m) => CovOperator::dense(project(m, &comps)?),
                other => CovOperator::Projected {
                    inner: Box::new(other.clone()),
                    basis: Arc::new(comps.clone()),
                },
            }
        };
        let mut u = oracle.solve(round, &current)?;
        if u.len() != d {
            return Err(SpcaError::param(format!(
                "oracle returned dimension {}, expected {d}",
                u.len()
            )));
        }
        let raw = norm(&u);
        if !(raw > 0.0) || !raw.is_finite() {
            return Err(SpcaError::Deflation(format!("oracle returned a zero vector in round {}", round + 1)));
        }
        u.iter_mut().for_each(|x| *x /= raw);
        // twice, so roundoff from the first pass is removed too
        project_out(&mut u, &comps);
        let kept = norm(&u);
        if kept < DEFLATION_TOL {
            return Err(SpcaError::Deflation(format!(
                "round {}: oracle output lies in the span of earlier components (|Pu| = {kept:e})",
                round + 1
            )));
        }
        project_out(&mut u, &comps);
        let n = norm(&u);
        u.iter_mut().for_each(|x| *x /= n);
        comps.push(u);
    }
    Ok(comps)
}

fn project(m: &SymMatrix, basis: &[Vec<f64>]) -> Result<SymMatrix> {
    m.project_both_sides(basis)
}

/// `max_{i != j} |<c_i, c_j>|` and `max_i ||c_i| - 1|`.
pub fn orthonormality_error(comps: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in comps.iter().enumerate() {
        for (j, b) in comps.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}
