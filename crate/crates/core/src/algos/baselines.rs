use super::CandidateVector;
use crate::error::{Result, SpcaError};
use crate::linalg::{dot, embed, restrict, threshold_entries, top_eig, SymMatrix};

/// The `s` indices with the largest `scores` (signed), ties to the smaller
/// index, returned in increasing order.
pub fn top_indices_desc(scores: &[f64], s: usize) -> Result<Vec<usize>> {
    let d = scores.len();
    if s == 0 || s > d {
        return Err(SpcaError::param(format!("sparsity s = {s} must lie in [1, {d}]")));
    }
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    Ok(idx)
}

fn local_top(cov: &SymMatrix, set: &[usize], budget: usize) -> Result<CandidateVector> {
    let sub = restrict(cov, set)?;
    let top = top_eig(&sub)?;
    let values = embed(&top.pair.vector, set, cov.dim());
    let mut c = CandidateVector::from_unnormalized(values, budget)?;
    c.degenerate = top.tied;
    Ok(c)
}

/// Top eigenvector of the principal submatrix on the `s` largest diagonal entries.
pub fn diag_thresh(cov: &SymMatrix, s: usize) -> Result<CandidateVector> {
    let set = top_indices_desc(&cov.diagonal(), s)?;
    local_top(cov, &set, s)
}

/// Top eigenvector of the entrywise-thresholded matrix.
///
/// `_s` is accepted so every baseline has the same shape; the method itself
/// has no sparsity parameter.
pub fn cov_thresh(cov: &SymMatrix, tau: f64, _s: usize) -> Result<CandidateVector> {
    let t = threshold_entries(cov, tau)?;
    if t.max_abs() == 0.0 {
        return Err(SpcaError::Degenerate(format!(
            "every entry falls below the threshold tau = {tau}"
        )));
    }
    let top = top_eig(&t)?;
    let mut c = CandidateVector::from_unnormalized(top.pair.vector, cov.dim())?;
    c.degenerate = top.tied;
    Ok(c)
}

/// `|<Σ_{i*,:}, Σ_{i,:}>|` for every row `i`.
pub fn greedy_corr_scores(cov: &SymMatrix, i_star: usize) -> Result<Vec<f64>> {
    if i_star >= cov.dim() {
        return Err(SpcaError::param(format!(
            "seed row {i_star} out of range for dimension {}",
            cov.dim()
        )));
    }
    let anchor = cov.row(i_star);
    Ok((0..cov.dim()).map(|i| dot(anchor, cov.row(i)).abs()).collect())
}

/// Top eigenvector on the `s` rows most correlated with row `i_star`.
pub fn greedy_corr(cov: &SymMatrix, s: usize, i_star: usize) -> Result<CandidateVector> {
    let scores = greedy_corr_scores(cov, i_star)?;
    let set = top_indices_desc(&scores, s)?;
    local_top(cov, &set, s)
}
