//! Restarted truncated power method.
//!
//! Every restart `e_i` runs `T` truncated power steps; the restart with the
//! largest full-sample Rayleigh quotient wins. Restarts advance in lockstep
//! (iteration-major), fanned out across threads. The result does not depend
//! on the thread count: each restart is a pure function of its own state, and
//! selection scans scores in restart order.

use std::borrow::Cow;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::CandidateVector;
use crate::error::{Result, SpcaError};
use crate::linalg::{dot, normalize, top_r_support};
use crate::models::{batch_covariances, sample_covariance, CovOperator, Dataset};

/// How the per-iteration covariance is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// A fresh batch of `⌊n/T⌋` samples each iteration.
    Disjoint,
    /// The full-sample covariance every iteration.
    Full,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Disjoint => "disjoint",
            Mode::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Restarts {
    /// Every standard basis vector.
    All,
    /// The listed basis vectors only.
    Indices(Vec<usize>),
}

/// Whether sample covariances are materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Pick by a flop-count model.
    Auto,
    Dense,
    MatrixFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtpmConfig {
    pub r: usize,
    pub t: usize,
    pub mode: Mode,
    pub restarts: Restarts,
    /// Stop a restart once `|u_t - u_{t-1}| <= tolerance`; `0` disables.
    pub tolerance: f64,
    pub backend: Backend,
    /// Iteration counts at which to also report the selected candidate.
    pub checkpoints: Vec<usize>,
}

impl RtpmConfig {
    pub fn new(r: usize, t: usize, mode: Mode) -> Self {
        Self {
            r,
            t,
            mode,
            restarts: Restarts::All,
            tolerance: 0.0,
            backend: Backend::Auto,
            checkpoints: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(SpcaError::param("truncation level r must be at least 1"));
        }
        if self.t == 0 {
            return Err(SpcaError::param("iteration count T must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(SpcaError::param("tolerance must be nonnegative"));
        }
        if let Restarts::Indices(idx) = &self.restarts {
            if idx.is_empty() {
                return Err(SpcaError::param("restart set is empty"));
            }
        }
        Ok(())
    }

    fn restart_list(&self, d: usize) -> Result<Vec<usize>> {
        match &self.restarts {
            Restarts::All => Ok((0..d).collect()),
            Restarts::Indices(idx) => {
                if let Some(&bad) = idx.iter().find(|&&i| i >= d) {
                    return Err(SpcaError::param(format!(
                        "restart index {bad} out of range for dimension {d}"
                    )));
                }
                Ok(idx.clone())
            }
        }
    }
}

/// The selected candidate after some number of iterations.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub t: usize,
    pub candidate: CandidateVector,
    pub restart: usize,
    pub score: f64,
    /// Time spent so far on iterations plus this selection.
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RtpmResult {
    pub candidate: CandidateVector,
    /// Basis index of the winning restart.
    pub restart: usize,
    pub score: f64,
    /// Iterations actually run by the winning restart.
    pub iterations_used: usize,
    pub degenerate_restarts: usize,
    /// Samples that entered some iterate (`⌊n/T⌋·T` in disjoint mode).
    pub samples_used: Option<usize>,
    pub backend: Backend,
    /// Requested checkpoints, in increasing `t`.
    pub checkpoints: Vec<Checkpoint>,
}

/// One truncated power step: `top_r(Σ u) / |top_r(Σ u)|`.
///
/// A zero product leaves `u` as is, marked degenerate. `r >= d` means no
/// truncation.
pub fn rtpm_iterate(op: &CovOperator, u: &CandidateVector, r: usize) -> Result<CandidateVector> {
    let d = op.dim();
    if u.dim() != d {
        return Err(SpcaError::param(format!(
            "iterate has dimension {}, operator has {d}",
            u.dim()
        )));
    }
    if r == 0 {
        return Err(SpcaError::param("truncation level r must be at least 1"));
    }
    let y = op.apply_sparse(u.values(), u.support());
    if y.iter().all(|&x| x == 0.0) {
        let mut same = u.clone();
        same.degenerate = true;
        return Ok(same);
    }
    let keep = top_r_support(&y, r.min(d))?;
    let mut values = vec![0.0; d];
    for &i in &keep {
        values[i] = y[i];
    }
    normalize(&mut values);
    let mut next = CandidateVector::new(values, r)?;
    next.degenerate = u.degenerate;
    Ok(next)
}

/// RTPM on explicit operators: iteration `t` (0-based) uses
/// `iterates[t % iterates.len()]`, selection uses `select`.
pub fn rtpm_on_operators(
    select: &CovOperator,
    iterates: &[CovOperator],
    cfg: &RtpmConfig,
) -> Result<RtpmResult> {
    if iterates.is_empty() {
        return Err(SpcaError::param("need at least one iterate operator"));
    }
    if iterates.iter().any(|op| op.dim() != select.dim()) {
        return Err(SpcaError::param("operators disagree on dimension"));
    }
    let len = iterates.len();
    let mut res = run(select, |t| Ok(Cow::Borrowed(&iterates[t % len])), cfg)?;
    res.samples_used = select.samples();
    Ok(res)
}

/// RTPM on a dataset in the configured mode.
pub fn rtpm(data: &Arc<Dataset>, cfg: &RtpmConfig) -> Result<RtpmResult> {
    cfg.validate()?;
    let (n, d) = (data.n(), data.d());
    let r = cfg.r.min(d);
    let restarts = cfg.restart_list(d)?.len();
    let dense = match cfg.backend {
        Backend::Dense => true,
        Backend::MatrixFree => false,
        Backend::Auto => prefer_dense(n, d, r, cfg.t, restarts, cfg.mode),
    };
    let backend = if dense { Backend::Dense } else { Backend::MatrixFree };

    let full = if dense {
        CovOperator::dense(sample_covariance(data)?)
    } else {
        CovOperator::from_data(Arc::clone(data))
    };
    let mut res = match cfg.mode {
        Mode::Full => run(&full, |_| Ok(Cow::Borrowed(&full)), cfg)?,
        Mode::Disjoint => {
            if n < cfg.t {
                return Err(SpcaError::param(format!(
                    "disjoint mode needs n >= T (n = {n}, T = {})",
                    cfg.t
                )));
            }
            let batches = batch_covariances(data, cfg.t)?;
            // materialized batches are built one at a time as the loop reaches them
            run(
                &full,
                |t| {
                    let op = &batches[t % batches.len()];
                    if dense {
                        Ok(Cow::Owned(CovOperator::dense(op.to_dense()?)))
                    } else {
                        Ok(Cow::Borrowed(op))
                    }
                },
                cfg,
            )?
        }
    };
    res.backend = backend;
    res.samples_used = Some(match cfg.mode {
        Mode::Full => n,
        Mode::Disjoint => (n / cfg.t) * cfg.t,
    });
    Ok(res)
}

/// Flop model: materializing costs about `n d^2` (fast blocked kernel, hence
/// the discount) and then `d r` per product; matrix-free costs `B (r + d)`
/// per product.
fn prefer_dense(n: usize, d: usize, r: usize, t: usize, restarts: usize, mode: Mode) -> bool {
    let (n, d, r, t, k) = (n as f64, d as f64, r as f64, t as f64, restarts as f64);
    let batch = match mode {
        Mode::Full => n,
        Mode::Disjoint => (n / t).floor(),
    };
    let builds = match mode {
        Mode::Full => 1.0,
        Mode::Disjoint => 2.0,
    };
    let dense = builds * n * d * d / 4.0 + k * (t + 1.0) * d * r;
    let free = k * t * batch * (r + d) + k * n * (r + d);
    dense <= free
}

struct RestartState {
    index: usize,
    u: CandidateVector,
    iterations: usize,
    stopped: bool,
}

fn run<'a, F>(select: &'a CovOperator, iterate_op: F, cfg: &RtpmConfig) -> Result<RtpmResult>
where
    F: Fn(usize) -> Result<Cow<'a, CovOperator>>,
{
    cfg.validate()?;
    let d = select.dim();
    let r = cfg.r.min(d);
    let mut states: Vec<RestartState> = cfg
        .restart_list(d)?
        .into_iter()
        .map(|i| RestartState {
            index: i,
            u: CandidateVector::basis(d, i, r),
            iterations: 0,
            stopped: false,
        })
        .collect();

    let mut wanted: Vec<usize> = cfg.checkpoints.iter().copied().filter(|&t| t >= 1 && t <= cfg.t).collect();
    wanted.sort_unstable();
    wanted.dedup();

    let clock = Instant::now();
    let mut selection_ms = 0.0;
    let mut checkpoints = Vec::with_capacity(wanted.len());
    for t in 0..cfg.t {
        if states.iter().any(|s| !s.stopped) {
            let op = iterate_op(t)?;
            let op: &CovOperator = &op;
            states.par_iter_mut().try_for_each(|st| -> Result<()> {
                if st.stopped {
                    return Ok(());
                }
                let next = rtpm_iterate(op, &st.u, r)?;
                st.iterations += 1;
                if cfg.tolerance > 0.0 && distance(next.values(), st.u.values()) <= cfg.tolerance {
                    st.stopped = true;
                }
                st.u = next;
                Ok(())
            })?;
        } else if wanted.last().map_or(true, |&last| last <= t) {
            break;
        }
        if wanted.binary_search(&(t + 1)).is_ok() {
            let before = clock.elapsed().as_secs_f64() * 1e3;
            let (best, score) = select_best(select, &states);
            let after = clock.elapsed().as_secs_f64() * 1e3;
            checkpoints.push(Checkpoint {
                t: t + 1,
                candidate: states[best].u.clone(),
                restart: states[best].index,
                score,
                elapsed_ms: before - selection_ms + (after - before),
            });
            selection_ms += after - before;
        }
    }
    let (best, score) = select_best(select, &states);
    let winner = &states[best];
    Ok(RtpmResult {
        candidate: winner.u.clone(),
        restart: winner.index,
        score,
        iterations_used: winner.iterations,
        degenerate_restarts: states.iter().filter(|s| s.u.degenerate).count(),
        samples_used: None,
        backend: if select.is_dense() { Backend::Dense } else { Backend::MatrixFree },
        checkpoints,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index of the largest Rayleigh quotient, first one on ties.
fn select_best(select: &CovOperator, states: &[RestartState]) -> (usize, f64) {
    let scores: Vec<f64> = states
        .par_iter()
        .map(|st| dot(st.u.values(), &select.apply_sparse(st.u.values(), st.u.support())))
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    (best, scores[best])
}
