//! Adversarial covariance instances and their certificates.
//!
//! Each builder records every inequality its construction relies on as a
//! [`Certificate`] with the measured value and the bound. Gating
//! certificates must hold or the builder fails; informational ones are
//! reported only.

mod barrier;
mod binary;
mod graph;

pub use barrier::{build_deflation_barrier, verify_barrier, BarrierInstance, BarrierReport};
pub use binary::{read_instance, write_instance, INSTANCE_MAGIC};
pub use graph::{
    random_regular_graph, random_regular_graph_with, second_eigenvalue_bound, RegularGraph,
    GRAPH_RESTART_CAP,
};

use std::fmt;

use crate::error::{Result, SpcaError};
use crate::linalg::{
    dot, good_ortho_basis, opnorm, restrict, symmetric_eigenvalues, threshold_entries, SymMatrix,
};
use crate::models::PlantedInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    CovThresh,
    GreedyCorr,
    DiagThresh,
    Barrier,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::CovThresh => "covthresh",
            Family::GreedyCorr => "greedycorr",
            Family::DiagThresh => "diagthresh",
            Family::Barrier => "barrier",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "covthresh" => Ok(Family::CovThresh),
            "greedycorr" => Ok(Family::GreedyCorr),
            "diagthresh" => Ok(Family::DiagThresh),
            "barrier" => Ok(Family::Barrier),
            other => Err(SpcaError::param(format!("unknown counterexample family `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    Above,
}

impl Relation {
    fn symbol(&self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        }
    }
}

/// A named scalar inequality `measured <relation> bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    /// Gating certificates make the construction fail when violated.
    pub gating: bool,
}

impl Certificate {
    pub fn new(name: &str, measured: f64, relation: Relation, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            measured,
            relation,
            bound,
            gating: true,
        }
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.measured <= self.bound,
            Relation::AtLeast => self.measured >= self.bound,
            Relation::Above => self.measured > self.bound,
        }
    }

    pub fn requirement(&self) -> String {
        format!("{} {}", self.relation.symbol(), self.bound)
    }

    pub fn to_error(&self) -> SpcaError {
        SpcaError::Certificate {
            name: self.name.clone(),
            measured: self.measured,
            required: self.requirement(),
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e} {} {:.6e}{}",
            if self.passed() { "ok  " } else { "FAIL" },
            self.name,
            self.measured,
            self.relation.symbol(),
            self.bound,
            if self.gating { "" } else { " (informational)" }
        )
    }
}

#[derive(Debug, Clone)]
pub struct CounterexampleInstance {
    pub instance: PlantedInstance,
    pub family: Family,
    /// Family parameters as `(name, value)` pairs, in a fixed order.
    pub params: Vec<(String, f64)>,
    pub certificates: Vec<Certificate>,
    /// Free-form markers carried into every output record.
    pub flags: Vec<String>,
}

impl CounterexampleInstance {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// First failing gating certificate, if any.
    pub fn first_failure(&self) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.gating && !c.passed())
    }

    fn gate(self) -> Result<Self> {
        match self.first_failure() {
            Some(c) => Err(c.to_error()),
            None => Ok(self),
        }
    }
}

fn params(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Smallest eigenvalue must not be meaningfully negative.
fn psd_certificate(sigma: &SymMatrix) -> Certificate {
    let eigs = symmetric_eigenvalues(sigma);
    Certificate::new("sigma_psd_min_eig", *eigs.last().unwrap(), Relation::AtLeast, -1e-10)
}

// ---------------------------------------------------------------------------
// covariance thresholding

/// Which preconditions on `(s, u, tau)` are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovthreshRegime {
    /// Both `4s + 8/tau <= u` and `u <= 1/(144 tau^2)`, as needed for the
    /// finite-sample argument.
    Strict,
    /// Only `u <= 1/(144 tau^2)`; the thresholding separation is certified
    /// directly on the population matrix instead.
    Population,
}

/// Realized degree: `round((u-1)/4)`, nudged down when `u * r` would be odd.
pub fn covthresh_degree(u: usize) -> usize {
    let mut r = ((u as f64 - 1.0) / 4.0).round() as usize;
    if (u * r) % 2 == 1 {
        r -= 1;
    }
    r.max(1)
}

pub fn build_covthresh_instance(s: usize, u: usize, tau: f64, seed: u64) -> Result<CounterexampleInstance> {
    build_covthresh_instance_with(s, u, tau, seed, CovthreshRegime::Strict)
}

/// Block-diagonal `Σ = diag(½(I + v v^T), ½(I + 3τ H))` with
/// `H = A - p (J - I)` for a random `r`-regular graph `A`, `p = r/(u-1)`.
pub fn build_covthresh_instance_with(
    s: usize,
    u: usize,
    tau: f64,
    seed: u64,
    regime: CovthreshRegime,
) -> Result<CounterexampleInstance> {
    if s == 0 {
        return Err(SpcaError::param("covthresh: s must be at least 1"));
    }
    if u < 5 {
        return Err(SpcaError::param("covthresh: u must be at least 5"));
    }
    if !(tau > 0.0) {
        return Err(SpcaError::param(format!("covthresh: tau = {tau} must be positive")));
    }
    let upper = 1.0 / (144.0 * tau * tau);
    if (u as f64) > upper {
        return Err(SpcaError::param(format!(
            "covthresh precondition u <= 1/(144 tau^2) violated: u = {u}, 1/(144 tau^2) = {upper:.4}"
        )));
    }
    let lower = 4.0 * s as f64 + 8.0 / tau;
    if regime == CovthreshRegime::Strict && (u as f64) < lower {
        return Err(SpcaError::param(format!(
            "covthresh precondition 4s + 8/tau <= u violated: 4s + 8/tau = {lower:.4}, u = {u}"
        )));
    }

    let r_deg = covthresh_degree(u);
    let p = r_deg as f64 / (u as f64 - 1.0);
    let graph = random_regular_graph(u, r_deg, seed)?;
    let d = s + u;
    let inv_s = 1.0 / s as f64;
    let h = |a: usize, b: usize| -> f64 {
        if a == b {
            0.0
        } else if graph.has_edge(a, b) {
            1.0 - p
        } else {
            -p
        }
    };
    let sigma = SymMatrix::from_fn(d, |i, j| match (i < s, j < s) {
        (true, true) => 0.5 * (if i == j { 1.0 } else { 0.0 } + inv_s),
        (false, false) => {
            let (a, b) = (i - s, j - s);
            0.5 * (if a == b { 1.0 } else { 0.0 } + 3.0 * tau * h(a, b))
        }
        _ => 0.0,
    })?;
    let mut v = vec![0.0; d];
    v[..s].iter_mut().for_each(|x| *x = inv_s.sqrt());

    let mut certs = Vec::new();
    let hmat = SymMatrix::from_fn(u, h)?;
    let h_one = hmat.matvec(&vec![1.0; u]);
    certs.push(Certificate::new("H_times_ones", dot(&h_one, &h_one).sqrt(), Relation::AtMost, 1e-10));
    certs.push(Certificate::new("H_opnorm", opnorm(&hmat)?, Relation::AtMost, 2.0 * (u as f64).sqrt()));
    let lam2_a = second_eigenvalue_bound(&graph);
    certs.push(Certificate::new("graph_second_eig", lam2_a, Relation::AtMost, 3.0 * (r_deg as f64).sqrt()));

    let u_idx: Vec<usize> = (s..d).collect();
    let s_idx: Vec<usize> = (0..s).collect();
    let sig_u = restrict(&sigma, &u_idx)?;
    let eig_u = symmetric_eigenvalues(&sig_u);
    certs.push(Certificate::new("sigma_UU_min_eig", *eig_u.last().unwrap(), Relation::AtLeast, 0.25));
    certs.push(Certificate::new("sigma_UU_max_eig", eig_u[0], Relation::AtMost, 0.75));
    // S block eigenvalues are 1 and 1/2; combine with the U block spectrum
    let lam1 = 1.0_f64.max(eig_u[0]);
    let lam2 = if eig_u[0] >= 1.0 { 1.0_f64.max(eig_u[1]) } else { eig_u[0].max(if s > 1 { 0.5 } else { 0.0 }) };
    certs.push(Certificate::new("eig_ratio_1_2", lam1 / lam2, Relation::AtLeast, 4.0 / 3.0));

    let (on, off) = (1.5 * tau * (1.0 - p), -1.5 * tau * p);
    let mut dev = 0.0_f64;
    for a in 0..u {
        for b in 0..u {
            if a != b {
                let want = if graph.has_edge(a, b) { on } else { off };
                dev = dev.max((sig_u.get(a, b) - want).abs());
            }
        }
    }
    certs.push(Certificate::new("UU_offdiag_deviation", dev, Relation::AtMost, 1e-15));
    certs.push(
        Certificate::new("realized_p_minus_quarter", (p - 0.25).abs(), Relation::AtMost, 0.0).informational(),
    );

    let thresholded = threshold_entries(&sigma, tau)?;
    let t_u = opnorm(&restrict(&thresholded, &u_idx)?)?;
    let t_s = opnorm(&restrict(&thresholded, &s_idx)?)?;
    certs.push(Certificate::new("thresh_UU_opnorm", t_u, Relation::AtLeast, 0.25 + tau * r_deg as f64));
    certs.push(Certificate::new("thresh_SS_opnorm", t_s, Relation::AtMost, 1.5 + s as f64 * tau));
    certs.push(Certificate::new("thresh_UU_minus_SS", t_u - t_s, Relation::Above, 0.0));
    certs.push(
        Certificate::new("lower_precondition_slack", u as f64 - lower, Relation::AtLeast, 0.0)
            .with_gating(regime == CovthreshRegime::Strict),
    );
    certs.push(psd_certificate(&sigma));

    let mut flags = vec![format!("r_deg={r_deg}")];
    if regime == CovthreshRegime::Population {
        flags.push("population-regime".into());
    }
    let gamma = 1.0 - lam2 / lam1;
    CounterexampleInstance {
        instance: PlantedInstance {
            sigma,
            components: vec![v],
            s,
            gamma,
            label: Family::CovThresh.tag().into(),
        },
        family: Family::CovThresh,
        params: params(&[
            ("s", s as f64),
            ("u", u as f64),
            ("tau", tau),
            ("seed", seed as f64),
            ("r_deg", r_deg as f64),
            ("p", p),
            ("strict", if regime == CovthreshRegime::Strict { 1.0 } else { 0.0 }),
        ]),
        certificates: certs,
        flags,
    }
    .gate()
}

impl Certificate {
    fn with_gating(mut self, gating: bool) -> Self {
        self.gating = gating;
        self
    }
}

// ---------------------------------------------------------------------------
// greedy correlation

/// Parameters of the greedy-correlation construction and its embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyCorrParams {
    pub s: usize,
    /// Eigenvalue of the planted `v`.
    pub lam1: f64,
    /// Eigenvalue shared by the `s - 1` decoy directions.
    pub lam2: f64,
    /// Ambient dimension, at least `2s - 1`.
    pub d: usize,
    /// Variance of the padding coordinates beyond `2s - 1`.
    pub pad: f64,
}

impl GreedyCorrParams {
    /// The unembedded construction: `λ = (1, 0.9)`, `d = 2s - 1`.
    pub fn lemma(s: usize) -> Self {
        Self {
            s,
            lam1: 1.0,
            lam2: 0.9,
            d: 2 * s.max(1) - 1,
            pad: 0.0,
        }
    }

    /// Gap `γ` version embedded in dimension `d`: `λ_2 = 1 - γ`, padding at `1 - γ`.
    pub fn embedded(s: usize, gamma: f64, d: usize) -> Self {
        Self {
            s,
            lam1: 1.0,
            lam2: 1.0 - gamma,
            d,
            pad: 1.0 - gamma,
        }
    }

    fn is_lemma(&self) -> bool {
        self.lam1 == 1.0 && self.lam2 == 0.9 && self.d == 2 * self.s - 1
    }
}

pub fn build_greedycorr_instance(s: usize) -> Result<CounterexampleInstance> {
    build_greedycorr_instance_with(GreedyCorrParams::lemma(s))
}

/// `Σ = λ_1 v v^T + λ_2 Σ_r u_r u_r^T (+ pad on coordinates >= 2s-1)` with
/// `v = 1_s / sqrt(s)` and `u_r = (g_r + e_{s+r-1}) / sqrt(2)` in 0-based
/// indexing, where the `g_r` complete `v` to a basis with `<g_r, e_1> = 1/sqrt(s)`.
pub fn build_greedycorr_instance_with(p: GreedyCorrParams) -> Result<CounterexampleInstance> {
    let s = p.s;
    if s < 2 {
        return Err(SpcaError::param("greedycorr: s must be at least 2"));
    }
    let base = 2 * s - 1;
    if p.d < base {
        return Err(SpcaError::param(format!("greedycorr: d = {} must be at least 2s - 1 = {base}", p.d)));
    }
    if !(p.lam1 > p.lam2 && p.lam2 > 0.0) || p.pad < 0.0 || p.pad > p.lam2 {
        return Err(SpcaError::param(
            "greedycorr: need lam1 > lam2 > 0 and 0 <= pad <= lam2",
        ));
    }
    let d = p.d;
    let basis = good_ortho_basis(s)?;
    let mut v = vec![0.0; d];
    v[..s].copy_from_slice(&basis.columns[0]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let decoys: Vec<Vec<f64>> = (1..s)
        .map(|r| {
            let mut ur = vec![0.0; d];
            for (i, g) in basis.columns[r].iter().enumerate() {
                ur[i] = h * g;
            }
            // decoy coordinate s + r - 1 (0-based): the coordinates after the support
            ur[s + r - 1] = h;
            ur
        })
        .collect();
    let sigma = SymMatrix::from_fn(d, |i, j| {
        let mut x = p.lam1 * v[i] * v[j];
        for ur in &decoys {
            x += p.lam2 * ur[i] * ur[j];
        }
        if i == j && i >= base {
            x += p.pad;
        }
        x
    })?;

    let mut certs = Vec::new();
    let mut all = vec![v.clone()];
    all.extend(decoys.iter().cloned());
    let mut gram_err = 0.0_f64;
    for (a, x) in all.iter().enumerate() {
        for (b, y) in all.iter().enumerate() {
            let want = if a == b { 1.0 } else { 0.0 };
            gram_err = gram_err.max((dot(x, y) - want).abs());
        }
    }
    certs.push(Certificate::new("orthonormal_set_gram_error", gram_err, Relation::AtMost, 1e-10));

    let eigs = symmetric_eigenvalues(&sigma);
    let mut expected = vec![p.lam1];
    expected.extend(std::iter::repeat(p.lam2).take(s - 1));
    expected.extend(std::iter::repeat(p.pad).take(d - base));
    expected.extend(std::iter::repeat(0.0).take(s - 1));
    expected.sort_by(|a, b| b.total_cmp(a));
    let spec_err = eigs.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    certs.push(Certificate::new("spectrum_deviation", spec_err, Relation::AtMost, 1e-10));

    let row0 = sigma.row(0);
    let sq = |j: usize| dot(row0, sigma.row(j)).abs();
    let true_max = (1..s).map(sq).fold(0.0, f64::max);
    let decoy_min = (s..base).map(sq).fold(f64::INFINITY, f64::min);
    let lemma = p.is_lemma();
    certs.push(
        Certificate::new("true_support_corr_max", true_max, Relation::AtMost, 1.0 / s as f64).with_gating(lemma),
    );
    certs.push(
        Certificate::new("decoy_corr_min", decoy_min, Relation::AtLeast, 0.4 / (s as f64).sqrt()).with_gating(lemma),
    );
    certs.push(Certificate::new("decoy_minus_true_corr", decoy_min - true_max, Relation::Above, 0.0).with_gating(lemma));
    certs.push(psd_certificate(&sigma));

    let gamma = 1.0 - p.lam2 / p.lam1;
    let mut comps = vec![v];
    comps.truncate(1);
    CounterexampleInstance {
        instance: PlantedInstance {
            sigma,
            components: comps,
            s,
            gamma,
            label: Family::GreedyCorr.tag().into(),
        },
        family: Family::GreedyCorr,
        params: params(&[
            ("s", s as f64),
            ("d", d as f64),
            ("lam1", p.lam1),
            ("lam2", p.lam2),
            ("pad", p.pad),
        ]),
        certificates: certs,
        flags: Vec::new(),
    }
    .gate()
}

// ---------------------------------------------------------------------------
// diagonal thresholding (reconstruction)

/// A diagonal-thresholding trap built from four eigenvalue levels.
///
/// With `S = 0..s`, decoys `D = s..2s` and the remaining coordinates `R`:
/// `Σ = λ_1 v v^T + λ_2 Σ_{j∈D} e_j e_j^T + λ_3 w w^T + λ_4 (I - Π)` where
/// `v = 1_S / sqrt(s)`, `w = 1_R / sqrt(|R|)` and `Π` projects onto the span
/// of all of those. On-support variances are `λ_1/s + λ_4 (1 - 1/s)`, below
/// the decoy variance `λ_2`, so the `s` largest variances miss the support.
pub fn build_diagthresh_instance(
    d: usize,
    s: usize,
    lam1: f64,
    lam2: f64,
    lam3: f64,
    lam4: f64,
) -> Result<CounterexampleInstance> {
    if s == 0 || d < 2 * s + 2 {
        return Err(SpcaError::param(format!(
            "diagthresh: need s >= 1 and d >= 2s + 2 (d = {d}, s = {s})"
        )));
    }
    if !(lam1 > lam2 && lam2 >= lam3 && lam3 >= lam4 && lam4 > 0.0) {
        return Err(SpcaError::param(
            "diagthresh: need lam1 > lam2 >= lam3 >= lam4 > 0",
        ));
    }
    let rest = d - 2 * s;
    let inv_s = 1.0 / s as f64;
    let inv_r = 1.0 / rest as f64;
    let sigma = SymMatrix::from_fn(d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        if i < s && j < s {
            // λ_1 v v^T + λ_4 (I - v v^T) on the support block
            lam1 * inv_s + lam4 * (delta - inv_s)
        } else if (s..2 * s).contains(&i) || (s..2 * s).contains(&j) {
            lam2 * delta
        } else if i >= 2 * s && j >= 2 * s {
            lam3 * inv_r + lam4 * (delta - inv_r)
        } else {
            0.0
        }
    })?;
    let mut v = vec![0.0; d];
    v[..s].iter_mut().for_each(|x| *x = inv_s.sqrt());

    let on_support = lam1 * inv_s + lam4 * (1.0 - inv_s);
    let diag = sigma.diagonal();
    let decoy_min = diag[s..2 * s].iter().copied().fold(f64::INFINITY, f64::min);
    let support_max = diag[..s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!((support_max - on_support).abs() < 1e-12);
    let eigs = symmetric_eigenvalues(&sigma);
    let certs = vec![
        Certificate::new("decoy_minus_support_diag", decoy_min - support_max, Relation::Above, 0.0),
        Certificate::new("top_eigenvalue_is_lam1", (eigs[0] - lam1).abs(), Relation::AtMost, 1e-10),
        psd_certificate(&sigma),
    ];
    CounterexampleInstance {
        instance: PlantedInstance {
            sigma,
            components: vec![v],
            s,
            gamma: 1.0 - lam2 / lam1,
            label: Family::DiagThresh.tag().into(),
        },
        family: Family::DiagThresh,
        params: params(&[
            ("d", d as f64),
            ("s", s as f64),
            ("lam1", lam1),
            ("lam2", lam2),
            ("lam3", lam3),
            ("lam4", lam4),
        ]),
        certificates: certs,
        flags: vec!["reconstruction".into()],
    }
    .gate()
}

/// Eigenvalue levels from the ratios `λ_2/λ_3` and `λ_2/λ_4`.
pub fn diagthresh_levels(lam1: f64, lam2: f64, ratio3: f64, ratio4: f64) -> (f64, f64, f64, f64) {
    (lam1, lam2, lam2 / ratio3, lam2 / ratio4)
}
