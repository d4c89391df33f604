//! The experiment harness: instance families, solver dispatch, and the
//! scaling, runtime-accuracy, counterexample, ablation and text studies.
//!
//! Every runner takes a resolved [`Config`] and returns records in a fixed
//! order (configuration point, then seed). Jobs run in parallel, but the
//! output never depends on the thread count; wall times are recorded only
//! when `timing` is on, so that records files stay byte-reproducible.

mod ablation;
mod config;
mod record;
mod runtime;
mod scaling;
mod sweep;
mod text;
mod verify;

pub use ablation::run_ablation;
pub use config::{check_increasing, parse_grid, Config, KNOWN_KEYS};
pub use record::{write_records, write_records_file, ExperimentRecord, Metric, SampleSize, CSV_HEADER};
pub use runtime::run_runtime_accuracy;
pub use scaling::{count_inversions, lower_median, run_scaling, ScalePoint, ScalingOutput};
pub use sweep::run_counterexample_sweep;
pub use text::{
    load_bagofwords, run_text, text_pipeline, TextCorpus, TextOptions, TextResult, VocabRank,
};
pub use verify::{verify_all, verify_family, VerifyReport, VerifySection};

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::algos::{cov_thresh, diag_thresh, greedy_corr, rtpm, Backend, CandidateVector, Mode, Restarts, RtpmConfig};
use crate::counterexamples::{
    build_covthresh_instance_with, build_diagthresh_instance, build_greedycorr_instance_with,
    diagthresh_levels, CovthreshRegime, GreedyCorrParams,
};
use crate::error::{Result, SpcaError};
use crate::linalg::{sin2_angle, SymMatrix};
use crate::models::{build_spiked_general, build_spiked_identity, Dataset, PlantedInstance, SpikeSupport};

/// Records plus free-text notes for the run summary.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub notes: Vec<String>,
}

/// A planted instance as the harness sees it.
#[derive(Debug, Clone)]
pub struct FamilyInstance {
    pub instance: PlantedInstance,
    pub family: String,
    /// Carried into every record built on this instance.
    pub flags: Vec<String>,
}

impl FamilyInstance {
    pub fn d(&self) -> usize {
        self.instance.d()
    }

    pub fn v(&self) -> &[f64] {
        self.instance.v()
    }
}

/// Builds the instance named by `family`, with `s` and `gamma` given
/// explicitly so sweeps can vary them. `population` relaxes the covthresh
/// preconditions to those needed without sampling noise.
pub fn build_family(
    cfg: &Config,
    family: &str,
    s: usize,
    gamma: Option<f64>,
    population: bool,
) -> Result<FamilyInstance> {
    let seed = cfg.u64_or("seed", 0)?;
    let ctx = |e: SpcaError| e.context(&format!("family {family}"));
    let support = || -> Result<SpikeSupport> {
        match cfg.string_or("support", "random").as_str() {
            "random" => Ok(SpikeSupport::Random { seed }),
            "leading" => Ok(SpikeSupport::Leading),
            other => Err(SpcaError::param(format!("support must be random or leading, got `{other}`"))),
        }
    };
    let (instance, flags) = match family {
        "spiked" => {
            let gamma = gamma.ok_or_else(|| SpcaError::param("family spiked needs gamma"))?;
            (build_spiked_general(cfg.usize("d")?, s, gamma, &support()?).map_err(ctx)?, vec![])
        }
        "spiked-identity" => (build_spiked_identity(cfg.usize("d")?, s, &support()?).map_err(ctx)?, vec![]),
        "greedycorr" => {
            let mut p = GreedyCorrParams::lemma(s);
            let lam1 = cfg.f64_or("lam1", 1.0)?;
            let lam2 = match (cfg.contains("lam2"), gamma) {
                (true, _) => cfg.f64("lam2")?,
                (false, Some(g)) => lam1 * (1.0 - g),
                (false, None) => 0.9 * lam1,
            };
            p.lam1 = lam1;
            p.lam2 = lam2;
            p.d = cfg.usize_or("d", p.d)?;
            if p.d > 2 * s - 1 {
                p.pad = cfg.f64_or("pad", lam2)?;
            }
            let inst = build_greedycorr_instance_with(p).map_err(ctx)?;
            (inst.instance, inst.flags)
        }
        "covthresh" => {
            let regime = if population { CovthreshRegime::Population } else { CovthreshRegime::Strict };
            let inst = build_covthresh_instance_with(s, cfg.usize("u")?, cfg.f64("tau")?, seed, regime)
                .map_err(ctx)?;
            (inst.instance, inst.flags)
        }
        "diagthresh" => {
            let (l1, l2, l3, l4) = diagthresh_levels(1.0, 0.5, 2.1, 2.2);
            let inst = build_diagthresh_instance(
                cfg.usize("d")?,
                s,
                cfg.f64_or("lam1", l1)?,
                cfg.f64_or("lam2", l2)?,
                cfg.f64_or("lam3", l3)?,
                cfg.f64_or("lam4", l4)?,
            )
            .map_err(ctx)?;
            (inst.instance, inst.flags)
        }
        other => return Err(SpcaError::param(format!("unknown family `{other}`"))),
    };
    Ok(FamilyInstance {
        instance,
        family: family.to_string(),
        flags,
    })
}

/// The solvers the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Rtpm,
    DiagThresh,
    CovThresh,
    GreedyCorr,
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::Rtpm => "rtpm",
            Algorithm::DiagThresh => "diagthresh",
            Algorithm::CovThresh => "covthresh",
            Algorithm::GreedyCorr => "greedycorr",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "rtpm" => Ok(Algorithm::Rtpm),
            "diagthresh" => Ok(Algorithm::DiagThresh),
            "covthresh" => Ok(Algorithm::CovThresh),
            "greedycorr" => Ok(Algorithm::GreedyCorr),
            other => Err(SpcaError::param(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Solver settings shared by every runner.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub rtpm: RtpmConfig,
    pub tau: Option<f64>,
    pub i_star: usize,
    pub timing: bool,
}

impl SolverSettings {
    /// Reads `mode`, `tolerance`, `backend`, `restarts`, `tau`, `i_star`, `timing`.
    pub fn from_config(cfg: &Config, r: usize, t: usize, default_mode: Mode) -> Result<Self> {
        let mode = match cfg.raw("mode") {
            None => default_mode,
            Some("full") => Mode::Full,
            Some("disjoint") => Mode::Disjoint,
            Some(other) => return Err(SpcaError::param(format!("mode must be full or disjoint, got `{other}`"))),
        };
        let mut rtpm = RtpmConfig::new(r, t, mode);
        rtpm.tolerance = cfg.f64_or("tolerance", 0.0)?;
        rtpm.backend = parse_backend(&cfg.string_or("backend", "auto"))?;
        rtpm.restarts = match cfg.raw("restarts") {
            None | Some("all") => Restarts::All,
            Some(_) => Restarts::Indices(cfg.usize_grid("restarts")?),
        };
        Ok(Self {
            rtpm,
            tau: cfg.raw("tau").map(|_| cfg.f64("tau")).transpose()?,
            i_star: cfg.usize_or("i_star", 0)?,
            timing: cfg.bool_or("timing", false)?,
        })
    }
}

pub fn parse_backend(tag: &str) -> Result<Backend> {
    match tag {
        "auto" => Ok(Backend::Auto),
        "dense" => Ok(Backend::Dense),
        "matrix-free" => Ok(Backend::MatrixFree),
        other => Err(SpcaError::param(format!("backend must be auto, dense or matrix-free, got `{other}`"))),
    }
}

/// Outcome of one solver call.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub candidate: CandidateVector,
    pub wall_ms: f64,
    pub iterations_used: usize,
    pub flags: Vec<String>,
}

/// Runs a one-shot baseline on a covariance estimate. `extra_ms` is added
/// to the measured time (the cost of forming the estimate).
pub fn run_baseline(
    algo: Algorithm,
    cov: &SymMatrix,
    s: usize,
    settings: &SolverSettings,
    extra_ms: f64,
) -> Result<SolverRun> {
    let start = Instant::now();
    let candidate = match algo {
        Algorithm::DiagThresh => diag_thresh(cov, s)?,
        Algorithm::CovThresh => {
            let tau = settings
                .tau
                .ok_or_else(|| SpcaError::param("covthresh needs the threshold key `tau`"))?;
            cov_thresh(cov, tau, s)?
        }
        Algorithm::GreedyCorr => greedy_corr(cov, s, settings.i_star)?,
        Algorithm::Rtpm => return Err(SpcaError::param("rtpm is not a one-shot baseline")),
    };
    let wall_ms = elapsed_ms(start) + extra_ms;
    let mut flags = Vec::new();
    if candidate.degenerate {
        flags.push("degenerate".into());
    }
    Ok(SolverRun {
        candidate,
        wall_ms,
        iterations_used: 0,
        flags,
    })
}

/// Runs RTPM on a dataset.
pub fn run_rtpm(data: &Arc<Dataset>, settings: &SolverSettings) -> Result<SolverRun> {
    let start = Instant::now();
    let res = rtpm(data, &settings.rtpm)?;
    let wall_ms = elapsed_ms(start);
    let mut flags = vec![format!("backend={}", backend_tag(res.backend))];
    if let Some(m) = res.samples_used {
        flags.push(format!("samples_used={m}"));
    }
    if res.candidate.degenerate {
        flags.push("degenerate".into());
    }
    Ok(SolverRun {
        candidate: res.candidate,
        wall_ms,
        iterations_used: res.iterations_used,
        flags,
    })
}

pub fn backend_tag(b: Backend) -> &'static str {
    match b {
        Backend::Auto => "auto",
        Backend::Dense => "dense",
        Backend::MatrixFree => "matrix-free",
    }
}

pub(crate) fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// The sin² row followed by its correlation² twin.
///
/// `template` supplies every column except metric and value; its wall time
/// is zeroed unless `timing` is on.
pub fn metric_pair(template: ExperimentRecord, estimate: &[f64], truth: &[f64], timing: bool) -> Result<[ExperimentRecord; 2]> {
    let sin2 = sin2_angle(estimate, truth)?;
    let mut rec = template;
    if !timing {
        rec.wall_ms = 0.0;
    }
    let a = rec.with_metric(Metric::Sin2, sin2);
    let b = rec.with_metric(Metric::Correlation2, 1.0 - sin2);
    a.check()?;
    b.check()?;
    Ok([a, b])
}

/// Seed values `base, base + 1, …`.
pub fn seed_list(cfg: &Config) -> Result<Vec<u64>> {
    let base = cfg.u64_or("seed", 0)?;
    let count = cfg.usize_or("seeds", 1)?;
    if count == 0 {
        return Err(SpcaError::param("seeds must be at least 1"));
    }
    Ok((0..count as u64).map(|j| base.wrapping_add(j)).collect())
}

/// Maps `f` over `jobs` in parallel, keeping job order in the output.
pub(crate) fn run_jobs<J, F>(jobs: &[J], f: F) -> Result<Vec<ExperimentRecord>>
where
    J: Sync,
    F: Fn(&J) -> Result<Vec<ExperimentRecord>> + Sync + Send,
{
    let per_job: Vec<Vec<ExperimentRecord>> = jobs.par_iter().map(f).collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}
