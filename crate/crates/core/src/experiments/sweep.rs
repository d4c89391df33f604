use std::sync::Arc;
use std::time::Instant;

use super::{
    build_family, check_increasing, elapsed_ms, metric_pair, run_baseline, run_jobs, run_rtpm, seed_list,
    Algorithm, Config, ExperimentRecord, Metric, RunOutput, SampleSize, SolverRun, SolverSettings,
};
use crate::algos::{rtpm_on_operators, Mode};
use crate::error::{Result, SpcaError};
use crate::models::{sample_covariance, CovOperator, GaussianSampler};

/// Heuristic-versus-RTPM over an `n` grid on a counterexample family.
///
/// Keys: `family` (covthresh, greedycorr, diagthresh), `s`, family
/// parameters, `n_grid` or `n`, `seed`, `seeds`, `algorithm` (default: the
/// targeted heuristic and `rtpm`), `r` (default `2s`), `T` (default 40).
/// `population=1` replaces sampling by the population covariance (`n = ∞`),
/// which is deterministic, so only the base seed runs.
pub fn run_counterexample_sweep(cfg: &Config) -> Result<RunOutput> {
    let family = cfg.string("family")?;
    if !matches!(family.as_str(), "covthresh" | "greedycorr" | "diagthresh") {
        return Err(SpcaError::param(format!(
            "counterexample sweeps take covthresh, greedycorr or diagthresh, not `{family}`"
        )));
    }
    let s = cfg.usize("s")?;
    let population = cfg.bool_or("population", false)?;
    let fam = build_family(cfg, &family, s, None, population)?;
    let algorithms: Vec<Algorithm> = match cfg.raw("algorithm") {
        Some(_) => cfg.list("algorithm")?.iter().map(|a| Algorithm::from_tag(a)).collect::<Result<_>>()?,
        None => vec![Algorithm::from_tag(&family)?, Algorithm::Rtpm],
    };
    let r = cfg.usize_or("r", 2 * s)?;
    let t = cfg.usize_or("T", 40)?;
    let settings = SolverSettings::from_config(cfg, r, t, Mode::Full)?;
    let d = fam.d();
    let mut notes = Vec::new();

    let sizes: Vec<SampleSize> = if population {
        notes.push("population mode: noiseless covariance, one deterministic run".into());
        vec![SampleSize::Population]
    } else {
        let grid = if cfg.contains("n_grid") { cfg.usize_grid("n_grid")? } else { vec![cfg.usize("n")?] };
        check_increasing("n_grid", &grid)?;
        if grid[0] == 0 {
            return Err(SpcaError::param("sample sizes must be positive"));
        }
        grid.into_iter().map(SampleSize::Finite).collect()
    };
    let seeds = if population { vec![cfg.u64_or("seed", 0)?] } else { seed_list(cfg)? };
    let sampler = if population { None } else { Some(GaussianSampler::new(&fam.instance.sigma)?) };

    let jobs: Vec<(SampleSize, u64)> = sizes.iter().flat_map(|&n| seeds.iter().map(move |&sd| (n, sd))).collect();
    let records = run_jobs(&jobs, |&(n, seed)| {
        let template = |algo: Algorithm, run: &SolverRun| {
            let is_rtpm = algo == Algorithm::Rtpm;
            let mut flags = fam.flags.clone();
            flags.extend(run.flags.iter().cloned());
            ExperimentRecord {
                algorithm: algo.tag().into(),
                family: family.clone(),
                d,
                s,
                k: 1,
                gamma: Some(fam.instance.gamma),
                delta: None,
                n,
                seed,
                mode: is_rtpm.then(|| settings.rtpm.mode.as_str().to_string()),
                r: is_rtpm.then_some(r),
                t: is_rtpm.then_some(t),
                metric: Metric::Sin2,
                value: 0.0,
                wall_ms: run.wall_ms,
                iterations_used: run.iterations_used,
                flags,
            }
        };
        let mut out = Vec::new();
        match (n, &sampler) {
            (SampleSize::Finite(n), Some(sampler)) => {
                let data = Arc::new(sampler.sample(n, seed)?);
                let mut cov = None;
                let mut cov_ms = 0.0;
                for &algo in &algorithms {
                    let run = if algo == Algorithm::Rtpm {
                        run_rtpm(&data, &settings)?
                    } else {
                        if cov.is_none() {
                            let start = Instant::now();
                            cov = Some(sample_covariance(&data)?);
                            cov_ms = elapsed_ms(start);
                        }
                        run_baseline(algo, cov.as_ref().expect("formed above"), s, &settings, cov_ms)?
                    };
                    out.extend(metric_pair(template(algo, &run), run.candidate.values(), fam.v(), settings.timing)?);
                }
            }
            _ => {
                let sigma = &fam.instance.sigma;
                for &algo in &algorithms {
                    let run = if algo == Algorithm::Rtpm {
                        let start = Instant::now();
                        let op = CovOperator::dense(sigma.clone());
                        let res = rtpm_on_operators(&op, std::slice::from_ref(&op), &settings.rtpm)?;
                        SolverRun {
                            candidate: res.candidate,
                            wall_ms: elapsed_ms(start),
                            iterations_used: res.iterations_used,
                            flags: vec!["backend=dense".into()],
                        }
                    } else {
                        run_baseline(algo, sigma, s, &settings, 0.0)?
                    };
                    out.extend(metric_pair(template(algo, &run), run.candidate.values(), fam.v(), settings.timing)?);
                }
            }
        }
        Ok(out)
    })?;
    Ok(RunOutput { records, notes })
}
