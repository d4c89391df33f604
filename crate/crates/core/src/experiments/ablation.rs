use std::sync::Arc;

use super::{
    build_family, metric_pair, run_jobs, run_rtpm, seed_list, Config, ExperimentRecord, Metric, RunOutput,
    SampleSize, SolverSettings,
};
use crate::algos::{Backend, Mode};
use crate::error::{Result, SpcaError};
use crate::models::GaussianSampler;

/// Full versus disjoint RTPM, identical in everything but the per-iteration covariance.
///
/// Keys: `family` (default greedycorr) with its parameters (for greedycorr:
/// `s`, `gamma`, `d`, embedded as in the scaling study), `n`, `T_grid`,
/// `seed`, `seeds`, `r_factor` (default 5) or `r`, `backend` (default dense).
/// Both modes see the same dataset per seed; restarts are all basis vectors.
pub fn run_ablation(cfg: &Config) -> Result<RunOutput> {
    let family = cfg.string_or("family", "greedycorr");
    let s = cfg.usize("s")?;
    let gamma = cfg.raw("gamma").map(|_| cfg.f64("gamma")).transpose()?;
    let fam = build_family(cfg, &family, s, gamma, false)?;
    let n = cfg.usize("n")?;
    let counts = if cfg.contains("T_grid") { cfg.usize_grid("T_grid")? } else { vec![cfg.usize("T")?] };
    let t_max = counts.iter().copied().max().unwrap_or(0);
    if counts.contains(&0) {
        return Err(SpcaError::param("every T in the ablation grid must be at least 1"));
    }
    if n < t_max {
        return Err(SpcaError::param(format!("ablation needs n >= max T (n = {n}, max T = {t_max})")));
    }
    let r = cfg.usize_or("r", cfg.usize_or("r_factor", 5)? * s)?;
    let backend_default = if cfg.contains("backend") { None } else { Some(Backend::Dense) };
    let seeds = seed_list(cfg)?;
    let sampler = GaussianSampler::new(&fam.instance.sigma)?;
    let d = fam.d();
    let notes = vec!["restart batches are not modelled: every restart runs".to_string()];

    let jobs: Vec<(usize, u64)> = counts.iter().flat_map(|&t| seeds.iter().map(move |&sd| (t, sd))).collect();
    let records = run_jobs(&jobs, |&(t, seed)| {
        let data = Arc::new(sampler.sample(n, seed)?);
        let mut out = Vec::new();
        for mode in [Mode::Full, Mode::Disjoint] {
            let mut settings = SolverSettings::from_config(cfg, r, t, mode)?;
            settings.rtpm.mode = mode;
            if let Some(b) = backend_default {
                settings.rtpm.backend = b;
            }
            let run = run_rtpm(&data, &settings)?;
            let mut flags = fam.flags.clone();
            flags.extend(run.flags.iter().cloned());
            let rec = ExperimentRecord {
                algorithm: "rtpm".into(),
                family: family.clone(),
                d,
                s,
                k: 1,
                gamma: Some(fam.instance.gamma),
                delta: None,
                n: SampleSize::Finite(n),
                seed,
                mode: Some(mode.as_str().into()),
                r: Some(r),
                t: Some(t),
                metric: Metric::Sin2,
                value: 0.0,
                wall_ms: run.wall_ms,
                iterations_used: run.iterations_used,
                flags,
            };
            out.extend(metric_pair(rec, run.candidate.values(), fam.v(), settings.timing)?);
        }
        Ok(out)
    })?;
    Ok(RunOutput { records, notes })
}
