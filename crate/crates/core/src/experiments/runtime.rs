use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use super::{
    build_family, elapsed_ms, metric_pair, run_baseline, run_jobs, seed_list, Algorithm, Config,
    ExperimentRecord, Metric, RunOutput, SampleSize, SolverSettings,
};
use crate::algos::{rtpm, Mode};
use crate::error::{Result, SpcaError};
use crate::models::{sample_covariance, GaussianSampler};

/// Correlation² against cumulative time for RTPM, single points for the baselines.
///
/// Keys: `family` (default spiked) with its parameters, `s`, `n`, `seed`,
/// `seeds`, `algorithm` (default `rtpm,diagthresh,covthresh,greedycorr`;
/// covthresh needs `tau`), `r` (default `s`), and `T_grid` (the iteration
/// counts to report, default `1,2,5,10,20,50`) or a single `T`. RTPM runs
/// once to the largest count and reports the selected candidate at each.
/// The tag `external` imports trajectory rows from the CSV at key `external`.
pub fn run_runtime_accuracy(cfg: &Config) -> Result<RunOutput> {
    let family = cfg.string_or("family", "spiked");
    let s = cfg.usize("s")?;
    let gamma = cfg.raw("gamma").map(|_| cfg.f64("gamma")).transpose()?;
    let fam = build_family(cfg, &family, s, gamma, false)?;
    let tags = match cfg.raw("algorithm") {
        Some(_) => cfg.list("algorithm")?,
        None => ["rtpm", "diagthresh", "covthresh", "greedycorr"].map(String::from).to_vec(),
    };
    let external = tags.iter().any(|t| t == "external");
    let algorithms: Vec<Algorithm> = tags
        .iter()
        .filter(|t| *t != "external")
        .map(|t| Algorithm::from_tag(t))
        .collect::<Result<_>>()?;
    let mut counts = if cfg.contains("T_grid") {
        cfg.usize_grid("T_grid")?
    } else if cfg.contains("T") {
        vec![cfg.usize("T")?]
    } else {
        vec![1, 2, 5, 10, 20, 50]
    };
    counts.sort_unstable();
    counts.dedup();
    let mut notes = Vec::new();
    let mut flags_extra = Vec::new();
    if counts.first() == Some(&0) {
        counts.remove(0);
    }
    let empty_trajectory = counts.is_empty();
    if empty_trajectory && algorithms.contains(&Algorithm::Rtpm) {
        notes.push("rtpm: T = 0 requested, trajectory is empty".into());
        flags_extra.push("empty-trajectory".to_string());
    }
    let t_max = counts.last().copied().unwrap_or(0);
    let r = cfg.usize_or("r", s)?;
    let mut settings = SolverSettings::from_config(cfg, r, t_max.max(1), Mode::Full)?;
    settings.rtpm.checkpoints = counts.clone();
    let n = cfg.usize("n")?;
    if n == 0 {
        return Err(SpcaError::param("n must be positive"));
    }
    let seeds = seed_list(cfg)?;
    let sampler = GaussianSampler::new(&fam.instance.sigma)?;
    let d = fam.d();

    let mut records = run_jobs(&seeds, |&seed| {
        let data = Arc::new(sampler.sample(n, seed)?);
        let base = |algorithm: &str, wall_ms: f64, iterations_used: usize, extra: &[String]| {
            let mut flags = fam.flags.clone();
            flags.extend(extra.iter().cloned());
            let is_rtpm = algorithm == "rtpm";
            ExperimentRecord {
                algorithm: algorithm.into(),
                family: family.clone(),
                d,
                s,
                k: 1,
                gamma: Some(fam.instance.gamma),
                delta: None,
                n: SampleSize::Finite(n),
                seed,
                mode: is_rtpm.then(|| settings.rtpm.mode.as_str().to_string()),
                r: is_rtpm.then_some(r),
                t: is_rtpm.then_some(iterations_used),
                metric: Metric::Correlation2,
                value: 0.0,
                wall_ms,
                iterations_used,
                flags,
            }
        };
        let mut out = Vec::new();
        let mut cov = None;
        let mut cov_ms = 0.0;
        for &algo in &algorithms {
            if algo == Algorithm::Rtpm {
                if empty_trajectory {
                    continue;
                }
                let res = rtpm(&data, &settings.rtpm)?;
                for cp in &res.checkpoints {
                    let rec = base("rtpm", cp.elapsed_ms, cp.t, &[]);
                    out.extend(metric_pair(rec, cp.candidate.values(), fam.v(), settings.timing)?);
                }
                continue;
            }
            if cov.is_none() {
                let start = Instant::now();
                cov = Some(sample_covariance(&data)?);
                cov_ms = elapsed_ms(start);
            }
            let run = run_baseline(algo, cov.as_ref().expect("formed above"), s, &settings, cov_ms)?;
            let rec = base(algo.tag(), run.wall_ms, 0, &run.flags);
            out.extend(metric_pair(rec, run.candidate.values(), fam.v(), settings.timing)?);
        }
        Ok(out)
    })?;
    if !flags_extra.is_empty() {
        for rec in &mut records {
            rec.flags.extend(flags_extra.iter().cloned());
        }
    }
    if external {
        let path = cfg.string("external")?;
        records.extend(read_external(Path::new(&path), &family, d, s)?);
        notes.push(format!("external trajectory rows imported from {path}"));
    }
    Ok(RunOutput { records, notes })
}

/// Rows from an externally computed trajectory: any CSV with columns
/// `seed, n, iterations_used, wall_ms, value` (correlation²).
fn read_external(path: &Path, family: &str, d: usize, s: usize) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| SpcaError::Format(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| SpcaError::Format(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SpcaError::Format(format!("{}: missing column `{name}`", path.display())))
    };
    let (c_seed, c_n, c_it, c_ms, c_val) = (col("seed")?, col("n")?, col("iterations_used")?, col("wall_ms")?, col("value")?);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| SpcaError::Format(format!("{}: {e}", path.display())))?;
        let field = |c: usize| -> Result<f64> {
            row.get(c).and_then(|v| v.parse().ok()).ok_or_else(|| SpcaError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {c} is not a number"),
            })
        };
        let rec = ExperimentRecord {
            algorithm: "external".into(),
            family: family.into(),
            d,
            s,
            k: 1,
            gamma: None,
            delta: None,
            n: SampleSize::Finite(field(c_n)? as usize),
            seed: field(c_seed)? as u64,
            mode: None,
            r: None,
            t: None,
            metric: Metric::Correlation2,
            value: field(c_val)?,
            wall_ms: field(c_ms)?,
            iterations_used: field(c_it)? as usize,
            flags: vec!["external".into()],
        };
        rec.check()?;
        let sin2 = rec.with_metric(Metric::Sin2, 1.0 - rec.value);
        out.push(sin2);
        out.push(rec);
    }
    Ok(out)
}
