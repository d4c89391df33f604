use std::sync::Arc;
use std::time::Instant;

use super::{
    build_family, check_increasing, elapsed_ms, metric_pair, run_jobs, seed_list, Config, ExperimentRecord,
    Metric, SampleSize, SolverSettings,
};
use crate::algos::{rtpm, rtpm_on_operators, Mode};
use crate::error::{Result, SpcaError};
use crate::linalg::sin2_angle;
use crate::models::{CovOperator, CovarianceAccumulator, Dataset, GaussianSampler};

/// Median `n_scale` for one `(s, γ, Δ)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalePoint {
    pub family: String,
    pub s: usize,
    pub gamma: f64,
    pub delta: f64,
    /// Smallest grid `n` reaching `sin² ≤ Δ`, per seed; `None` is above the grid.
    pub per_seed: Vec<Option<usize>>,
    /// Lower median over seeds, with above-grid seeds counted as infinite.
    pub median: Option<usize>,
}

impl ScalePoint {
    /// The median as written to tables: a count or `above-grid`.
    pub fn median_label(&self) -> String {
        self.median.map_or_else(|| "above-grid".to_string(), |n| n.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScalingOutput {
    pub records: Vec<ExperimentRecord>,
    pub points: Vec<ScalePoint>,
    pub notes: Vec<String>,
}

/// Lower median with `None` as `+∞`.
pub fn lower_median(values: &[Option<usize>]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<usize> = values.iter().map(|x| x.unwrap_or(usize::MAX)).collect();
    v.sort_unstable();
    let m = v[(v.len() - 1) / 2];
    (m != usize::MAX).then_some(m)
}

/// Adjacent pairs that break the wanted direction (`None` as `+∞`).
pub fn count_inversions(values: &[Option<usize>], non_decreasing: bool) -> usize {
    let key = |x: &Option<usize>| x.unwrap_or(usize::MAX);
    values
        .windows(2)
        .filter(|w| {
            let (a, b) = (key(&w[0]), key(&w[1]));
            if non_decreasing {
                b < a
            } else {
                b > a
            }
        })
        .count()
}

/// `n_scale = min{n in grid : sin² ≤ Δ}` for RTPM with `r = r_factor·s`, `T = 100`.
///
/// Keys: `family` (spiked, spiked-identity or greedycorr), `d`, `s_grid`,
/// `gamma_grid`, `delta_grid` (each falls back to its base key), `n_grid`,
/// `seed`, `seeds`, `r_factor` (default 10) or a fixed `r`, `T` (default 100),
/// and `design`: `grid` (every `(s, γ)` pair) or `axes` (vary `s` at the
/// base `γ`, then `γ` at the base `s`; bases default to the middle grid entry).
///
/// Per point and seed, the sample grows through the grid (nested samples) and
/// stops once `sin²` is below every target, so every `n_scale` is exact.
pub fn run_scaling(cfg: &Config) -> Result<ScalingOutput> {
    let family = cfg.string_or("family", "spiked");
    if !matches!(family.as_str(), "spiked" | "spiked-identity" | "greedycorr") {
        return Err(SpcaError::param(format!("scaling sweeps take spiked or greedycorr, not `{family}`")));
    }
    let s_axis = cfg.axis_usize("s")?;
    let gamma_axis = if family == "spiked-identity" { vec![0.1] } else { cfg.axis_f64("gamma")? };
    let deltas = cfg.axis_f64("delta")?;
    if deltas.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(SpcaError::param("targets delta must lie in (0, 1)"));
    }
    let grid = cfg.usize_grid("n_grid")?;
    check_increasing("n_grid", &grid)?;
    if grid[0] == 0 {
        return Err(SpcaError::param("sample sizes must be positive"));
    }
    let points: Vec<(usize, f64)> = match cfg.string_or("design", "grid").as_str() {
        "grid" => s_axis.iter().flat_map(|&s| gamma_axis.iter().map(move |&g| (s, g))).collect(),
        "axes" => {
            let s0 = cfg.usize_or("s", s_axis[s_axis.len() / 2])?;
            let g0 = cfg.f64_or("gamma", gamma_axis[gamma_axis.len() / 2])?;
            let mut p: Vec<(usize, f64)> = s_axis.iter().map(|&s| (s, g0)).collect();
            p.extend(gamma_axis.iter().filter(|&&g| g != g0).map(|&g| (s0, g)));
            p
        }
        other => return Err(SpcaError::param(format!("design must be grid or axes, got `{other}`"))),
    };
    let seeds = seed_list(cfg)?;
    let t = cfg.usize_or("T", 100)?;
    let r_factor = cfg.usize_or("r_factor", 10)?;
    let stop_at = deltas.iter().copied().fold(f64::INFINITY, f64::min);

    struct Prepared {
        s: usize,
        gamma: f64,
        d: usize,
        v: Vec<f64>,
        sampler: GaussianSampler,
        settings: SolverSettings,
        flags: Vec<String>,
    }
    let prepared: Vec<Prepared> = points
        .iter()
        .map(|&(s, gamma)| {
            let fam = build_family(cfg, &family, s, Some(gamma), false)?;
            let r = cfg.usize_or("r", r_factor * s)?;
            Ok(Prepared {
                s,
                gamma: fam.instance.gamma,
                d: fam.d(),
                v: fam.v().to_vec(),
                sampler: GaussianSampler::new(&fam.instance.sigma)?,
                settings: SolverSettings::from_config(cfg, r, t, Mode::Full)?,
                flags: fam.flags,
            })
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|p| seeds.iter().map(move |&sd| (p, sd)))
        .collect();
    let records = run_jobs(&jobs, |&(p, seed)| {
        let pt = &prepared[p];
        let d = pt.d;
        let mut acc = CovarianceAccumulator::new(d);
        let mut rows: Vec<f64> = Vec::new();
        let mut out = Vec::new();
        let mut have = 0;
        for &n in &grid {
            let fresh = pt.sampler.sample_range(seed, have, n);
            have = n;
            let start = Instant::now();
            let (cand, iterations, flags) = match pt.settings.rtpm.mode {
                Mode::Full => {
                    acc.add_rows(&fresh);
                    let op = CovOperator::dense(acc.snapshot()?);
                    let res = rtpm_on_operators(&op, std::slice::from_ref(&op), &pt.settings.rtpm)?;
                    (res.candidate, res.iterations_used, vec![])
                }
                Mode::Disjoint => {
                    rows.extend_from_slice(&fresh);
                    let data = Arc::new(Dataset::new(n, d, rows.clone(), seed)?);
                    let res = rtpm(&data, &pt.settings.rtpm)?;
                    let used = res.samples_used.unwrap_or(n);
                    (res.candidate, res.iterations_used, vec![format!("samples_used={used}")])
                }
            };
            let wall_ms = elapsed_ms(start);
            let sin2 = sin2_angle(cand.values(), &pt.v)?;
            let mut all_flags = pt.flags.clone();
            all_flags.extend(flags);
            let rec = ExperimentRecord {
                algorithm: "rtpm".into(),
                family: family.clone(),
                d,
                s: pt.s,
                k: 1,
                gamma: Some(pt.gamma),
                delta: None,
                n: SampleSize::Finite(n),
                seed,
                mode: Some(pt.settings.rtpm.mode.as_str().into()),
                r: Some(pt.settings.rtpm.r),
                t: Some(t),
                metric: Metric::Sin2,
                value: 0.0,
                wall_ms,
                iterations_used: iterations,
                flags: all_flags,
            };
            out.extend(metric_pair(rec, cand.values(), &pt.v, pt.settings.timing)?);
            if sin2 <= stop_at {
                break;
            }
        }
        Ok(out)
    })?;

    let mut table = Vec::new();
    for pt in &prepared {
        for &delta in &deltas {
            let per_seed: Vec<Option<usize>> = seeds
                .iter()
                .map(|&seed| {
                    records
                        .iter()
                        .filter(|r| {
                            r.metric == Metric::Sin2 && r.seed == seed && r.s == pt.s && r.gamma == Some(pt.gamma)
                        })
                        .find(|r| r.value <= delta)
                        .and_then(|r| match r.n {
                            SampleSize::Finite(n) => Some(n),
                            SampleSize::Population => None,
                        })
                })
                .collect();
            table.push(ScalePoint {
                family: family.clone(),
                s: pt.s,
                gamma: pt.gamma,
                delta,
                median: lower_median(&per_seed),
                per_seed,
            });
        }
    }
    let mut notes = Vec::new();
    let above = table.iter().filter(|p| p.median.is_none()).count();
    if above > 0 {
        notes.push(format!("{above} scaling point(s) above the n grid"));
    }
    Ok(ScalingOutput {
        records,
        points: table,
        notes,
    })
}
