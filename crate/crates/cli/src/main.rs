//! `spca`: instance generation, experiment sweeps, certificate checks and
//! the text pipeline, driven by flat `key=value` configuration files.
//!
//! Exit codes: 0 success, 1 parameter error, 2 numerical or construction
//! error, 3 I/O or format error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use spca_core::counterexamples::{build_deflation_barrier, write_instance, Family};
use spca_core::experiments::{
    build_family, run_ablation, run_counterexample_sweep, run_runtime_accuracy, run_scaling, run_text,
    verify_all, verify_family, write_records_file, Config, ExperimentRecord, RunOutput, VerifyReport,
};
use spca_core::models::{write_dataset, GaussianSampler};
use spca_core::{ErrorClass, Result, SpcaError};

#[derive(Parser, Debug)]
#[command(name = "spca", version, about = "Sparse PCA experiments and counterexample checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an instance (and optionally a sample) and write it in binary form.
    Gen(Common),
    /// Runtime-accuracy trajectories.
    Run(Common),
    /// Counterexample sweep (`experiment=counterexample`, default) or scaling sweep (`experiment=scaling`).
    Sweep(Common),
    /// Full versus disjoint RTPM.
    Ablate(Common),
    /// Sparse components of a bag-of-words corpus.
    Text(Common),
    /// Population-level certificates of the counterexample constructions.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key (repeatable; applied after the file, last one wins).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "spca-out")]
    out: PathBuf,
    /// Worker threads; never changes any output value.
    #[arg(long, env = "SPCA_THREADS")]
    threads: Option<usize>,
    /// Record wall-clock times (records are then no longer byte-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// covthresh, greedycorr, diagthresh or barrier; omitted means all.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, conflicts_with = "family")]
    all: bool,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    u: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spca: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &SpcaError) -> u8 {
    match e.class() {
        ErrorClass::Parameter => 1,
        ErrorClass::Numerical => 2,
        ErrorClass::Io => 3,
    }
}

/// File, then `--set` overrides in order, then the dedicated flags.
fn resolve(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if common.timing {
        cfg.set("timing", "1")?;
    }
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(SpcaError::param("--threads must be at least 1"));
        }
        // a second initialization (tests running in-process) is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(c) => with_common("gen", &c, cmd_gen),
        Command::Run(c) => with_common("run", &c, |cfg, _| run_output(run_runtime_accuracy(cfg)?)),
        Command::Sweep(c) => with_common("sweep", &c, cmd_sweep),
        Command::Ablate(c) => with_common("ablate", &c, |cfg, _| run_output(run_ablation(cfg)?)),
        Command::Text(c) => with_common("text", &c, cmd_text),
        Command::Verify(v) => cmd_verify(v),
    }
}

/// What a subcommand leaves behind besides the manifest and summary.
struct Outcome {
    records: Vec<ExperimentRecord>,
    notes: Vec<String>,
    extra_totals: BTreeMap<String, serde_json::Value>,
    /// Extra files, relative to the output directory.
    files: Vec<(String, String)>,
}

fn run_output(out: RunOutput) -> Result<Outcome> {
    Ok(Outcome {
        records: out.records,
        notes: out.notes,
        extra_totals: BTreeMap::new(),
        files: Vec::new(),
    })
}

fn with_common(name: &str, common: &Common, f: impl FnOnce(&Config, &Path) -> Result<Outcome>) -> Result<()> {
    let cfg = resolve(common)?;
    init_threads(common.threads)?;
    fs::create_dir_all(&common.out).map_err(|e| SpcaError::io(&common.out, e))?;
    let outcome = f(&cfg, &common.out)?;
    write_outputs(name, &cfg, &common.out, outcome)
}

fn write_outputs(name: &str, cfg: &Config, out: &Path, outcome: Outcome) -> Result<()> {
    let manifest = format!("# spca {name}\n{}", cfg.to_text());
    write_file(&out.join("manifest.txt"), &manifest)?;
    write_records_file(&out.join("records.csv"), &outcome.records)?;
    for (file, text) in &outcome.files {
        write_file(&out.join(file), text)?;
    }
    let mut by_algorithm: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &outcome.records {
        *by_algorithm.entry(r.algorithm.as_str()).or_default() += 1;
    }
    let mut totals = serde_json::Map::new();
    totals.insert("records".into(), json!(outcome.records.len()));
    totals.insert("records_by_algorithm".into(), json!(by_algorithm));
    totals.extend(outcome.extra_totals);
    let summary = json!({
        "subcommand": name,
        "config_hash": sha256_hex(cfg.to_text().as_bytes()),
        "totals": totals,
        "notes": outcome.notes,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| SpcaError::Format(e.to_string()))?;
    write_file(&out.join("summary.json"), &(text + "\n"))?;
    for note in &outcome.notes {
        eprintln!("note: {note}");
    }
    println!("{name}: {} records written to {}", outcome.records.len(), out.display());
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SpcaError::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn cmd_sweep(cfg: &Config, _out: &Path) -> Result<Outcome> {
    match cfg.string_or("experiment", "counterexample").as_str() {
        "counterexample" => run_output(run_counterexample_sweep(cfg)?),
        "scaling" => {
            let res = run_scaling(cfg)?;
            let mut table = String::from("family,s,gamma,delta,median_n_scale,seeds_above_grid\n");
            for p in &res.points {
                let above = p.per_seed.iter().filter(|x| x.is_none()).count();
                let _ = writeln!(table, "{},{},{},{},{},{above}", p.family, p.s, p.gamma, p.delta, p.median_label());
            }
            let mut extra = BTreeMap::new();
            extra.insert("scale_points".to_string(), json!(res.points.len()));
            Ok(Outcome {
                records: res.records,
                notes: res.notes,
                extra_totals: extra,
                files: vec![("n_scale.csv".into(), table)],
            })
        }
        other => Err(SpcaError::param(format!("experiment must be counterexample or scaling, got `{other}`"))),
    }
}

fn cmd_text(cfg: &Config, _out: &Path) -> Result<Outcome> {
    let (out, res) = run_text(cfg)?;
    let mut table = String::from("component,rank,word,weight\n");
    for (i, words) in res.top_words.iter().enumerate() {
        for (j, (w, x)) in words.iter().enumerate() {
            let _ = writeln!(table, "{},{},{w},{x}", i + 1, j + 1);
        }
    }
    let mut extra = BTreeMap::new();
    extra.insert("components".to_string(), json!(res.components.len()));
    extra.insert("restarts".to_string(), json!(res.restarts.len()));
    Ok(Outcome {
        records: out.records,
        notes: out.notes,
        extra_totals: extra,
        files: vec![("topwords.csv".into(), table)],
    })
}

/// Writes `instance.bin` for counterexample families and `dataset.bin` when `n` is set.
fn cmd_gen(cfg: &Config, out: &Path) -> Result<Outcome> {
    let family = cfg.string("family")?;
    let mut files = Vec::new();
    let mut notes = Vec::new();
    let sigma = if family == "barrier" {
        let b = build_deflation_barrier(cfg.usize("d")?, cfg.f64("delta")?, cfg.f64("gamma")?)?;
        let inst = &b.instance;
        write_instance(&out.join("instance.bin"), Family::Barrier, &inst.params, &inst.instance.sigma)?;
        files.push("instance.bin");
        inst.instance.sigma.clone()
    } else {
        let s = cfg.usize("s")?;
        let gamma = cfg.raw("gamma").map(|_| cfg.f64("gamma")).transpose()?;
        let population = cfg.bool_or("population", false)?;
        let fam = build_family(cfg, &family, s, gamma, population)?;
        if let Ok(tag) = Family::from_tag(&family) {
            let params = vec![("d".to_string(), fam.d() as f64), ("s".to_string(), s as f64)];
            write_instance(&out.join("instance.bin"), tag, &params, &fam.instance.sigma)?;
            files.push("instance.bin");
        }
        fam.instance.sigma
    };
    if cfg.contains("n") {
        let data = GaussianSampler::new(&sigma)?.sample(cfg.usize("n")?, cfg.u64_or("seed", 0)?)?;
        write_dataset(&out.join("dataset.bin"), &data)?;
        files.push("dataset.bin");
    }
    if files.is_empty() {
        return Err(SpcaError::param(format!("family {family}: set n to write a dataset")));
    }
    notes.push(format!("wrote {}", files.join(", ")));
    let mut extra = BTreeMap::new();
    extra.insert("files".to_string(), json!(files));
    extra.insert("d".to_string(), json!(sigma.dim()));
    Ok(Outcome {
        records: Vec::new(),
        notes,
        extra_totals: extra,
        files: Vec::new(),
    })
}

fn cmd_verify(v: VerifyArgs) -> Result<()> {
    let mut cfg = resolve(&v.common)?;
    let flags: [(&str, Option<String>); 6] = [
        ("d", v.d.map(|x| x.to_string())),
        ("s", v.s.map(|x| x.to_string())),
        ("delta", v.delta.map(|x| x.to_string())),
        ("gamma", v.gamma.map(|x| x.to_string())),
        ("tau", v.tau.map(|x| x.to_string())),
        ("u", v.u.map(|x| x.to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            cfg.set(key, &value)?;
        }
    }
    let family = match (&v.family, v.all) {
        (Some(f), false) => Some(f.clone()),
        _ => cfg.raw("family").map(str::to_string),
    };
    let report = match &family {
        Some(f) => VerifyReport {
            sections: vec![verify_family(&cfg, f)?],
        },
        None => verify_all(&cfg)?,
    };
    print!("{report}");
    let out = &v.common.out;
    fs::create_dir_all(out).map_err(|e| SpcaError::io(out, e))?;
    write_file(&out.join("report.txt"), &report.to_string())?;
    let certificates: usize = report.sections.iter().map(|s| s.certificates.len()).sum();
    let failed: Vec<String> = report.sections.iter().filter_map(|s| s.failed_certificate()).collect();
    let mut extra = BTreeMap::new();
    extra.insert("families".to_string(), json!(report.sections.len()));
    extra.insert("certificates".to_string(), json!(certificates));
    extra.insert("failed".to_string(), json!(failed));
    if let Some(nnz) = report.sections.iter().find_map(|s| s.nnz) {
        extra.insert("barrier_nnz".to_string(), json!(nnz));
    }
    write_outputs(
        "verify",
        &cfg,
        out,
        Outcome {
            records: Vec::new(),
            notes: Vec::new(),
            extra_totals: extra,
            files: Vec::new(),
        },
    )?;
    report.into_result().map(|_| ())
}
