use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use dsgm::analysis::{
    audit_records, compare_decay_models, disagreement_series, estimate_expected_rho, lemma3_verdict, random_spans,
    run_metrics, AuditReport, ContractionFit, Tolerances,
};
use dsgm::communication::build_spanning_trees;
use dsgm::export::{read_trace_csv, write_metrics_csv, write_montecarlo_csv, write_rho_csv, write_trace_csv};
use dsgm::iteration::{run, RunOptions, Trace};
use dsgm::problems::CATALOG;

use crate::config::{Experiment, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit status of a command that completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Clean,
    Violations,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Clean => 0,
            Self::Violations => 2,
        }
    }

    fn from_audit(audit: &AuditReport) -> Self {
        if audit.all_passed() {
            Self::Clean
        } else {
            Self::Violations
        }
    }
}

pub struct RunOutcome {
    pub status: Status,
    pub audit: AuditReport,
    pub files: Vec<PathBuf>,
}

fn comment(hash: &str) -> String {
    format!("config_hash: {hash}")
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    files.push(path);
    Ok(BufWriter::new(file))
}

fn write_manifest(cfg: &RunConfig, command: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.seed,
        "started_at": chrono::Utc::now().to_rfc3339(),
        "config_hash": cfg.config_hash(),
        "config_echo": cfg,
    });
    let out = create(&cfg.outputs, "manifest.json", files)?;
    serde_json::to_writer_pretty(out, &manifest)?;
    Ok(())
}

fn simulate_and_audit(cfg: &RunConfig, exp: &Experiment) -> Result<(Trace<f64>, dsgm::analysis::RunMetrics<f64>)> {
    let options = RunOptions { record_matrices: cfg.record_matrices };
    let trace = run(&exp.problem, &exp.model, &exp.schedule, cfg.horizon, cfg.seed, options)?;
    let z = exp.problem.reference_point();
    let mut metrics = run_metrics(&trace, &exp.problem, z, Tolerances::default())?;
    if cfg.check_invariants {
        let trees = build_spanning_trees(exp.model.graph(), 0)?;
        for (s, k) in random_spans(trace.len(), cfg.contraction_spans, cfg.seed) {
            let verdict = lemma3_verdict(&trace, &trees, s, k, Tolerances::default().lemma3)?;
            metrics.audit.record_lemma3(&verdict);
        }
    }
    Ok((trace, metrics))
}

/// Simulates one trace and writes `trace.csv`, `metrics.csv`,
/// `manifest.json` and, when anchors are configured, `rho.csv`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome> {
    let exp = cfg.build()?;
    if let Some(&s) = cfg.rho_anchors.iter().find(|&&s| s >= cfg.horizon) {
        bail!("invalid config: rho anchor {s} must be < horizon {}", cfg.horizon);
    }
    let (trace, metrics) = simulate_and_audit(cfg, &exp)?;

    fs::create_dir_all(&cfg.outputs).with_context(|| format!("cannot create {}", cfg.outputs.display()))?;
    let hash = comment(&cfg.config_hash());
    let mut files = Vec::new();
    write_trace_csv(create(&cfg.outputs, "trace.csv", &mut files)?, &trace, Some(&hash))?;
    write_metrics_csv(create(&cfg.outputs, "metrics.csv", &mut files)?, &metrics, Some(&hash))?;
    if !cfg.rho_anchors.is_empty() {
        let history = trace.activation_history();
        let series = cfg
            .rho_anchors
            .iter()
            .map(|&s| disagreement_series(&exp.model, &history, s, trace.len() - 1))
            .collect::<dsgm::Result<Vec<_>>>()?;
        write_rho_csv(create(&cfg.outputs, "rho.csv", &mut files)?, &series, Some(&hash))?;
    }
    write_manifest(cfg, "run", &mut files)?;

    let status = if cfg.check_invariants { Status::from_audit(&metrics.audit) } else { Status::Clean };
    Ok(RunOutcome { status, audit: metrics.audit, files })
}

#[derive(Serialize)]
struct FitEntry {
    model: &'static str,
    a: f64,
    b: f64,
    b_stderr: f64,
    residual: f64,
    points: usize,
}

impl From<&ContractionFit> for FitEntry {
    fn from(f: &ContractionFit) -> Self {
        Self { model: f.model.name(), a: f.a, b: f.b, b_stderr: f.b_stderr, residual: f.residual, points: f.points }
    }
}

pub struct MonteCarloOutcome {
    pub report: serde_json::Value,
    pub files: Vec<PathBuf>,
}

/// Estimates `E[ρ(k, s)]` and fits both decay laws. Writes
/// `montecarlo.csv`, `fit_report.json` and `manifest.json`.
pub fn cmd_montecarlo_rho(cfg: &RunConfig) -> Result<MonteCarloOutcome> {
    let exp = cfg.build()?;
    let Some(mc) = &cfg.montecarlo else {
        bail!("invalid config: montecarlo-rho needs a `montecarlo` section with `k_list`");
    };
    if mc.trials < 30 {
        bail!("invalid config: trials must be >= 30, got {}", mc.trials);
    }
    let estimates = estimate_expected_rho(&exp.problem, &exp.model, &exp.schedule, mc.s, &mc.k_list, mc.trials, cfg.seed)?;

    fs::create_dir_all(&cfg.outputs).with_context(|| format!("cannot create {}", cfg.outputs.display()))?;
    let hash = cfg.config_hash();
    let mut files = Vec::new();
    write_montecarlo_csv(create(&cfg.outputs, "montecarlo.csv", &mut files)?, &estimates, Some(&comment(&hash)))?;

    let fits = compare_decay_models(&estimates);
    let report = match &fits {
        Ok(cmp) => json!({
            "config_hash": hash,
            "trials": mc.trials,
            "models": [FitEntry::from(&cmp.exponential), FitEntry::from(&cmp.sqrt_exponential)],
            "preferred": cmp.preferred().name(),
        }),
        Err(e) => json!({ "config_hash": hash, "trials": mc.trials, "error": e.to_string() }),
    };
    serde_json::to_writer_pretty(create(&cfg.outputs, "fit_report.json", &mut files)?, &report)?;
    write_manifest(cfg, "montecarlo-rho", &mut files)?;
    if let Err(e) = fits {
        bail!("decay fit failed: {e}");
    }
    Ok(MonteCarloOutcome { report, files })
}

/// Checks every invariant on a fresh run of the config, or on a trace file
/// previously written by `run`.
pub fn cmd_audit(cfg: &RunConfig, trace_file: Option<&Path>) -> Result<(Status, AuditReport)> {
    let exp = cfg.build()?;
    let audit = match trace_file {
        None => {
            let forced = RunConfig { check_invariants: true, ..cfg.clone() };
            simulate_and_audit(&forced, &exp)?.1.audit
        }
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open trace {}", path.display()))?;
            let records = read_trace_csv(file, exp.problem.num_agents(), exp.problem.dim())
                .with_context(|| format!("cannot read trace {}", path.display()))?;
            if records.is_empty() {
                bail!("trace {} has no records", path.display());
            }
            let z = exp.problem.reference_point();
            audit_records(&exp.problem, &exp.model, &records, z, Tolerances::default())?.audit
        }
    };
    Ok((Status::from_audit(&audit), audit))
}

pub fn list_problems() -> String {
    CATALOG.iter().map(|(name, about)| format!("{name:<24}{about}\n")).collect()
}
