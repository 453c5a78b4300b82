//! Command-line entry points: configuration loading, the run manifest,
//! re-auditing a run directory and parameter sweeps.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or input
//! error, 3 audit failure.

use crate::energetics::{audit_step, AuditInput};
use crate::error::{Error, Result};
use crate::grid::loads::sample_loads;
use crate::grid::snapshot;
use crate::demag::DemagSolver;
use crate::scenarios::{run_experiment, snapshot_path, write_csv, write_json, ScenarioConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;

/// Written to `manifest.json` at the end of every run, including failed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// SHA-256 of the resolved configuration (or of the raw file when it
    /// does not parse).
    pub config_hash: String,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub steps: u64,
    pub rejections: u64,
    /// Largest per-step `|r_tot| / E`.
    pub max_energy_residual: f64,
    /// Signed sum of `r_tot` over the run relative to the final total energy.
    pub cumulative_energy_residual: f64,
    pub audit_accepted: bool,
    pub audit_violation: Option<String>,
    pub failure: Option<String>,
    pub exit_code: i32,
}

/// Exit status with a one-line explanation for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        Error::Audit(_) => EXIT_AUDIT,
        _ => EXIT_FAILURE,
    }
}

fn located(origin: &str, e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    let inner = e.into_inner();
    if inner.line() > 0 {
        Error::config(format!("{origin}:{}:{}: at `{path}`: {inner}", inner.line(), inner.column()))
    } else {
        Error::config(format!("{origin}: at `{path}`: {inner}"))
    }
}

/// Read a configuration file and apply `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::config(format!("{origin}: {e}")))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| located(&origin, e))?;
    if !overrides.is_empty() {
        // Overrides act on the resolved config, so defaulted fields can be set too.
        let mut value = serde_json::to_value(&cfg)?;
        for ov in overrides {
            let (k, v) = ov
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override `{ov}` is not of the form key=value")))?;
            ScenarioConfig::apply_override(&mut value, k.trim(), v.trim())?;
        }
        cfg = serde_path_to_error::deserialize(value).map_err(|e| located(&format!("{origin} (with overrides)"), e))?;
    }
    cfg.validate().map_err(|e| match e {
        Error::Config(m) => Error::config(format!("{origin}: {m}")),
        other => other,
    })?;
    Ok(cfg)
}

/// `run --config PATH --out DIR [--set key=value]...`
pub fn cmd_run(config_path: &Path, out: &Path, overrides: &[String]) -> Outcome {
    let started = now();
    let mut manifest = RunManifest {
        scenario: String::new(),
        config_hash: String::new(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: started,
        steps: 0,
        rejections: 0,
        max_energy_residual: 0.0,
        cumulative_energy_residual: 0.0,
        audit_accepted: false,
        audit_violation: None,
        failure: None,
        exit_code: EXIT_OK,
    };
    if let Err(e) = fs::create_dir_all(out) {
        return Outcome { code: EXIT_FAILURE, message: format!("cannot create {}: {e}", out.display()) };
    }
    let finish = |mut m: RunManifest, code: i32, message: String| {
        m.finished_unix = now();
        m.exit_code = code;
        if code != EXIT_OK && code != EXIT_AUDIT {
            m.failure = Some(message.clone());
        }
        if let Err(e) = write_json(out, "manifest.json", &m) {
            return Outcome { code: EXIT_FAILURE, message: format!("{message}; manifest not written: {e}") };
        }
        Outcome { code, message }
    };

    let cfg = match load_config(config_path, overrides) {
        Ok(c) => c,
        Err(e) => {
            manifest.config_hash = fs::read(config_path).map(|b| sha256_hex(&b)).unwrap_or_default();
            return finish(manifest, exit_code_for(&e), e.to_string());
        }
    };
    manifest.scenario = cfg.name.clone();
    manifest.config_hash = config_hash(&cfg);
    match run_experiment(&cfg, Some(out)) {
        Err(e) => finish(manifest, exit_code_for(&e), e.to_string()),
        Ok((traj, report)) => {
            manifest.steps = traj.steps;
            manifest.rejections = traj.rejections;
            manifest.max_energy_residual = traj.max_energy_residual();
            let total = traj.audits.last().map_or(0.0, |a| a.report.total_energy.abs());
            let sum: f64 = traj.audits.iter().map(|a| a.report.r_tot).sum();
            manifest.cumulative_energy_residual = if total > 0.0 { sum / total } else { 0.0 };
            manifest.audit_accepted = traj.audit_violation.is_none();
            manifest.audit_violation = traj.audit_violation.clone();
            match &traj.audit_violation {
                Some(v) => finish(manifest, EXIT_AUDIT, format!("audit failed: {v}")),
                None => {
                    let extra = report.map(|r| format!(", report {}", serde_json::to_string(&r).unwrap_or_default()));
                    let msg = format!(
                        "{}: {} steps, max |r_tot|/E = {:.2e}{}",
                        cfg.name,
                        traj.steps,
                        traj.max_energy_residual(),
                        extra.unwrap_or_default()
                    );
                    finish(manifest, EXIT_OK, msg)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSummary {
    /// Consecutive snapshot pairs that were audited.
    pub pairs: usize,
    pub max_energy_residual: f64,
    pub first_violation: Option<String>,
}

fn snapshot_steps(dir: &Path) -> Result<Vec<u64>> {
    let snaps = dir.join("snapshots");
    let entries = fs::read_dir(&snaps).map_err(|e| Error::Format(format!("{}: {e}", snaps.display())))?;
    let mut steps = Vec::new();
    for e in entries {
        let name = e?.file_name().to_string_lossy().into_owned();
        if let Some(num) = name.strip_prefix("snap_").and_then(|s| s.strip_suffix(".bin")) {
            let k = num.parse().map_err(|_| Error::Format(format!("bad snapshot name {name}")))?;
            steps.push(k);
        }
    }
    steps.sort_unstable();
    if steps.is_empty() {
        return Err(Error::Format(format!("no snapshots in {}", snaps.display())));
    }
    Ok(steps)
}

/// Recompute the step audits from the stored snapshot pairs of a run.
pub fn audit_run_dir(dir: &Path) -> Result<AuditSummary> {
    let cfg_path = dir.join("config.json");
    if !cfg_path.exists() {
        return Err(Error::Format(format!("{} is missing", cfg_path.display())));
    }
    let cfg = load_config(&cfg_path, &[])?;
    let steps = snapshot_steps(dir)?;
    let grid = cfg.grid.build()?;
    let demag = cfg.demag.then(DemagSolver::new);
    let mut summary = AuditSummary { pairs: 0, max_energy_residual: 0.0, first_violation: None };
    if cfg.frozen_theta {
        return Ok(summary);
    }
    let mut prev: Option<(u64, crate::grid::FieldState)> = None;
    for k in steps {
        let (header, state) = snapshot::load(&snapshot_path(dir, k))?;
        if header.grid != grid || header.step != k {
            return Err(Error::Format(format!("snapshot {k} does not match the run configuration")));
        }
        state.check_invariants(&grid).map_err(|e| Error::Format(format!("snapshot {k}: {e}")))?;
        if let Some((j, p)) = prev.take() {
            if j + 1 == k {
                let dt = state.t - p.t;
                let loads = sample_loads(&cfg.loads, &grid, state.t, dt)?;
                let motion = cfg.phase_at(p.t + 0.5 * dt).motion.motion();
                let rep = audit_step(&AuditInput {
                    grid: &grid,
                    params: &cfg.material,
                    prev: &p,
                    new: &state,
                    loads: &loads,
                    dt,
                    motion,
                    eps: cfg.eps,
                    demag: demag.as_ref(),
                })?;
                summary.pairs += 1;
                let rel = rep.r_tot.abs() / rep.total_energy.abs().max(f64::MIN_POSITIVE);
                summary.max_energy_residual = summary.max_energy_residual.max(rel);
                if summary.first_violation.is_none() {
                    summary.first_violation = rep.violation(&cfg.audit).map(|v| format!("step {k}: {v}"));
                }
            }
        }
        prev = Some((k, state));
    }
    Ok(summary)
}

/// `audit RUN_DIR`
pub fn cmd_audit(dir: &Path) -> Outcome {
    match audit_run_dir(dir) {
        Err(e) => Outcome { code: EXIT_CONFIG, message: e.to_string() },
        Ok(AuditSummary { first_violation: Some(v), .. }) => {
            Outcome { code: EXIT_AUDIT, message: format!("audit failed: {v}") }
        }
        Ok(s) => Outcome {
            code: EXIT_OK,
            message: format!("{} step pairs audited, max |r_tot|/E = {:.2e}", s.pairs, s.max_energy_residual),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub exit_code: i32,
    pub steps: u64,
    pub max_energy_residual: f64,
    pub cumulative_energy_residual: f64,
    pub audit_accepted: bool,
    pub coercivity: Option<f64>,
    pub remanence: Option<f64>,
    /// Experiment report as compact JSON, empty when there is none.
    pub report: String,
}

fn run_dir_name(param: &str, value: &str) -> String {
    let clean: String =
        value.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    format!("{param}={clean}")
}

/// `sweep --config PATH --param KEY --values v1,v2,...`; one run directory
/// per value under `out`, plus `summary.csv`, rewritten after every run.
pub fn cmd_sweep(config_path: &Path, param: &str, values: &[String], out: &Path) -> Outcome {
    if values.is_empty() {
        return Outcome { code: EXIT_CONFIG, message: "sweep needs at least one value".into() };
    }
    if let Err(e) = fs::create_dir_all(out) {
        return Outcome { code: EXIT_FAILURE, message: format!("cannot create {}: {e}", out.display()) };
    }
    let mut rows = Vec::new();
    let mut worst = Outcome { code: EXIT_OK, message: String::new() };
    for v in values {
        let dir: PathBuf = out.join(run_dir_name(param, v));
        let res = cmd_run(config_path, &dir, &[format!("{param}={v}")]);
        let manifest: Option<RunManifest> =
            fs::read_to_string(dir.join("manifest.json")).ok().and_then(|t| serde_json::from_str(&t).ok());
        let report_text = fs::read_to_string(dir.join("report.json")).ok();
        let report_value: Option<serde_json::Value> = report_text.as_deref().and_then(|t| serde_json::from_str(t).ok());
        let field = |k: &str| report_value.as_ref().and_then(|r| r.get(k)).and_then(|x| x.as_f64());
        let m = manifest.as_ref();
        rows.push(SweepRow {
            param: param.to_string(),
            value: v.clone(),
            exit_code: res.code,
            steps: m.map_or(0, |m| m.steps),
            max_energy_residual: m.map_or(f64::NAN, |m| m.max_energy_residual),
            cumulative_energy_residual: m.map_or(f64::NAN, |m| m.cumulative_energy_residual),
            audit_accepted: m.is_some_and(|m| m.audit_accepted),
            coercivity: field("coercivity"),
            remanence: field("remanence"),
            report: report_value.map(|r| r.to_string()).unwrap_or_default(),
        });
        if let Err(e) = write_csv(out, "summary.csv", &rows) {
            return Outcome { code: EXIT_FAILURE, message: format!("summary not written: {e}") };
        }
        if res.code != EXIT_OK && worst.code == EXIT_OK {
            worst = Outcome { code: res.code, message: format!("{param}={v}: {}", res.message) };
        }
    }
    if worst.code == EXIT_OK {
        worst.message = format!("{} runs written to {}", values.len(), out.join("summary.csv").display());
    }
    worst
}
