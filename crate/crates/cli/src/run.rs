//! One run: build or load the trajectory, dispatch the audits, write the
//! artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use ricci_lab::estimates::{EstimateReport, CSV_COLUMNS};
use ricci_lab::flow::{evolve, io, make_preset, Trajectory};

use crate::audits::{self, AuditOutput};
use crate::config::{Mode, RunConfig};
use crate::error::CliError;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_AUDIT_FAILED: u8 = 2;
pub const EXIT_ERROR: u8 = 1;

pub fn output_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --output or set `output` in the config".into()))
}

fn build_trajectory(cfg: &RunConfig, replay: Option<&Path>) -> Result<Trajectory, CliError> {
    let traj = match replay {
        Some(dir) => {
            let sub = dir.join("checkpoints");
            io::read_trajectory(if sub.is_dir() { &sub } else { dir })?
        }
        None => {
            let m0 = make_preset(&cfg.preset, cfg.nodes)?;
            match cfg.mode {
                Mode::Evolve => evolve(&m0, &cfg.controller)?,
                Mode::Static => Trajectory::stationary(&m0, &cfg.times)?,
            }
        }
    };
    Ok(match cfg.singular_time {
        Some(t) => traj.with_singular_time(t),
        None => traj,
    })
}

fn status(out: &Result<AuditOutput, CliError>) -> &'static str {
    match out {
        Err(_) => "error",
        Ok(o) if o.reports.iter().any(|r| !r.is_skipped() && !r.passed) => "fail",
        Ok(o) if o.reports.iter().all(|r| r.is_skipped()) && !o.reports.is_empty() => "skipped",
        Ok(_) => "pass",
    }
}

fn write_dat(path: &Path, columns: &str, series: &[(f64, f64)]) -> Result<(), CliError> {
    let mut s = format!("# {columns}\n");
    for (x, y) in series {
        let _ = writeln!(s, "{x:.12e} {y:.12e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Runs the config and returns the exit code. Artifacts are written even
/// when an audit errors; the manifest then says `partial=true`.
pub fn run(cfg: &RunConfig, out: &Path, replay: Option<&Path>, resolution_scale: usize) -> Result<u8, CliError> {
    std::fs::create_dir_all(out.join("plotdata"))
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let traj = build_trajectory(cfg, replay)?;
    if replay.is_none() {
        io::write_trajectory(&traj, &out.join("checkpoints"))?;
    }

    let results: Vec<Result<AuditOutput, CliError>> =
        cfg.audits.par_iter().map(|spec| audits::run(spec, &traj, &cfg.constants)).collect();

    let mut csv = csv::Writer::from_path(out.join("estimates.csv"))?;
    csv.write_record(CSV_COLUMNS)?;
    let mut verdicts = String::new();
    let mut failed = 0usize;
    let mut skipped = 0usize;
    let mut total = 0usize;
    let mut errors = Vec::new();
    for (spec, res) in cfg.audits.iter().zip(&results) {
        match res {
            Ok(o) => {
                for r in &o.reports {
                    let r: EstimateReport = r.clone().param("audit_line", spec.line as f64);
                    csv.write_record(r.csv_row())?;
                    total += 1;
                    if r.is_skipped() {
                        skipped += 1;
                    } else if !r.passed {
                        failed += 1;
                    }
                }
                for rec in &o.records {
                    let mut rec = rec.clone();
                    rec["audit"] = serde_json::Value::String(spec.label.clone());
                    verdicts.push_str(&rec.to_string());
                    verdicts.push('\n');
                }
                for (name, series) in &o.series {
                    write_dat(
                        &out.join("plotdata").join(format!("{}_{name}.dat", spec.label)),
                        &format!("x {name}"),
                        series,
                    )?;
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    csv.flush()?;
    std::fs::write(out.join("verdicts.jsonl"), verdicts)?;
    for (name, series) in audits::trajectory_series(&traj)? {
        write_dat(&out.join("plotdata").join(format!("{name}.dat")), &format!("t {name}"), &series)?;
    }

    let code = if !errors.is_empty() {
        EXIT_ERROR
    } else if failed > 0 {
        EXIT_AUDIT_FAILED
    } else {
        EXIT_PASS
    };

    let mut m = String::new();
    let _ = writeln!(m, "format=ricci-lab-run 1");
    let _ = writeln!(m, "command={}", if replay.is_some() { "replay" } else { "run" });
    if let Some(src) = &cfg.source {
        let _ = writeln!(m, "config={}", src.display());
    }
    let _ = writeln!(m, "seed={}", cfg.seed);
    let _ = writeln!(m, "scenario.preset={}", cfg.preset_name);
    for (k, v) in &cfg.preset_params {
        let _ = writeln!(m, "scenario.{k}={v}");
    }
    let _ = writeln!(m, "grid.nodes={}", traj.checkpoints[0].grid().node_count());
    let _ = writeln!(m, "resolution_scale={resolution_scale}");
    for (k, v) in cfg.constants.entries() {
        let _ = writeln!(m, "constants.{k}={v}");
    }
    let _ = writeln!(m, "trajectory.count={}", traj.len());
    let _ = writeln!(m, "trajectory.first_time={}", traj.first_time());
    let _ = writeln!(m, "trajectory.last_time={}", traj.last_time());
    let _ = writeln!(m, "trajectory.stop_reason={}", traj.stop_reason.as_str());
    let _ = writeln!(m, "trajectory.steps={}", traj.steps);
    if let Some(t) = traj.singular_time_estimate {
        let _ = writeln!(m, "trajectory.singular_time_estimate={t}");
    }
    for (spec, res) in cfg.audits.iter().zip(&results) {
        let _ = writeln!(m, "audit.{}.kind={}", spec.label, spec.kind);
        let _ = writeln!(m, "audit.{}.status={}", spec.label, status(res));
        match res {
            Ok(o) => {
                let _ = writeln!(m, "audit.{}.reports={}", spec.label, o.reports.len());
            }
            Err(e) => {
                let _ = writeln!(m, "audit.{}.error={}", spec.label, e.to_string().replace('\n', " "));
            }
        }
    }
    let _ = writeln!(m, "reports.total={total}");
    let _ = writeln!(m, "reports.failed={failed}");
    let _ = writeln!(m, "reports.skipped={skipped}");
    let _ = writeln!(m, "partial={}", !errors.is_empty());
    let _ = writeln!(m, "exit_code={code}");
    std::fs::write(out.join("manifest"), m)?;

    for e in &errors {
        eprintln!("error: {e}");
    }
    eprintln!("{total} reports, {failed} failed, {skipped} skipped; exit {code}");
    Ok(code)
}
