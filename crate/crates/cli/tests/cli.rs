use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ricci-lab"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(name: &str, out: &Path) -> Output {
    bin().args(["run", "--config"]).arg(configs().join(name)).arg("--output").arg(out).output().unwrap()
}

fn manifest(dir: &Path) -> String {
    fs::read_to_string(dir.join("manifest")).unwrap()
}

#[test]
fn describe_listings_are_versioned() {
    let audits = bin().args(["describe", "audits"]).output().unwrap();
    assert!(audits.status.success());
    let text = String::from_utf8(audits.stdout).unwrap();
    assert!(text.starts_with("# ricci-lab audits v1\n"));
    assert!(text.contains("\nkernel-bounds\t"));

    let presets = String::from_utf8(bin().args(["describe", "presets"]).output().unwrap().stdout).unwrap();
    assert!(presets.starts_with("# ricci-lab presets v1\n"));
    assert!(presets.lines().any(|l| l.starts_with("dumbbell\t")));

    let columns = String::from_utf8(bin().args(["describe", "columns"]).output().unwrap().stdout).unwrap();
    assert_eq!(columns.trim_end().split(',').next(), Some("name"));
    assert!(columns.contains("params_json"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin().args(["describe", "nothing"]).output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn empty_config_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("empty.cfg", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["estimates.csv", "verdicts.jsonl", "manifest", "plotdata/waist.dat", "plotdata/volume.dat"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    assert!(dir.path().join("checkpoints").read_dir().unwrap().count() > 1);
    let m = manifest(dir.path());
    assert!(m.contains("exit_code=0\n"));
    assert!(m.contains("partial=false\n"));
}

#[test]
fn failing_audit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("sobolev_failure.cfg", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(dir.path());
    assert!(m.contains("audit.sobolev.status=fail\n"));
    assert!(m.contains("exit_code=2\n"));
    let csv = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.contains(",false,")));
}

#[test]
fn bad_config_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "scenario.preset = round_sphere\n# fine so far\ngrid.nodes = many\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--output").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn audit_errors_mark_the_run_partial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("partial.cfg");
    // a cluster audit needs a singular time, which this run does not have
    fs::write(
        &cfg,
        "scenario.preset = round_sphere\ngrid.nodes = 51\ntrajectory.mode = static\ntrajectory.times = 0, 0.5\n\
         audit.riemann-l2.tolerance = 0.01\naudit.cluster.t = 0\n",
    )
    .unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--output").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&dir.path().join("o"));
    assert!(m.contains("partial=true\n"));
    assert!(m.contains("audit.riemann-l2.status=pass\n"));
    assert!(m.contains("audit.cluster.status=error\n"));
    assert!(dir.path().join("o/estimates.csv").is_file());
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeat_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_config("dumbbell_neckpinch.cfg", a.path()).status.code(), Some(0));
    let out = bin()
        .args(["run", "--threads", "1", "--config"])
        .arg(configs().join("dumbbell_neckpinch.cfg"))
        .arg("--output")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), tb.len());
    for ((pa, da), (pb, db)) in ta.iter().zip(&tb) {
        assert_eq!(pa, pb);
        assert!(da == db, "{} differs", pa.display());
    }
    let verdicts = fs::read_to_string(a.path().join("verdicts.jsonl")).unwrap();
    assert!(verdicts.lines().any(|l| l.contains("\"kind\":\"center\"")));
}

#[test]
fn replay_reproduces_the_audits() {
    let run = tempfile::tempdir().unwrap();
    let replay = tempfile::tempdir().unwrap();
    assert_eq!(run_config("sobolev_failure.cfg", run.path()).status.code(), Some(2));
    let out = bin()
        .arg("replay")
        .arg(run.path())
        .arg("--config")
        .arg(configs().join("sobolev_failure.cfg"))
        .arg("--output")
        .arg(replay.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let a = fs::read(run.path().join("estimates.csv")).unwrap();
    let b = fs::read(replay.path().join("estimates.csv")).unwrap();
    assert_eq!(a, b);
    assert!(manifest(replay.path()).contains("command=replay\n"));
    assert!(!replay.path().join("checkpoints").exists());
}

#[test]
fn every_audit_is_exercised_by_a_bundled_config() {
    let text = String::from_utf8(bin().args(["describe", "audits"]).output().unwrap().stdout).unwrap();
    let listed: BTreeSet<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with(' '))
        .filter_map(|l| l.split('\t').next())
        .collect();
    assert!(listed.len() >= 10);

    let mut used = BTreeSet::new();
    for e in fs::read_dir(configs()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().and_then(|x| x.to_str()) != Some("cfg") {
            continue;
        }
        let mut labels = BTreeSet::new();
        let mut kinds = BTreeSet::new();
        for line in fs::read_to_string(&p).unwrap().lines() {
            let body = line.split('#').next().unwrap().trim();
            let Some((k, v)) = body.split_once('=') else { continue };
            let Some(rest) = k.trim().strip_prefix("audit.") else { continue };
            let (label, param) = rest.split_once('.').unwrap();
            labels.insert(label.to_string());
            if param == "kind" {
                kinds.insert((label.to_string(), v.trim().to_string()));
            }
        }
        for l in &labels {
            used.insert(kinds.iter().find(|(x, _)| x == l).map_or(l.clone(), |(_, k)| k.clone()));
        }
    }
    let missing: Vec<_> = listed.iter().filter(|a| !used.contains(**a)).collect();
    assert!(missing.is_empty(), "not in any config: {missing:?}");
}
