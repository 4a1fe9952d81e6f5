//! Trajectory directories: one snapshot per checkpoint, named by zero-padded
//! index, plus a key=value `manifest`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{FlowController, RegridPolicy, StopReason, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::snapshot;

pub fn checkpoint_name(index: usize) -> String {
    format!("{index:06}.snap")
}

pub fn write_trajectory(traj: &Trajectory, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (k, m) in traj.checkpoints.iter().enumerate() {
        snapshot::write(&dir.join(checkpoint_name(k)), m, None)?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "count={}", traj.len());
    let times: Vec<String> = traj.times.iter().map(|t| format!("{t:.16e}")).collect();
    let _ = writeln!(out, "times={}", times.join(","));
    let _ = writeln!(out, "stop_reason={}", traj.stop_reason.as_str());
    let _ = writeln!(out, "steps={}", traj.steps);
    if let Some(t) = traj.singular_time_estimate {
        let _ = writeln!(out, "singular_time_estimate={t:.16e}");
    }
    if let Some(c) = &traj.controller {
        let _ = writeln!(out, "controller.cfl_fraction={}", c.cfl_fraction);
        let _ = writeln!(out, "controller.max_steps={}", c.max_steps);
        let _ = writeln!(out, "controller.stop_min_psi={}", c.stop_min_psi);
        let _ = writeln!(out, "controller.stop_max_rm={}", c.stop_max_rm);
        let _ = writeln!(out, "controller.checkpoint_stride={}", c.checkpoint_stride);
        let policy = match c.regrid_policy {
            RegridPolicy::None => "none",
            RegridPolicy::Fixed => "fixed",
        };
        let _ = writeln!(out, "controller.regrid_policy={policy}");
        if let Some(te) = c.t_end {
            let _ = writeln!(out, "controller.t_end={te}");
        }
    }
    std::fs::write(dir.join("manifest"), out)?;
    Ok(())
}

fn parse_manifest(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or(Error::Parse { line: i + 1, message: format!("expected key=value, found `{line}`") })?;
        map.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    Ok(map)
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(dir.join("manifest"))?;
    let map = parse_manifest(&text)?;
    let get = |k: &str| map.get(k).ok_or(Error::Parse { line: 0, message: format!("manifest lacks `{k}`") });
    let num = |k: &str| -> Result<f64> {
        let (line, v) = get(k)?;
        v.parse().map_err(|_| Error::Parse { line: *line, message: format!("bad number for `{k}`") })
    };
    let count = num("count")? as usize;
    let (tline, tv) = get("times")?;
    let times: Vec<f64> = tv
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse { line: *tline, message: "bad times list".into() })?;
    if times.len() != count {
        return Err(Error::Parse { line: *tline, message: format!("{} times for {count} checkpoints", times.len()) });
    }
    let mut checkpoints = Vec::with_capacity(count);
    let mut grid = None;
    for k in 0..count {
        let snap = snapshot::read(&dir.join(checkpoint_name(k)), grid.as_ref())?;
        grid = Some(snap.metric.grid().clone());
        checkpoints.push(snap.metric);
    }
    let controller = if map.contains_key("controller.cfl_fraction") {
        Some(FlowController {
            cfl_fraction: num("controller.cfl_fraction")?,
            max_steps: num("controller.max_steps")? as usize,
            stop_min_psi: num("controller.stop_min_psi")?,
            stop_max_rm: num("controller.stop_max_rm")?,
            checkpoint_stride: num("controller.checkpoint_stride")?,
            regrid_policy: match get("controller.regrid_policy").map(|v| v.1.as_str()) {
                Ok("none") => RegridPolicy::None,
                _ => RegridPolicy::Fixed,
            },
            t_end: num("controller.t_end").ok(),
        })
    } else {
        None
    };
    Ok(Trajectory {
        checkpoints,
        times,
        singular_time_estimate: num("singular_time_estimate").ok(),
        stop_reason: StopReason::parse(&get("stop_reason")?.1),
        steps: num("steps").map(|v| v as usize).unwrap_or(0),
        controller,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{evolve, make_preset, Preset};

    #[test]
    fn trajectory_round_trip() {
        let m = make_preset(&Preset::RoundSphere { radius: 1.0 }, 48).unwrap();
        let ctl = FlowController { checkpoint_stride: 0.01, t_end: Some(0.03), ..Default::default() };
        let t = evolve(&m, &ctl).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trajectory(&t, dir.path()).unwrap();
        let back = read_trajectory(dir.path()).unwrap();
        assert_eq!(back.times, t.times);
        assert_eq!(back.stop_reason, t.stop_reason);
        assert_eq!(back.controller, t.controller);
        for (a, b) in back.checkpoints.iter().zip(&t.checkpoints) {
            assert_eq!(a.psi(), b.psi());
            assert_eq!(a.phi(), b.phi());
        }
    }
}
