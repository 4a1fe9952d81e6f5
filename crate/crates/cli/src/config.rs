//! Run configuration: flat `key = value` lines with dotted section prefixes.
//!
//! ```text
//! # comment
//! output = runs/sphere
//! seed = 0
//! scenario.preset = round_sphere
//! scenario.radius = 1.0
//! grid.nodes = 201
//! controller.checkpoint_stride = 0.005
//! constants.A = 0.1
//! trajectory.mode = evolve          # or: static
//! trajectory.times = 0, 0.5, 1      # static only
//! trajectory.singular_time = 1      # declares T
//! audit.pole.kind = noncollapse     # kind defaults to the label
//! audit.pole.radii = 0.1, 0.2
//! ```
//!
//! Keys may appear once. Audits run in the order of their first line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ricci_lab::flow::{FlowController, Preset, RegridPolicy};
use ricci_lab::ConstantSet;

use crate::error::CliError;

/// A value with the line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    Evolve,
    Static,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSpec {
    pub label: String,
    pub kind: String,
    pub line: usize,
    pub params: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Option<PathBuf>,
    pub preset_name: String,
    pub preset_params: BTreeMap<String, f64>,
    pub preset: Preset,
    pub nodes: usize,
    pub controller: FlowController,
    pub constants: ConstantSet,
    pub audits: Vec<AuditSpec>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub mode: Mode,
    pub times: Vec<f64>,
    pub singular_time: Option<f64>,
}

fn err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config { line, message: message.into() }
}

fn number(e: &Entry, key: &str) -> Result<f64, CliError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(e.line, format!("`{key}` expects a number, found `{}`", e.value)))
}

pub fn number_list(e: &Entry, key: &str) -> Result<Vec<f64>, CliError> {
    e.value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(e.line, format!("`{key}` expects numbers, found `{v}`")))
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut keys: BTreeMap<String, Entry> = BTreeMap::new();
        let mut order: Vec<(String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) =
                body.split_once('=').ok_or_else(|| err(line, format!("expected key = value, found `{body}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(err(line, format!("bad key `{k}`")));
            }
            if v.is_empty() {
                return Err(err(line, format!("`{k}` has no value")));
            }
            if let Some(prev) = keys.get(k) {
                return Err(err(line, format!("`{k}` already set on line {}", prev.line)));
            }
            if let Some(rest) = k.strip_prefix("audit.") {
                let label = rest.split('.').next().unwrap_or("");
                if !order.iter().any(|(l, _)| l == label) {
                    order.push((label.to_string(), line));
                }
            }
            keys.insert(k.to_string(), Entry { line, value: v.to_string() });
        }

        let mut preset_name = None;
        let mut preset_params = BTreeMap::new();
        let mut nodes = 201usize;
        let mut controller = FlowController::default();
        let mut constants = ConstantSet::default();
        let mut output_dir = None;
        let mut seed = 0u64;
        let mut mode = Mode::Evolve;
        let mut times = Vec::new();
        let mut singular_time = None;
        let mut audit_keys: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();

        for (k, e) in &keys {
            let (section, rest) = k.split_once('.').unwrap_or((k.as_str(), ""));
            match (section, rest) {
                ("output", "") => output_dir = Some(PathBuf::from(&e.value)),
                ("seed", "") => {
                    seed = e
                        .value
                        .parse()
                        .map_err(|_| err(e.line, format!("seed must be an integer, found `{}`", e.value)))?
                }
                ("scenario", "preset") => preset_name = Some((e.value.clone(), e.line)),
                ("scenario", p) if !p.is_empty() => {
                    preset_params.insert(p.to_string(), number(e, k)?);
                }
                ("grid", "nodes") => {
                    let v = number(e, k)?;
                    if !(v >= 5.0 && v.fract() == 0.0) {
                        return Err(err(e.line, format!("grid.nodes must be an integer >= 5, found {v}")));
                    }
                    nodes = v as usize;
                }
                ("controller", field) => set_controller(&mut controller, field, e)?,
                ("constants", name) => {
                    let v = number(e, k)?;
                    constants.set(name, v).map_err(|x| err(e.line, x.to_string()))?;
                }
                ("trajectory", "mode") => {
                    mode = match e.value.as_str() {
                        "evolve" => Mode::Evolve,
                        "static" => Mode::Static,
                        other => {
                            return Err(err(
                                e.line,
                                format!("trajectory.mode must be evolve or static, found `{other}`"),
                            ))
                        }
                    }
                }
                ("trajectory", "times") => times = number_list(e, k)?,
                ("trajectory", "singular_time") => singular_time = Some(number(e, k)?),
                ("audit", rest) => {
                    let (label, param) = rest.split_once('.').ok_or_else(|| {
                        err(e.line, format!("audit keys look like audit.<label>.<param>, found `{k}`"))
                    })?;
                    if label.is_empty() || param.is_empty() {
                        return Err(err(e.line, format!("bad audit key `{k}`")));
                    }
                    audit_keys.entry(label.to_string()).or_default().insert(param.to_string(), e.clone());
                }
                _ => return Err(err(e.line, format!("unknown key `{k}`"))),
            }
        }

        let (preset_name, pline) = preset_name.ok_or_else(|| err(0, "missing scenario.preset"))?;
        let preset = Preset::from_params(&preset_name, &preset_params).map_err(|x| err(pline, x.to_string()))?;
        if mode == Mode::Static {
            let line = keys.get("trajectory.times").map_or(0, |e| e.line);
            if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(err(line, "static trajectories need strictly increasing trajectory.times"));
            }
        }

        let mut audits = Vec::new();
        for (label, line) in order {
            let mut params = audit_keys.remove(&label).unwrap_or_default();
            let kind = params.remove("kind").map_or(label.clone(), |e| e.value);
            let known = crate::audits::find(&kind).ok_or_else(|| err(line, format!("unknown audit `{kind}`")))?;
            for (p, e) in &params {
                if !known.params.iter().any(|(name, _)| name == p) {
                    return Err(err(e.line, format!("audit `{kind}` has no parameter `{p}`")));
                }
            }
            audits.push(AuditSpec { label, kind, line, params });
        }

        Ok(RunConfig {
            source: None,
            preset_name,
            preset_params,
            preset,
            nodes,
            controller,
            constants,
            audits,
            output_dir,
            seed,
            mode,
            times,
            singular_time,
        })
    }
}

fn set_controller(c: &mut FlowController, field: &str, e: &Entry) -> Result<(), CliError> {
    let key = format!("controller.{field}");
    match field {
        "cfl_fraction" => c.cfl_fraction = number(e, &key)?,
        "max_steps" => c.max_steps = number(e, &key)? as usize,
        "stop_min_psi" => c.stop_min_psi = number(e, &key)?,
        "stop_max_rm" => c.stop_max_rm = number(e, &key)?,
        "checkpoint_stride" => c.checkpoint_stride = number(e, &key)?,
        "t_end" => c.t_end = Some(number(e, &key)?),
        "regrid_policy" => {
            c.regrid_policy = match e.value.as_str() {
                "none" => RegridPolicy::None,
                "fixed" => RegridPolicy::Fixed,
                other => return Err(err(e.line, format!("regrid_policy must be none or fixed, found `{other}`"))),
            }
        }
        _ => return Err(err(e.line, format!("unknown key `{key}`"))),
    }
    c.validate().map_err(|x| err(e.line, x.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg = RunConfig::parse(
            "# sphere\nscenario.preset = round_sphere\nscenario.radius = 2\ngrid.nodes = 101\n\
             controller.t_end = 0.1\nconstants.A = 0.5\naudit.b.kind = noncollapse\naudit.a.kind = hypothesis\n",
        )
        .unwrap();
        assert_eq!(cfg.preset, Preset::RoundSphere { radius: 2.0 });
        assert_eq!(cfg.nodes, 101);
        assert_eq!(cfg.controller.t_end, Some(0.1));
        assert_eq!(cfg.constants.a, 0.5);
        let labels: Vec<&str> = cfg.audits.iter().map(|a| a.label.as_str()).collect();
        assert_eq!(labels, ["b", "a"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match RunConfig::parse(text) {
            Err(CliError::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("scenario.preset = round_sphere\n\nnonsense\n"), 3);
        assert_eq!(line_of("scenario.preset = round_sphere\ngrid.nodes = x\n"), 2);
        assert_eq!(line_of("scenario.preset = round_sphere\nconstants.Q = 1\n"), 2);
        assert_eq!(line_of("scenario.preset = round_sphere\naudit.x.kind = nope\n"), 2);
        assert_eq!(line_of("scenario.preset = round_sphere\naudit.moser.bogus = 1\n"), 2);
        assert_eq!(line_of("scenario.preset = blob\n"), 1);
        assert_eq!(line_of("scenario.preset = round_sphere\nseed = 1\nseed = 2\n"), 3);
    }
}
