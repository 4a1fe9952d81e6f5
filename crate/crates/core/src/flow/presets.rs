//! Initial metrics for the scenario catalogue.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{End, Grid, WarpedMetric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preset {
    /// The round sphere of radius ρ: `φ ≡ πρ`, `ψ = ρ sin(πx)`.
    RoundSphere { radius: f64 },
    /// Bulbs of radius `rho_b` joined by one or two necks of radius `rho_n`.
    Dumbbell { rho_b: f64, rho_n: f64, necks: usize, width: f64 },
    /// The flat ball of the given radius, with its boundary sphere at `x = 1`.
    EuclideanCap { radius: f64 },
    /// A cylinder of radius `radius` closed by two smooth caps; `length` is
    /// the axis length.
    CylinderCapped { radius: f64, length: f64 },
    /// A round sphere with a shallow dip of relative `depth` at the equator.
    PerturbedSphere { radius: f64, depth: f64, width: f64 },
}

pub const PRESET_NAMES: [&str; 5] =
    ["round_sphere", "dumbbell", "euclidean_cap", "cylinder_capped", "perturbed_sphere"];

pub const DEFAULT_NECK_WIDTH: f64 = 0.35;

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::RoundSphere { .. } => "round_sphere",
            Preset::Dumbbell { .. } => "dumbbell",
            Preset::EuclideanCap { .. } => "euclidean_cap",
            Preset::CylinderCapped { .. } => "cylinder_capped",
            Preset::PerturbedSphere { .. } => "perturbed_sphere",
        }
    }

    /// Builds a preset from its name and a parameter map; missing
    /// parameters take their defaults.
    pub fn from_params(kind: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        let known: &[&str] = match kind {
            "round_sphere" | "euclidean_cap" => &["radius"],
            "dumbbell" => &["rho_b", "rho_n", "necks", "width"],
            "cylinder_capped" => &["radius", "length"],
            "perturbed_sphere" => &["radius", "depth", "width"],
            _ => return Err(Error::Parameter(format!("unknown preset `{kind}`"))),
        };
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Parameter(format!("preset `{kind}` has no parameter `{k}`")));
        }
        let p = match kind {
            "round_sphere" => Preset::RoundSphere { radius: get("radius", 1.0) },
            "euclidean_cap" => Preset::EuclideanCap { radius: get("radius", 1.0) },
            "dumbbell" => Preset::Dumbbell {
                rho_b: get("rho_b", 1.0),
                rho_n: get("rho_n", 0.2),
                necks: get("necks", 1.0) as usize,
                width: get("width", DEFAULT_NECK_WIDTH),
            },
            "cylinder_capped" => Preset::CylinderCapped { radius: get("radius", 0.5), length: get("length", 8.0) },
            _ => Preset::PerturbedSphere {
                radius: get("radius", 1.0),
                depth: get("depth", 0.05),
                width: get("width", DEFAULT_NECK_WIDTH),
            },
        };
        Ok(p)
    }

    pub fn far_end(&self) -> End {
        match self {
            Preset::EuclideanCap { .. } => End::Boundary,
            _ => End::Pole,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {v}")))
    }
}

/// Sphere-like profile with Gaussian dips in `c = cos πx`:
/// `P(x) = sin(πx) W(cos πx) / W(1)`, `W(c) = 1 − d Σ exp(−(c − c_j)²/w²)`.
/// `W` is even about both poles, so `(L/π)·P` with `φ ≡ L` closes smoothly.
#[derive(Debug, Clone)]
struct DipProfile {
    depth: f64,
    width: f64,
    centres: Vec<f64>,
}

impl DipProfile {
    fn w(&self, c: f64) -> f64 {
        1.0 - self.depth
            * self.centres.iter().map(|cj| (-(c - cj) * (c - cj) / (self.width * self.width)).exp()).sum::<f64>()
    }

    fn eval(&self, x: f64) -> f64 {
        let c = (PI * x).cos();
        (PI * x).sin() * self.w(c) / self.w(1.0)
    }

    fn max(&self) -> f64 {
        refine_extremum(|x| self.eval(x), 0.0, 0.5, true)
    }

    /// Smallest local minimum of the profile between the bulbs.
    fn neck_min(&self) -> f64 {
        self.centres
            .iter()
            .map(|c| {
                let x0 = c.acos() / PI;
                refine_extremum(|x| self.eval(x), (x0 - 0.15).max(0.01), (x0 + 0.15).min(0.99), false)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Dense scan plus golden-section refinement of the max (or min) of `f` on
/// `[a, b]`.
fn refine_extremum(f: impl Fn(f64) -> f64, a: f64, b: f64, maximize: bool) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    let g = |x: f64| sign * f(x);
    let samples = 2000;
    let h = (b - a) / samples as f64;
    let best = (0..=samples).map(|i| a + i as f64 * h).min_by(|x, y| g(*x).total_cmp(&g(*y))).unwrap();
    let (mut lo, mut hi) = ((best - h).max(a), (best + h).min(b));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - r * (hi - lo);
        let m2 = lo + r * (hi - lo);
        if g(m1) < g(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi))
}

fn dumbbell_profile(rho_b: f64, rho_n: f64, necks: usize, width: f64) -> Result<(DipProfile, f64)> {
    positive("rho_b", rho_b)?;
    positive("rho_n", rho_n)?;
    positive("width", width)?;
    if rho_n >= rho_b {
        return Err(Error::Parameter(format!("neck radius {rho_n} must be below bulb radius {rho_b}")));
    }
    let centres = match necks {
        1 => vec![0.0],
        2 => vec![-0.5, 0.5],
        _ => return Err(Error::Parameter(format!("necks must be 1 or 2, got {necks}"))),
    };
    let target = rho_n / rho_b;
    let ratio = |d: f64| {
        let p = DipProfile { depth: d, width, centres: centres.clone() };
        p.neck_min() / p.max()
    };
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
    if ratio(lo) < target || ratio(hi) > target {
        return Err(Error::Parameter(format!("no dip depth gives neck/bulb ratio {target} with width {width}")));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = DipProfile { depth: 0.5 * (lo + hi), width, centres };
    let length = PI * rho_b / p.max();
    Ok((p, length))
}

/// Builds the initial metric of a preset on a uniform grid.
pub fn make_preset(preset: &Preset, nodes: usize) -> Result<WarpedMetric> {
    let grid = Arc::new(Grid::uniform(nodes, preset.far_end())?);
    make_preset_on(preset, grid)
}

pub fn make_preset_on(preset: &Preset, grid: Arc<Grid>) -> Result<WarpedMetric> {
    if grid.far_end() != preset.far_end() {
        return Err(Error::Parameter(format!("grid end does not match preset `{}`", preset.name())));
    }
    match *preset {
        Preset::RoundSphere { radius } => {
            positive("radius", radius)?;
            WarpedMetric::from_fn(grid, 4, |_| PI * radius, |x| radius * (PI * x).sin())
        }
        Preset::EuclideanCap { radius } => {
            positive("radius", radius)?;
            WarpedMetric::from_fn(grid, 4, |_| radius, |x| radius * x)
        }
        Preset::CylinderCapped { radius, length } => {
            positive("radius", radius)?;
            positive("length", length)?;
            if length < 4.0 * radius {
                return Err(Error::Parameter(format!("length {length} too short for a cylinder of radius {radius}")));
            }
            let k = length / (PI * radius);
            WarpedMetric::from_fn(grid, 4, |_| length, |x| radius * (k * (PI * x).sin()).tanh())
        }
        Preset::Dumbbell { rho_b, rho_n, necks, width } => {
            let (p, length) = dumbbell_profile(rho_b, rho_n, necks, width)?;
            WarpedMetric::from_fn(grid, 4, |_| length, |x| length / PI * p.eval(x))
        }
        Preset::PerturbedSphere { radius, depth, width } => {
            positive("radius", radius)?;
            positive("width", width)?;
            if !(0.0..1.0).contains(&depth) {
                return Err(Error::Parameter(format!("depth {depth} must lie in [0, 1)")));
            }
            let p = DipProfile { depth, width, centres: vec![0.0] };
            let length = PI * radius;
            WarpedMetric::from_fn(grid, 4, |_| length, |x| length / PI * p.eval(x))
        }
    }
}
