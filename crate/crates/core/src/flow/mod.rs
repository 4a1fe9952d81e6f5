//! Ricci flow `∂g/∂t = −2 Ric` for warped metrics.
//!
//! In the fixed-x gauge the flow reduces to
//! `ψ_t = −Ric_sph · ψ` and `φ_t = −Ric_rad · φ`, i.e.
//! `ψ_t = ψ_ss − (n−2)(1 − ψ_s²)/ψ` and `φ_t = (n−1)(ψ_ss/ψ) φ`.
//! Time stepping is Heun's method (explicit RK2) under a parabolic step
//! limit, halving the step whenever a stage fails.

pub mod io;
mod monitor;
mod presets;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{curvature, End, WarpedMetric};
use crate::numerics::linear_fit;

pub use monitor::{fit_blowup_exponent, monitor_hypotheses, HypothesisReport};
pub use presets::{make_preset, make_preset_on, Preset, DEFAULT_NECK_WIDTH, PRESET_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegridPolicy {
    None,
    Fixed,
}

/// Step-size control and stopping rules for [`evolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowController {
    pub cfl_fraction: f64,
    pub max_steps: usize,
    /// Stop once the waist (neck radius, or largest ψ when there is no neck)
    /// falls to this value.
    pub stop_min_psi: f64,
    pub stop_max_rm: f64,
    pub checkpoint_stride: f64,
    pub regrid_policy: RegridPolicy,
    /// Optional final time.
    pub t_end: Option<f64>,
}

impl Default for FlowController {
    fn default() -> Self {
        FlowController {
            cfl_fraction: 0.3,
            max_steps: 2_000_000,
            stop_min_psi: 0.05,
            stop_max_rm: 1e6,
            checkpoint_stride: 1e-3,
            regrid_policy: RegridPolicy::Fixed,
            t_end: None,
        }
    }
}

impl FlowController {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 0.5) {
            return Err(Error::Parameter(format!("cfl_fraction {} outside (0, 0.5]", self.cfl_fraction)));
        }
        for (name, v) in [
            ("stop_min_psi", self.stop_min_psi),
            ("stop_max_rm", self.stop_max_rm),
            ("checkpoint_stride", self.checkpoint_stride),
        ] {
            if !(v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Parameter("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MinPsi,
    MaxRm,
    EndTime,
    MaxSteps,
    /// Repeated step halving could not produce a valid step.
    Unstable(String),
    /// Not produced by a flow: a static or externally built trajectory.
    Static,
}

impl StopReason {
    pub fn as_str(&self) -> String {
        match self {
            StopReason::MinPsi => "min-psi".into(),
            StopReason::MaxRm => "max-rm".into(),
            StopReason::EndTime => "end-time".into(),
            StopReason::MaxSteps => "max-steps".into(),
            StopReason::Unstable(m) => format!("unstable: {m}"),
            StopReason::Static => "static".into(),
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "min-psi" => StopReason::MinPsi,
            "max-rm" => StopReason::MaxRm,
            "end-time" => StopReason::EndTime,
            "max-steps" => StopReason::MaxSteps,
            "static" => StopReason::Static,
            other => StopReason::Unstable(other.trim_start_matches("unstable: ").to_string()),
        }
    }
}

/// Checkpoints of a solution on `[0, T)`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub checkpoints: Vec<WarpedMetric>,
    pub times: Vec<f64>,
    pub singular_time_estimate: Option<f64>,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub controller: Option<FlowController>,
}

impl Trajectory {
    /// A static trajectory: the same metric at every listed time.
    pub fn stationary(m: &WarpedMetric, times: &[f64]) -> Result<Self> {
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("times must be non-empty and strictly increasing".into()));
        }
        Ok(Trajectory {
            checkpoints: times.iter().map(|&t| m.clone().with_time(t)).collect(),
            times: times.to_vec(),
            singular_time_estimate: None,
            stop_reason: StopReason::Static,
            steps: 0,
            controller: None,
        })
    }

    /// Wraps externally built checkpoints, taking times from the metrics.
    pub fn from_checkpoints(checkpoints: Vec<WarpedMetric>) -> Result<Self> {
        let times: Vec<f64> = checkpoints.iter().map(|m| m.time()).collect();
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("checkpoint times must be non-empty and strictly increasing".into()));
        }
        Ok(Trajectory {
            checkpoints,
            times,
            singular_time_estimate: None,
            stop_reason: StopReason::Static,
            steps: 0,
            controller: None,
        })
    }

    /// Declares a singular time for a trajectory that has none.
    pub fn with_singular_time(mut self, t: f64) -> Self {
        self.singular_time_estimate = Some(t);
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn last(&self) -> &WarpedMetric {
        &self.checkpoints[self.checkpoints.len() - 1]
    }

    pub fn singular_time(&self) -> Result<f64> {
        self.singular_time_estimate.ok_or(Error::NeedsSingularTime)
    }

    /// Index of the checkpoint nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        (0..self.times.len())
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
            .unwrap_or(0)
    }

    /// The metric at time `t`, linear in time between checkpoints.
    pub fn metric_at(&self, t: f64) -> Result<WarpedMetric> {
        let (t0, t1) = (self.first_time(), self.last_time());
        let tol = 1e-12 * t1.abs().max(1.0);
        if t < t0 - tol || t > t1 + tol {
            return Err(Error::Coverage { start: t, end: t, first: t0, last: t1 });
        }
        let k = crate::numerics::locate(&self.times, t.clamp(t0, t1));
        if self.times.len() == 1 {
            return Ok(self.checkpoints[0].clone());
        }
        let (a, b) = (&self.checkpoints[k], &self.checkpoints[k + 1]);
        let w = ((t - self.times[k]) / (self.times[k + 1] - self.times[k])).clamp(0.0, 1.0);
        if w == 0.0 {
            return Ok(a.clone());
        }
        if w == 1.0 {
            return Ok(b.clone());
        }
        let mix = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (1.0 - w) * x + w * y).collect();
        WarpedMetric::new(a.grid().clone(), mix(a.phi(), b.phi()), mix(a.psi(), b.psi()), a.dim(), t)
    }

    /// `C·g(t/C)`: every checkpoint scaled by `C`, times by `C`.
    pub fn rescale(&self, c: f64) -> Result<Self> {
        Ok(Trajectory {
            checkpoints: self.checkpoints.iter().map(|m| m.rescale(c)).collect::<Result<_>>()?,
            times: self.times.iter().map(|t| t * c).collect(),
            singular_time_estimate: self.singular_time_estimate.map(|t| t * c),
            stop_reason: self.stop_reason.clone(),
            steps: self.steps,
            controller: self.controller.clone(),
        })
    }

    /// Checks that `[start, end]` lies inside the checkpoint range.
    pub fn require_window(&self, start: f64, end: f64) -> Result<()> {
        let (t0, t1) = (self.first_time(), self.last_time());
        let tol = 1e-9 * t1.abs().max(1.0);
        if start < t0 - tol || end > t1 + tol || start > end {
            return Err(Error::Coverage { start, end, first: t0, last: t1 });
        }
        Ok(())
    }
}

/// The scale that collapses first: the smallest interior local minimum of ψ
/// (a neck) or, when ψ has none, its maximum.
pub fn waist(m: &WarpedMetric) -> f64 {
    match m.neck_index() {
        Some(i) => m.psi()[i],
        None => m.max_psi(),
    }
}

/// Time derivatives `(φ_t, ψ_t)` of the flow.
pub fn rhs(m: &WarpedMetric) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = curvature(m)?;
    let n = m.grid().node_count();
    let mut phi_t: Vec<f64> = (0..n).map(|i| -c.ric_radial[i] * m.phi()[i]).collect();
    upwind_lapse(m, &mut phi_t);
    let mut psi_t: Vec<f64> = (0..n).map(|i| -c.ric_sphere[i] * m.psi()[i]).collect();
    if m.grid().far_end() == End::Boundary {
        phi_t[n - 1] = 0.0;
        psi_t[n - 1] = 0.0;
    }
    Ok((phi_t, psi_t))
}

/// Replaces the centred `φ_x` in the lapse equation by a one-sided
/// difference taken upwind of its transport velocity `(n−1)ψ_x/(φ²ψ)`.
/// That velocity is singular at the poles and points away from them, and
/// centred differences there admit a growing mode.
fn upwind_lapse(m: &WarpedMetric, phi_t: &mut [f64]) {
    let g = m.grid();
    let n = g.node_count();
    let x = g.x();
    let (phi, psi) = (m.phi(), m.psi());
    let dp = g.derivatives(psi, crate::geometry::Parity::Odd);
    let df = g.derivatives(phi, crate::geometry::Parity::Even);
    let far_pole = g.far_end() == End::Pole;
    // Node value and position with even reflection through pole ends.
    let at = |j: isize| -> (f64, f64) {
        if j < 0 {
            (-x[(-j) as usize], phi[(-j) as usize])
        } else if j as usize >= n {
            let k = 2 * (n - 1) - j as usize;
            (2.0 - x[k], phi[k])
        } else {
            (x[j as usize], phi[j as usize])
        }
    };
    let k = (m.dim() - 1) as f64;
    for i in 1..n - 1 {
        let p1 = dp.d1[i];
        let step: isize = if p1 > 0.0 { -1 } else { 1 };
        let i = i as isize;
        let (j1, j2) = (i + step, i + 2 * step);
        if (j2 < 0 || j2 as usize >= n) && !(j2 < 0 || far_pole) {
            continue;
        }
        let pts = [at(i), at(j1), at(j2)];
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let w = crate::numerics::fornberg_weights(pts[0].0, &xs, 1);
        let f1_up: f64 = w[1].iter().zip(&pts).map(|(a, p)| a * p.1).sum();
        let iu = i as usize;
        let f = phi[iu];
        phi_t[iu] += k * p1 * (df.d1[iu] - f1_up) / (f * f * psi[iu]);
    }
}

fn advance(m: &WarpedMetric, dt: f64, phi_t: &[f64], psi_t: &[f64]) -> Result<WarpedMetric> {
    let phi: Vec<f64> = m.phi().iter().zip(phi_t).map(|(f, d)| f + dt * d).collect();
    let psi: Vec<f64> = m.psi().iter().zip(psi_t).map(|(p, d)| p + dt * d).collect();
    assemble(m, phi, psi, m.time() + dt)
}

fn assemble(m: &WarpedMetric, mut phi: Vec<f64>, psi: Vec<f64>, time: f64) -> Result<WarpedMetric> {
    let g = m.grid();
    close_poles(g, &mut phi, &psi);
    for i in 0..phi.len() {
        if !(phi[i].is_finite() && psi[i].is_finite()) {
            return Err(Error::Instability { node: i });
        }
        if phi[i] <= 0.0 {
            return Err(Error::Instability { node: i });
        }
        if !g.is_pole(i) && psi[i] <= 0.0 {
            return Err(Error::SingularityCrossed { node: i });
        }
    }
    WarpedMetric::new(g.clone(), phi, psi, m.dim(), time)
}

/// Imposes the closing condition `|ψ_s| = 1` at the poles by setting
/// `φ = |ψ_x|` there. The lapse equation transports information away from
/// a pole, so its pole value is boundary data rather than an unknown.
fn close_poles(g: &crate::geometry::Grid, phi: &mut [f64], psi: &[f64]) {
    let d = g.derivatives(psi, crate::geometry::Parity::Odd);
    let n = phi.len();
    phi[0] = d.d1[0].abs();
    if g.far_end() == End::Pole {
        phi[n - 1] = d.d1[n - 1].abs();
    }
}

/// One Heun (RK2) step of size `dt`.
pub fn step(m: &WarpedMetric, dt: f64) -> Result<WarpedMetric> {
    if dt == 0.0 {
        return Ok(m.clone());
    }
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step {dt} must be non-negative")));
    }
    let (f1, p1) = rhs(m)?;
    let stage = advance(m, dt, &f1, &p1)?;
    let (f2, p2) = rhs(&stage)?;
    let phi: Vec<f64> = (0..f1.len()).map(|i| m.phi()[i] + 0.5 * dt * (f1[i] + f2[i])).collect();
    let psi: Vec<f64> = (0..p1.len()).map(|i| m.psi()[i] + 0.5 * dt * (p1[i] + p2[i])).collect();
    assemble(m, phi, psi, m.time() + dt)
}

/// Step limit for the current metric: `cfl` times the explicit limit
/// `min(Δs²/2, 1/max|Rm|)`. With the seven-point stencils Heun's method
/// loses stability near the poles once the fraction exceeds about 0.4.
pub fn stable_dt(m: &WarpedMetric, cfl: f64) -> Result<f64> {
    let ds_min = m.arclength().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let rm = curvature(m)?.max_rm();
    let mut dt = 0.5 * cfl * ds_min * ds_min;
    if rm > 0.0 {
        dt = dt.min(cfl / rm);
    }
    Ok(dt)
}

/// Least-squares extrapolation of waist² to zero over the last ten
/// checkpoints.
pub fn estimate_singular_time(times: &[f64], waists: &[f64]) -> Option<f64> {
    let k = times.len().min(10);
    if k < 3 {
        return None;
    }
    let ts = &times[times.len() - k..];
    let w2: Vec<f64> = waists[waists.len() - k..].iter().map(|w| w * w).collect();
    let (a, b) = linear_fit(ts, &w2);
    (b < 0.0).then(|| -a / b)
}

/// Evolves `m0` until a stopping rule fires, recording checkpoints at every
/// multiple of the stride plus the final state.
pub fn evolve(m0: &WarpedMetric, ctl: &FlowController) -> Result<Trajectory> {
    ctl.validate()?;
    curvature(m0)?;
    let mut m = m0.clone();
    let mut traj = Trajectory {
        checkpoints: vec![m.clone()],
        times: vec![m.time()],
        singular_time_estimate: None,
        stop_reason: StopReason::MaxSteps,
        steps: 0,
        controller: Some(ctl.clone()),
    };
    let mut waists = vec![waist(&m)];
    let mut next_cp = 1usize;
    let t_start = m.time();
    let stop = loop {
        if traj.steps >= ctl.max_steps {
            break StopReason::MaxSteps;
        }
        let t = m.time();
        let target = t_start + next_cp as f64 * ctl.checkpoint_stride;
        let mut dt = match stable_dt(&m, ctl.cfl_fraction) {
            Ok(v) => v,
            Err(e) => break StopReason::Unstable(e.to_string()),
        };
        let mut hit_cp = false;
        if t + dt >= target {
            dt = target - t;
            hit_cp = true;
        }
        let mut hit_end = false;
        if let Some(te) = ctl.t_end {
            if t + dt >= te {
                dt = te - t;
                hit_end = true;
                hit_cp = (te - target).abs() <= 1e-12 * te.abs().max(1.0);
            }
        }
        let mut result = step(&m, dt);
        let mut halvings = 0;
        while result.is_err() && halvings < 30 {
            dt *= 0.5;
            hit_cp = false;
            hit_end = false;
            halvings += 1;
            result = step(&m, dt);
        }
        let next = match result {
            Ok(v) => v,
            Err(e) => break StopReason::Unstable(e.to_string()),
        };
        traj.steps += 1;
        m = if hit_cp {
            next.with_time(target)
        } else if hit_end {
            next.with_time(ctl.t_end.unwrap())
        } else {
            next
        };
        let w = waist(&m);
        let rm = curvature(&m).map(|c| c.max_rm()).unwrap_or(f64::INFINITY);
        let reason = if w <= ctl.stop_min_psi {
            Some(StopReason::MinPsi)
        } else if rm >= ctl.stop_max_rm {
            Some(StopReason::MaxRm)
        } else if hit_end {
            Some(StopReason::EndTime)
        } else {
            None
        };
        if hit_cp {
            traj.checkpoints.push(m.clone());
            traj.times.push(m.time());
            waists.push(w);
            next_cp += 1;
        }
        if let Some(r) = reason {
            break r;
        }
    };
    if traj.last_time() < m.time() {
        waists.push(waist(&m));
        traj.times.push(m.time());
        traj.checkpoints.push(m);
    }
    traj.stop_reason = stop;
    traj.singular_time_estimate = estimate_singular_time(&traj.times, &waists);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(n: usize) -> WarpedMetric {
        make_preset(&Preset::RoundSphere { radius: 1.0 }, n).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let m = sphere(64);
        let s = step(&m, 0.0).unwrap();
        assert_eq!(s.phi(), m.phi());
        assert_eq!(s.psi(), m.psi());
    }

    #[test]
    fn sphere_step_shrinks_homothetically() {
        let m = sphere(200);
        let dt = 1e-4;
        let s = step(&m, dt).unwrap();
        let k = (1.0 - 6.0 * dt).sqrt();
        for i in 1..199 {
            assert!((s.psi()[i] / m.psi()[i] - k).abs() < 1e-9);
        }
        let r = curvature(&s).unwrap().scalar[100];
        assert!((r - 12.0 / (1.0 - 6.0 * dt)).abs() < 1e-5);
    }

    #[test]
    fn cylinder_mode() {
        let c0 = 0.5;
        let m = make_preset(&Preset::CylinderCapped { radius: c0, length: 10.0 }, 401).unwrap();
        let dt = 1e-5;
        let s = step(&m, dt).unwrap();
        let expected = m.psi()[200] - 2.0 * dt / m.psi()[200];
        assert!((s.psi()[200] - expected).abs() < 1e-8);
    }

    #[test]
    fn flat_cap_is_a_fixed_point() {
        let m = make_preset(&Preset::EuclideanCap { radius: 1.0 }, 128).unwrap();
        let s = step(&m, 1e-4).unwrap();
        for (a, b) in s.phi().iter().zip(m.phi()).chain(s.psi().iter().zip(m.psi())) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn evolve_stops_at_end_time_with_checkpoints() {
        let ctl = FlowController { checkpoint_stride: 0.01, t_end: Some(0.05), ..Default::default() };
        let t = evolve(&sphere(100), &ctl).unwrap();
        assert_eq!(t.stop_reason, StopReason::EndTime);
        assert_eq!(t.times.len(), 6);
        for (k, tk) in t.times.iter().enumerate() {
            assert!((tk - 0.01 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn max_steps_is_reported() {
        let ctl = FlowController { max_steps: 3, ..Default::default() };
        let t = evolve(&sphere(64), &ctl).unwrap();
        assert_eq!(t.stop_reason, StopReason::MaxSteps);
        assert_eq!(t.steps, 3);
    }

    #[test]
    fn controller_validation() {
        let bad = FlowController { cfl_fraction: 0.7, ..Default::default() };
        assert!(evolve(&sphere(64), &bad).is_err());
    }

    #[test]
    fn metric_at_interpolates_and_checks_coverage() {
        let m = sphere(64);
        let t = Trajectory::stationary(&m, &[0.0, 1.0]).unwrap();
        assert!(t.metric_at(0.5).is_ok());
        assert!(matches!(t.metric_at(2.0), Err(Error::Coverage { .. })));
    }
}
