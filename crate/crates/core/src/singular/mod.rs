//! Good time sequences, regular/singular classification of points, clustering
//! of singular points and the `c/t` curvature decay diagnostic.
//!
//! Points handed to [`good_times`], [`classify_point`] and
//! [`ct_decay_audit`] are material: their `s` is arclength on the first
//! checkpoint, and at later times the point follows its grid coordinate.
//! [`cluster_singular`] returns points in the arclength of the checkpoint it
//! scanned; [`transport_point`] converts between the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{Direction, EstimateReport};
use crate::flow::Trajectory;
use crate::geometry::{ball_integral, curvature, distance, BallSpec, QuotientPoint, WarpedMetric};
use crate::numerics::{cumulative_integral, integral_to, interp_local, unit_sphere_area};

#[cfg(test)]
mod tests;

const REGULAR_EQ: &str = "int_{B(x, 4R sqrt(T-t_i))} |Rm|^2 dV <= eps0";
const CLUSTER_EQ: &str = "int_{B(p_j, Lambda sqrt(T-t_i))} |Rm|^2 dV > eps0, d(p_k, p_j) >= N(i) sqrt(T-t_i)";
const CT_EQ: &str = "|Rm|(x, t) <= c0 / (t - t_a)";

/// Smallest ball radius, in local mesh cells, at which a ball integral is
/// trusted.
pub const RESOLVED_CELLS: f64 = 4.0;

/// Thresholds and schedules of the classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationParams {
    /// `ε₀`, the `∫|Rm|²` threshold.
    pub eps0: f64,
    /// `R`, the ball multiplier of the regularity test.
    pub r_big: f64,
    /// `α`; good times integrate `|Ric|^{2+α³}`.
    pub alpha: f64,
    /// `Λ`, the ball multiplier of the cluster test.
    pub lambda: f64,
    /// `K₀` of `K_i = K₀ gⁱ`.
    pub k_start: f64,
    /// `N₀` of `N(i) = N₀ gⁱ`.
    pub n_start: f64,
    /// `g`, the ratio of the schedules. `ε_i = ε₀ g⁻ⁱ`.
    pub growth: f64,
}

impl Default for ClassificationParams {
    fn default() -> Self {
        ClassificationParams {
            eps0: 1.0,
            r_big: 1.0,
            alpha: 0.05,
            lambda: 1.0,
            k_start: 1.0,
            n_start: 8.0,
            growth: 2.0,
        }
    }
}

impl ClassificationParams {
    pub fn from_constants(c: &crate::ConstantSet) -> Self {
        ClassificationParams { eps0: c.eps0, alpha: c.alpha, lambda: c.lambda, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps0, self.r_big, self.alpha, self.lambda, self.k_start, self.n_start];
        if !all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("classification parameters must be positive: {self:?}")));
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return Err(Error::Parameter(format!("growth = {} must exceed 1", self.growth)));
        }
        Ok(())
    }

    /// Schedule index of time `t`: level `i` covers
    /// `T − t ∈ (τ₀ g^{−3(i+1)}, τ₀ g^{−3i}]` with `τ₀ = T − t_first`. The
    /// ball `K_i √(T−t)` then shrinks like `g^{−i/2}` while `ε_i` only halves,
    /// so smooth points eventually pass.
    pub fn level(&self, tau0: f64, t_sing: f64, t: f64) -> u32 {
        let ratio = tau0 / (t_sing - t);
        if !(ratio > 1.0) {
            return 0;
        }
        (ratio.ln() / (3.0 * self.growth.ln())).floor().min(64.0) as u32
    }

    pub fn k_i(&self, i: u32) -> f64 {
        self.k_start * self.growth.powi(i as i32)
    }

    pub fn eps_i(&self, i: u32) -> f64 {
        self.eps0 * self.growth.powi(-(i as i32))
    }

    pub fn n_i(&self, i: u32) -> f64 {
        self.n_start * self.growth.powi(i as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Regular,
    Singular,
    Undetermined,
}

/// Ball integrals at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    pub t: f64,
    /// `∫_{B(x, 4R√(T−t))} |Rm|²`.
    pub rm2: f64,
    /// `∫_{B(x, K_i√(T−t))} |Ric|^{2+α³}`.
    pub ric_q: f64,
    pub good: bool,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointVerdict {
    pub point: QuotientPoint,
    pub verdict: Verdict,
    /// Regular: good times where the `|Rm|²` test passed. Singular: the
    /// resolved times that violated it.
    pub witness_times: Vec<f64>,
    pub integrals: Vec<TimeSample>,
}

impl PointVerdict {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("verdicts serialize")
    }
}

/// Maps a material point from the arclength of the checkpoint at `from` to
/// that at `to` through its grid coordinate.
pub fn transport_point(traj: &Trajectory, p: QuotientPoint, from: usize, to: usize) -> Result<QuotientPoint> {
    let (a, b) = (checkpoint(traj, from)?, checkpoint(traj, to)?);
    p.check(a)?;
    Ok(QuotientPoint::new(arclength_of(b, a.x_at(p.s)), p.alpha))
}

fn checkpoint(traj: &Trajectory, k: usize) -> Result<&WarpedMetric> {
    traj.checkpoints
        .get(k)
        .ok_or_else(|| Error::Parameter(format!("checkpoint {k} out of range (have {})", traj.len())))
}

fn arclength_of(m: &WarpedMetric, x: f64) -> f64 {
    interp_local(m.grid().x(), m.arclength(), x).clamp(0.0, m.axis_length())
}

/// Widest row spacing among the rows within `r` of `s`, including the cell
/// that contains `s`.
fn local_cell(m: &WarpedMetric, s: f64, r: f64) -> f64 {
    let a = m.arclength();
    let k = crate::numerics::locate(a, s.clamp(a[0], a[a.len() - 1]));
    let mut h = a[k + 1] - a[k];
    for w in a.windows(2) {
        if w[1] >= s - r && w[0] <= s + r {
            h = h.max(w[1] - w[0]);
        }
    }
    h
}

struct Scan {
    t_sing: f64,
    tau0: f64,
    /// Checkpoint indices strictly before `T`.
    indices: Vec<usize>,
}

fn scan(traj: &Trajectory, p: &ClassificationParams) -> Result<Scan> {
    p.validate()?;
    if traj.is_empty() {
        return Err(Error::Parameter("trajectory has no checkpoints".into()));
    }
    let t_sing = traj.singular_time()?;
    let tau0 = t_sing - traj.first_time();
    if !(tau0 > 0.0) {
        return Err(Error::Precondition(format!(
            "singular time {t_sing} is not after the first checkpoint {}",
            traj.first_time()
        )));
    }
    let indices = (0..traj.len()).filter(|&k| traj.times[k] < t_sing).collect();
    Ok(Scan { t_sing, tau0, indices })
}

fn sample(traj: &Trajectory, x: QuotientPoint, k: usize, sc: &Scan, p: &ClassificationParams) -> Result<TimeSample> {
    let m = &traj.checkpoints[k];
    let t = traj.times[k];
    let xt = transport_point(traj, x, 0, k)?;
    let c = curvature(m)?;
    let root = (sc.t_sing - t).sqrt();
    let i = p.level(sc.tau0, sc.t_sing, t);

    let q = 2.0 + p.alpha.powi(3);
    let ric: Vec<f64> = c.ric_norm.iter().map(|v| v.powf(q)).collect();
    let ric_q = ball_integral(m, &BallSpec::new(xt, p.k_i(i) * root)?, &ric)?.value;

    let r = 4.0 * p.r_big * root;
    let rm: Vec<f64> = c.rm_norm.iter().map(|v| v * v).collect();
    let rm2 = ball_integral(m, &BallSpec::new(xt, r)?, &rm)?.value;
    Ok(TimeSample { t, rm2, ric_q, good: ric_q <= p.eps_i(i), resolved: r >= RESOLVED_CELLS * local_cell(m, xt.s, r) })
}

/// Checkpoint times `t < T` at which
/// `∫_{B(x, K_i√(T−t))} |Ric|^{2+α³} ≤ ε_i`, `i` being the schedule level
/// of `t` (see [`ClassificationParams::level`]).
pub fn good_times(traj: &Trajectory, x: QuotientPoint, params: &ClassificationParams) -> Result<Vec<f64>> {
    let sc = scan(traj, params)?;
    x.check(&traj.checkpoints[0])?;
    let mut out = Vec::new();
    for &k in &sc.indices {
        if sample(traj, x, k, &sc, params)?.good {
            out.push(traj.times[k]);
        }
    }
    Ok(out)
}

/// Regular when some resolved good time has
/// `∫_{B(x, 4R√(T−t))} |Rm|² ≤ ε₀`; singular when every resolved candidate
/// violates it, the candidates being the good times or, without any, every
/// checkpoint before `T`; undetermined when no candidate is resolved.
pub fn classify_point(traj: &Trajectory, x: QuotientPoint, params: &ClassificationParams) -> Result<PointVerdict> {
    let sc = scan(traj, params)?;
    x.check(&traj.checkpoints[0])?;
    let integrals = sc.indices.iter().map(|&k| sample(traj, x, k, &sc, params)).collect::<Result<Vec<_>>>()?;
    let small = |s: &TimeSample| s.rm2 <= params.eps0;

    let witnesses: Vec<f64> = integrals.iter().filter(|s| s.good && s.resolved && small(s)).map(|s| s.t).collect();
    if !witnesses.is_empty() {
        return Ok(PointVerdict { point: x, verdict: Verdict::Regular, witness_times: witnesses, integrals });
    }
    let any_good = integrals.iter().any(|s| s.good);
    let violators: Vec<f64> = integrals.iter().filter(|s| s.resolved && (s.good || !any_good)).map(|s| s.t).collect();
    let verdict = if violators.is_empty() { Verdict::Undetermined } else { Verdict::Singular };
    Ok(PointVerdict { point: x, verdict, witness_times: violators, integrals })
}

/// `∫|Rm|² dV` over the slab `|s' − s| ≤ r`, which contains `B(s, r)`.
struct SlabIntegral {
    x: Vec<f64>,
    density: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SlabIntegral {
    fn new(m: &WarpedMetric, f: &[f64]) -> Self {
        let k = (m.dim() - 1) as i32;
        let area = unit_sphere_area(m.dim() - 1);
        let x = m.grid().x().to_vec();
        let density: Vec<f64> =
            f.iter().zip(m.psi()).zip(m.phi()).map(|((f, p), ph)| area * f * p.powi(k) * ph).collect();
        let cumulative = cumulative_integral(&x, &density);
        SlabIntegral { x, density, cumulative }
    }

    fn over(&self, m: &WarpedMetric, s: f64, r: f64) -> f64 {
        let at = |s: f64| integral_to(&self.x, &self.density, &self.cumulative, m.x_at(s));
        at(s + r) - at(s - r)
    }
}

/// Greedy clustering at checkpoint `t_i`: axis rows in descending order of
/// `∫_{B(·, Λ√(T−t_i))} |Rm|²`, each accepted when that integral exceeds
/// `ε₀` and it lies at least `N(i)√(T−t_i)` from every centre accepted so
/// far. Centres are returned in acceptance order, in the arclength of
/// `g(t_i)`.
pub fn cluster_singular(traj: &Trajectory, t_i: f64, params: &ClassificationParams) -> Result<Vec<QuotientPoint>> {
    let sc = scan(traj, params)?;
    let k = traj.nearest_index(t_i);
    if (traj.times[k] - t_i).abs() > 1e-12 * t_i.abs().max(1.0) {
        return Err(Error::Parameter(format!("t_i = {t_i} is not a checkpoint time")));
    }
    if !(t_i < sc.t_sing) {
        return Err(Error::Parameter(format!("t_i = {t_i} is not before the singular time {}", sc.t_sing)));
    }
    let m = &traj.checkpoints[k];
    let root = (sc.t_sing - t_i).sqrt();
    let rho = params.lambda * root;
    let sep = params.n_i(params.level(sc.tau0, sc.t_sing, t_i)) * root;
    let rm: Vec<f64> = curvature(m)?.rm_norm.iter().map(|v| v * v).collect();
    let slab = SlabIntegral::new(m, &rm);

    let mut scored = Vec::new();
    for &s in m.arclength() {
        // the slab bounds the ball from above, so rows it clears cannot pass
        if slab.over(m, s, rho) <= params.eps0 {
            continue;
        }
        let v = ball_integral(m, &BallSpec::new(QuotientPoint::on_axis(s), rho)?, &rm)?.value;
        if v > params.eps0 {
            scored.push((s, v));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));

    let mut centres: Vec<QuotientPoint> = Vec::new();
    for (s, _) in scored {
        let p = QuotientPoint::on_axis(s);
        let mut far = true;
        for c in &centres {
            if distance(m, p, *c)? < sep {
                far = false;
                break;
            }
        }
        if far {
            centres.push(p);
        }
    }
    Ok(centres)
}

/// Separation `N(i)√(T − t_i)` used by [`cluster_singular`] at `t_i`.
pub fn cluster_separation(traj: &Trajectory, t_i: f64, params: &ClassificationParams) -> Result<f64> {
    let sc = scan(traj, params)?;
    Ok(params.n_i(params.level(sc.tau0, sc.t_sing, t_i)) * (sc.t_sing - t_i).max(0.0).sqrt())
}

/// Cluster ball radius `Λ√(T − t_i)`.
pub fn cluster_radius(traj: &Trajectory, t_i: f64, params: &ClassificationParams) -> Result<f64> {
    Ok(params.lambda * (traj.singular_time()? - t_i).max(0.0).sqrt())
}

/// `sup (t − t_a)|Rm|` over checkpoints in `[t_a, t_b]` and the rows of the
/// material region, against `c₀`. The region is the set of rows whose
/// first-checkpoint arclength lies within `radius` of the centre.
pub fn ct_decay_audit(traj: &Trajectory, region: &BallSpec, window: (f64, f64), c0: f64) -> Result<EstimateReport> {
    let (ta, tb) = window;
    if traj.is_empty() {
        return Err(Error::Parameter("trajectory has no checkpoints".into()));
    }
    if !(c0 > 0.0) {
        return Err(Error::Parameter(format!("c0 = {c0} must be positive")));
    }
    traj.require_window(ta, tb)?;
    let m0 = &traj.checkpoints[0];
    region.center.check(m0)?;
    let s0 = m0.arclength();
    let mut rows: Vec<usize> = (0..s0.len()).filter(|&i| (s0[i] - region.center.s).abs() <= region.radius).collect();
    if rows.is_empty() {
        let near =
            (0..s0.len()).min_by(|&a, &b| (s0[a] - region.center.s).abs().total_cmp(&(s0[b] - region.center.s).abs()));
        rows.extend(near);
    }
    let tol = 1e-12 * tb.abs().max(1.0);
    let mut sup = 0.0f64;
    let mut at = ta;
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        if t < ta - tol || t > tb + tol {
            continue;
        }
        let c = curvature(m)?;
        for &i in &rows {
            let v = (t - ta).max(0.0) * c.rm_norm[i];
            if v > sup {
                sup = v;
                at = t;
            }
        }
    }
    Ok(EstimateReport::upper("ct_decay", CT_EQ, sup, c0)
        .at_time(at)
        .at(region.center, region.radius)
        .param("t_a", ta)
        .param("t_b", tb)
        .param("rows", rows.len() as f64))
}

/// Cluster report for one centre, for the estimates table.
pub fn cluster_report(
    traj: &Trajectory,
    t_i: f64,
    centre: QuotientPoint,
    params: &ClassificationParams,
) -> Result<EstimateReport> {
    let m = traj.metric_at(t_i)?;
    let rho = cluster_radius(traj, t_i, params)?;
    let rm: Vec<f64> = curvature(&m)?.rm_norm.iter().map(|v| v * v).collect();
    let v = ball_integral(&m, &BallSpec::new(centre, rho)?, &rm)?.value;
    Ok(EstimateReport::new("cluster", CLUSTER_EQ, Direction::Lower, v, params.eps0)
        .at_time(t_i)
        .at(centre, rho)
        .param("separation", cluster_separation(traj, t_i, params)?))
}

/// Regularity report for a verdict: the smallest resolved `∫|Rm|²` at a
/// good time against `ε₀`, skipped when nothing was resolved.
pub fn verdict_report(v: &PointVerdict, params: &ClassificationParams) -> EstimateReport {
    let best = v.integrals.iter().filter(|s| s.resolved && s.good).min_by(|a, b| a.rm2.total_cmp(&b.rm2));
    let r = match best {
        Some(s) => EstimateReport::upper("regular_point", REGULAR_EQ, s.rm2, params.eps0).at_time(s.t),
        None => EstimateReport::skipped(
            "regular_point",
            REGULAR_EQ,
            Direction::Upper,
            format!("no resolved good time (verdict {:?})", v.verdict).to_lowercase(),
        ),
    };
    r.at(v.point, 0.0).param("good_times", v.integrals.iter().filter(|s| s.good).count() as f64)
}
