use std::collections::VecDeque;

use serde::Serialize;

use super::{
    noncollapse_bound, noncollapse_threshold, noninflate_bound, Direction, EstimateReport, NonInflateConstants,
};
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::geometry::{
    ball_integral, ball_volume, curvature, total_volume, BallSpec, DistanceField, QuotientPoint, WarpedMetric,
    DEFAULT_BANDS,
};
use crate::numerics::{linear_fit, trapezoid};
use crate::spectral::SobolevConstants;

const NONCOLLAPSE_EQ: &str = "Vol(B(x,r)) >= (1/(2^(n+4) A + 4 B))^(n/2) r^n";
const NONINFLATE_EQ: &str = "sigma0 r^n <= Vol(B(x,r)) <= sigma1 r^n";
const NONINFLATE_BOUND_EQ: &str =
    "Vol(B(x,r)) <= (1+C0(1+r^2)^(n/2)) c1^-1 J(t0)^-1 exp(2c2 + 2exp(2B r^2/n) E^(2/n)/(3 kappa^(2/n))) r^n";
const SPACETIME_EQ: &str = "int_S^V int_B(p,Y sqrt(V-s)) |Ric|^(2+alpha^3) <= c2_hat (V-S)^(1+alpha/16)";
const RICCI4_EQ: &str = "int_(V-2s)^(V-s) int_B(p,r) |Ric|^4 <= c1_hat s^(alpha-1) + c1_hat sup|Ric|^2 s^(1+alpha)";
const COMPARISON_EQ: &str = "f^(1/(2p-1))(r) - f^(1/(2p-1))(s) <= C2 r^(1-(n-1)/(2p-1)) |Ric_-|_p^(p/(2p-1))";

/// Volume lower bound on every ball of the grid. A ball is skipped when its
/// radius exceeds the threshold `r₀` or when `∫_B |R|^{n/2+σ} > L`.
pub fn noncollapse_audit(
    m: &WarpedMetric,
    c: &SobolevConstants,
    l: f64,
    sigma: f64,
    centers: &[QuotientPoint],
    radii: &[f64],
) -> Result<Vec<EstimateReport>> {
    let n = m.dim();
    let r0 = noncollapse_threshold(c.a, l, sigma, n)?;
    let curv = curvature(m)?;
    let q = n as f64 / 2.0 + sigma;
    let rq: Vec<f64> = curv.scalar.iter().map(|r| r.abs().powf(q)).collect();
    let mut out = Vec::with_capacity(centers.len() * radii.len());
    for &center in centers {
        for &r in radii {
            let ball = BallSpec::new(center, r)?;
            let tag = |rep: EstimateReport| {
                rep.at(center, r)
                    .param("A", c.a)
                    .param("B", c.b)
                    .param("L", l)
                    .param("sigma", sigma)
                    .param("r0", r0)
                    .at_time(m.time())
            };
            if r > r0 {
                out.push(tag(EstimateReport::skipped(
                    "noncollapse",
                    NONCOLLAPSE_EQ,
                    Direction::Lower,
                    format!("radius {r} exceeds threshold {r0}"),
                )));
                continue;
            }
            let lp = ball_integral(m, &ball, &rq)?.value;
            if lp > l {
                out.push(
                    tag(EstimateReport::skipped(
                        "noncollapse",
                        NONCOLLAPSE_EQ,
                        Direction::Lower,
                        format!("ball integral of |R|^(n/2+sigma) is {lp} > L"),
                    ))
                    .param("scalar_lp", lp),
                );
                continue;
            }
            let vol = ball_volume(m, &ball)?;
            let rep = EstimateReport::lower("noncollapse", NONCOLLAPSE_EQ, vol.value, noncollapse_bound(c, n, r));
            out.push(tag(rep).param("scalar_lp", lp).param("volume_error", vol.error_bound));
        }
    }
    Ok(out)
}

/// Ratios `Vol(B(x,r))/rⁿ` along a trajectory.
///
/// At each checkpoint only radii `r < √(t − t_first)` are used. With
/// `proportional`, radii are first multiplied by
/// `(Vol(t)/Vol(t_first))^{1/n}`, which follows a self-similar solution.
/// Each audited checkpoint yields an upper report (largest ratio against
/// `σ₁`; its `lhs` is the fitted `σ₁`) and a lower report (smallest ratio
/// against `σ₀`).
pub fn noninflate_audit(
    traj: &Trajectory,
    centers: &[QuotientPoint],
    radii: &[f64],
    sigma0: f64,
    sigma1: f64,
    proportional: bool,
) -> Result<Vec<EstimateReport>> {
    if traj.is_empty() {
        return Err(Error::Parameter("empty trajectory".into()));
    }
    let t_first = traj.first_time();
    let v_first = total_volume(&traj.checkpoints[0]);
    let mut out = Vec::new();
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        let n = m.dim();
        let scale = if proportional { (total_volume(m) / v_first).powf(1.0 / n as f64) } else { 1.0 };
        let limit = (t - t_first).max(0.0).sqrt();
        let mut hi: Option<(f64, QuotientPoint, f64)> = None;
        let mut lo: Option<(f64, QuotientPoint, f64)> = None;
        let mut cases = 0usize;
        for &center in centers {
            for &r0 in radii {
                let r = r0 * scale;
                if !(r < limit) {
                    continue;
                }
                let ratio = ball_volume(m, &BallSpec::new(center, r)?)?.value / r.powi(n as i32);
                cases += 1;
                if hi.is_none_or(|h| ratio > h.0) {
                    hi = Some((ratio, center, r));
                }
                if lo.is_none_or(|l| ratio < l.0) {
                    lo = Some((ratio, center, r));
                }
            }
        }
        match (hi, lo) {
            (Some(h), Some(l)) => {
                out.push(
                    EstimateReport::upper("noninflate", NONINFLATE_EQ, h.0, sigma1)
                        .at_time(t)
                        .at(h.1, h.2)
                        .param("fitted_sigma1", h.0)
                        .param("cases", cases as f64)
                        .param("radius_scale", scale),
                );
                out.push(
                    EstimateReport::lower("noninflate_lower", NONINFLATE_EQ, l.0, sigma0)
                        .at_time(t)
                        .at(l.1, l.2)
                        .param("cases", cases as f64)
                        .param("radius_scale", scale),
                );
            }
            _ => out.push(
                EstimateReport::skipped(
                    "noninflate",
                    NONINFLATE_EQ,
                    Direction::Upper,
                    format!("no audited radius below sqrt(t) = {limit}"),
                )
                .at_time(t),
            ),
        }
    }
    Ok(out)
}

/// The explicit non-inflating bound on a single metric, read as the
/// solution at time `t0`. Radii outside `(0, √t₀)` are skipped.
pub fn noninflate_bound_audit(
    m: &WarpedMetric,
    k: &NonInflateConstants,
    t0: f64,
    centers: &[QuotientPoint],
    radii: &[f64],
) -> Result<Vec<EstimateReport>> {
    k.validate()?;
    let mut out = Vec::new();
    for &center in centers {
        for &r in radii {
            let rep = match noninflate_bound(k, m.dim(), r, t0) {
                Ok(rhs) => {
                    let vol = ball_volume(m, &BallSpec::new(center, r)?)?.value;
                    EstimateReport::upper("noninflate_bound", NONINFLATE_BOUND_EQ, vol, rhs)
                        .param("fitted_constant", vol / r.powi(m.dim() as i32))
                }
                Err(Error::Precondition(reason)) => {
                    EstimateReport::skipped("noninflate_bound", NONINFLATE_BOUND_EQ, Direction::Upper, reason)
                }
                Err(e) => return Err(e),
            };
            out.push(rep.at(center, r).at_time(t0).param("t0", t0));
        }
    }
    Ok(out)
}

/// Window of the space-time Ricci estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeWindow {
    pub center: QuotientPoint,
    pub y: f64,
    pub s: f64,
    pub v: f64,
    pub alpha: f64,
    /// The constant `ĉ₂` to test against.
    pub c2_hat: f64,
    /// Further start times for the exponent fit; each must satisfy the
    /// same window conditions as `s`.
    pub ladder: Vec<f64>,
}

impl SpaceTimeWindow {
    pub fn new(center: QuotientPoint, y: f64, s: f64, v: f64, alpha: f64, c2_hat: f64) -> Result<Self> {
        let w = SpaceTimeWindow { center, y, s, v, alpha, c2_hat, ladder: Vec::new() };
        w.validate()?;
        Ok(w)
    }

    pub fn with_ladder(mut self, ladder: Vec<f64>) -> Result<Self> {
        self.ladder = ladder;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y >= 1.0) {
            return Err(Error::Parameter(format!("Y = {} must be at least 1", self.y)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0 / 12.0) {
            return Err(Error::Parameter(format!("alpha = {} must lie in (0, 1/12)", self.alpha)));
        }
        for &s in std::iter::once(&self.s).chain(&self.ladder) {
            if !(s < self.v) {
                return Err(Error::Parameter(format!("window start {s} is not before V = {}", self.v)));
            }
            if self.y * (self.v - s).sqrt() > 1.0 + 1e-12 {
                return Err(Error::Precondition(format!("Y sqrt(V - S) = {} exceeds 1", self.y * (self.v - s).sqrt())));
            }
        }
        Ok(())
    }
}

/// `∫_a^b F(t) dt` by the trapezoid rule on the checkpoint times inside
/// `[a, b]` plus the two ends.
fn time_integral(
    traj: &Trajectory,
    a: f64,
    b: f64,
    mut f: impl FnMut(&WarpedMetric, f64) -> Result<f64>,
) -> Result<f64> {
    traj.require_window(a, b)?;
    let mut ts = vec![a];
    let mut vals = vec![f(&traj.metric_at(a)?, a)?];
    let tol = 1e-12 * b.abs().max(1.0);
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        if t > a + tol && t < b - tol {
            ts.push(t);
            vals.push(f(m, t)?);
        }
    }
    ts.push(b);
    vals.push(f(&traj.metric_at(b)?, b)?);
    Ok(trapezoid(&ts, &vals))
}

/// Checkpoints used to extrapolate the integrand up to the singular time.
const TAIL_SAMPLES: usize = 5;

/// The space-time integral from `start` to `V`, and the part of it that
/// was extrapolated. When `V` is the singular time the integrand beyond the
/// last checkpoint is taken as the power law `c (V − s)^{−e}` fitted to the
/// last few checkpoints.
fn spacetime_lhs(traj: &Trajectory, w: &SpaceTimeWindow, start: f64) -> Result<(f64, f64)> {
    let q = 2.0 + w.alpha.powi(3);
    let integrand = |m: &WarpedMetric, t: f64| -> Result<f64> {
        let r = w.y * (w.v - t).max(0.0).sqrt();
        if r <= 0.0 {
            return Ok(0.0);
        }
        let c = curvature(m)?;
        let f: Vec<f64> = c.ric_norm.iter().map(|v| v.powf(q)).collect();
        Ok(ball_integral(m, &BallSpec::new(w.center, r)?, &f)?.value)
    };
    let last = traj.last_time();
    let tol = 1e-12 * w.v.abs().max(1.0);
    if w.v <= last + tol {
        return Ok((time_integral(traj, start, w.v, integrand)?, 0.0));
    }
    let coverage = Error::Coverage { start, end: w.v, first: traj.first_time(), last };
    match traj.singular_time_estimate {
        Some(t_sing) if (w.v - t_sing).abs() <= 1e-9 * t_sing.abs().max(1.0) && start < last => {}
        _ => return Err(coverage),
    }
    let body = time_integral(traj, start, last, integrand)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times).rev().take(TAIL_SAMPLES) {
        let v = integrand(m, t)?;
        if t >= start && v > 0.0 {
            xs.push((w.v - t).ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 3 {
        return Ok((body, 0.0));
    }
    let (c, slope) = linear_fit(&xs, &ys);
    let e = -slope;
    if !(e < 1.0) {
        return Err(coverage);
    }
    let tail = c.exp() * (w.v - last).powf(1.0 - e) / (1.0 - e);
    Ok((body + tail, tail))
}

/// The space-time Ricci integral over `[S, V]` against `ĉ₂(V−S)^{1+α/16}`.
///
/// `params.c2_fit` is the smallest `ĉ₂` that passes. When the window has a
/// ladder, the integral is recomputed for each start time and
/// `params.exponent` is the slope of `log lhs` against `log(V−S)`.
/// `V` may be the trajectory's singular time; the stretch past the last
/// checkpoint is then extrapolated and reported as `params.tail`.
pub fn spacetime_ricci_audit(traj: &Trajectory, w: &SpaceTimeWindow) -> Result<EstimateReport> {
    w.validate()?;
    let (lhs, tail) = spacetime_lhs(traj, w, w.s)?;
    let span = w.v - w.s;
    let scale = span.powf(1.0 + w.alpha / 16.0);
    let mut rep = EstimateReport::upper("spacetime_ricci", SPACETIME_EQ, lhs, w.c2_hat * scale)
        .at(w.center, w.y * span.sqrt())
        .at_time(w.v)
        .param("S", w.s)
        .param("V", w.v)
        .param("Y", w.y)
        .param("alpha", w.alpha)
        .param("c2_hat", w.c2_hat)
        .param("c2_fit", lhs / scale)
        .param("tail", tail);
    if lhs.abs() <= DEGENERATE {
        rep = rep.param("degenerate", 1.0);
    }
    let mut starts: Vec<f64> = std::iter::once(w.s).chain(w.ladder.iter().copied()).collect();
    starts.sort_by(|a, b| a.total_cmp(b));
    starts.dedup();
    if starts.len() >= 3 && lhs > DEGENERATE {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &s in &starts {
            let v = if s == w.s { lhs } else { spacetime_lhs(traj, w, s)?.0 };
            if v > 0.0 {
                xs.push((w.v - s).ln());
                ys.push(v.ln());
            }
        }
        if xs.len() >= 3 {
            rep = rep.param("exponent", linear_fit(&xs, &ys).1).param("ladder_size", xs.len() as f64);
        }
    }
    Ok(rep)
}

/// `∫_{V−2s}^{V−s} ∫_{B(p,r)} |Ric|⁴` against
/// `ĉ₁ (s^{α−1} + sup|Ric|² s^{1+α})`, where the supremum is over the
/// window and the ball. Passing uses `c1_hat`; `params.c1_fit` is the
/// minimal constant.
pub fn ricci4_window_audit(
    traj: &Trajectory,
    p: QuotientPoint,
    r: f64,
    v: f64,
    s: f64,
    alpha: f64,
    c1_hat: f64,
) -> Result<EstimateReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("s = {s} must lie in (0, 1)")));
    }
    if !(v - 3.0 * s > 0.0) {
        return Err(Error::Parameter(format!("V - 3s = {} must be positive", v - 3.0 * s)));
    }
    let ball = BallSpec::new(p, r)?;
    let mut sup: f64 = 0.0;
    let lhs = time_integral(traj, v - 2.0 * s, v - s, |m, _| {
        let c = curvature(m)?;
        // every row within r of p in arclength meets the ball, on p's meridian
        for (si, rn) in m.arclength().iter().zip(&c.ric_norm) {
            if (si - p.s).abs() <= r {
                sup = sup.max(rn * rn);
            }
        }
        let f: Vec<f64> = c.ric_norm.iter().map(|x| x.powi(4)).collect();
        Ok(ball_integral(m, &ball, &f)?.value)
    })?;
    let unit = s.powf(alpha - 1.0) + sup * s.powf(1.0 + alpha);
    Ok(EstimateReport::upper("ricci4_window", RICCI4_EQ, lhs, c1_hat * unit)
        .at(p, r)
        .at_time(v)
        .param("s", s)
        .param("V", v)
        .param("alpha", alpha)
        .param("c1_hat", c1_hat)
        .param("sup_ric2", sup)
        .param("c1_fit", lhs / unit))
}

/// Space-time integrals below this are treated as zero.
const DEGENERATE: f64 = 1e-12;

/// Relative step of the central difference that turns ball volumes into
/// sphere areas.
const AREA_STEP: f64 = 0.01;

/// Monotonicity of `f(t) = Area(∂B(x,t))/t^{n−1}` along a radius ladder.
///
/// Areas are central differences of ball volumes with step `0.01 t`. One
/// report per ladder pair `s < r`; the right side uses the smallest `C₂`
/// that makes every pair pass, plus a numerical allowance of
/// `1e-9·f^{1/(2p−1)}` (recorded as `tolerance`). Where `Ric₋` vanishes on
/// the ball the check is plain monotonicity. Radii whose difference stencil
/// leaves the manifold are dropped and the reports carry `reduced = 1`.
pub fn volume_comparison_audit(
    m: &WarpedMetric,
    center: QuotientPoint,
    p: f64,
    r_ladder: &[f64],
) -> Result<Vec<EstimateReport>> {
    let n = m.dim();
    let nf = n as f64;
    if !(p > nf / 2.0) {
        return Err(Error::Parameter(format!("p = {p} must exceed n/2")));
    }
    let curv = curvature(m)?;
    let minus_p: Vec<f64> = curv.ric_minus.iter().map(|v| v.powf(p)).collect();
    let root = 1.0 / (2.0 * p - 1.0);
    let expo = 1.0 - (nf - 1.0) / (2.0 * p - 1.0);

    let mut ladder: Vec<f64> = r_ladder.iter().copied().filter(|r| *r > 0.0).collect();
    ladder.sort_by(|a, b| a.total_cmp(b));
    ladder.dedup();
    let before = ladder.len();
    let mut rows = Vec::new();
    for &t in &ladder {
        let d = AREA_STEP * t;
        let hi = ball_volume(m, &BallSpec::new(center, t + d)?)?;
        if hi.saturated {
            continue;
        }
        let lo = ball_volume(m, &BallSpec::new(center, t - d)?)?;
        let area = (hi.value - lo.value) / (2.0 * d);
        let f = area / t.powi(n as i32 - 1);
        let norm = ball_integral(m, &BallSpec::new(center, t)?, &minus_p)?.value.powf(1.0 / p);
        rows.push((t, f.max(0.0).powf(root), norm));
    }
    let reduced = rows.len() < before;

    let mut pairs = Vec::new();
    for (a, &(s, fs, _)) in rows.iter().enumerate() {
        for &(r, fr, norm) in &rows[a + 1..] {
            let unit = r.powf(expo) * norm.powf(p * root);
            pairs.push((s, r, fr - fs, unit, 1e-9 * fr.max(fs)));
        }
    }
    let c2 = pairs.iter().filter(|x| x.3 > 0.0).map(|x| (x.2 - x.4) / x.3).fold(0.0, f64::max);
    Ok(pairs
        .into_iter()
        .map(|(s, r, lhs, unit, tol)| {
            EstimateReport::upper("volume_comparison", COMPARISON_EQ, lhs, c2 * unit + tol)
                .at(center, r)
                .at_time(m.time())
                .param("s", s)
                .param("p", p)
                .param("c2_fit", c2)
                .param("tolerance", tol)
                .param("reduced", if reduced { 1.0 } else { 0.0 })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnnulusCount {
    pub components: usize,
    /// No mesh node falls in the annulus.
    pub empty: bool,
}

/// Connected components of `{r_in ≤ d(center, ·) ≤ r_out}`.
pub fn annulus_components(m: &WarpedMetric, center: QuotientPoint, r_in: f64, r_out: f64) -> Result<AnnulusCount> {
    annulus_components_with(m, center, r_in, r_out, DEFAULT_BANDS)
}

/// [`annulus_components`] at a chosen angular resolution.
///
/// Components are counted by flood fill over mesh nodes with 4-neighbour
/// adjacency. All nodes of a pole row are one point and are joined. Each
/// node of the quotient stands for a connected orbit, so quotient
/// components are components of the annulus itself.
pub fn annulus_components_with(
    m: &WarpedMetric,
    center: QuotientPoint,
    r_in: f64,
    r_out: f64,
    bands: usize,
) -> Result<AnnulusCount> {
    if !(r_in >= 0.0 && r_in < r_out) {
        return Err(Error::Parameter(format!("need 0 <= r_in < r_out, got {r_in}, {r_out}")));
    }
    center.check(m)?;
    // a ball about (s, α) is congruent to the one about (s, 0)
    let field = DistanceField::compute(m, QuotientPoint::on_axis(center.s), bands)?;
    let (rows, cols) = (field.rows(), field.cols());
    let psi = field.row_psi();
    let inside = |i: usize, j: usize| {
        let d = field.node(i, j);
        d >= r_in && d <= r_out
    };
    let mut seen = vec![false; rows * cols];
    let mut components = 0;
    let mut any = false;
    for start in 0..rows * cols {
        if seen[start] || !inside(start / cols, start % cols) {
            continue;
        }
        any = true;
        components += 1;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k / cols, k % cols);
            let mut nbrs: Vec<(usize, usize)> = Vec::with_capacity(4);
            if j > 0 {
                nbrs.push((i, j - 1));
            }
            if j + 1 < cols {
                nbrs.push((i, j + 1));
            }
            if i > 0 {
                nbrs.push((i - 1, j));
            }
            if i + 1 < rows {
                nbrs.push((i + 1, j));
            }
            if psi[i] == 0.0 {
                nbrs.extend((0..cols).map(|jj| (i, jj)));
            }
            for (a, b) in nbrs {
                let idx = a * cols + b;
                if !seen[idx] && inside(a, b) {
                    seen[idx] = true;
                    queue.push_back(idx);
                }
            }
        }
    }
    Ok(AnnulusCount { components, empty: !any })
}
