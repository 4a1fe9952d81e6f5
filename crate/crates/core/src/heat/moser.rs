use serde::{Deserialize, Serialize};

use super::{measured_c0, require_axis, HeatField};
use crate::error::{Error, Result};
use crate::estimates::{Direction, EstimateReport};
use crate::flow::Trajectory;
use crate::geometry::{curvature, DistanceField, QuotientPoint, WarpedMetric};
use crate::numerics::trapezoid;
use crate::spectral::{QuotientDomain, QuotientOperator};

const MOSER_EQ: &str = "sup_{B(x,r/2)} f(t) <= K (B + L/t + 32 a^2 n^2/r^2)^((n+2)/2p) (int_{t/2}^t int_B f^p)^(1/p)";

/// Inputs of the Moser sup bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserParams {
    pub n: usize,
    pub p: f64,
    /// Sobolev coefficient `A`.
    pub a: f64,
    /// Sobolev coefficient `B ≥ 1`, also the lower scalar bound `R ≥ −B`.
    pub b: f64,
    pub ell: f64,
    /// Universal constant `α` of the cut-off.
    pub alpha_u: f64,
    pub c1: f64,
    /// Used only when `p < 2`.
    pub gamma: f64,
    pub r: f64,
}

impl MoserParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Parameter(format!("n = {} must be at least 3", self.n)));
        }
        if !(self.p > 0.0) {
            return Err(Error::Parameter(format!("p = {} must be positive", self.p)));
        }
        if !(self.a > 0.0 && self.b >= 1.0) {
            return Err(Error::Parameter(format!("need A > 0 and B >= 1 (got {}, {})", self.a, self.b)));
        }
        if !(self.ell >= 1.0) {
            return Err(Error::Parameter(format!("ell = {} must be at least 1", self.ell)));
        }
        if !(self.alpha_u > 0.0 && self.c1 > 0.0 && self.r > 0.0) {
            return Err(Error::Parameter("alpha, c1 and r must be positive".into()));
        }
        if self.p < 2.0 {
            let g = self.gamma.powf((self.n as f64 + 2.0) / self.p);
            if !(self.gamma > 0.0 && self.gamma < 1.0 && 2.0 * g > 1.0) {
                return Err(Error::Parameter(format!(
                    "gamma = {} must lie in (0, 1) with 2 gamma^((n+2)/p) > 1",
                    self.gamma
                )));
            }
        }
        Ok(())
    }

    pub fn from_constants(c: &crate::ConstantSet, n: usize, p: f64, r: f64) -> Self {
        MoserParams { n, p, a: c.a, b: c.b, ell: c.ell, alpha_u: c.alpha_cut, c1: c.c1, gamma: c.gamma, r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoserCase {
    PGe2,
    PLt2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoserConstants {
    /// `K₁` when `p ≥ 2`, `K₂` otherwise.
    pub k: f64,
    pub t_hat: f64,
    pub case: MoserCase,
}

/// `K₁ = (4A)^{n/2p} (1+2/n)^{(n+2)²/2p} e^{2c₁α²(n+2)/p}` for `p ≥ 2`;
/// for `p < 2`
/// `K₂ = γ^{(n+2)/p} p (2−p)^{(2−p)/p} K₁ / ((2γ^{(n+2)/p} − 1)(1−γ)^{(n+2)/p})`.
/// `T̂ = min(r²/4, αc₁r²/4)`.
pub fn moser_constants(mp: &MoserParams) -> Result<MoserConstants> {
    mp.validate()?;
    let n = mp.n as f64;
    let p = mp.p;
    let k1 = (4.0 * mp.a).powf(n / (2.0 * p))
        * (1.0 + 2.0 / n).powf((n + 2.0).powi(2) / (2.0 * p))
        * (2.0 * mp.c1 * mp.alpha_u.powi(2) * (n + 2.0) / p).exp();
    let t_hat = (mp.r * mp.r / 4.0).min(mp.alpha_u * mp.c1 * mp.r * mp.r / 4.0);
    if p >= 2.0 {
        return Ok(MoserConstants { k: k1, t_hat, case: MoserCase::PGe2 });
    }
    let g = mp.gamma.powf((n + 2.0) / p);
    let k2 = g * p * (2.0 - p).powf((2.0 - p) / p) * k1 / ((2.0 * g - 1.0) * (1.0 - mp.gamma).powf((n + 2.0) / p));
    Ok(MoserConstants { k: k2, t_hat, case: MoserCase::PLt2 })
}

/// Compares `sup_{B(x,r/2)} f(t)` with the Moser bound. The ball hypotheses
/// (`|Rm| ≤ c₀/s` and `R ≥ −B` on `B(x,r)` for `s ≤ t`, reaction `≤ ℓ/t`)
/// are checked on the rows of the trajectory within `r` of `x`; when one
/// fails the report is skipped. `params["K_fit"]` is the smallest constant
/// that would pass.
pub fn moser_audit(
    h: &HeatField,
    traj: &Trajectory,
    x: QuotientPoint,
    r: f64,
    p: f64,
    t: f64,
    mp: &MoserParams,
) -> Result<EstimateReport> {
    let mp = MoserParams { r, p, ..*mp };
    let k = moser_constants(&mp)?;
    let x = require_axis(traj.last(), x)?;
    let skip = |why: String| Ok(EstimateReport::skipped("moser", MOSER_EQ, Direction::Upper, why).at_time(t).at(x, r));
    if !(t > 0.0 && t < k.t_hat) {
        return skip(format!("t = {t} is not in (0, T_hat) with T_hat = {}", k.t_hat));
    }
    if let Ok(ts) = traj.singular_time() {
        if t >= ts {
            return skip(format!("t = {t} is not before the singular time {ts}"));
        }
    }
    traj.require_window(t / 2.0, t)?;
    h.at(t / 2.0)?;
    h.at(t)?;
    if h.ell > mp.ell {
        return skip(format!("reaction bound ell = {} exceeds {}", h.ell, mp.ell));
    }
    for (m, &s) in traj.checkpoints.iter().zip(&traj.times) {
        if s > t {
            break;
        }
        let c = curvature(m)?;
        for (i, &si) in m.arclength().iter().enumerate() {
            if (si - x.s).abs() > r {
                continue;
            }
            if s > 0.0 && s * c.rm_norm[i] > h.c0 * (1.0 + 1e-9) + 1e-12 {
                return skip(format!("|Rm| <= c0/t fails at s = {si}, t = {s}"));
            }
            if c.scalar[i] < -mp.b {
                return skip(format!("R >= -B fails at s = {si}, t = {s}"));
            }
        }
    }

    let bands = h.bands();
    let m_t = traj.metric_at(t)?;
    let d_t = DistanceField::compute(&m_t, x, bands)?;
    let cols = d_t.cols();
    let f_t = h.at(t)?;
    let lhs = (0..f_t.len()).filter(|&q| d_t.node(q / cols, q % cols) <= r / 2.0).fold(0.0f64, |a, q| a.max(f_t[q]));

    let tol = 1e-12 * t.max(1.0);
    let mut times = vec![t / 2.0];
    times.extend(h.times.iter().copied().filter(|&s| s > t / 2.0 + tol && s < t - tol));
    times.push(t);
    let mut vals = Vec::with_capacity(times.len());
    for &s in &times {
        let m = traj.metric_at(s)?;
        let op = QuotientOperator::new(&m, bands);
        let w = ball_weights(&m, x, r, bands)?;
        let f = h.at(s)?;
        vals.push((0..f.len()).map(|q| w[q] * op.mass()[q] * f[q].max(0.0).powf(p)).sum::<f64>());
    }
    let integral = trapezoid(&times, &vals);

    let n = mp.n as f64;
    let reaction = match k.case {
        MoserCase::PGe2 => 2.0 * n * mp.ell * p,
        MoserCase::PLt2 => 4.0 * n * mp.ell,
    };
    let base = mp.b + reaction / t + 32.0 * mp.alpha_u.powi(2) * n * n / (r * r);
    let shape = base.powf((n + 2.0) / (2.0 * p)) * integral.powf(1.0 / p);
    let rhs = k.k * shape;
    let k_fit = if shape > 0.0 { lhs / shape } else { 0.0 };
    Ok(EstimateReport::upper("moser", MOSER_EQ, lhs, rhs)
        .at_time(t)
        .at(x, r)
        .param("p", p)
        .param("K", k.k)
        .param("K_fit", k_fit)
        .param("T_hat", k.t_hat)
        .param("ell", mp.ell)
        .param("c0", h.c0)
        .param("integral", integral))
}

/// Fraction of each node's cell inside `B(x, r)`, linear in the distance
/// across one row spacing.
fn ball_weights(m: &WarpedMetric, x: QuotientPoint, r: f64, bands: usize) -> Result<Vec<f64>> {
    let d = DistanceField::compute(m, x, bands)?;
    let (rows, cols) = (d.rows(), d.cols());
    let s = d.row_s();
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        let h = 0.5 * (s[(i + 1).min(rows - 1)] - s[i.saturating_sub(1)]);
        for j in 0..cols {
            out[i * cols + j] = (0.5 + (r - d.node(i, j)) / h).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Regulariser inside `√(|Ric|² + ε)`.
pub const RICCI_MOSER_EPS: f64 = 1e-8;

/// `f = √(|Ric|² + ε)` sampled at the checkpoints in `[t_from, t_to]`, with
/// `ℓ = max(1, 2 sup t|Rm|)` and `c₀ = sup t|Rm|` measured up to `t_to`.
pub fn ricci_moser_field(traj: &Trajectory, bands: usize, eps: f64, t_from: f64, t_to: f64) -> Result<HeatField> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    traj.require_window(t_from, t_to)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut shape = (0, 0);
    for (m, &s) in traj.checkpoints.iter().zip(&traj.times) {
        if s < t_from || s > t_to {
            continue;
        }
        let op = QuotientOperator::new(m, bands);
        shape = (op.rows(), op.cols());
        let f: Vec<f64> = curvature(m)?.ric_norm.iter().map(|v| (v * v + eps).sqrt()).collect();
        times.push(s);
        values.push(op.from_rows(&f));
    }
    if times.is_empty() {
        return Err(Error::Coverage { start: t_from, end: t_to, first: traj.first_time(), last: traj.last_time() });
    }
    let c0 = measured_c0(traj, t_to)?;
    Ok(HeatField {
        times,
        values,
        rows: shape.0,
        cols: shape.1,
        domain: QuotientDomain::whole(shape.0, shape.1),
        ell: (2.0 * c0).max(1.0),
        c0,
    })
}
