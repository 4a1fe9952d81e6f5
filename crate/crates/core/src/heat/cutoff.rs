use serde::{Deserialize, Serialize};

use super::require_axis;
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::geometry::{arc_derivatives, DistanceField, QuotientPoint, DEFAULT_BANDS};
use crate::spectral::QuotientOperator;

/// The profile `η(d)`: 1 on `[0, r1]`, 0 beyond `r2`, smooth in between,
/// with its first two derivatives in `d`. The transition is
/// `S(u) = e^{−1/u} / (e^{−1/u} + e^{−1/(1−u)})` at `u = (r2 − d)/(r2 − r1)`,
/// whose slope peaks at 2, so `|η'| ≤ 2/(r2 − r1)`.
pub fn eta(d: f64, r1: f64, r2: f64) -> (f64, f64, f64) {
    let w = r2 - r1;
    let u = (r2 - d) / w;
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let h = 1.0 / u - 1.0 / (1.0 - u);
    let s = if h > 0.0 {
        let e = (-h).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + h.exp())
    };
    let q = 1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u));
    let dq = -2.0 / u.powi(3) + 2.0 / (1.0 - u).powi(3);
    let s1 = s * (1.0 - s) * q;
    let s2 = s1 * (1.0 - 2.0 * s) * q + s * (1.0 - s) * dq;
    // du/dd = −1/w
    (s, -s1 / w, s2 / (w * w))
}

/// Inputs of [`cutoff_construct`] beyond the radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffOptions {
    /// Universal constant `α`.
    pub alpha_u: f64,
    pub c1: f64,
    /// Allowed `(∂φ/∂t − Δφ)/(σ e^{−σt})` and relative gradient excess.
    pub tolerance: f64,
    /// Curvature constant with `|Rm| ≤ c₀/t` on `B(x, r2)`; checked when set.
    pub c0: Option<f64>,
    pub bands: usize,
}

impl Default for CutoffOptions {
    fn default() -> Self {
        CutoffOptions { alpha_u: 8.0, c1: 1.0, tolerance: 0.05, c0: None, bands: DEFAULT_BANDS }
    }
}

/// `φ(y, t) = e^{−σt} η(d_{g(t)}(x, y))` at the checkpoints of `[0, T̂)`
/// with the outcome of its verification.
#[derive(Debug, Clone)]
pub struct CutoffField {
    pub times: Vec<f64>,
    /// Mesh arrays, row-major `rows × cols`.
    pub values: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
    pub r1: f64,
    pub r2: f64,
    pub eps: f64,
    /// `σ = α / (ε (r2 − r1)²)`.
    pub sigma: f64,
    /// `min(r1², α c₁ (r2 − r1)²)`.
    pub t_hat: f64,
    /// Largest `(∂φ/∂t − Δφ) / (σ e^{−σt})` seen.
    pub worst_heat_slack: f64,
    /// Largest `|∇φ| ε (r2 − r1) / α` seen.
    pub worst_gradient: f64,
    /// Nodes where the heat inequality was tested.
    pub checked_nodes: usize,
}

/// Radius of the weak-form test functions, as a fraction of `r2 − r1`.
const WEAK_RADIUS: f64 = 0.1;

struct Violation {
    distance: f64,
    time: f64,
    reason: String,
}

/// Builds the cut-off about an axis point and verifies on `[0, T̂)`:
/// `∂φ/∂t ≤ Δφ`, `|∇φ| ≤ α/(ε(r2−r1))`, `φ = e^{−σt}` on `B(x, r1)` and
/// `φ = 0` outside `B(x, r2)`. Pole centres use the radial profile and its
/// exact Laplacian `η'' + (n−1)(ψ_s/ψ)η'`. Other axis centres take `d`
/// from fast marching, whose second differences do not converge, so the
/// heat inequality is tested weakly against hat functions of radius
/// `0.1 (r2 − r1)` centred at the transition nodes.
pub fn cutoff_construct(
    traj: &Trajectory,
    x: QuotientPoint,
    r1: f64,
    r2: f64,
    eps: f64,
    opts: &CutoffOptions,
) -> Result<CutoffField> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(Error::Parameter(format!("need 0 < r1 < r2 (got {r1}, {r2})")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps = {eps} must lie in (0, 1)")));
    }
    if !(opts.alpha_u > 0.0 && opts.c1 > 0.0 && opts.tolerance >= 0.0) {
        return Err(Error::Parameter("alpha and c1 must be positive, tolerance non-negative".into()));
    }
    let w = r2 - r1;
    let sigma = opts.alpha_u / (eps * w * w);
    let t_hat = (r1 * r1).min(opts.alpha_u * opts.c1 * w * w);
    let end = match traj.singular_time() {
        Ok(ts) => ts.min(t_hat),
        Err(_) => t_hat,
    };
    let first = &traj.checkpoints[0];
    let x = require_axis(first, x)?;
    if let Some(c0) = opts.c0 {
        let measured = ball_c0(traj, x, r2, end)?;
        if measured > c0 * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!("sup t|Rm| = {measured} on B(x, r2) exceeds c0 = {c0}")));
        }
    }
    let idx: Vec<usize> = (0..traj.len()).filter(|&k| traj.times[k] < end).collect();
    if idx.is_empty() {
        return Err(Error::Coverage {
            start: traj.first_time(),
            end,
            first: traj.first_time(),
            last: traj.last_time(),
        });
    }
    let len = first.axis_length();
    let pole = x.s <= 1e-12 * len || x.s >= len * (1.0 - 1e-12);
    let grad_bound = opts.alpha_u / (eps * w);

    let mut out = CutoffField {
        times: Vec::new(),
        values: Vec::new(),
        rows: 0,
        cols: 0,
        r1,
        r2,
        eps,
        sigma,
        t_hat,
        worst_heat_slack: f64::NEG_INFINITY,
        worst_gradient: 0.0,
        checked_nodes: 0,
    };
    let dists: Vec<Vec<f64>> = idx
        .iter()
        .map(|&k| -> Result<Vec<f64>> {
            let m = &traj.checkpoints[k];
            if pole {
                let s = m.arclength();
                let l = m.axis_length();
                let d: Vec<f64> = s.iter().map(|&v| if x.s < 0.5 * len { v } else { l - v }).collect();
                Ok(QuotientOperator::new(m, opts.bands).from_rows(&d))
            } else {
                let f = DistanceField::compute(m, x, opts.bands)?;
                let cols = f.cols();
                Ok((0..f.rows() * cols).map(|q| f.node(q / cols, q % cols)).collect())
            }
        })
        .collect::<Result<_>>()?;

    for (a, &k) in idx.iter().enumerate() {
        let m = &traj.checkpoints[k];
        let t = traj.times[k];
        let op = QuotientOperator::new(m, opts.bands);
        let (rows, cols) = (op.rows(), op.cols());
        let decay = (-sigma * t).exp();
        let d = &dists[a];
        let phi: Vec<f64> = d.iter().map(|&v| decay * eta(v, r1, r2).0).collect();
        // support identities and range
        for (q, (&v, &dq)) in phi.iter().zip(d).enumerate() {
            let bad = if !(0.0..=1.0).contains(&v) {
                Some("value outside [0, 1]")
            } else if dq <= r1 && v != decay {
                Some("not e^(-sigma t) on B(x, r1)")
            } else if dq >= r2 && v != 0.0 {
                Some("not zero outside B(x, r2)")
            } else {
                None
            };
            if let Some(reason) = bad {
                return Err(fail(Violation { distance: d[q], time: t, reason: reason.into() }));
            }
        }
        // d/dt of the distance at fixed nodes
        let (kb, ka) = (if a > 0 { a - 1 } else { a }, if a + 1 < idx.len() { a + 1 } else { a });
        let dt = traj.times[idx[ka]] - traj.times[idx[kb]];
        let d_t: Vec<f64> = if dt > 0.0 {
            dists[ka].iter().zip(&dists[kb]).map(|(p, q)| (p - q) / dt).collect()
        } else {
            vec![0.0; d.len()]
        };

        let nf = m.dim() as f64;
        let scale = sigma;
        let check = |q: usize, slack: f64, out: &mut CutoffField| -> Result<()> {
            out.checked_nodes += 1;
            out.worst_heat_slack = out.worst_heat_slack.max(slack);
            if slack > opts.tolerance {
                return Err(fail(Violation {
                    distance: d[q],
                    time: t,
                    reason: format!("dphi/dt - lap phi = {slack:.3e} sigma e^(-sigma t)"),
                }));
            }
            Ok(())
        };
        if pole {
            let ad = arc_derivatives(m);
            let psi = m.psi();
            let from_far = x.s >= 0.5 * len;
            for i in 0..rows {
                let q = i * cols;
                let (e, e1, e2) = eta(d[q], r1, r2);
                let mut lap = e2;
                if e1 != 0.0 {
                    if psi[i] <= 0.0 {
                        continue;
                    }
                    let grad_d = if from_far { -ad.psi_s[i] } else { ad.psi_s[i] };
                    lap += (nf - 1.0) * grad_d / psi[i] * e1;
                }
                // (φ_t − Δφ) / (σ e^{−σt})
                let slack = (-scale * e + e1 * d_t[q] - lap) / scale;
                check(q, slack, &mut out)?;
                out.worst_gradient = out.worst_gradient.max(e1.abs() / grad_bound);
            }
        } else {
            let mut kphi = vec![0.0; phi.len()];
            op.stiffness_apply(&phi, &mut kphi);
            // ∂φ/∂t = −σφ + e^{−σt} η'(d) ∂d/∂t
            let phi_t: Vec<f64> =
                (0..phi.len()).map(|q| -sigma * phi[q] + decay * eta(d[q], r1, r2).1 * d_t[q]).collect();
            // weak form: ∫(φ_t − Δφ)χ ≤ tol σ e^{−σt} ∫χ for hats χ of radius ρ
            let rho = WEAK_RADIUS * w;
            let density: Vec<f64> = (0..phi.len()).map(|q| op.mass()[q] * phi_t[q] + kphi[q]).collect();
            let active: Vec<bool> = (0..phi.len()).map(|q| phi[q] > 0.0 && phi[q] < decay).collect();
            let (rs, rp, h) = (op.row_s(), op.row_psi(), op.h_alpha());
            for i in 0..rows {
                for j in 0..cols {
                    let q = i * cols + j;
                    if !active[q] {
                        continue;
                    }
                    let (mut num, mut den) = (0.0, 0.0);
                    let lo = rs.partition_point(|&v| v < rs[i] - rho);
                    for (ii, &si) in rs.iter().enumerate().skip(lo) {
                        let ds = si - rs[i];
                        if ds > rho {
                            break;
                        }
                        let span = if rp[i] > 0.0 { ((rho / (rp[i] * h)).ceil() as usize).min(cols) } else { cols };
                        for jj in j.saturating_sub(span)..(j + span + 1).min(cols) {
                            let da = rp[i].max(rp[ii]) * h * (jj as f64 - j as f64);
                            let chi = 1.0 - (ds * ds + da * da).sqrt() / rho;
                            if chi > 0.0 {
                                let k = ii * cols + jj;
                                num += chi * density[k];
                                den += chi * op.mass()[k];
                            }
                        }
                    }
                    if den > 0.0 && decay > 0.0 {
                        check(q, num / den / (scale * decay), &mut out)?;
                    }
                }
            }
            let h = op.h_alpha();
            for i in 0..rows {
                for j in 0..cols {
                    let q = i * cols + j;
                    if j + 1 < cols && op.row_psi()[i] > 0.0 {
                        let g = (phi[q + 1] - phi[q]).abs() / (op.row_psi()[i] * h);
                        out.worst_gradient = out.worst_gradient.max(g / decay.max(f64::MIN_POSITIVE) / grad_bound);
                    }
                    if i + 1 < rows {
                        let ds = op.row_s()[i + 1] - op.row_s()[i];
                        let g = (phi[q + cols] - phi[q]).abs() / ds;
                        out.worst_gradient = out.worst_gradient.max(g / decay.max(f64::MIN_POSITIVE) / grad_bound);
                    }
                }
            }
        }
        if out.worst_gradient > 1.0 + opts.tolerance {
            return Err(fail(Violation {
                distance: r1 + 0.5 * w,
                time: t,
                reason: format!("|grad phi| reaches {:.4} of alpha/(eps (r2 - r1))", out.worst_gradient),
            }));
        }
        out.rows = rows;
        out.cols = cols;
        out.times.push(t);
        out.values.push(phi);
    }
    Ok(out)
}

fn fail(v: Violation) -> Error {
    Error::CutoffFailed { distance: v.distance, time: v.time, reason: v.reason }
}

/// `sup t|Rm|` on the rows within `r` of `x` up to time `end`.
fn ball_c0(traj: &Trajectory, x: QuotientPoint, r: f64, end: f64) -> Result<f64> {
    let mut c0: f64 = 0.0;
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        if t > end || t <= 0.0 {
            continue;
        }
        let c = crate::geometry::curvature(m)?;
        for (i, &s) in m.arclength().iter().enumerate() {
            if (s - x.s).abs() <= r {
                c0 = c0.max(t * c.rm_norm[i]);
            }
        }
    }
    Ok(c0)
}
